from typing import Any, Dict, Optional, Tuple


class IdealLabError(Exception):
    """Base class for every failure the library reports"""

    exit_code = 2
    code = "ideal-lab-error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        payload = {"error": self.code, "message": self.message}
        if self.details:
            payload["details"] = self.details
        return payload


class MalformedExpressionError(IdealLabError):
    code = "malformed-expression"

    def __init__(self, message: str, position: Optional[str] = None, **details: Any):
        if position is not None:
            details["position"] = position
        super().__init__(message, **details)
        self.position = position


class BaseSpaceMismatchError(IdealLabError):
    code = "base-space-mismatch"


class DegenerateWeightError(IdealLabError):
    code = "degenerate-weight"


class EffortExceededError(IdealLabError):
    exit_code = 3
    code = "effort-exceeded"


class InjectivityViolationError(IdealLabError):
    exit_code = 1
    code = "injectivity-violation"

    def __init__(self, message: str, pair: Tuple[int, int], image: int):
        super().__init__(message, pair=list(pair), image=image)
        self.pair = pair
        self.image = image


class PreconditionError(IdealLabError):
    exit_code = 1
    code = "precondition-failed"


class AnnotationMismatchError(IdealLabError):
    exit_code = 1
    code = "annotation-mismatch"


class ConsistencyError(IdealLabError):
    exit_code = 1
    code = "internal-consistency"
