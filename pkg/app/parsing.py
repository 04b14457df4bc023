"""JSON text format of every expression tree, shared by the CLI and the HTTP routes."""
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, List, Union

import orjson
from pydantic import TypeAdapter, ValidationError

from app.arith import to_fraction
from app.convergence import SequenceExpr
from app.errors import MalformedExpressionError
from app.expressions import InjectionExpr, MapNode, SetExpr, SetNode
from app.ideals import IdealExpr, IdealNode
from app.measures import SubmeasureExpr, SubmeasureNode
from app.omega_sets import validate
from app.schedules import GridSchedule, ScheduleKind
from app.spaces import OMEGA, BaseSpace, SpaceKind, n_subsets
from app.weights import Weight, WeightNode

logger = logging.getLogger(__name__)

SET_ADAPTER = TypeAdapter(SetExpr)
MAP_ADAPTER = TypeAdapter(InjectionExpr)
IDEAL_ADAPTER = TypeAdapter(IdealExpr)
WEIGHT_ADAPTER = TypeAdapter(Weight)
SUBMEASURE_ADAPTER = TypeAdapter(SubmeasureExpr)
SEQUENCE_ADAPTER = TypeAdapter(SequenceExpr)
SCHEDULE_ADAPTER = TypeAdapter(GridSchedule)

Raw = Union[str, bytes, dict, list, Any]


def load_json(text: Union[str, bytes]) -> Any:
    """Decode JSON text; '@path' reads the text from a file"""
    if isinstance(text, str) and text.startswith("@"):
        path = Path(text[1:])
        try:
            text = path.read_bytes()
        except OSError as e:
            raise MalformedExpressionError(f"cannot read {path}: {e.strerror}", position=str(path))
    try:
        return orjson.loads(text)
    except orjson.JSONDecodeError as e:
        raise MalformedExpressionError(f"invalid JSON: {e.msg}", position=f"byte {e.pos}")


def _validate(adapter: TypeAdapter, raw: Raw, what: str):
    if isinstance(raw, (str, bytes)):
        raw = load_json(raw)
    try:
        return adapter.validate_python(raw)
    except ValidationError as e:
        first = e.errors()[0]
        path = ".".join(str(part) for part in first["loc"])
        position = f"{what}.{path}" if path else what
        raise MalformedExpressionError(f"{what}: {first['msg']}", position=position, errors=e.error_count())


def parse_set(raw: Raw, space: BaseSpace = OMEGA, what: str = "set") -> SetNode:
    return validate(_validate(SET_ADAPTER, raw, what), space)


def parse_family(raw: Raw, space: BaseSpace = OMEGA, what: str = "family") -> List[SetNode]:
    """A JSON list of set expressions"""
    if isinstance(raw, (str, bytes)):
        raw = load_json(raw)
    if not isinstance(raw, list):
        raise MalformedExpressionError(f"{what} must be a JSON list of sets", position=what)
    return [parse_set(item, space, f"{what}[{i}]") for i, item in enumerate(raw)]


def parse_map(raw: Raw, what: str = "map") -> MapNode:
    f = _validate(MAP_ADAPTER, raw, what)
    f.check()
    return f


def parse_ideal(raw: Raw, what: str = "ideal") -> IdealNode:
    ideal = _validate(IDEAL_ADAPTER, raw, what)
    ideal.check()
    return ideal


def parse_weight(raw: Raw, what: str = "weight") -> WeightNode:
    w = _validate(WEIGHT_ADAPTER, raw, what)
    w.check()
    return w


def parse_submeasure(raw: Raw, what: str = "submeasure") -> SubmeasureNode:
    return _validate(SUBMEASURE_ADAPTER, raw, what)


def parse_sequence(raw: Raw, what: str = "sequence"):
    return _validate(SEQUENCE_ADAPTER, raw, what)


def parse_schedule(raw: Raw, what: str = "schedule") -> GridSchedule:
    """Accepts a bare kind name such as "factorial" or a full schedule object"""
    if isinstance(raw, str) and not raw.lstrip().startswith(("{", "@")):
        try:
            return GridSchedule(kind=ScheduleKind(raw))
        except ValueError:
            raise MalformedExpressionError(f"unknown schedule {raw!r}", position=what)
    return _validate(SCHEDULE_ADAPTER, raw, what)


def parse_space(text: str) -> BaseSpace:
    """omega, omega-squared, omega-times-omega, two-copies or n-subsets:N"""
    name, _, arity = text.partition(":")
    try:
        kind = SpaceKind(name)
    except ValueError:
        raise MalformedExpressionError(f"unknown base space {text!r}", position="space")
    if kind == SpaceKind.N_SUBSETS:
        if not arity.isdigit():
            raise MalformedExpressionError("n-subsets needs an arity, as in n-subsets:2", position="space")
        return n_subsets(int(arity))
    if arity:
        raise MalformedExpressionError(f"{name} takes no arity", position="space")
    return BaseSpace(kind=kind)


def parse_rational(raw: Any, what: str = "value") -> Fraction:
    try:
        return to_fraction(raw)
    except ValueError as e:
        raise MalformedExpressionError(str(e), position=what)


def dump_expr(node) -> Any:
    """JSON-ready form of any expression tree"""
    return node.model_dump(mode="json", by_alias=True)
