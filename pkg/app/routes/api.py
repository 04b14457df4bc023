import logging
from typing import Any, Dict, Optional

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from app.config import settings
from app.detectors import DETECTORS, run_detector
from app.errors import IdealLabError
from app.ideals import member
from app.measures import density_window
from app.parsing import dump_expr, parse_ideal, parse_set, parse_space
from app.reports import to_payload
from app.runner import list_witnesses, run_witness, stats

logger = logging.getLogger(__name__)

router = APIRouter()

STATUS_BY_EXIT_CODE = {1: 422, 2: 400, 3: 413}


def _http_error(e: IdealLabError) -> HTTPException:
    return HTTPException(status_code=STATUS_BY_EXIT_CODE.get(e.exit_code, 500), detail=e.to_dict())


class MemberRequest(BaseModel):
    ideal: Dict[str, Any]
    expr: Dict[str, Any] = Field(alias="set")
    effort: Optional[int] = None


class DetectRequest(BaseModel):
    expr: Dict[str, Any] = Field(alias="set")
    window: int = 1024
    space: str = "omega"
    length: Optional[int] = None
    side: int = 2
    size: int = 2
    block: int = 3


class DensityRequest(BaseModel):
    expr: Dict[str, Any] = Field(alias="set")
    window: int = 1024
    space: str = "omega"


class WitnessRequest(BaseModel):
    params: Dict[str, Any] = Field(default_factory=dict)
    window: Optional[int] = None
    effort: Optional[int] = None


@router.post("/member")
def member_endpoint(request: MemberRequest):
    """Three-valued membership of a set in an ideal"""
    try:
        ideal = parse_ideal(request.ideal)
        expr = parse_set(request.expr, ideal.base_space())
        verdict = member(ideal, expr, request.effort)
        logger.info(f"⚖️ {expr.describe()} in {ideal.describe()}: {verdict.kind.value}")
        return {"ideal": dump_expr(ideal), "set": dump_expr(expr), "verdict": to_payload(verdict)}
    except IdealLabError as e:
        raise _http_error(e)
    except Exception as e:
        logger.error(f"Error judging membership: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/detect/{detector}")
def detect_endpoint(detector: str, request: DetectRequest):
    """Finite witness search: ap, grid, fs, ramsey or columns"""
    if detector not in DETECTORS:
        raise HTTPException(status_code=404, detail=f"Unknown detector {detector!r}")
    try:
        space = parse_space(request.space)
        expr = parse_set(request.expr, space)
        if request.window < 1:
            raise HTTPException(status_code=400, detail="window must be >= 1")
        result = run_detector(
            detector,
            expr,
            request.window,
            space,
            length=request.length,
            side=request.side,
            size=request.size,
            block=request.block,
        )
        return {key: to_payload(value) for key, value in result.items()}
    except HTTPException:
        raise
    except IdealLabError as e:
        raise _http_error(e)
    except Exception as e:
        logger.error(f"Error running detector {detector}: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/density")
def density_endpoint(request: DensityRequest):
    """|A ∩ [0, N)| / N with dyadic checkpoints"""
    try:
        space = parse_space(request.space)
        expr = parse_set(request.expr, space)
        return to_payload(density_window(expr, request.window, space))
    except IdealLabError as e:
        raise _http_error(e)
    except Exception as e:
        logger.error(f"Error computing density: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/witness/{name}")
def witness_endpoint(name: str, request: WitnessRequest):
    """Build and check a named construction"""
    try:
        report = run_witness(name, request.params, request.window, request.effort)
        return to_payload(report)
    except IdealLabError as e:
        raise _http_error(e)
    except Exception as e:
        logger.error(f"Error running witness {name}: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@router.get("/witnesses")
def witnesses_endpoint():
    """Every construction with its defaults, plus run statistics"""
    return {"witnesses": list_witnesses(), "statistics": stats.get_stats(), "default_effort": settings.default_effort}
