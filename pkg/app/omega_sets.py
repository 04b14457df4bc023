"""Window evaluation, block counts, fixed points and annotation cross-checks."""
import logging
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from pydantic import BaseModel

from app.arith import dyadic_checkpoints
from app.cache import memoized
from app.config import settings
from app.errors import (
    AnnotationMismatchError,
    EffortExceededError,
    InjectivityViolationError,
    MalformedExpressionError,
)
from app.expressions import (
    AllSet,
    AnnotatedSet,
    BlockRule,
    ComplementSet,
    ExplicitSet,
    IntersectionSet,
    MapNode,
    Progression,
    SetNode,
    UnionSet,
)
from app.models import Window
from app.schedules import GridSchedule
from app.spaces import OMEGA, BaseSpace

logger = logging.getLogger(__name__)

# Claimed density 0 is only judged from this window size on
DENSITY_ZERO_START = 1024


def evens() -> Progression:
    return Progression(start=0, step=2)


def odds() -> Progression:
    return Progression(start=1, step=2)


def empty() -> ExplicitSet:
    return ExplicitSet(elements=())


def everything() -> AllSet:
    return AllSet()


def explicit(elements: Sequence) -> ExplicitSet:
    return ExplicitSet(elements=tuple(elements))


def union(*parts: SetNode) -> UnionSet:
    return UnionSet(parts=tuple(parts))


def intersection(*parts: SetNode) -> IntersectionSet:
    return IntersectionSet(parts=tuple(parts))


def complement(inner: SetNode) -> ComplementSet:
    return ComplementSet(inner=inner)


def validate(expr: SetNode, space: BaseSpace = OMEGA) -> SetNode:
    """Run the parameter and base-space checks of the whole tree"""
    expr.window(0, space)
    return expr


def window(expr: SetNode, bound: int, space: BaseSpace = OMEGA) -> Window:
    """{x < bound : x ∈ expr} as a Window"""
    return Window(bound=bound, elements=expr.window(bound, space))


def block_counts(expr: SetNode, schedule: GridSchedule, n_max: int, space: BaseSpace = OMEGA) -> List[int]:
    """Exact |expr ∩ I_n| for n = 0..n_max"""
    if n_max < 0:
        raise MalformedExpressionError(f"n_max must be >= 0, got {n_max}")
    inner = expr.inner if isinstance(expr, AnnotatedSet) else expr
    counts = []
    for n in range(n_max + 1):
        if isinstance(inner, BlockRule) and inner.schedule == schedule:
            counts.append(inner.block_count(n))
            continue
        lo, hi = schedule.bounds(n)
        try:
            counts.append(expr.count(lo, hi, space))
        except EffortExceededError as e:
            raise EffortExceededError(
                f"|expr ∩ I_{n}| has no closed form and I_{n} has {hi - lo} points",
                block=n,
                length=hi - lo,
            ) from e
    return counts


def check_injective(f: MapNode, bound: int) -> Dict[int, int]:
    """Image table of f on [0, bound); raises on the first collision"""
    seen: Dict[int, int] = {}
    for x, y in enumerate(f.values(bound)):
        if y in seen:
            raise InjectivityViolationError(
                f"{f.describe()} is not injective: f({seen[y]}) = f({x}) = {y}",
                pair=(seen[y], x),
                image=y,
            )
        seen[y] = x
    return seen


def fixed_points(f: MapNode, bound: int) -> ExplicitSet:
    """fix(f) ∩ [0, bound), after checking injectivity on the window"""
    check_injective(f, bound)
    return ExplicitSet(elements=tuple(x for x, y in enumerate(f.values(bound)) if x == y))


# Nodes whose set children live on omega whatever the outer space
OMEGA_CHILDREN = {"product", "column", "columns", "rows", "copy", "sum-filter", "block-rule"}


def iter_nodes(node: BaseModel, space: BaseSpace = OMEGA) -> Iterator[Tuple[BaseModel, BaseSpace]]:
    """Every expression node reachable from node with the space it is read in, node first"""
    yield node, space
    inner_space = getattr(node, "space", None)
    if not isinstance(inner_space, BaseSpace):
        inner_space = OMEGA if getattr(node, "kind", None) in OMEGA_CHILDREN else space
    for name in type(node).model_fields:
        value = getattr(node, name)
        items = value if isinstance(value, tuple) else (value,)
        for item in items:
            if isinstance(item, BaseModel) and hasattr(item, "kind") and not isinstance(item, BaseSpace):
                yield from iter_nodes(item, inner_space)


def density_checkpoints(expr: SetNode, bound: int, space: BaseSpace = OMEGA, first: int = 1) -> List[Tuple[int, Fraction]]:
    return [(n, Fraction(expr.count(0, n, space), n)) for n in dyadic_checkpoints(bound, first)]


def _check_density(node: AnnotatedSet, space: BaseSpace):
    claim = node.density
    points = density_checkpoints(node.inner, settings.annotation_window, space, DENSITY_ZERO_START)
    last_n, last_ratio = points[-1]
    if claim == 0:
        tail = points[len(points) // 2:]
        rising = [(a, b) for (a, ra), (b, rb) in zip(tail, tail[1:]) if rb > ra]
        if last_ratio > node.envelope or rising:
            raise AnnotationMismatchError(
                f"density 0 claimed for {node.inner.describe()} but the window ratio is {last_ratio} at {last_n}",
                window=last_n,
                ratio=str(last_ratio),
                envelope=str(node.envelope),
                rising=[list(pair) for pair in rising],
            )
    elif abs(last_ratio - claim) > node.envelope:
        raise AnnotationMismatchError(
            f"density {claim} claimed for {node.inner.describe()} but the window ratio is {last_ratio} at {last_n}",
            window=last_n,
            ratio=str(last_ratio),
            claim=str(claim),
        )
    logger.debug(f"✅ Density annotation {claim} holds at window {last_n} (ratio {last_ratio})")


def _check_columns(node: AnnotatedSet, space: BaseSpace):
    from app.detectors import column_profile

    side = settings.annotation_side
    profile = column_profile(node.inner.window(space.bound_for_side(side), space), space)
    if profile.max > node.column_bound:
        raise AnnotationMismatchError(
            f"column bound {node.column_bound} claimed but column {profile.argmax} holds {profile.max} points",
            column=profile.argmax,
            count=profile.max,
            side=side,
        )


def _check_ap(node: AnnotatedSet, space: BaseSpace):
    from app.detectors import find_ap

    bound = settings.detector_window
    found = find_ap(node.inner.window(bound, space), node.ap_bound + 1)
    if found is not None:
        raise AnnotationMismatchError(
            f"AP bound {node.ap_bound} claimed but {found.length} terms from {found.start} step {found.step} lie in the set",
            witness=found.model_dump(),
        )


@memoized("annotations")
def check_annotations(expr: SetNode, space: BaseSpace = OMEGA) -> bool:
    """Cross-check every annotated claim in the tree against window statistics"""
    for node, node_space in iter_nodes(expr, space):
        if not isinstance(node, AnnotatedSet):
            continue
        if node.density is not None:
            _check_density(node, node_space)
        if node.column_bound is not None:
            if not node_space.is_pairs:
                raise MalformedExpressionError(
                    f"column bounds need a pair space, not {node_space.label()}", position="column_bound"
                )
            _check_columns(node, node_space)
        if node.ap_bound is not None:
            _check_ap(node, node_space)
    return True


def annotated_density(expr: SetNode, space: BaseSpace = OMEGA) -> Optional[Fraction]:
    """known_density after every annotation in the tree passed its check"""
    check_annotations(expr, space)
    return expr.known_density(space)
