"""Both directions of the bi-invariance characterization: pair extraction and the three-piece builder."""
import logging
from typing import List, Optional, Tuple

from app.errors import EffortExceededError, InjectivityViolationError, PreconditionError
from app.expressions import (
    DifferenceSet,
    ExplicitSet,
    IdentityMap,
    ImageSet,
    IntersectionSet,
    InverseMap,
    MapNode,
    Piece,
    PiecewiseMap,
    PreimageSet,
    SetNode,
    TableMap,
    UnionSet,
)
from app.ideals import IdealNode, member
from app.models import C1Extraction, IsoWitness, Verdict, WitnessReport
from app.omega_sets import check_injective
from app.witnesses.checks import check_bijection

logger = logging.getLogger(__name__)

BRANCHES = ("A'", "A''")


def c1_pair_extraction(f: MapNode, bound: int, pairs: Optional[int] = None) -> Tuple[C1Extraction, IsoWitness]:
    """Greedy a_n = least point outside fix(f), earlier a's and b's and f^-1 of earlier a's; b_n = f(a_n)"""
    images = check_injective(f, bound)
    fixed = {x for y, x in images.items() if x == y}
    if len(fixed) == bound:
        raise PreconditionError(f"{f.describe()} fixes every point below {bound}")

    excluded = set(fixed)
    found: List[Tuple[int, int]] = []
    candidate = 0
    while pairs is None or len(found) < pairs:
        while candidate < bound and candidate in excluded:
            candidate += 1
        if candidate >= bound:
            if pairs is None:
                break
            raise EffortExceededError(
                f"only {len(found)} of {pairs} pairs fit below {bound}", found=len(found), requested=pairs
            )
        a = candidate
        b = f.apply(a)
        found.append((a, b))
        excluded.update((a, b))
        if a in images:
            excluded.add(images[a])

    logger.info(f"🔗 Extracted {len(found)} pairs from {f.describe()} below {bound}")
    extraction = C1Extraction(pairs=found, window=bound)
    restriction = IsoWitness(
        source=ExplicitSet(elements=tuple(extraction.a_points)),
        target=ExplicitSet(elements=tuple(extraction.b_points)),
        map=TableMap(pairs=tuple(found)),
    )
    return extraction, restriction


def c1_extract_report(f: MapNode, bound: int, pairs: Optional[int] = None) -> WitnessReport:
    extraction, restriction = c1_pair_extraction(f, bound, pairs)
    report = WitnessReport(
        construction="c1-extract",
        parameters={"map": f.describe(), "pairs": pairs},
        window=bound,
        data={"pairs": [list(p) for p in extraction.pairs]},
    )
    a_points, b_points = set(extraction.a_points), set(extraction.b_points)
    shared = sorted(a_points & b_points)
    report.add("A and B are disjoint", not shared, counterexample={"point": shared[0]} if shared else None)
    fixed = next((a for a in extraction.a_points if f.apply(a) == a), None)
    report.add("no a_n is fixed", fixed is None, counterexample=None if fixed is None else {"point": fixed})
    moved = next(((a, b) for a, b in extraction.pairs if f.apply(a) != b), None)
    report.add("b_n = f(a_n)", moved is None, counterexample=None if moved is None else {"pair": list(moved)})
    if extraction.pairs:
        top = max(extraction.b_points + extraction.a_points) + 1
        check_bijection(report, restriction, top, label="f restricted to A")
    return report


def _branch_sets(a: SetNode, b: SetNode, f: MapNode) -> Tuple[SetNode, SetNode]:
    only_a = DifferenceSet(first=a, second=b)
    a_prime = IntersectionSet(parts=(only_a, PreimageSet(map=f, inner=DifferenceSet(first=b, second=a))))
    a_double = IntersectionSet(parts=(only_a, PreimageSet(map=f, inner=IntersectionSet(parts=(a, b)))))
    return a_prime, a_double


def _pick_branch(
    ideal: IdealNode, sets: Tuple[SetNode, SetNode], branch: Optional[str], effort: Optional[int]
) -> Tuple[str, SetNode, Verdict]:
    if branch is not None:
        if branch not in BRANCHES:
            raise PreconditionError(f"branch must be one of {BRANCHES}, got {branch!r}")
        chosen = sets[BRANCHES.index(branch)]
        verdict = member(ideal, chosen, effort)
        if not verdict.outside:
            raise PreconditionError(
                f"branch {branch} = {chosen.describe()} is not shown outside {ideal.describe()}",
                verdict=verdict.kind.value,
            )
        return branch, chosen, verdict
    verdicts = []
    for name, expr in zip(BRANCHES, sets):
        verdict = member(ideal, expr, effort)
        if verdict.outside:
            return name, expr, verdict
        verdicts.append(verdict.kind.value)
    raise PreconditionError(
        f"both branch sets are small in {ideal.describe()}, the construction is refused", verdicts=verdicts
    )


def c1_builder(
    a: SetNode,
    b: SetNode,
    f: IsoWitness,
    ideal: IdealNode,
    branch: Optional[str] = None,
    effort: Optional[int] = None,
    bound: int = 1024,
) -> Tuple[PiecewiseMap, WitnessReport]:
    """g = f on S, f^-1 on f[S], identity elsewhere, for S the chosen branch set"""
    if a == b:
        raise PreconditionError("A = B, so A△B is empty")
    difference = UnionSet(parts=(DifferenceSet(first=a, second=b), DifferenceSet(first=b, second=a)))
    spread = member(ideal, difference, effort)
    if not spread.outside:
        raise PreconditionError(
            f"A△B is not shown outside {ideal.describe()}: {spread.kind.value}", verdict=spread.kind.value
        )
    name, chosen, verdict = _pick_branch(ideal, _branch_sets(a, b, f.map), branch, effort)
    image = ImageSet(map=f.map, inner=chosen)
    g = PiecewiseMap(
        pieces=(Piece(on=chosen, map=f.map), Piece(on=image, map=InverseMap(of=f.map))),
        default=IdentityMap(),
    )
    logger.info(f"🧩 Built g on branch {name} = {chosen.describe()}")

    report = WitnessReport(
        construction="c1-build",
        parameters={"a": a.describe(), "b": b.describe(), "map": f.map.describe(), "branch": name},
        window=bound,
        data={"branch_verdict": verdict.kind.value, "difference_verdict": spread.kind.value},
    )
    try:
        check_injective(g, bound)
        report.add(f"g injective below {bound}", True)
    except InjectivityViolationError as e:
        report.add(f"g injective below {bound}", False, counterexample=e.to_dict()["details"])

    branch_points = chosen.window(bound)
    still = next((x for x in branch_points if g.apply(x) == x), None)
    report.add(
        "branch set avoids fix(g)",
        still is None,
        counterexample=None if still is None else {"point": still},
        checked=len(branch_points),
    )
    swapped = sorted(set(branch_points) | set(image.window(bound)))
    broken = next((x for x in swapped if g.apply(g.apply(x)) != x), None)
    report.add("g∘g = id on S ∪ f[S]", broken is None, counterexample=None if broken is None else {"point": broken})
    return g, report
