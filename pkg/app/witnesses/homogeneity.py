"""Isomorphisms I|A ≅ I built from the homogeneity proofs, each with its window report."""
import logging
import random
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from app.config import settings
from app.convergence import idd_biinvariance, invariance_test
from app.detectors import column_profile, find_grid_copy
from app.errors import EffortExceededError, PreconditionError
from app.expressions import (
    AllSet,
    Column,
    Columns,
    ComplementSet,
    ComposeMap,
    DifferenceSet,
    EnumerationMap,
    ExplicitSet,
    IdentityMap,
    ImageSet,
    IntersectionSet,
    IntervalSet,
    InverseMap,
    PairMap,
    Piece,
    PiecewiseMap,
    ProductSet,
    Progression,
    Section,
    SetNode,
    Squares,
    TableMap,
    Triangle,
    UnionSet,
)
from app.ideals import DensityIdeal, FinIdeal, IdealNode, member
from app.measures import density_window
from app.models import BiInvarianceCertificate, GridBlock, GridWitness, IsoWitness, VerdictKind, WitnessReport
from app.spaces import OMEGA, OMEGA_SQUARED, OMEGA_TIMES_OMEGA, BaseSpace, pair_decode
from app.witnesses.checks import check_bijection, check_iso, check_transfer

logger = logging.getLogger(__name__)

ALL = AllSet()


def _union(parts: Sequence[SetNode]) -> SetNode:
    return parts[0] if len(parts) == 1 else UnionSet(parts=tuple(parts))


# ------------------------------------------------------------------- costar


def costar_witness(
    ideal: IdealNode,
    a: SetNode,
    b: Optional[SetNode] = None,
    effort: Optional[int] = None,
    bound: int = 1024,
) -> IsoWitness:
    """f: ω → A fixing A∖B and matching B ∪ Aᶜ onto B in increasing order"""
    if isinstance(ideal, FinIdeal):
        return IsoWitness(source=ALL, target=a, map=EnumerationMap(of=a))
    if b is None:
        raise PreconditionError("a costar witness needs an infinite small subset B of A")
    if not isinstance(a, AllSet):
        rest = member(ideal, ComplementSet(inner=a), effort)
        if rest.kind != VerdictKind.PROVEN_IN:
            raise PreconditionError(
                f"complement of {a.describe()} is not certified small: {rest.kind.value}", verdict=rest.kind.value
            )
    small = member(ideal, b, effort)
    if small.kind != VerdictKind.PROVEN_IN:
        raise PreconditionError(f"{b.describe()} is not certified small: {small.kind.value}", verdict=small.kind.value)
    if b.finiteness() is not False and b.count(0, bound) <= b.count(0, bound // 2):
        raise PreconditionError(f"{b.describe()} shows no growth below {bound}")
    stray = next((x for x in b.window(bound) if not a.contains(x)), None)
    if stray is not None:
        raise PreconditionError(f"{stray} lies in B but not in A", point=stray)

    pool = UnionSet(parts=(b, ComplementSet(inner=a)))
    matching = ComposeMap(outer=EnumerationMap(of=b), inner=InverseMap(of=EnumerationMap(of=pool)))
    f = PiecewiseMap(pieces=(Piece(on=pool, map=matching),))
    logger.info(f"🔧 Costar witness for {a.describe()} via {b.describe()}")
    return IsoWitness(source=ALL, target=a, map=f)


def costar_report(
    ideal: IdealNode,
    a: SetNode,
    b: Optional[SetNode],
    bound: int,
    effort: Optional[int] = None,
    family: Optional[Sequence[SetNode]] = None,
) -> WitnessReport:
    iso = costar_witness(ideal, a, b, effort, bound)
    report = WitnessReport(
        construction="costar",
        parameters={"ideal": ideal.describe(), "a": a.describe(), "b": b.describe() if b is not None else None},
        window=bound,
    )
    check_iso(report, iso, bound)
    family = family if family is not None else [Progression(start=0, step=2), Squares()]
    check_transfer(report, ideal, iso, family, effort)
    report.data["map"] = iso.map.model_dump(mode="json", by_alias=True)
    return report


# -------------------------------------------------------- superset closure


def trace_a_prime(iso: IsoWitness, b: SetNode, bound: int) -> List[int]:
    """A′ ∩ [0, bound): points of A whose inverse orbit under f reaches B∖A"""
    a, f = iso.target, iso.map
    extra = DifferenceSet(first=b, second=a)
    stray = next((x for x in a.window(bound) if not b.contains(x)), None)
    if stray is not None:
        raise PreconditionError(f"{stray} lies in A but not in B", point=stray)
    result = []
    for x in a.window(bound):
        current, seen = x, {x}
        while True:
            previous = f.invert(current)
            if previous is None or previous in seen:
                break
            if extra.contains(previous):
                result.append(x)
                break
            if not a.contains(previous):
                break
            if previous >= bound:
                raise EffortExceededError(
                    f"inverse orbit of {x} leaves [0, {bound}) undecided", point=x, escaped=previous
                )
            seen.add(previous)
            current = previous
    return result


def superset_closure(iso: IsoWitness, b: SetNode, bound: int) -> Tuple[IsoWitness, List[int]]:
    """φ: ω → B equal to f off M = A′ ∪ (B∖A) and to the identity on M"""
    a_prime = trace_a_prime(iso, b, bound)
    moved = UnionSet(parts=(ExplicitSet(elements=tuple(a_prime)), DifferenceSet(first=b, second=iso.target)))
    phi = PiecewiseMap(pieces=(Piece(on=moved, map=IdentityMap()),), default=iso.map)
    logger.info(f"🔧 Superset closure onto {b.describe()}: |A′ ∩ [0, {bound})| = {len(a_prime)}")
    return IsoWitness(source=iso.source, target=b, map=phi), a_prime


def superset_report(iso: IsoWitness, b: SetNode, bound: int) -> WitnessReport:
    phi, a_prime = superset_closure(iso, b, bound)
    report = WitnessReport(
        construction="superset",
        parameters={"map": iso.map.describe(), "a": iso.target.describe(), "b": b.describe()},
        window=bound,
        data={"a_prime": a_prime},
    )
    check_bijection(report, phi, bound)
    moved = phi.map.pieces[0].on
    mismatch = next(
        (
            x
            for x in range(bound)
            if phi.map.apply(x) != (x if moved.contains(x) else iso.map.apply(x))
        ),
        None,
    )
    report.add(
        "φ = id on M and f elsewhere",
        mismatch is None,
        counterexample=None if mismatch is None else {"point": mismatch},
    )
    return report


# -------------------------------------------------------------------- ED_fin


def _increasing_columns(a: SetNode, depth: int, side: int) -> Optional[List[int]]:
    profile = column_profile(a.window(OMEGA_SQUARED.bound_for_side(side), OMEGA_SQUARED), OMEGA_SQUARED)
    columns: List[int] = []
    previous = -1
    for n in range(depth):
        k = next((c for c, count in profile.counts.items() if c > previous and count >= n + 1), None)
        if k is None:
            return None
        columns.append(k)
        previous = k
    return columns


def edfin_witness(a: SetNode, depth: int) -> Tuple[IsoWitness, List[int]]:
    """f(n, m) = m-th point of column k_n, for increasing k_n with at least n+1 points"""
    if depth < 1:
        raise PreconditionError(f"depth must be >= 1, got {depth}")
    side = 2 * depth + 2
    columns = None
    while side * side <= settings.enumeration_cap:
        columns = _increasing_columns(a, depth, side)
        if columns is not None:
            break
        side *= 2
    if columns is None:
        raise PreconditionError(f"no {depth} increasing columns with growing counts in the window", depth=depth)

    pairs = []
    targets = []
    for n, k in enumerate(columns):
        points = Section(index=k, of=a, space=OMEGA_SQUARED).window(side)[: n + 1]
        for m, point in enumerate(points):
            pairs.append((OMEGA_SQUARED.encode((n, m)), OMEGA_SQUARED.encode((k, point))))
            targets.append((k, point))
    source = IntersectionSet(parts=(Triangle(), Columns(indices=IntervalSet(start=0, stop=depth))))
    iso = IsoWitness(
        source=source,
        target=ExplicitSet(elements=tuple(targets)),
        map=TableMap(pairs=tuple(pairs)),
        space=OMEGA_SQUARED,
    )
    logger.info(f"🔧 ED_fin witness with columns {columns[:8]}{'...' if depth > 8 else ''}")
    return iso, columns


def edfin_report(a: SetNode, depth: int, samples: int = 100, seed: Optional[int] = None) -> WitnessReport:
    iso, columns = edfin_witness(a, depth)
    bound = max(max(x, y) for x, y in iso.map.pairs) + 1
    report = WitnessReport(
        construction="edfin",
        parameters={"a": a.describe(), "depth": depth, "samples": samples},
        window=bound,
        data={"columns": columns},
    )
    check_bijection(report, iso, bound)
    rng = random.Random(settings.seed if seed is None else seed)
    pairs = list(iso.map.pairs)
    broken = None
    for trial in range(samples):
        chosen = [pair for pair in pairs if rng.random() < 0.5]
        image_counts, source_counts = {}, {}
        for x, y in chosen:
            column = OMEGA_SQUARED.decode(y)[0]
            row = OMEGA_SQUARED.decode(x)[0]
            image_counts[column] = image_counts.get(column, 0) + 1
            source_counts[row] = source_counts.get(row, 0) + 1
        bad = next((n for n, k in enumerate(columns) if image_counts.get(k, 0) != source_counts.get(n, 0)), None)
        if bad is not None:
            broken = {"trial": trial, "row": bad}
            break
    report.add("column counts transfer on random subsets", broken is None, counterexample=broken, samples=samples)
    return report


# ------------------------------------------------------------------ products


def product_witness(
    outer: IsoWitness,
    rows: Sequence[IsoWitness] = (),
    default: Optional[IsoWitness] = None,
    space: BaseSpace = OMEGA_TIMES_OMEGA,
) -> IsoWitness:
    """φ((i, j)) = (g(i), f_i(j)) on the rows of g's source"""
    listed = len(rows)
    beyond = DifferenceSet(first=outer.source, second=IntervalSet(start=0, stop=listed)) if listed else outer.source
    if default is None and beyond.finiteness() is not True:
        raise PreconditionError(f"rows past {listed} of {outer.source.describe()} have no witness")
    sources, targets = [], []
    for i, row in enumerate(rows):
        if outer.source.contains(i):
            sources.append(Column(index=i, inner=row.source))
            targets.append(Column(index=outer.map.apply(i), inner=row.target))
    if default is not None:
        sources.append(ProductSet(first=beyond, second=default.source))
        targets.append(ProductSet(first=ImageSet(map=outer.map, inner=beyond), second=default.target))
    if not sources:
        raise PreconditionError("the product witness has no rows")
    phi = PairMap(
        outer=outer.map,
        rows=tuple(row.map for row in rows),
        default_row=default.map if default is not None else IdentityMap(),
        space=space,
    )
    return IsoWitness(source=_union(sources), target=_union(targets), map=phi, space=space)


def product_report(
    outer: IsoWitness,
    rows: Sequence[IsoWitness],
    default: Optional[IsoWitness],
    bound: int,
    ideal: Optional[IdealNode] = None,
    family: Optional[Sequence[SetNode]] = None,
    effort: Optional[int] = None,
) -> WitnessReport:
    iso = product_witness(outer, rows, default)
    report = WitnessReport(
        construction="product",
        parameters={"outer": outer.map.describe(), "rows": [r.map.describe() for r in rows]},
        window=bound,
    )
    check_iso(report, iso, bound)
    if ideal is not None:
        family = family if family is not None else [
            Column(index=1),
            ProductSet(first=IntervalSet(start=0, stop=3), second=ALL),
        ]
        check_transfer(report, ideal, iso, family, effort)
    return report


# -------------------------------------------------------------------- Gallai


def _grid_after(a: SetNode, base: int, side: int) -> Optional[Tuple[Tuple[int, int], int]]:
    """Least grid v + α·{1..side}^2 inside A whose first coordinates are all >= base"""
    shift = max(base - 1, 0)
    width = 2 * side + 2
    while width * width <= settings.enumeration_cap:
        points = [
            (x - shift, y)
            for x in range(base, base + width)
            for y in range(width)
            if a.contains(OMEGA_SQUARED.encode((x, y)), OMEGA_SQUARED)
        ]
        found = find_grid_copy(points, side)
        if found is not None:
            return (found.v[0] + shift, found.v[1]), found.alpha
        width *= 2
    return None


def gallai2_witness(a: SetNode, depth: int) -> Tuple[List[GridBlock], IsoWitness]:
    """Blocks A^i_j of side 2^i, each past twice the last one, mapped onto a tiling of ω²"""
    blocks: List[GridBlock] = []
    pairs = []
    sources, targets = [], []
    last = None
    for h in range(depth):
        i, j = pair_decode(h)
        side = 1 << i
        base = 0 if last is None else 2 * last + 1
        found = _grid_after(a, base, side)
        if found is None:
            raise PreconditionError(f"no grid of side {side} past {base} for block ({i}, {j})", block=[i, j])
        v, alpha = found
        blocks.append(GridBlock(i=i, j=j, v=v, alpha=alpha, side=side))
        last = v[0] + alpha * side
        for k in range(1, side + 1):
            for m in range(1, side + 1):
                point = (v[0] + alpha * k, v[1] + alpha * m)
                image = (k + side - 1, m + side * j)
                pairs.append((OMEGA_SQUARED.encode(point), OMEGA_SQUARED.encode(image)))
                sources.append(point)
                targets.append(image)
    iso = IsoWitness(
        source=ExplicitSet(elements=tuple(sources)),
        target=ExplicitSet(elements=tuple(targets)),
        map=TableMap(pairs=tuple(pairs)),
        space=OMEGA_SQUARED,
    )
    logger.info(f"🔧 Gallai witness with {len(blocks)} blocks")
    return blocks, iso


def gallai2_report(a: SetNode, depth: int) -> WitnessReport:
    blocks, iso = gallai2_witness(a, depth)
    bound = max(max(x, y) for x, y in iso.map.pairs) + 1
    report = WitnessReport(
        construction="gallai2",
        parameters={"a": a.describe(), "depth": depth},
        window=bound,
        data={"blocks": [block.model_dump() for block in blocks]},
    )
    check_bijection(report, iso, bound)
    crowded = next(
        (
            (p, q)
            for p in range(len(blocks))
            for q in range(p + 1, len(blocks))
            if not 2 * (blocks[p].v[0] + blocks[p].alpha * blocks[p].side) < blocks[q].v[0] + blocks[q].alpha
        ),
        None,
    )
    report.add(
        "blocks are separated",
        crowded is None,
        counterexample=None if crowded is None else {"blocks": list(crowded)},
    )
    outside = next(
        (
            block
            for block in blocks
            if not all(
                a.contains(OMEGA_SQUARED.encode(p), OMEGA_SQUARED)
                for p in GridWitness(v=block.v, alpha=block.alpha, k=block.side).points()
            )
        ),
        None,
    )
    report.add("blocks lie in A", outside is None, counterexample=None if outside is None else outside.model_dump())
    skewed = None
    for block in blocks:
        grid = GridWitness(v=block.v, alpha=block.alpha, k=block.side)
        image = {OMEGA_SQUARED.decode(iso.map.apply(OMEGA_SQUARED.encode(p))) for p in grid.points()}
        expected = set(GridWitness(v=(block.side - 1, block.side * block.j), alpha=1, k=block.side).points())
        if image != expected:
            skewed = block.model_dump()
            break
    report.add("block images are unit grids", skewed is None, counterexample=skewed)
    return report


# --------------------------------------------------------------- enumeration


def idd_enum_witness(
    a: SetNode, lower: Optional[Fraction] = None, bound: int = 1 << 16
) -> Tuple[IsoWitness, BiInvarianceCertificate]:
    """f_A(n) = a_n, the increasing enumeration of a set of positive lower density"""
    known = a.known_density()
    if known == 0:
        raise PreconditionError(f"{a.describe()} has density 0, so f_A[ω] is small")
    estimate = density_window(a, bound)
    if lower is None:
        lower = (known if known is not None else estimate.liminf) / 2
    if lower <= 0:
        raise PreconditionError(f"no positive lower density bound for {a.describe()}")
    tail = estimate.checkpoints[len(estimate.checkpoints) // 2:]
    thin = next(((n, r) for n, r in tail if r < lower), None)
    if thin is not None:
        raise PreconditionError(
            f"window density {thin[1]} at {thin[0]} is below the lower bound {lower}",
            checkpoint=thin[0],
            ratio=str(thin[1]),
        )
    f = EnumerationMap(of=a)
    certificate = idd_biinvariance(f, min(a.count(0, bound), settings.enumeration_cap))
    if not certificate.bi_invariant:
        raise PreconditionError(f"enumeration of {a.describe()} is not linearly bounded on the window")
    return IsoWitness(source=ALL, target=a, map=f), certificate


def idd_enum_report(a: SetNode, lower: Optional[Fraction], bound: int, effort: Optional[int] = None) -> WitnessReport:
    iso, certificate = idd_enum_witness(a, lower, bound)
    report = WitnessReport(
        construction="enum",
        parameters={"a": a.describe(), "lower": str(lower) if lower is not None else None},
        window=bound,
        data={"certificate": certificate.model_dump(mode="json")},
    )
    check_iso(report, iso, min(bound, 4096))
    family = [Progression(start=0, step=2), Progression(start=1, step=2), Squares(), Progression(start=1, step=3)]
    invariance = invariance_test(iso.map, DensityIdeal(), family, effort, bound=min(bound, 4096))
    report.data["invariance"] = invariance.model_dump(mode="json")
    report.add(
        "enumeration is bi-I_d-invariant on the family",
        invariance.violation is None,
        counterexample=invariance.violation,
        classification=invariance.classification.value,
    )
    return report
