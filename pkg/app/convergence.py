"""Ideal convergence of piecewise rational sequences and invariance testing of injections."""
import logging
from bisect import bisect_left
from fractions import Fraction
from math import ceil
from typing import Annotated, Dict, List, Optional, Sequence, Tuple, Union, Literal

from pydantic import Field

from app.arith import Rational
from app.config import settings
from app.errors import ConsistencyError, IdealLabError, MalformedExpressionError, PreconditionError
from app.expressions import (
    AllSet,
    BlockRule,
    ComplementSet,
    CountRule,
    DifferenceSet,
    ExplicitSet,
    ImageSet,
    IntervalSet,
    MapNode,
    Node,
    Powers,
    PreimageSet,
    SetExpr,
    SetNode,
    UnionSet,
)
from app.ideals import IdealNode, member
from app.models import (
    BiInvarianceCertificate,
    InvarianceClass,
    InvarianceEntry,
    InvarianceReport,
    LimitEntry,
    LimitReport,
    VerdictKind,
    WitnessReport,
)
from app.omega_sets import check_injective
from app.schedules import FOUR_POWER
from app.spaces import OMEGA

logger = logging.getLogger(__name__)

EPSILON_SCHEDULE = tuple(Fraction(1, k) for k in range(1, 65))

# Largest linear constant the bi-invariance check accepts
MAX_LINEAR_CONSTANT = 1 << 20


class SequencePiece(Node):
    kind: Literal["piece"] = "piece"
    on: SetExpr
    value: Rational


class PiecewiseSequence(Node):
    """x_n = value of the first piece holding n, else default"""

    kind: Literal["piecewise"] = "piecewise"
    pieces: Tuple[SequencePiece, ...] = ()
    default: Rational = Fraction(0)

    def value(self, n: int) -> Fraction:
        for piece in self.pieces:
            if piece.on.contains(n):
                return piece.value
        return self.default

    def _owned(self, i: int) -> SetNode:
        piece = self.pieces[i]
        if i == 0:
            return piece.on
        return DifferenceSet(first=piece.on, second=UnionSet(parts=tuple(p.on for p in self.pieces[:i])))

    def level_set(self, x: Fraction, epsilon: Fraction) -> SetNode:
        """{n : |x_n - x| >= epsilon}"""
        parts = [self._owned(i) for i, piece in enumerate(self.pieces) if abs(piece.value - x) >= epsilon]
        if abs(self.default - x) >= epsilon:
            if self.pieces:
                parts.append(ComplementSet(inner=UnionSet(parts=tuple(p.on for p in self.pieces))))
            else:
                parts.append(AllSet())
        if not parts:
            return ExplicitSet(elements=())
        return parts[0] if len(parts) == 1 else UnionSet(parts=tuple(parts))

    def describe(self):
        values = ", ".join(f"{p.value} on {p.on.describe()}" for p in self.pieces)
        return f"piecewise({values}; else {self.default})"


class ReciprocalSequence(Node):
    """x_n = numerator / (n + offset)"""

    kind: Literal["reciprocal"] = "reciprocal"
    numerator: Rational = Fraction(1)
    offset: int = 1

    def _check(self):
        if self.offset < 1 or self.numerator <= 0:
            raise MalformedExpressionError("reciprocal sequences need offset >= 1 and a positive numerator")

    def value(self, n: int) -> Fraction:
        return self.numerator / (n + self.offset)

    def level_set(self, x: Fraction, epsilon: Fraction) -> SetNode:
        self._check()
        parts: List[SetNode] = []
        # x_n >= x + eps  <=>  n <= c/(x+eps) - offset
        high = x + epsilon
        if high <= 0:
            return AllSet()
        stop = int(self.numerator // high) - self.offset + 1
        if stop > 0:
            parts.append(IntervalSet(start=0, stop=stop))
        low = x - epsilon
        if low > 0:
            start = max(ceil(self.numerator / low) - self.offset, 0)
            parts.append(IntervalSet(start=start))
        if not parts:
            return ExplicitSet(elements=())
        return parts[0] if len(parts) == 1 else UnionSet(parts=tuple(parts))

    def describe(self):
        return f"{self.numerator}/(n+{self.offset})"


SequenceExpr = Annotated[Union[PiecewiseSequence, ReciprocalSequence], Field(discriminator="kind")]


def characteristic(expr: SetNode, value: Fraction = Fraction(1)) -> PiecewiseSequence:
    return PiecewiseSequence(pieces=(SequencePiece(on=expr, value=value),))


def ideal_limit(seq, x: Fraction, epsilon: Fraction, ideal: IdealNode, effort: Optional[int] = None):
    """Verdict on {n : |x_n - x| >= epsilon} ∈ ideal"""
    if epsilon <= 0:
        raise MalformedExpressionError(f"epsilon must be positive, got {epsilon}", position="epsilon")
    level = seq.level_set(Fraction(x), Fraction(epsilon))
    verdict = member(ideal, level, effort)
    certificate = dict(verdict.certificate)
    certificate.update({"epsilon": str(epsilon), "limit": str(x), "level_set": level.describe()})
    return verdict.model_copy(update={"certificate": certificate})


def limit_report(
    seq,
    x: Fraction,
    ideal: IdealNode,
    effort: Optional[int] = None,
    schedule: Sequence[Fraction] = EPSILON_SCHEDULE,
) -> LimitReport:
    """Per-epsilon verdicts; identical level sets are judged once"""
    report = LimitReport(sequence=seq.describe(), limit=Fraction(x), ideal=ideal.describe())
    judged: Dict[SetNode, object] = {}
    for epsilon in schedule:
        level = seq.level_set(Fraction(x), Fraction(epsilon))
        if level not in judged:
            judged[level] = ideal_limit(seq, x, epsilon, ideal, effort)
        report.entries.append(LimitEntry(epsilon=epsilon, level_set=level.describe(), verdict=judged[level]))
    kinds = {entry.verdict.kind for entry in report.entries}
    if kinds <= {VerdictKind.PROVEN_IN}:
        report.converges = True
    elif any(entry.verdict.outside for entry in report.entries):
        report.converges = False
    logger.info(f"📈 {seq.describe()} -> {x} in {ideal.describe()}: {report.converges}")
    return report


def c3_diagonal(
    family: Sequence[SetNode], ideal: Optional[IdealNode] = None, effort: Optional[int] = None
) -> PiecewiseSequence:
    """x_n = 1/k on A_k minus the earlier sets, 0 off the family"""
    if ideal is not None:
        for k, expr in enumerate(family, start=1):
            verdict = member(ideal, expr, effort)
            if verdict.outside:
                raise PreconditionError(
                    f"A_{k} = {expr.describe()} is not small in {ideal.describe()}: {verdict.kind.value}",
                    index=k,
                )
    pieces = tuple(SequencePiece(on=expr, value=Fraction(1, k)) for k, expr in enumerate(family, start=1))
    return PiecewiseSequence(pieces=pieces)


def c3_report(
    family: Sequence[SetNode], bound: int, ideal: Optional[IdealNode] = None, effort: Optional[int] = None
) -> WitnessReport:
    """L(0, 1/k) ⊆ A_1 ∪ ... ∪ A_k on [0, bound) for every k"""
    if not family:
        raise MalformedExpressionError("the diagonal needs at least one set", position="family")
    seq = c3_diagonal(family, ideal, effort)
    report = WitnessReport(
        construction="c3",
        parameters={
            "family": [expr.describe() for expr in family],
            "ideal": ideal.describe() if ideal is not None else None,
        },
        window=bound,
    )
    report.data["sequence"] = seq.model_dump(mode="json", by_alias=True)
    for k in range(1, len(family) + 1):
        level = seq.level_set(Fraction(0), Fraction(1, k))
        cover = UnionSet(parts=tuple(family[:k]))
        stray = next((x for x in level.window(bound, OMEGA) if not cover.contains(x)), None)
        report.add(
            f"L(0, 1/{k}) inside A_1 .. A_{k}",
            stray is None,
            counterexample=None if stray is None else {"k": k, "point": stray},
        )
    return report


def _classify(entries: List[InvarianceEntry]) -> InvarianceClass:
    decided = [
        e for e in entries
        if e.verdict != VerdictKind.UNKNOWN and e.image_verdict != VerdictKind.UNKNOWN
    ]
    if not decided:
        return InvarianceClass.INCONCLUSIVE
    inside = {VerdictKind.PROVEN_IN, VerdictKind.EVIDENCE_IN}
    forward = all(e.image_verdict in inside for e in decided if e.verdict in inside)
    backward = all(e.verdict in inside for e in decided if e.image_verdict in inside) and all(
        e.preimage_verdict in inside
        for e in decided
        if e.verdict in inside and e.preimage_verdict not in (None, VerdictKind.UNKNOWN)
    )
    if forward and backward:
        return InvarianceClass.BI_INVARIANT
    if forward:
        return InvarianceClass.INVARIANT
    return InvarianceClass.INCONCLUSIVE


def _violation(entry: InvarianceEntry) -> Optional[Dict[str, str]]:
    if entry.verdict == VerdictKind.PROVEN_IN and entry.image_verdict == VerdictKind.PROVEN_OUT:
        return {"set": entry.set, "direction": "invariance", "verdict": "proven-in", "image_verdict": "proven-out"}
    if entry.verdict == VerdictKind.PROVEN_OUT and entry.image_verdict == VerdictKind.PROVEN_IN:
        return {"set": entry.set, "direction": "bi-invariance", "verdict": "proven-out", "image_verdict": "proven-in"}
    if entry.verdict == VerdictKind.PROVEN_IN and entry.preimage_verdict == VerdictKind.PROVEN_OUT:
        return {"set": entry.set, "direction": "bi-invariance", "verdict": "proven-in", "preimage_verdict": "proven-out"}
    return None


def invariance_test(
    f: MapNode,
    ideal: IdealNode,
    family: Sequence[SetNode],
    effort: Optional[int] = None,
    bound: Optional[int] = None,
) -> InvarianceReport:
    """Judge A, f[A] and f^-1[A] for each test set and classify f"""
    bound = bound or settings.detector_window
    check_injective(f, bound)
    entries: List[InvarianceEntry] = []
    failures = []
    violation = None
    for expr in family:
        try:
            verdict = member(ideal, expr, effort)
            image = member(ideal, ImageSet(map=f, inner=expr), effort)
            preimage = member(ideal, PreimageSet(map=f, inner=expr), effort)
        except IdealLabError as e:
            logger.error(f"❌ Invariance check of {expr.describe()} failed: {e.message}")
            failures.append({"set": expr.describe(), **e.to_dict()})
            continue
        entry = InvarianceEntry(
            set=expr.describe(), verdict=verdict.kind, image_verdict=image.kind, preimage_verdict=preimage.kind
        )
        entries.append(entry)
        violation = violation or _violation(entry)
    classification = InvarianceClass.VIOLATION if violation else _classify(entries)
    logger.info(f"🔁 {f.describe()} under {ideal.describe()}: {classification.value}")
    return InvarianceReport(
        injection=f.describe(),
        ideal=ideal.describe(),
        entries=entries,
        failures=failures,
        classification=classification,
        violation=violation,
    )


def _ratio_max(values: Sequence[int], stop: int) -> int:
    return max((-(-values[n] // n) for n in range(1, stop)), default=0)


def _image_envelope(values: Sequence[int], stop: int) -> Fraction:
    """min of |f[ω] ∩ [0, m)| / m over the image points m = f(n), 1 <= n < stop"""
    share, at = 1, 1
    for n in range(1, stop):
        m = values[n]
        count = bisect_left(values, m)
        if count * at < share * m:
            share, at = count, m
    return Fraction(share, at)


def idd_biinvariance(f: MapNode, bound: int) -> BiInvarianceCertificate:
    """Decide bi-I_d-invariance of an increasing f on [0, bound) two ways and cross-check.

    Linear growth: one C with f(n) <= C n, stable between the half and full window.
    Image density: f[ω] keeps a share of at least 1/C of every segment [0, f(n)),
    with the same C on the half and full window.
    """
    if bound < 4:
        raise MalformedExpressionError(f"window must be >= 4, got {bound}", position="window")
    values = f.values(bound)
    for n in range(1, bound):
        if values[n] <= values[n - 1]:
            raise PreconditionError(
                f"{f.describe()} is not increasing: f({n - 1}) = {values[n - 1]} >= f({n}) = {values[n]}",
                point=n,
            )
    half_max = _ratio_max(values, bound // 2)
    full_max = _ratio_max(values, bound)
    linear = full_max <= MAX_LINEAR_CONSTANT and full_max == half_max

    envelope = _image_envelope(values, bound)
    share = ceil(1 / envelope)
    half_share = ceil(1 / _image_envelope(values, bound // 2))
    density_positive = share <= MAX_LINEAR_CONSTANT and share == half_share

    if linear != density_positive or (linear and share != full_max):
        raise ConsistencyError(
            f"linear bound and image density disagree on {f.describe()}",
            linear=linear,
            density_positive=density_positive,
            constant=full_max,
            envelope=str(envelope),
        )
    return BiInvarianceCertificate(
        window=bound,
        bi_invariant=linear,
        constant=full_max if linear else None,
        ratio_max=Fraction(full_max),
        ratio_max_half=Fraction(half_max),
        image_density=Fraction(bisect_left(values, bound), bound),
        image_envelope=envelope,
        density_positive=density_positive,
    )


def c5_thin_set() -> BlockRule:
    """[4^n, 2·4^n) for n a power of two: upper density >= 1/2, lower density 0"""
    return BlockRule(
        schedule=FOUR_POWER,
        rule="first",
        count_rule=CountRule(kind="length-fraction", ratio=Fraction(1, 3)),
        indices=Powers(base=2),
    )


def _ratio(expr: SetNode, m: int) -> Fraction:
    return Fraction(expr.count(0, m), m)


def c5_refuter_idd(bound: int = 1 << 34, samples: Optional[Sequence[SetNode]] = None) -> WitnessReport:
    """Refute the positive-lower-density characterization of H(I_d)"""
    thin = c5_thin_set()
    samples = list(samples) if samples is not None else [AllSet(), ComplementSet(inner=thin)]
    report = WitnessReport(
        construction="c5-refute",
        parameters={"window": bound, "samples": [s.describe() for s in samples]},
        window=bound,
    )
    active = [n for n in range(1, 64) if thin.active(n) and 2 * 4 ** n <= bound]
    wide = [(2 * 4 ** n, _ratio(thin, 2 * 4 ** n)) for n in active]
    narrow = [(4 ** (2 * n), _ratio(thin, 4 ** (2 * n))) for n in active if 4 ** (2 * n) <= bound]
    report.data["upper_checkpoints"] = [[m, str(r)] for m, r in wide]
    report.data["lower_checkpoints"] = [[m, str(r)] for m, r in narrow]
    report.add(
        "upper-density",
        bool(wide) and all(r >= Fraction(1, 2) for _, r in wide),
        checkpoints=len(wide),
    )
    falling = all(b < a for (_, a), (_, b) in zip(narrow, narrow[1:]))
    report.add(
        "lower-density-vanishing",
        len(narrow) >= 2 and falling and narrow[-1][1] < Fraction(1, 100),
        last=str(narrow[-1][1]) if narrow else None,
    )

    rejected, accepted = [], []
    for sample in samples:
        lower_bounds = [_ratio(sample, m) - r for m, r in narrow]
        beta = min((_ratio(sample, m) for m, _ in narrow), default=Fraction(0))
        if not narrow or beta <= narrow[-1][1]:
            logger.info(f"🚫 Sample {sample.describe()} has no positive lower density on the window")
            rejected.append(sample.describe())
            continue
        accepted.append(
            {"set": sample.describe(), "beta": str(beta), "difference_lower": [str(b) for b in lower_bounds]}
        )
        report.add(
            f"difference-positive:{sample.describe()}",
            all(b > 0 for b in lower_bounds),
            set=sample.describe(),
            least=str(min(lower_bounds)),
        )
    report.data["accepted"] = accepted
    report.data["rejected"] = rejected
    logger.info(f"🧪 c5 refuter: {report.outcome} with {len(accepted)} samples")
    return report
