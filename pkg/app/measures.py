"""Exact-rational densities, weighted sums and the three submeasure families."""
import logging
from fractions import Fraction
from typing import Annotated, Iterable, Iterator, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import Field

from app.arith import Bounds, dyadic_checkpoints, power_bounds
from app.config import settings
from app.errors import (
    DegenerateWeightError,
    EffortExceededError,
    MalformedExpressionError,
    PreconditionError,
)
from app.expressions import AllSet, ImageSet, MapNode, Node, SetNode
from app.models import AbelDiniReport, DensityEstimate, PartialSum, TailEstimate, WitnessReport
from app.schedules import GridSchedule
from app.spaces import OMEGA, BaseSpace
from app.weights import UNIT, ConstantWeight, Weight, WeightNode

logger = logging.getLogger(__name__)

ALL = AllSet()


def density_window(expr: SetNode, bound: int, space: BaseSpace = OMEGA) -> DensityEstimate:
    """|A ∩ [0, N)| / N with a dyadic checkpoint envelope"""
    if bound < 1:
        raise MalformedExpressionError(f"density window must be >= 1, got {bound}")
    checkpoints = [(n, Fraction(expr.count(0, n, space), n)) for n in dyadic_checkpoints(bound)]
    count = expr.count(0, bound, space)
    tail = [ratio for _, ratio in checkpoints[len(checkpoints) // 2:]]
    return DensityEstimate(
        bound=bound,
        count=count,
        ratio=Fraction(count, bound),
        checkpoints=checkpoints,
        liminf=min(tail),
        limsup=max(tail),
    )


def _sub_blocks(lo: int, hi: int) -> Iterator[Tuple[int, int]]:
    """[lo, hi) cut into blocks of relative width about 1/8"""
    a = lo
    while a < hi:
        b = min(hi, a + max(1, a // 8))
        yield a, b
        a = b


def _range_bounds(w: WeightNode, a: int, b: int, count: int) -> Tuple[Fraction, Fraction]:
    """Bounds on the weight of count points inside [a, b)"""
    if count == 0:
        return Fraction(0), Fraction(0)
    first, last = w.value(a), w.value(b - 1)
    direction = w.monotone()
    if direction == "nonincreasing":
        return count * last, count * first
    if direction == "nondecreasing":
        return count * first, count * last
    raise EffortExceededError(
        f"{w.describe()} is neither monotone nor block-constant past {a}", position=a
    )


def weighted_sum(w: WeightNode, expr: SetNode, bound: int, space: BaseSpace = OMEGA) -> PartialSum:
    """Σ_{n ∈ A ∩ [0, N)} w(n), exact where possible and as dyadic bounds otherwise"""
    if bound <= 0:
        return PartialSum(terms=0, lower=Fraction(0), upper=Fraction(0), method="empty")
    schedule = w.block_schedule()
    if schedule is not None:
        total = Fraction(0)
        for m in schedule.blocks_between(0, bound):
            lo, hi = schedule.bounds(m)
            total += w.block_value(m) * expr.count(lo, min(hi, bound), space)
        return PartialSum(terms=bound, lower=total, upper=total, method="block")
    if isinstance(expr, AllSet):
        closed = w.prefix(bound)
        if closed is not None:
            return PartialSum(terms=bound, lower=closed, upper=closed, method="closed-form")

    top = expr.upper_bound(space) if expr.finiteness(space) is True else None
    limit = bound if top is None else min(bound, top)
    acc = Bounds(settings.precision_bits)
    if limit <= settings.exact_terms or top is not None:
        for x in expr.window(limit, space):
            acc.add(w.value(x))
        return PartialSum(terms=bound, lower=acc.lower, upper=acc.upper, method="pointwise")

    cut = settings.exact_terms
    for x in expr.window(cut, space):
        acc.add(w.value(x))
    for a, b in _sub_blocks(cut, limit):
        acc.add(*_range_bounds(w, a, b, expr.count(a, b, space)))
    return PartialSum(terms=bound, lower=acc.lower, upper=acc.upper, method="dyadic-blocks")


def summable_partial(w: WeightNode, expr: SetNode, bound: int, space: BaseSpace = OMEGA) -> PartialSum:
    return weighted_sum(w, expr, bound, space)


def eu_ratio(w: WeightNode, expr: SetNode, n: int, space: BaseSpace = OMEGA) -> Fraction:
    """A_w[0, n) / ω_w[0, n), exact"""
    denominator = weighted_sum(w, ALL, n, space)
    if denominator.upper == 0:
        raise DegenerateWeightError(f"{w.describe()} has total weight 0 below {n}", n=n)
    numerator = weighted_sum(w, expr, n, space)
    if not (numerator.exact and denominator.exact):
        raise EffortExceededError(
            f"EU ratio at {n} is only known within bounds", n=n, method=numerator.method
        )
    return numerator.lower / denominator.lower


def farah_block_measure(schedule: GridSchedule, expr: SetNode, n: int, space: BaseSpace = OMEGA) -> Fraction:
    """φ_n(A) = |A ∩ I_n| / |I_n|"""
    lo, hi = schedule.bounds(n)
    return Fraction(expr.count(lo, hi, space), hi - lo)


# ------------------------------------------------------------------ submeasures


class SubmeasureNode(Node):
    def evaluate(self, expr: SetNode, bound: int, space: BaseSpace = OMEGA, cut: int = 0) -> PartialSum:
        """φ(A ∩ [cut, bound)); upper is a true upper bound of that window value"""
        raise NotImplementedError

    def tail_bound(self, expr: SetNode, cut: int, space: BaseSpace = OMEGA) -> Optional[Fraction]:
        return None


class SummableMeasure(SubmeasureNode):
    kind: Literal["summable"] = "summable"
    weight: Weight

    def evaluate(self, expr, bound, space=OMEGA, cut=0):
        total = weighted_sum(self.weight, expr, bound, space)
        if cut <= 0:
            return total
        head = weighted_sum(self.weight, expr, min(cut, bound), space)
        return PartialSum(
            terms=bound,
            lower=max(Fraction(0), total.lower - head.upper),
            upper=total.upper - head.lower,
            method=total.method,
        )

    def tail_bound(self, expr, cut, space=OMEGA):
        if expr.finiteness(space) is True:
            top = expr.upper_bound(space)
            if top is not None and top <= cut:
                return Fraction(0)
        return self.weight.tail(cut)

    def describe(self):
        return f"summable({self.weight.describe()})"


class EuMeasure(SubmeasureNode):
    """sup_n A_w[cut, n) / ω_w[0, n)"""

    kind: Literal["erdos-ulam"] = "erdos-ulam"
    weight: Weight = Field(default_factory=lambda: UNIT)

    def evaluate(self, expr, bound, space=OMEGA, cut=0):
        if bound <= settings.exact_terms:
            members = set(expr.window(bound, space))
            num, den, best = Fraction(0), Fraction(0), Fraction(0)
            for x in range(bound):
                value = self.weight.value(x)
                den += value
                if x in members and x >= cut:
                    num += value
                if den > 0 and num / den > best:
                    best = num / den
            return PartialSum(terms=bound, lower=best, upper=best, method="every-prefix")
        best = Fraction(0)
        for n in dyadic_checkpoints(bound):
            if n <= cut:
                continue
            numerator = weighted_sum(self.weight, expr, n, space).lower
            if cut > 0:
                numerator -= weighted_sum(self.weight, expr, cut, space).upper
            denominator = weighted_sum(self.weight, ALL, n, space).upper
            if denominator > 0 and numerator > 0:
                best = max(best, numerator / denominator)
        return PartialSum(terms=bound, lower=best, upper=Fraction(1), method="dyadic-checkpoints")

    def tail_bound(self, expr, cut, space=OMEGA):
        if expr.finiteness(space) is True:
            top = expr.upper_bound(space)
            if top is not None and top <= cut:
                return Fraction(0)
        return None

    def describe(self):
        return f"EU({self.weight.describe()})"


class FarahMeasure(SubmeasureNode):
    """sup_n φ_n(A) with φ_n the uniform probability on I_n"""

    kind: Literal["farah"] = "farah"
    schedule: GridSchedule

    def evaluate(self, expr, bound, space=OMEGA, cut=0):
        best = Fraction(0)
        for n in self.schedule.blocks_between(cut, bound):
            lo, hi = self.schedule.bounds(n)
            best = max(best, Fraction(expr.count(max(lo, cut), min(hi, bound), space), hi - lo))
        return PartialSum(terms=bound, lower=best, upper=best, method="block")

    def tail_bound(self, expr, cut, space=OMEGA):
        from app.expressions import AnnotatedSet, BlockRule

        if expr.finiteness(space) is True:
            top = expr.upper_bound(space)
            if top is not None and top <= cut:
                return Fraction(0)
        inner = expr.inner if isinstance(expr, AnnotatedSet) else expr
        if (
            isinstance(inner, BlockRule)
            and inner.schedule == self.schedule
            and inner.count_rule.kind == "constant"
            and inner.rule in ("first", "last", "arithmetic")
            and self.schedule.is_growing()
        ):
            n = self.schedule.locate(cut)
            return Fraction(min(inner.count_rule.value, self.schedule.length(n)), self.schedule.length(n))
        return None

    def describe(self):
        return f"farah({self.schedule.describe()})"


SubmeasureExpr = Annotated[Union[SummableMeasure, EuMeasure, FarahMeasure], Field(discriminator="kind")]


def submeasure_value(phi: SubmeasureNode, expr: SetNode, bound: int, space: BaseSpace = OMEGA) -> PartialSum:
    """φ(A ∩ [0, N)), the lower-semicontinuous approximation at N"""
    return phi.evaluate(expr, bound, space)


def exh_tail(phi: SubmeasureNode, expr: SetNode, cut: int, effort: int = None, space: BaseSpace = OMEGA) -> TailEstimate:
    """φ(A ∩ [cut, ∞)): lower bound from a window, upper bound from closed forms"""
    effort = settings.effort_or_default(effort)
    bound = max(cut + 1, 2 * cut, 64 * (effort + 1))
    if isinstance(phi, FarahMeasure):
        bound = max(bound, phi.schedule.end(phi.schedule.locate(cut)))
    window = phi.evaluate(expr, bound, space, cut=cut)
    upper = phi.tail_bound(expr, cut, space)
    logger.debug(f"📉 Tail of {phi.describe()} past {cut}: lower {window.lower}, upper {upper}")
    return TailEstimate(cut=cut, window=bound, lower=window.lower, upper=upper, method=window.method)


# ------------------------------------------------------------------ Abel–Dini


def _abel_dini_sum(terms: Iterable[Fraction], delta: Fraction, bits: int, checkpoints: Sequence[int]):
    exponent = 1 + delta
    running = Bounds(bits)
    total = Bounds(bits)
    marks = set(checkpoints)
    recorded: List[Tuple[int, Fraction, Fraction]] = []
    n = 0
    for n, x in enumerate(terms, start=1):
        if x <= 0:
            raise DegenerateWeightError(f"Abel–Dini needs positive terms, term {n - 1} is {x}", index=n - 1)
        running.add(x)
        if exponent.denominator == 1:
            lo_pow, hi_pow = running.lower ** exponent.numerator, running.upper ** exponent.numerator
        else:
            lo_pow = power_bounds(running.lower, exponent, bits)[0]
            hi_pow = power_bounds(running.upper, exponent, bits)[1]
        total.add(x / hi_pow, x / lo_pow)
        if n in marks:
            recorded.append((n, total.lower, total.upper))
    return running, total, recorded, n


def abel_dini_terms(terms: Sequence[Fraction], delta: Fraction) -> AbelDiniReport:
    """Σ x_n / (x_0 + ... + x_n)^(1+δ) over an explicit finite sequence"""
    if delta <= 0:
        raise MalformedExpressionError("δ must be positive", position="delta")
    marks = dyadic_checkpoints(len(terms))
    _, total, recorded, n = _abel_dini_sum(terms, Fraction(delta), settings.precision_bits, marks)
    return AbelDiniReport(terms=n, delta=delta, lower=total.lower, upper=total.upper, checkpoints=recorded)


def abel_dini(w: WeightNode, delta: Fraction, bound: int) -> AbelDiniReport:
    """Σ_{n<N} x_n / s_n^(1+δ) with x_n = w(n) and s_n = x_0 + ... + x_n"""
    delta = Fraction(delta)
    if delta < 0:
        raise MalformedExpressionError("δ must be >= 0", position="delta")
    bits = settings.precision_bits
    exponent = 1 + delta
    marks = dyadic_checkpoints(bound)
    head = min(bound, settings.exact_terms)
    running, total, recorded, _ = _abel_dini_sum((w.value(n) for n in range(head)), delta, bits, marks)

    def power(value: Fraction, side: int) -> Fraction:
        if exponent.denominator == 1:
            return value ** exponent.numerator
        return power_bounds(value, exponent, bits)[side]

    for a, b in _sub_blocks(head, bound):
        x_lo, x_hi = _range_bounds(w, a, b, b - a)
        closed = w.prefix(b)
        if closed is not None and w.prefix(a) is not None:
            x_lo = x_hi = closed - w.prefix(a)
        s_first = running.lower + w.value(a)
        s_last = running.upper + x_hi
        total.add(x_lo / power(s_last, 1), x_hi / power(s_first, 0))
        running.add(x_lo, x_hi)
        if b in marks:
            recorded.append((b, total.lower, total.upper))

    cap = None
    if isinstance(w, ConstantWeight) and delta > 0:
        # Σ 1/k^(1+δ) <= 1 + 1/δ
        cap = (1 + 1 / delta) / w.c ** delta
    bounded = None if cap is None else total.upper <= cap
    logger.debug(f"🧮 Abel–Dini sum to {bound}: [{total.lower}, {total.upper}]")
    return AbelDiniReport(
        terms=bound,
        delta=delta,
        lower=total.lower,
        upper=total.upper,
        checkpoints=recorded,
        cap=cap,
        bounded=bounded,
    )


# ------------------------------------------------------------ invariance checks


def _require_increasing(f: MapNode, bound: int) -> List[int]:
    values = f.values(bound)
    for x in range(1, len(values)):
        if values[x] <= values[x - 1]:
            raise PreconditionError(
                f"{f.describe()} is not increasing: f({x - 1}) = {values[x - 1]}, f({x}) = {values[x]}",
                point=x,
            )
    return values


def finexh_invariance_check(
    phi: SubmeasureNode,
    f: MapNode,
    c: Fraction,
    family: Sequence[SetNode],
    bound: int,
) -> WitnessReport:
    """Whether φ(A) >= c·φ(f[A]) on every sampled set, compared on matching windows"""
    values = _require_increasing(f, bound)
    image_bound = values[-1] + 1 if values else 0
    report = WitnessReport(
        construction="finexh-invariance",
        parameters={"submeasure": phi.describe(), "map": f.describe(), "c": str(c)},
        window=bound,
    )
    for expr in family:
        lhs = phi.evaluate(expr, bound)
        rhs = phi.evaluate(ImageSet(map=f, inner=expr), image_bound)
        violated = lhs.upper < c * rhs.lower
        report.add(
            f"φ(A) >= c·φ(f[A]) for {expr.describe()}",
            not violated,
            counterexample={"set": expr.describe(), "phi_A": str(lhs.upper), "phi_fA": str(rhs.lower)}
            if violated
            else None,
            phi_A=str(lhs.lower),
            phi_fA=str(rhs.lower),
        )
    return report


def monotone_weight_invariance(
    f: MapNode, g: WeightNode, family: Sequence[SetNode], bound: int
) -> WitnessReport:
    """Increasing f and nonincreasing g: weights and normalized ratios never grow under f"""
    if g.monotone() != "nonincreasing":
        raise PreconditionError(f"{g.describe()} is not known to be nonincreasing")
    values = _require_increasing(f, bound)
    report = WitnessReport(
        construction="monotone-weight-invariance",
        parameters={"map": f.describe(), "weight": g.describe()},
        window=bound,
    )
    shrinking = next((x for x, y in enumerate(values) if g.value(y) > g.value(x)), None)
    report.add("g(f(n)) <= g(n)", shrinking is None, counterexample=None if shrinking is None else {"n": shrinking})
    image_bound = values[-1] + 1 if values else 0
    for expr in family:
        image = ImageSet(map=f, inner=expr)
        before = weighted_sum(g, expr, bound)
        after = weighted_sum(g, image, image_bound)
        report.add(
            f"Σ g over f[A] <= Σ g over A for {expr.describe()}",
            after.lower <= before.upper,
            before=str(before.upper),
            after=str(after.lower),
        )
        worst = None
        for m in dyadic_checkpoints(image_bound):
            k = f.bound_below(m)
            if k == 0:
                continue
            if eu_ratio(g, image, m) > eu_ratio(g, expr, k):
                worst = m
                break
        report.add(
            f"EU ratios of f[A] dominated by those of A for {expr.describe()}",
            worst is None,
            counterexample=None if worst is None else {"set": expr.describe(), "checkpoint": worst},
        )
    return report


def bounded_weight_collapse(g: WeightNode, family: Sequence[SetNode], bound: int) -> WitnessReport:
    """Bounded g: EU_g ratios track densities and Σ 1/g tracks counts within sup g / inf g"""
    limits = g.bounds()
    if limits is None:
        raise PreconditionError(f"{g.describe()} is not known to be bounded away from 0 and infinity")
    low, high = limits
    report = WitnessReport(
        construction="bounded-weight-collapse",
        parameters={"weight": g.describe(), "inf": str(low), "sup": str(high)},
        window=bound,
    )
    for expr in family:
        failures = []
        for n in dyadic_checkpoints(bound):
            count = expr.count(0, n)
            density = Fraction(count, n)
            ratio = eu_ratio(g, expr, n)
            if not density * low / high <= ratio <= density * high / low:
                failures.append({"checkpoint": n, "ratio": str(ratio), "density": str(density)})
            inverse_sum = sum((1 / g.value(x) for x in expr.window(n)), Fraction(0))
            if not Fraction(count) / high <= inverse_sum <= Fraction(count) / low:
                failures.append({"checkpoint": n, "inverse_sum": str(inverse_sum), "count": count})
        report.add(
            f"weights collapse to counts for {expr.describe()}",
            not failures,
            counterexample=failures[0] if failures else None,
        )
    return report
