"""Erdős–Ulam counterexamples, evaluated with exact block counts over huge schedules."""
import logging
from fractions import Fraction
from math import floor, isqrt
from typing import List, Optional

from app.errors import MalformedExpressionError, PreconditionError
from app.expressions import AllSet, BlockRule, BlockShiftMap, CountRule, ImageSet, Progression, ShiftMap
from app.measures import abel_dini, abel_dini_terms, eu_ratio, monotone_weight_invariance, weighted_sum
from app.models import WitnessReport
from app.schedules import DYADIC_KN, TWO_POW_FACTORIAL, dyadic_k
from app.weights import HARMONIC, UNIT, BlockWeight, WeightNode

logger = logging.getLogger(__name__)

MAX_NONDENSE_BLOCKS = 15
MAX_DENSE_BLOCKS = 40
ABEL_DINI_WINDOW = 10 ** 6
# from here on a_n = 1/n keeps block ratios below 1/10
FADING_FROM = 16


# ------------------------------------------------------------- non-dense


def eu_nondense_counterexample(n_max: int = 5) -> WitnessReport:
    """h = (2^n)! on I_n, A = {max I_n}: A has vanishing ratios, A+1 = {min I_n} has ratios near 1"""
    if not 0 <= n_max <= MAX_NONDENSE_BLOCKS:
        raise MalformedExpressionError(f"n_max must lie in [0, {MAX_NONDENSE_BLOCKS}], got {n_max}", position="n_max")
    schedule = TWO_POW_FACTORIAL
    h = BlockWeight(schedule=schedule, mode="length")
    a = BlockRule(schedule=schedule, rule="last", count_rule=CountRule(kind="constant", value=1))
    shift = ShiftMap(by=1)
    shifted = ImageSet(map=shift, inner=a)
    report = WitnessReport(
        construction="eu-nondense",
        parameters={"n_max": n_max, "schedule": schedule.describe(), "weight": h.describe()},
        window=schedule.end(n_max),
    )

    a_ratios, image_ratios = [], []
    for n in range(n_max + 1):
        size = Fraction(schedule.length(n))
        ratio = eu_ratio(h, a, schedule.end(n))
        a_ratios.append(ratio)
        bound = n / size
        if n >= 2:
            report.add(
                f"A ratio at max I_{n} <= n/(2^n)!",
                ratio <= bound,
                n=n,
                ratio=str(ratio),
                bound=str(bound),
            )
        image_ratio = eu_ratio(h, shifted, schedule.start(n + 1) + 1)
        image_ratios.append(image_ratio)
        if n >= 1:
            following = Fraction(schedule.length(n + 1))
            floor_bound = following / (following + n * size ** 2)
            report.add(
                f"f[A] ratio at min I_{n + 1} >= (2^(n+1))!/((2^(n+1))! + n((2^n)!)^2)",
                image_ratio >= floor_bound,
                n=n,
                ratio=str(image_ratio),
                bound=str(floor_bound),
            )
    report.data["a_ratios"] = [str(r) for r in a_ratios]
    report.data["image_ratios"] = [str(r) for r in image_ratios]
    if n_max >= 3:
        report.add(
            "A ratios vanish while f[A] ratios approach 1",
            a_ratios[-1] < Fraction(1, 1000) and image_ratios[-1] > Fraction(999, 1000),
            last_a=str(a_ratios[-1]),
            last_image=str(image_ratios[-1]),
        )

    # the same shift never grows a nonincreasing weight
    invariance = monotone_weight_invariance(shift, HARMONIC, [a, Progression(start=0, step=2)], 1024)
    for check in invariance.checks:
        report.add(f"harmonic: {check.name}", check.passed, counterexample=check.counterexample, **check.detail)
    logger.info(f"🧪 EU non-dense counterexample to n={n_max}: {report.outcome}")
    return report


# ----------------------------------------------------------------- dense


def _first_rule(ratio: Fraction, decay: str) -> BlockRule:
    """First [a_n 2^(k_n)] points of each I_(n+1)"""
    return BlockRule(
        schedule=DYADIC_KN,
        rule="first",
        count_rule=CountRule(kind="scale-fraction", ratio=ratio, lag=1, rounding="nearest", decay=decay),
    )


def _last_rule(ratio: Fraction, decay: str = "none") -> BlockRule:
    """Last [b_n 2^(k_n)] points of each I_n"""
    return BlockRule(
        schedule=DYADIC_KN,
        rule="last",
        count_rule=CountRule(kind="scale-fraction", ratio=ratio, rounding="nearest", decay=decay),
    )


def block_ratio(expr: BlockRule, n: int) -> Fraction:
    """A_h(I_(n+1)) / ω_h(I_n) for h = 2^(k_n) on I_n"""
    schedule = expr.schedule
    return Fraction(expr.block_count(n + 1) * schedule.scale(n + 1), schedule.length(n) * schedule.scale(n))


def _check_recursion(report: WitnessReport, n_max: int):
    broken = None
    for n in range(1, n_max + 1):
        k, previous = dyadic_k(n), dyadic_k(n - 1)
        reaches = 2 ** k >= n * 2 ** previous
        least = k == 0 or 2 ** (k - 1) < n * 2 ** previous
        if not (reaches and least):
            broken = {"n": n, "k": k, "k_previous": previous}
            break
    report.add("k_n is the least x with 2^x >= n·2^(k_(n-1))", broken is None, counterexample=broken)
    report.data["k"] = [dyadic_k(n) for n in range(n_max + 2)]


def _check_dense(report: WitnessReport, h: WeightNode, n_max: int):
    worst = None
    for n in range(2, n_max + 1):
        point = DYADIC_KN.start(n)
        total = weighted_sum(h, AllSet(), point + 1)
        ratio = h.value(point) / total.lower
        bound = Fraction(2 * n, 2 ** dyadic_k(n - 1))
        if ratio > bound:
            worst = {"n": n, "ratio": str(ratio), "bound": str(bound)}
            break
    report.add("h(i)/ω_h[0, i] <= 2n/2^(k_(n-1)) on every block", worst is None, counterexample=worst)


def _check_eq1(report: WitnessReport, n_max: int):
    halves = [block_ratio(_first_rule(Fraction(1, 2), "none"), n) for n in range(1, n_max + 1)]
    low = next((n for n, r in enumerate(halves, start=1) if r <= Fraction(1, 3)), None)
    report.add(
        "a_n = 1/2 keeps block ratios above 1/3",
        low is None,
        counterexample=None if low is None else {"n": low, "ratio": str(halves[low - 1])},
    )
    fading = [block_ratio(_first_rule(Fraction(1), "reciprocal"), n) for n in range(1, n_max + 1)]
    if n_max >= FADING_FROM:
        report.add(
            "a_n = 1/n drives block ratios below 1/10",
            fading[-1] < Fraction(1, 10),
            last=str(fading[-1]),
        )
    report.data["eq1_half"] = [str(r) for r in halves]
    report.data["eq1_reciprocal"] = [str(r) for r in fading]


def _case_one(report: WitnessReport, b: Fraction, n_max: int):
    c = _last_rule(b)
    f = BlockShiftMap(schedule=DYADIC_KN, tail=c.count_rule, first_block=1)
    misplaced = None
    loose = None
    for n in range(1, n_max + 1):
        count = c.block_count(n)
        s, e = DYADIC_KN.bounds(n)
        if count:
            following = DYADIC_KN.start(n + 1)
            if (f.apply(e - count), f.apply(e - 1)) != (following, following + count - 1):
                misplaced = {"n": n, "count": count}
                break
        scale = DYADIC_KN.scale(n)
        ratio = Fraction(count, e - s)
        bound = (b * scale + Fraction(1, 2)) / (n * scale)
        if loose is None and ratio > bound:
            loose = {"n": n, "ratio": str(ratio), "bound": str(bound)}
    report.add("f[C] fills the first c_n slots of I_(n+1)", misplaced is None, counterexample=misplaced)
    report.add("C_h(I_n)/ω_h(I_n) <= (b·2^(k_n) + 1/2)/(n·2^(k_n))", loose is None, counterexample=loose)
    pushed = [
        block_ratio(_first_rule(b, "none"), n)
        for n in range(1, n_max + 1)
        if b * DYADIC_KN.scale(n) >= 2
    ]
    report.add(
        "f[C] block ratios stay above b/3",
        all(r > b / 3 for r in pushed),
        checked=len(pushed),
    )
    report.data["c_counts"] = [c.block_count(n) for n in range(n_max + 1)]


def _case_two(report: WitnessReport, g: WeightNode, n_max: int):
    b = _last_rule(Fraction(1), "reciprocal")
    total = Fraction(0)
    terms: List[Fraction] = []
    c_counts, m_values, exceeded = [], [], None
    convergent = Fraction(0)
    for n in range(1, n_max + 1):
        size = b.block_count(n)
        top = DYADIC_KN.end(n) - 1
        x = Fraction(size) / g.value(top)
        growth = g.value(top + size) / g.value(top)
        root = isqrt(floor(growth))
        c = min(max((root - total) / x, Fraction(0)), Fraction(1)) if x else Fraction(0)
        total += c * x
        if c * x > 0:
            terms.append(c * x)
            convergent += c * x / growth
        if exceeded is None and total ** 2 > growth:
            exceeded = {"n": n, "partial": str(total), "M": str(growth)}
        c_counts.append(floor(c * size + Fraction(1, 2)))
        m_values.append(str(growth))
    report.add("(c_1 x_1 + ... + c_n x_n)^2 <= M_n", exceeded is None, counterexample=exceeded)
    report.data["c_counts"] = c_counts
    report.data["m"] = m_values
    report.data["c_partial"] = str(total)
    if terms:
        tail = abel_dini_terms(terms, Fraction(1))
        report.data["abel_dini_terms"] = {"lower": str(tail.lower), "upper": str(tail.upper)}
        report.add(
            "Σ c_n x_n / M_n <= Σ c_n x_n / S_n^2",
            convergent <= tail.upper,
            bound=str(tail.upper),
            value=str(convergent),
        )


def eu_dense_counterexample(
    n_max: int = 20,
    case: int = 1,
    b: Fraction = Fraction(1),
    g: Optional[WeightNode] = None,
) -> WitnessReport:
    """Dense EU_h with h = 2^(k_n) on I_n = [2^(k_n), 2^(k_(n+1))) failing the bi-invariance transfer"""
    if not 1 <= n_max <= MAX_DENSE_BLOCKS:
        raise MalformedExpressionError(f"n_max must lie in [1, {MAX_DENSE_BLOCKS}], got {n_max}", position="n_max")
    if case not in (1, 2):
        raise MalformedExpressionError(f"case must be 1 or 2, got {case}", position="case")
    b = Fraction(b)
    if not 0 < b <= 1:
        raise MalformedExpressionError(f"b must lie in (0, 1], got {b}", position="b")
    if case == 2 and g is None:
        raise PreconditionError("case 2 needs the representing weight g")

    h = BlockWeight(schedule=DYADIC_KN, mode="scale")
    report = WitnessReport(
        construction="eu-dense",
        parameters={
            "n_max": n_max,
            "case": case,
            "b": str(b),
            "g": g.describe() if g is not None else None,
        },
        window=DYADIC_KN.end(n_max),
    )
    _check_recursion(report, n_max)
    _check_dense(report, h, n_max)
    _check_eq1(report, n_max)
    if case == 1:
        _case_one(report, b, n_max)
    else:
        _case_two(report, g, n_max)

    unit = abel_dini(UNIT, Fraction(1), ABEL_DINI_WINDOW)
    report.add("Abel–Dini sum of 1/n^2 stays below 2", unit.upper < 2, upper=str(unit.upper))
    logger.info(f"🧪 EU dense counterexample (case {case}) to n={n_max}: {report.outcome}")
    return report
