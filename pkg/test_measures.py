"""
Densities, weighted sums, submeasures and Abel-Dini bounds
"""
from fractions import Fraction

import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from app.errors import DegenerateWeightError, MalformedExpressionError, PreconditionError
from app.expressions import BlockRule, CountRule, ShiftMap, Squares, SwapPairsMap
from app.measures import (
    EuMeasure,
    FarahMeasure,
    SummableMeasure,
    abel_dini,
    abel_dini_terms,
    bounded_weight_collapse,
    density_window,
    eu_ratio,
    exh_tail,
    farah_block_measure,
    finexh_invariance_check,
    monotone_weight_invariance,
    weighted_sum,
)
from app.omega_sets import evens, explicit, union
from app.schedules import FACTORIAL
from app.weights import HARMONIC, UNIT, LinearWeight, ReciprocalWeight

HALF_BLOCKS = BlockRule(
    schedule=FACTORIAL,
    rule="first",
    count_rule=CountRule(kind="length-fraction", ratio=Fraction(1, 2)),
)


def test_density_window():
    assert density_window(evens(), 10).ratio == Fraction(1, 2)

    squares = density_window(Squares(), 10 ** 6)
    assert squares.count == 1000
    assert squares.ratio == Fraction(1, 1000)

    with pytest.raises(MalformedExpressionError):
        density_window(evens(), 0)


def test_weighted_sums_are_exact_on_small_windows():
    partial = weighted_sum(HARMONIC, explicit([0, 1, 2]), 100)
    assert partial.exact
    assert partial.value == Fraction(11, 6)

    assert weighted_sum(UNIT, evens(), 100).value == 50


def test_eu_ratio():
    assert eu_ratio(UNIT, evens(), 100) == Fraction(1, 2)
    with pytest.raises(DegenerateWeightError):
        eu_ratio(UNIT, evens(), 0)


def test_farah_block_measure():
    assert farah_block_measure(FACTORIAL, HALF_BLOCKS, 4) == Fraction(1, 2)
    assert FarahMeasure(schedule=FACTORIAL).evaluate(HALF_BLOCKS, 34).value == Fraction(1, 2)


def test_eu_measure_reads_every_prefix():
    assert EuMeasure(weight=UNIT).evaluate(evens(), 10).value == 1
    # best prefix past the cut is {2, 4, 6, 8} against [0, 9)
    assert EuMeasure(weight=UNIT).evaluate(evens(), 10, cut=1).value == Fraction(4, 9)


def test_exh_tail_of_finite_sets_vanishes():
    phi = SummableMeasure(weight=ReciprocalWeight(power=2))
    tail = exh_tail(phi, explicit([1, 2, 3]), 10, effort=2)
    assert tail.lower == 0
    assert tail.upper == 0


def test_abel_dini():
    report = abel_dini(UNIT, Fraction(1), 1024)
    assert report.cap == 2
    assert report.bounded
    assert report.lower <= report.upper < 2

    terms = abel_dini_terms([Fraction(1)] * 3, Fraction(1))
    assert terms.lower <= Fraction(49, 36) <= terms.upper

    with pytest.raises(MalformedExpressionError):
        abel_dini_terms([Fraction(1)], Fraction(0))
    with pytest.raises(DegenerateWeightError):
        abel_dini_terms([Fraction(1), Fraction(0)], Fraction(1))


def test_bounded_weights_collapse_to_counts():
    report = bounded_weight_collapse(UNIT, [evens(), Squares()], 256)
    assert report.outcome == "pass"

    with pytest.raises(PreconditionError):
        bounded_weight_collapse(HARMONIC, [evens()], 256)


def test_invariance_checks_need_increasing_maps():
    with pytest.raises(PreconditionError):
        finexh_invariance_check(SummableMeasure(weight=HARMONIC), SwapPairsMap(), Fraction(1), [evens()], 16)
    with pytest.raises(PreconditionError):
        monotone_weight_invariance(ShiftMap(by=1), LinearWeight(), [evens()], 16)


small_sets = st.sets(st.integers(min_value=0, max_value=63), max_size=12).map(lambda s: explicit(sorted(s)))
submeasures = st.sampled_from(
    [SummableMeasure(weight=HARMONIC), EuMeasure(weight=UNIT), FarahMeasure(schedule=FACTORIAL)]
)


@hypothesis_settings(max_examples=60, deadline=None)
@given(submeasures, small_sets, small_sets)
def test_submeasures_are_subadditive(phi, a, b):
    both = phi.evaluate(union(a, b), 64).upper
    assert both <= phi.evaluate(a, 64).upper + phi.evaluate(b, 64).upper
