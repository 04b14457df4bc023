"""
Homogeneity witnesses and the Erdos-Ulam and anti-homogeneity constructions
"""
from fractions import Fraction

import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from app.errors import InjectivityViolationError, MalformedExpressionError, PreconditionError
from app.expressions import (
    AffineMap,
    AllSet,
    BlockShiftMap,
    ComposeMap,
    CountRule,
    IdentityMap,
    ShiftMap,
    SwapPairsMap,
    TableMap,
)
from app.ideals import FinIdeal
from app.models import IsoWitness
from app.omega_sets import evens, explicit, union
from app.schedules import FACTORIAL
from app.spaces import OMEGA_SQUARED
from app.witnesses import (
    antihomog_partition,
    c1_extract_report,
    c1_pair_extraction,
    costar_report,
    eu_dense_counterexample,
    eu_nondense_counterexample,
    gallai2_report,
    gallai2_witness,
    superset_report,
)


def _check(report, name):
    return next(check for check in report.checks if check.name == name)


def test_superset_closure_traces_orbits():
    iso = IsoWitness(source=AllSet(), target=evens(), map=AffineMap(scale=2))
    report = superset_report(iso, union(evens(), explicit([1])), 1 << 14)
    assert report.data["a_prime"] == [2 ** k for k in range(1, 14)]
    assert report.outcome == "pass"


def test_superset_closure_needs_a_superset():
    iso = IsoWitness(source=AllSet(), target=evens(), map=AffineMap(scale=2))
    with pytest.raises(PreconditionError):
        superset_report(iso, explicit([1]), 64)


def test_costar_for_fin_is_the_enumeration():
    report = costar_report(FinIdeal(), evens(), None, 256)
    assert report.outcome == "pass"
    assert report.data["map"]["kind"] == "enumeration"


def test_gallai_blocks_tile_the_plane():
    blocks, iso = gallai2_witness(AllSet(), 3)
    assert [(b.i, b.j, b.side) for b in blocks] == [(0, 0, 1), (0, 1, 1), (1, 0, 2)]

    first = blocks[0]
    point = (first.v[0] + first.alpha, first.v[1] + first.alpha)
    assert OMEGA_SQUARED.decode(iso.map.apply(OMEGA_SQUARED.encode(point))) == (1, 1)

    images = {OMEGA_SQUARED.decode(code) for _, code in iso.map.pairs[-4:]}
    assert images == {(2, 1), (2, 2), (3, 1), (3, 2)}

    assert gallai2_report(AllSet(), 3).outcome == "pass"


def test_c1_pair_extraction():
    extraction, _ = c1_pair_extraction(SwapPairsMap(), 20, pairs=5)
    assert extraction.a_points == [0, 2, 4, 6, 8]
    assert extraction.b_points == [1, 3, 5, 7, 9]

    extraction, _ = c1_pair_extraction(ShiftMap(by=1), 20, pairs=2)
    assert extraction.pairs == [(0, 1), (2, 3)]

    assert c1_extract_report(SwapPairsMap(), 20).outcome == "pass"


def test_c1_extraction_needs_a_moving_map():
    with pytest.raises(PreconditionError):
        c1_pair_extraction(IdentityMap(), 20)
    with pytest.raises(InjectivityViolationError):
        c1_pair_extraction(TableMap(pairs=((0, 1),)), 20)


def test_eu_nondense_counterexample():
    report = eu_nondense_counterexample(3)
    assert report.outcome == "pass"
    assert Fraction(report.data["a_ratios"][3]) <= Fraction(3, 40320)
    assert Fraction(report.data["image_ratios"][3]) > Fraction(999, 1000)

    with pytest.raises(MalformedExpressionError):
        eu_nondense_counterexample(16)
    with pytest.raises(MalformedExpressionError):
        eu_nondense_counterexample(-1)


def test_eu_dense_recursion_and_abel_dini():
    report = eu_dense_counterexample(n_max=4)
    assert report.data["k"] == [0, 0, 1, 3, 5, 8]
    assert _check(report, "k_n is the least x with 2^x >= n·2^(k_(n-1))").passed
    assert _check(report, "Abel–Dini sum of 1/n^2 stays below 2").passed


def test_eu_dense_arguments():
    with pytest.raises(PreconditionError):
        eu_dense_counterexample(n_max=4, case=2)
    with pytest.raises(MalformedExpressionError):
        eu_dense_counterexample(n_max=0)
    with pytest.raises(MalformedExpressionError):
        eu_dense_counterexample(n_max=4, b=Fraction(3, 2))


def test_antihomog_split():
    still = antihomog_partition(IdentityMap(), n_max=5)
    assert still.outcome == "pass"
    assert all(block["equal"] == "1" for block in still.data["blocks"])

    shifted = antihomog_partition(ShiftMap(by=1), n_max=5)
    assert shifted.outcome == "pass"
    assert shifted.data["blocks"][3]["plus"] == "1/6"
    assert shifted.data["blocks"][3]["image_plus"] == "1/6"

    with pytest.raises(MalformedExpressionError):
        antihomog_partition(IdentityMap(), n_max=10)


@st.composite
def block_respecting_or_shifting(draw):
    n_max = draw(st.integers(min_value=2, max_value=8))
    pairs = []
    for n in range(2, min(n_max, 5) + 1):
        lo, hi = FACTORIAL.bounds(n)
        pairs.extend(zip(range(lo, hi), draw(st.permutations(range(lo, hi)))))
    permuted = TableMap(pairs=tuple(pairs))
    f = draw(
        st.sampled_from(
            [
                permuted,
                ShiftMap(by=0),
                ShiftMap(by=1),
                ComposeMap(outer=ShiftMap(by=1), inner=permuted),
                BlockShiftMap(schedule=FACTORIAL, tail=CountRule(kind="constant", value=1)),
            ]
        )
    )
    return f, n_max


@hypothesis_settings(max_examples=100, deadline=None)
@given(block_respecting_or_shifting())
def test_antihomog_bounds_hold_for_block_maps(case):
    f, n_max = case
    report = antihomog_partition(f, n_max=n_max)
    assert report.outcome == "pass"
    for block in report.data["blocks"][2:]:
        limit = Fraction(2, block["n"])
        assert Fraction(block["minus"]) < limit
        assert Fraction(block["image_plus"]) < limit


def test_antihomog_at_the_largest_block():
    report = antihomog_partition(ShiftMap(by=1), n_max=9)
    assert report.outcome == "pass"
    assert report.data["blocks"][9]["image_plus"] == str(Fraction(1, 362880))
