"""
Finite witness detectors: progressions, finite sums, Ramsey blocks, grids, columns
"""
from itertools import combinations

import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from app.detectors import (
    column_profile,
    find_ap,
    find_fs_generator,
    find_grid_copy,
    fs_contained,
    longest_ap,
    ramsey_block,
    run_detector,
)
from app.errors import BaseSpaceMismatchError, MalformedExpressionError
from app.expressions import Squares, Triangle
from app.omega_sets import evens, odds
from app.spaces import OMEGA_SQUARED, n_subsets


def _brute_longest(points):
    members = set(points)
    best = 1 if members else 0
    for a in members:
        for b in members:
            if b <= a:
                continue
            d, length = b - a, 2
            while a + length * d in members:
                length += 1
            best = max(best, length)
    return best


def test_longest_ap_examples():
    length, witness = longest_ap(range(10))
    assert (length, witness.start, witness.step) == (10, 0, 1)

    length, witness = longest_ap([1, 25, 49, 100])
    assert (length, witness.start, witness.step) == (3, 1, 24)

    length, witness = longest_ap(Squares().window(2500))
    assert (length, witness.start, witness.step) == (3, 1, 24)

    assert longest_ap([])[0] == 0


@hypothesis_settings(max_examples=1000, deadline=None)
@given(st.sets(st.integers(min_value=0, max_value=200), max_size=40))
def test_longest_ap_matches_brute_force(points):
    length, witness = longest_ap(sorted(points))
    assert length == _brute_longest(points)
    assert set(witness.terms()) <= points


def test_find_ap_prefers_small_steps():
    witness = find_ap(evens().window(100), 5)
    assert (witness.start, witness.step) == (0, 2)
    assert find_ap([1, 25, 49], 4) is None


def test_finite_sums_search():
    assert find_fs_generator(evens().window(100), 3).generators == [2, 4, 8]
    assert find_fs_generator([1, 2, 3], 2).generators == [1, 2]
    assert find_fs_generator(odds().window(100), 2) is None


def _exhaustive_fs(points, n):
    members = set(points)
    for chosen in combinations(sorted(x for x in members if x > 0), n):
        sums = [sum(subset) for k in range(1, n + 1) for subset in combinations(chosen, k)]
        if len(set(sums)) == len(sums) and members.issuperset(sums):
            return list(chosen)
    return None


@hypothesis_settings(max_examples=200, deadline=None)
@given(st.sets(st.integers(min_value=0, max_value=199), max_size=40), st.integers(min_value=1, max_value=3))
def test_fs_generator_matches_exhaustive_search(points, n):
    witness = find_fs_generator(sorted(points), n)
    expected = _exhaustive_fs(points, n)
    if expected is None:
        assert witness is None
    else:
        assert witness.generators == expected
        assert set(witness.sums) <= points


def test_finite_sums_containment():
    inside, sums = fs_contained([1, 2], evens())
    assert not inside
    assert sums == (1, 2, 3)

    inside, sums = fs_contained([2, 4, 8], evens())
    assert inside
    assert sums == tuple(range(2, 15, 2))


def _pair_codes(pairs):
    space = n_subsets(2)
    return [space.encode(tuple(sorted(p))) for p in pairs]


def test_ramsey_block_on_pairs():
    everything = _pair_codes(combinations(range(6), 2))
    assert ramsey_block(everything, 2, 3).block == [0, 1, 2]

    same_parity = _pair_codes(p for p in combinations(range(6), 2) if sum(p) % 2 == 0)
    assert ramsey_block(same_parity, 2, 3).block == [0, 2, 4]

    assert ramsey_block([], 2, 3) is None


def test_ramsey_block_rejects_other_arities():
    with pytest.raises(MalformedExpressionError):
        ramsey_block([], 4, 5)


def test_grid_copies():
    square = [(i, j) for i in range(5) for j in range(5)]
    witness = find_grid_copy(square, 2)
    assert (witness.v, witness.alpha) == ((0, 0), 1)

    lower = [OMEGA_SQUARED.decode(z) for z in Triangle().window(100, OMEGA_SQUARED)]
    witness = find_grid_copy(lower, 2)
    assert witness.v == (1, 0)
    assert all(i >= j for i, j in witness.points())

    assert find_grid_copy([], 1) is None


def test_column_profile():
    profile = column_profile(Triangle().window(100, OMEGA_SQUARED))
    assert profile.max == 10
    assert profile.argmax == 9
    assert column_profile([]).max == 0


def test_run_detector_dispatch():
    report = run_detector("ap", evens(), 100)
    assert report["length"] == 50

    with pytest.raises(BaseSpaceMismatchError):
        run_detector("ap", Triangle(), 100, OMEGA_SQUARED)

    with pytest.raises(MalformedExpressionError):
        run_detector("colors", evens(), 100)
