"""
Window semantics of set expressions, base-space encodings and interval schedules
"""
from fractions import Fraction

import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from app.errors import (
    AnnotationMismatchError,
    BaseSpaceMismatchError,
    InjectivityViolationError,
    MalformedExpressionError,
)
from app.expressions import (
    AnnotatedSet,
    BlockRule,
    CountRule,
    DifferenceSet,
    ExplicitSet,
    FsSet,
    IdentityMap,
    IntervalSet,
    Powers,
    Progression,
    ShiftMap,
    Squares,
    SwapPairsMap,
    TableMap,
    Triangle,
)
from app.omega_sets import (
    block_counts,
    check_annotations,
    complement,
    empty,
    evens,
    fixed_points,
    intersection,
    union,
    window,
)
from app.schedules import DYADIC_KN, FACTORIAL, TWO_POW_FACTORIAL, dyadic_k
from app.spaces import OMEGA_SQUARED, TWO_COPIES, n_subsets, pair_decode, pair_encode

BOUND = 200

leaves = st.one_of(
    st.just(Squares()),
    st.integers(min_value=2, max_value=3).map(lambda b: Powers(base=b)),
    st.builds(
        lambda start, step: Progression(start=start, step=step),
        st.integers(min_value=0, max_value=5),
        st.integers(min_value=1, max_value=6),
    ),
    st.sets(st.integers(min_value=0, max_value=BOUND - 1), max_size=12).map(
        lambda s: ExplicitSet(elements=tuple(sorted(s)))
    ),
    st.builds(
        lambda start, length: IntervalSet(start=start, stop=start + length),
        st.integers(min_value=0, max_value=150),
        st.integers(min_value=0, max_value=60),
    ),
)


def _extend(children):
    return st.one_of(
        st.lists(children, min_size=1, max_size=3).map(lambda parts: union(*parts)),
        st.lists(children, min_size=1, max_size=3).map(lambda parts: intersection(*parts)),
        children.map(complement),
        st.tuples(children, children).map(lambda pair: DifferenceSet(first=pair[0], second=pair[1])),
    )


trees = st.recursive(leaves, _extend, max_leaves=6)


def test_window_examples():
    """Direct evaluation on small windows"""
    assert window(Squares(), 10).elements == (0, 1, 4, 9)
    assert window(complement(evens()), 5).elements == (1, 3)
    assert window(FsSet(generators=(1, 2, 4)), 10).elements == (1, 2, 3, 4, 5, 6, 7)
    assert window(Powers(base=2), 20).elements == (1, 2, 4, 8, 16)
    assert window(empty(), 50).elements == ()


@hypothesis_settings(max_examples=60, deadline=None)
@given(trees)
def test_window_matches_membership(tree):
    assert tree.window(BOUND) == tuple(x for x in range(BOUND) if tree.contains(x))


@hypothesis_settings(max_examples=60, deadline=None)
@given(trees, trees)
def test_de_morgan_on_windows(a, b):
    assert complement(union(a, b)).window(BOUND) == intersection(complement(a), complement(b)).window(BOUND)
    assert complement(intersection(a, b)).window(BOUND) == union(complement(a), complement(b)).window(BOUND)


@hypothesis_settings(max_examples=40, deadline=None)
@given(trees, st.integers(min_value=0, max_value=BOUND))
def test_window_is_monotone_in_the_bound(tree, smaller):
    larger = tree.window(BOUND)
    assert tree.window(smaller) == tuple(x for x in larger if x < smaller)
    assert tree.count(0, smaller) == len(tree.window(smaller))


def test_malformed_generators_are_rejected():
    with pytest.raises(MalformedExpressionError):
        Progression(start=0, step=0).window(10)
    with pytest.raises(MalformedExpressionError):
        Powers(base=1).window(10)
    with pytest.raises(MalformedExpressionError):
        IntervalSet(start=5, stop=2).window(10)


def test_pair_sets_need_a_pair_space():
    with pytest.raises(BaseSpaceMismatchError):
        Triangle().window(10)
    assert len(Triangle().window(100, OMEGA_SQUARED)) == 55


def test_block_counts_use_closed_forms():
    half = BlockRule(
        schedule=FACTORIAL,
        rule="first",
        count_rule=CountRule(kind="length-fraction", ratio=Fraction(1, 2)),
    )
    assert block_counts(half, FACTORIAL, 4)[4] == 12
    assert block_counts(empty(), FACTORIAL, 5) == [0] * 6

    tops = BlockRule(schedule=TWO_POW_FACTORIAL, rule="last", count_rule=CountRule(kind="constant", value=1))
    assert block_counts(tops, TWO_POW_FACTORIAL, 3) == [1, 1, 1, 1]


def test_block_rule_alias_and_window():
    rule = BlockRule.model_validate(
        {"kind": "block-rule", "schedule": {"kind": "factorial"}, "rule": "last", "count": {"kind": "constant", "value": 1}}
    )
    # the last point of I_0 .. I_3 = [0,1), [1,2), [2,4), [4,10)
    assert rule.window(10) == (0, 1, 3, 9)


def test_fixed_points():
    assert fixed_points(IdentityMap(), 10).elements == tuple(range(10))
    assert fixed_points(ShiftMap(by=1), 10).elements == ()
    assert fixed_points(SwapPairsMap(), 6).elements == ()


def test_fixed_points_reject_collisions():
    with pytest.raises(InjectivityViolationError) as info:
        fixed_points(TableMap(pairs=((0, 1),)), 5)
    assert info.value.pair == (0, 1)
    assert info.value.image == 1
    assert info.value.exit_code == 1


def test_annotations_are_cross_checked():
    assert check_annotations(AnnotatedSet(inner=Squares(), density=Fraction(0)))
    with pytest.raises(AnnotationMismatchError):
        check_annotations(AnnotatedSet(inner=Progression(start=0, step=2), density=Fraction(0)))


@pytest.mark.parametrize("side", [1, 2, 7, 31])
def test_pair_encoding_fills_square_windows(side):
    codes = sorted(pair_encode(i, j) for i in range(side) for j in range(side))
    assert codes == list(range(side * side))


@hypothesis_settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 9))
def test_pair_decode_inverts_encode(z):
    assert pair_encode(*pair_decode(z)) == z


@hypothesis_settings(max_examples=100, deadline=None)
@given(st.sets(st.integers(min_value=0, max_value=500), min_size=3, max_size=3))
def test_colex_codes_identify_subsets(points):
    space = n_subsets(3)
    block = tuple(sorted(points))
    assert space.decode(space.encode(block)) == block


def test_two_copies_sections():
    assert TWO_COPIES.encode((1, 5)) == 11
    assert TWO_COPIES.section_of(11) == 1
    with pytest.raises(MalformedExpressionError):
        TWO_COPIES.encode((2, 0))


def test_schedules():
    assert FACTORIAL.bounds(4) == (10, 34)
    assert FACTORIAL.locate(33) == 4
    assert FACTORIAL.locate(34) == 5
    assert [dyadic_k(n) for n in range(5)] == [0, 0, 1, 3, 5]
    assert DYADIC_KN.bounds(2) == (2, 8)
    for n in range(1, 41):
        assert 2 ** dyadic_k(n) >= n * 2 ** dyadic_k(n - 1)
