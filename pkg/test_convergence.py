"""
Ideal limits of sequences, invariance of injections and the bi-invariance certificate
"""
from fractions import Fraction

import pytest

from app.convergence import (
    PiecewiseSequence,
    ReciprocalSequence,
    SequencePiece,
    c3_diagonal,
    c3_report,
    c5_refuter_idd,
    characteristic,
    idd_biinvariance,
    ideal_limit,
    invariance_test,
    limit_report,
)
from app.errors import InjectivityViolationError, MalformedExpressionError, PreconditionError
from app.expressions import (
    AffineMap,
    AllSet,
    BlockRule,
    ComplementSet,
    ComposeMap,
    CountRule,
    EnumerationMap,
    IntervalSet,
    MonomialMap,
    Progression,
    ShiftMap,
    Squares,
    SwapPairsMap,
    TableMap,
)
from app.ideals import DensityIdeal, FinIdeal
from app.models import InvarianceClass, VerdictKind
from app.omega_sets import evens, explicit
from app.schedules import FOUR_POWER


def test_characteristic_of_a_small_set_converges_to_zero():
    report = limit_report(characteristic(Squares()), Fraction(0), DensityIdeal())
    assert report.converges is True
    assert len(report.entries) == 64
    assert {entry.level_set for entry in report.entries} == {Squares().describe()}


def test_characteristic_of_a_large_set_does_not():
    seq = characteristic(evens())
    assert limit_report(seq, Fraction(0), DensityIdeal(), effort=5).converges is False


def test_reciprocal_sequence_level_sets():
    seq = ReciprocalSequence()
    assert seq.level_set(Fraction(0), Fraction(1, 4)) == IntervalSet(start=0, stop=4)
    assert seq.level_set(Fraction(1), Fraction(1, 2)) == IntervalSet(start=1)

    assert limit_report(seq, Fraction(0), FinIdeal()).converges is True
    assert ideal_limit(seq, Fraction(1), Fraction(1, 2), FinIdeal()).kind == VerdictKind.PROVEN_OUT


def test_piecewise_level_sets_keep_first_piece_ownership():
    seq = PiecewiseSequence(
        pieces=(
            SequencePiece(on=explicit([1, 2]), value=Fraction(1)),
            SequencePiece(on=explicit([2, 3]), value=Fraction(1, 2)),
        )
    )
    assert seq.value(2) == 1
    assert seq.level_set(Fraction(0), Fraction(3, 4)).window(10) == (1, 2)
    assert seq.level_set(Fraction(0), Fraction(1, 2)).window(10) == (1, 2, 3)


def test_ideal_limit_rejects_nonpositive_epsilon():
    with pytest.raises(MalformedExpressionError):
        ideal_limit(characteristic(Squares()), Fraction(0), Fraction(0), DensityIdeal())


def test_c3_diagonal():
    family = [explicit([1, 2]), Squares()]
    report = c3_report(family, 100)
    assert report.outcome == "pass"
    assert c3_diagonal(family).value(4) == Fraction(1, 2)

    with pytest.raises(MalformedExpressionError):
        c3_report([], 100)
    with pytest.raises(PreconditionError):
        c3_diagonal([evens()], FinIdeal())


def test_monomial_maps_break_density_invariance():
    report = invariance_test(MonomialMap(power=2), DensityIdeal(), [AllSet()])
    assert report.classification == InvarianceClass.VIOLATION
    assert report.violation["direction"] == "bi-invariance"


def test_invariance_needs_injective_maps():
    with pytest.raises(InjectivityViolationError):
        invariance_test(TableMap(pairs=((0, 1),)), DensityIdeal(), [AllSet()], bound=16)


def test_linear_maps_are_bi_invariant():
    certificate = idd_biinvariance(AffineMap(scale=2), 1024)
    assert certificate.bi_invariant
    assert certificate.constant == 2
    assert certificate.image_density == Fraction(1, 2)


def test_fast_maps_are_not():
    certificate = idd_biinvariance(MonomialMap(power=2), 4096)
    assert not certificate.bi_invariant
    assert certificate.constant is None
    assert certificate.image_density == Fraction(1, 64)


def test_bi_invariance_cross_check():
    assert idd_biinvariance(ShiftMap(by=1000), 1 << 16).constant == 1001
    # most of the shifted image lies past the window
    narrow = idd_biinvariance(ShiftMap(by=1000), 1024)
    assert narrow.bi_invariant
    assert narrow.density_positive
    assert narrow.constant == 1001
    assert narrow.image_density == Fraction(3, 128)
    with pytest.raises(PreconditionError):
        idd_biinvariance(SwapPairsMap(), 64)


SLOWLY_THINNING = BlockRule(
    schedule=FOUR_POWER,
    rule="first",
    count_rule=CountRule(kind="length-fraction", ratio=Fraction(1), decay="reciprocal"),
)

INCREASING_FAMILY = (
    [ShiftMap(by=k) for k in (0, 1, 2, 5, 10, 50, 100, 250, 400, 500)]
    + [AffineMap(scale=s, offset=o) for s in range(1, 6) for o in (0, 7)]
    + [MonomialMap(power=p) for p in range(1, 6)]
    + [
        EnumerationMap(of=Progression(start=a, step=d))
        for a, d in [(0, 1), (1, 2), (0, 3), (5, 4), (2, 7), (0, 10), (3, 11), (100, 1), (7, 25), (1, 64)]
    ]
    + [EnumerationMap(of=Squares()), EnumerationMap(of=ComplementSet(inner=Squares()))]
    + [
        EnumerationMap(
            of=BlockRule(
                schedule=FOUR_POWER,
                rule=rule,
                count_rule=CountRule(kind="length-fraction", ratio=ratio, decay=decay),
            )
        )
        for rule, ratio, decay in [
            ("first", Fraction(1, 3), "none"),
            ("last", Fraction(1, 2), "none"),
            ("first", Fraction(1), "reciprocal"),
            ("last", Fraction(1), "reciprocal"),
            ("first", Fraction(2, 3), "reciprocal"),
            ("last", Fraction(1, 4), "none"),
        ]
    ]
    + [ComposeMap(outer=ShiftMap(by=k), inner=AffineMap(scale=s)) for k, s in [(1, 2), (3, 2), (1, 3), (10, 4), (100, 1), (5, 5), (2, 7)]]
)


@pytest.mark.parametrize("f", INCREASING_FAMILY, ids=lambda f: f.describe())
def test_linear_bound_and_image_density_agree(f):
    certificate = idd_biinvariance(f, 512)
    assert certificate.bi_invariant == certificate.density_positive
    if certificate.bi_invariant:
        assert certificate.image_envelope >= Fraction(1, certificate.constant)


def test_increasing_family_classification():
    assert len(INCREASING_FAMILY) == 50
    linear = INCREASING_FAMILY[:21] + INCREASING_FAMILY[25:35]
    assert all(idd_biinvariance(f, 512).bi_invariant for f in linear)
    assert not any(idd_biinvariance(MonomialMap(power=p), 512).bi_invariant for p in range(2, 6))
    assert not idd_biinvariance(EnumerationMap(of=Squares()), 512).bi_invariant


def test_slowly_thinning_enumeration_is_not_bi_invariant():
    certificate = idd_biinvariance(EnumerationMap(of=SLOWLY_THINNING), 1 << 14)
    assert not certificate.bi_invariant
    assert not certificate.density_positive
    assert certificate.ratio_max > certificate.ratio_max_half


def test_squares_at_a_million():
    certificate = idd_biinvariance(MonomialMap(power=2), 10 ** 6)
    assert not certificate.bi_invariant
    assert certificate.image_density == Fraction(1000, 10 ** 6)


def test_c5_refuter():
    report = c5_refuter_idd()
    assert report.outcome == "pass"
    assert report.data["rejected"] == []
    assert len(report.data["accepted"]) == 2
