"""
Membership oracle over the ideal catalog and its combinators
"""
from fractions import Fraction

import pytest

from app.errors import AnnotationMismatchError, BaseSpaceMismatchError, MalformedExpressionError
from app.expressions import (
    AllSet,
    AnnotatedSet,
    BlockRule,
    Column,
    Columns,
    CopySet,
    CountRule,
    DifferenceSet,
    Powers,
    Squares,
    Triangle,
)
from app.ideals import (
    DensityIdeal,
    EdFinIdeal,
    ErdosUlamIdeal,
    FarahIdeal,
    FinIdeal,
    GallaiIdeal,
    HindmanIdeal,
    RamseyIdeal,
    SummableIdeal,
    VdwIdeal,
    direct_sum,
    eu_checkpoints,
    fin_power,
    fubini_product,
    member,
    replay_witness,
    restrict,
)
from app.models import ApWitness, ColumnWitness, VerdictKind
from app.omega_sets import evens, explicit, odds, union
from app.schedules import FACTORIAL
from app.weights import UNIT, GeometricWeight, ReciprocalWeight


def test_long_progressions_leave_vdw(evens_set):
    verdict = member(VdwIdeal(), evens_set, 50)
    assert verdict.kind == VerdictKind.EVIDENCE_OUT
    assert isinstance(verdict.witness, ApWitness)
    assert verdict.witness.length == 50
    assert verdict.strength == 50
    assert replay_witness(VdwIdeal(), verdict, evens_set)


def test_fin():
    verdict = member(FinIdeal(), Powers(base=2))
    assert verdict.kind == VerdictKind.PROVEN_OUT
    assert verdict.witness.elements[:4] == [1, 2, 4, 8]
    assert replay_witness(FinIdeal(), verdict, Powers(base=2))

    finite = member(FinIdeal(), explicit([3, 5, 8]))
    assert finite.kind == VerdictKind.PROVEN_IN
    assert finite.certificate["upper_bound"] == 9


def test_edfin_sees_growing_columns():
    verdict = member(EdFinIdeal(), Triangle(), 10)
    assert verdict.kind == VerdictKind.EVIDENCE_OUT
    assert verdict.witness == ColumnWitness(column=9, count=10, side=10)

    verdict = member(EdFinIdeal(), Column(index=3), 10)
    assert verdict.kind == VerdictKind.PROVEN_OUT
    assert verdict.witness.column == 3
    assert verdict.witness.count == 10


def test_density():
    assert member(DensityIdeal(), Squares()).kind == VerdictKind.PROVEN_IN

    annotated = member(DensityIdeal(), AnnotatedSet(inner=Squares(), density=Fraction(0)))
    assert annotated.kind == VerdictKind.PROVEN_IN
    assert annotated.certificate["source"] == "annotation"

    assert member(DensityIdeal(), evens(), 5).kind == VerdictKind.PROVEN_OUT


def test_false_annotations_surface():
    with pytest.raises(AnnotationMismatchError):
        member(DensityIdeal(), AnnotatedSet(inner=evens(), density=Fraction(0)))


def test_ramsey_blocks():
    verdict = member(RamseyIdeal(n=2), AllSet(), 4)
    assert verdict.kind == VerdictKind.EVIDENCE_OUT
    assert verdict.witness.block == [0, 1, 2, 3]

    with pytest.raises(MalformedExpressionError):
        member(RamseyIdeal(n=4), AllSet())


def test_hindman():
    verdict = member(HindmanIdeal(), evens())
    assert verdict.kind == VerdictKind.EVIDENCE_OUT
    assert verdict.witness.generators == [2, 4, 8, 16, 32, 64]

    assert member(HindmanIdeal(), odds(), 2).kind == VerdictKind.EVIDENCE_IN


def test_gallai_grid():
    verdict = member(GallaiIdeal(n=2), AllSet(), 2)
    assert verdict.kind == VerdictKind.EVIDENCE_OUT
    assert (verdict.witness.v, verdict.witness.alpha) == ((0, 0), 1)


def test_farah_block_rules():
    sparse = BlockRule(schedule=FACTORIAL, rule="first", count_rule=CountRule(kind="constant", value=1))
    assert member(FarahIdeal(schedule=FACTORIAL), sparse).kind == VerdictKind.PROVEN_IN

    half = BlockRule(schedule=FACTORIAL, rule="first", count_rule=CountRule(kind="length-fraction", ratio=Fraction(1, 2)))
    assert member(FarahIdeal(schedule=FACTORIAL), half).kind == VerdictKind.PROVEN_OUT


def test_erdos_ulam_with_bounded_weight():
    assert member(ErdosUlamIdeal(weight=UNIT), Squares()).kind == VerdictKind.PROVEN_IN
    assert member(ErdosUlamIdeal(weight=UNIT), evens(), 5).kind == VerdictKind.PROVEN_OUT


def test_erdos_ulam_with_unbounded_weight():
    checkpoints = eu_checkpoints(ReciprocalWeight(), 20)
    assert len(checkpoints) == 20
    assert checkpoints[-1] == 1 << 20

    assert member(ErdosUlamIdeal(weight=ReciprocalWeight()), evens(), 20).kind == VerdictKind.EVIDENCE_OUT
    assert member(ErdosUlamIdeal(weight=ReciprocalWeight()), Squares(), 20).kind == VerdictKind.EVIDENCE_IN

def test_summable_ideals_need_divergent_weights():
    with pytest.raises(MalformedExpressionError):
        member(SummableIdeal(weight=GeometricWeight()), evens())


def test_fubini_products():
    assert member(fubini_product(FinIdeal(), FinIdeal()), Column(index=4)).kind == VerdictKind.PROVEN_IN
    assert member(fubini_product(VdwIdeal(), VdwIdeal()), Triangle()).kind == VerdictKind.PROVEN_IN
    assert member(fin_power(2), AllSet()).kind == VerdictKind.PROVEN_OUT

    with pytest.raises(MalformedExpressionError):
        fin_power(0)


def test_fubini_products_ask_the_outer_ideal_about_large_rows():
    expr = union(Columns(indices=Squares()), Triangle())

    small = member(fubini_product(DensityIdeal(), FinIdeal()), expr, 20)
    assert small.kind == VerdictKind.PROVEN_IN
    assert small.certificate["large_rows"] == Squares().describe()

    assert member(fubini_product(FinIdeal(), FinIdeal()), expr, 20).kind == VerdictKind.PROVEN_OUT
    assert member(fubini_product(DensityIdeal(), FinIdeal()), Columns(indices=evens()), 5).outside


def test_undecided_rows_are_not_exhaustion():
    verdict = member(fubini_product(DensityIdeal(), FinIdeal()), DifferenceSet(first=AllSet(), second=Triangle()), 4)
    assert verdict.kind == VerdictKind.UNKNOWN
    assert not verdict.exhausted

def test_direct_sum_reports_the_large_section():
    verdict = member(direct_sum(FinIdeal(), FinIdeal()), CopySet(index=1, inner=evens()))
    assert verdict.kind == VerdictKind.PROVEN_OUT
    assert verdict.certificate["section"] == 1


def test_restriction():
    assert member(restrict(FinIdeal(), evens()), evens()).kind == VerdictKind.PROVEN_OUT

    verdict = member(restrict(DensityIdeal(), evens()), odds(), 5)
    assert verdict.inside
    assert verdict.certificate["relative_density"] == "0"


def test_validation_errors():
    with pytest.raises(BaseSpaceMismatchError):
        member(FinIdeal(), Triangle())
    with pytest.raises(MalformedExpressionError):
        member(FinIdeal(), evens(), -1)
