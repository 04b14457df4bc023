"""Ideal descriptors, combinators and the three-valued membership oracle.

``member`` never answers ``proven-*`` without a structural reason or a finite
witness that ``replay_witness`` can re-check. Window statistics only ever give
``evidence-*`` verdicts.
"""
import logging
from fractions import Fraction
from itertools import combinations
from typing import Annotated, Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import Field

from app.config import settings
from app.detectors import (
    MAX_RAMSEY_BLOCK,
    column_profile,
    find_ap,
    find_fs_generator,
    find_grid_copy,
    fs_contained,
    longest_ap,
    ramsey_block,
)
from app.errors import (
    AnnotationMismatchError,
    BaseSpaceMismatchError,
    DegenerateWeightError,
    EffortExceededError,
    MalformedExpressionError,
)
from app.expressions import (
    AllSet,
    AnnotatedSet,
    BlockRule,
    Column,
    Columns,
    ExplicitSet,
    IntersectionSet,
    Node,
    ProductSet,
    Rows,
    Section,
    SetExpr,
    SetNode,
    Triangle,
    UnionSet,
    DifferenceSet,
)
from app.measures import density_window, farah_block_measure, weighted_sum
from app.models import (
    ApWitness,
    ColumnWitness,
    DensityWitness,
    DivergenceWitness,
    ElementsWitness,
    FsWitness,
    GridWitness,
    RamseyWitness,
    RowsWitness,
    Verdict,
    VerdictKind,
)
from app.omega_sets import check_annotations, validate
from app.schedules import GridSchedule
from app.spaces import OMEGA, OMEGA_SQUARED, OMEGA_TIMES_OMEGA, TWO_COPIES, BaseSpace, n_subsets
from app.weights import Weight, WeightNode

logger = logging.getLogger(__name__)

# Fin witnesses list at most this many elements, searched from this bound up
FIN_WITNESS_BOUND = 1024
FIN_WITNESS_SIZE = 32

# Fubini row windows stop here whatever the effort
MAX_FUBINI_ROWS = 64

# Finite-sums searches run on this much of the window
FS_WINDOW = 1024

ALL = AllSet()
EMPTY = ExplicitSet(elements=())


def _verdict(kind: VerdictKind, ideal: "IdealNode", reason: str, effort: int, **fields: Any) -> Verdict:
    if kind in (VerdictKind.EVIDENCE_IN, VerdictKind.EVIDENCE_OUT):
        fields.setdefault("strength", effort)
    return Verdict(kind=kind, ideal=ideal.describe(), reason=reason, effort=effort, **fields)


def _relabel(verdict: Verdict, ideal: "IdealNode", extra: Optional[Dict[str, Any]] = None) -> Verdict:
    certificate = dict(verdict.certificate)
    certificate.update(extra or {})
    return verdict.model_copy(update={"ideal": ideal.describe(), "certificate": certificate})


def _as_evidence(kind: VerdictKind) -> VerdictKind:
    if kind == VerdictKind.PROVEN_IN:
        return VerdictKind.EVIDENCE_IN
    if kind == VerdictKind.PROVEN_OUT:
        return VerdictKind.EVIDENCE_OUT
    return kind


def _annotation(expr: SetNode, name: str):
    return getattr(expr, name) if isinstance(expr, AnnotatedSet) else None


def _elements_witness(expr: SetNode, space: BaseSpace) -> ElementsWitness:
    bound = FIN_WITNESS_BOUND
    while True:
        codes = expr.window(bound, space)
        if codes or bound >= settings.enumeration_cap:
            return ElementsWitness(elements=list(codes[:FIN_WITNESS_SIZE]), bound=bound)
        bound = min(bound * 2, settings.enumeration_cap)


def _trend_is_vanishing(early: Fraction, late: Fraction) -> bool:
    """Late values at most half the early ones (or zero)"""
    return late == 0 or 2 * late <= early


class IdealNode(Node):
    def base_space(self) -> BaseSpace:
        return OMEGA

    def check(self):
        pass

    def judge(self, expr: SetNode, space: BaseSpace, effort: int) -> Verdict:
        raise NotImplementedError


# ------------------------------------------------------------------ catalog


class FinIdeal(IdealNode):
    kind: Literal["fin"] = "fin"

    def judge(self, expr, space, effort):
        if expr.finiteness(space) is False:
            return _verdict(
                VerdictKind.PROVEN_OUT,
                self,
                f"{expr.describe()} is infinite by construction",
                effort,
                certificate={"infinite": True},
                witness=_elements_witness(expr, space),
            )
        bound = min(settings.enumeration_cap, FIN_WITNESS_BOUND * (effort + 1))
        half = expr.count(0, bound // 2, space)
        full = expr.count(0, bound, space)
        if full > half:
            late = [x for x in expr.window(bound, space) if x >= bound // 2][:FIN_WITNESS_SIZE]
            return _verdict(
                VerdictKind.EVIDENCE_OUT,
                self,
                f"{full - half} new elements in [{bound // 2}, {bound})",
                effort,
                certificate={"window": bound, "count": full, "half_count": half},
                witness=ElementsWitness(elements=late, bound=bound),
            )
        return _verdict(
            VerdictKind.EVIDENCE_IN,
            self,
            f"no elements in [{bound // 2}, {bound})",
            effort,
            certificate={"window": bound, "count": full},
        )

    def describe(self):
        return "Fin"


class FinOplusFullIdeal(IdealNode):
    """A ⊆ {0,1}×ω is small when its copy 1 is finite"""

    kind: Literal["fin-oplus-full"] = "fin-oplus-full"

    def base_space(self):
        return TWO_COPIES

    def judge(self, expr, space, effort):
        verdict = member(FinIdeal(), Section(index=1, of=expr, space=TWO_COPIES), effort)
        return _relabel(verdict, self, {"section": 1})

    def describe(self):
        return "Fin⊕P(ω)"


def _infinite_column(expr: SetNode) -> Optional[int]:
    node = expr.inner if isinstance(expr, AnnotatedSet) else expr
    if isinstance(node, AllSet):
        return 0
    if isinstance(node, Column) and node.inner.finiteness(OMEGA) is False:
        return node.index
    if isinstance(node, Columns):
        first = node.indices.window(FIN_WITNESS_BOUND, OMEGA)
        return first[0] if first else None
    if isinstance(node, ProductSet) and node.second.finiteness(OMEGA) is False:
        first = node.first.window(FIN_WITNESS_BOUND, OMEGA)
        return first[0] if first else None
    return None


class EdFinIdeal(IdealNode):
    """Sets with a uniform bound on their column sizes"""

    kind: Literal["edfin"] = "edfin"

    def base_space(self):
        return OMEGA_SQUARED

    def judge(self, expr, space, effort):
        bound = _annotation(expr, "column_bound")
        if bound is not None:
            return _verdict(
                VerdictKind.PROVEN_IN,
                self,
                f"every column holds at most {bound} points",
                effort,
                certificate={"column_bound": bound, "checked_side": settings.annotation_side},
            )
        side = max(effort, 4)
        column = _infinite_column(expr)
        if column is not None:
            side = max(side, column + 1)
            count = len(Section(index=column, of=expr, space=space).window(side, OMEGA))
            return _verdict(
                VerdictKind.PROVEN_OUT,
                self,
                f"column {column} is infinite",
                effort,
                certificate={"infinite_column": column},
                witness=ColumnWitness(column=column, count=count, side=side),
            )
        small = column_profile(expr.window(space.bound_for_side(side // 2), space), space)
        full = column_profile(expr.window(space.bound_for_side(side), space), space)
        if full.max > small.max:
            return _verdict(
                VerdictKind.EVIDENCE_OUT,
                self,
                f"column {full.argmax} holds {full.max} points in the side-{side} box",
                effort,
                certificate={"side": side, "max": full.max, "half_side_max": small.max},
                witness=ColumnWitness(column=full.argmax, count=full.max, side=side),
            )
        return _verdict(
            VerdictKind.EVIDENCE_IN,
            self,
            f"column sizes stay at {full.max} up to side {side}",
            effort,
            certificate={"side": side, "max": full.max},
        )

    def describe(self):
        return "ED_fin"


class RamseyIdeal(IdealNode):
    """Sets containing no [B]^n for an infinite B"""

    kind: Literal["ramsey"] = "ramsey"
    n: int = 2

    def check(self):
        if self.n not in (2, 3):
            raise MalformedExpressionError(f"Ramsey ideals are supported for n in (2, 3), got {self.n}", position="n")

    def base_space(self):
        return n_subsets(self.n)

    def judge(self, expr, space, effort):
        m = min(max(effort, self.n + 1), MAX_RAMSEY_BLOCK)
        side = max(4 * m, 16)
        found = ramsey_block(expr.window(space.bound_for_side(side), space), self.n, m)
        if found is not None:
            return _verdict(
                VerdictKind.EVIDENCE_OUT,
                self,
                f"[B]^{self.n} ⊆ A for B = {found.block}",
                effort,
                certificate={"side": side, "block_size": m},
                witness=found,
            )
        return _verdict(
            VerdictKind.EVIDENCE_IN,
            self,
            f"no homogeneous block of size {m} below {side}",
            effort,
            certificate={"side": side, "block_size": m},
        )

    def describe(self):
        return f"R_{self.n}"


class VdwIdeal(IdealNode):
    """Sets without arbitrarily long arithmetic progressions"""

    kind: Literal["vdw"] = "vdw"

    def judge(self, expr, space, effort):
        ap_bound = _annotation(expr, "ap_bound")
        if ap_bound is not None:
            return _verdict(
                VerdictKind.PROVEN_IN,
                self,
                f"no arithmetic progression longer than {ap_bound}",
                effort,
                certificate={"ap_bound": ap_bound, "checked_window": settings.detector_window},
            )
        length = max(effort, 3)
        bound = min(max(64, length * length), settings.detector_window)
        codes = expr.window(bound, space)
        found = find_ap(codes, length)
        if found is not None:
            return _verdict(
                VerdictKind.EVIDENCE_OUT,
                self,
                f"AP of length {length} from {found.start} with step {found.step}",
                effort,
                certificate={"window": bound},
                witness=found,
            )
        longest, _ = longest_ap(codes)
        return _verdict(
            VerdictKind.EVIDENCE_IN,
            self,
            f"longest AP below {bound} has length {longest}",
            effort,
            certificate={"window": bound, "longest": longest},
        )

    def describe(self):
        return "W"


def _fs_judge(ideal: IdealNode, expr: SetNode, space: BaseSpace, effort: int, size: int) -> Verdict:
    bound = min(settings.detector_window, FS_WINDOW)
    found = find_fs_generator(expr.window(bound, space), size, bound)
    if found is not None:
        return _verdict(
            VerdictKind.EVIDENCE_OUT,
            ideal,
            f"FS({found.generators}) ⊆ A",
            effort,
            certificate={"window": bound, "size": size},
            witness=found,
        )
    return _verdict(
        VerdictKind.EVIDENCE_IN,
        ideal,
        f"no {size} generators with all finite sums in A below {bound}",
        effort,
        certificate={"window": bound, "size": size},
    )


class HindmanIdeal(IdealNode):
    kind: Literal["hindman"] = "hindman"

    def judge(self, expr, space, effort):
        return _fs_judge(self, expr, space, effort, min(max(effort, 2), 6))

    def describe(self):
        return "H"


class FolkmanIdeal(IdealNode):
    """Sets missing FS(B) for every B of some fixed size"""

    kind: Literal["folkman"] = "folkman"

    def judge(self, expr, space, effort):
        verdict = _fs_judge(self, expr, space, effort, min(max(effort, 2), 6))
        return _relabel(verdict, self, {"homogeneity": "open"})

    def describe(self):
        return "F"


class GallaiIdeal(IdealNode):
    """Sets missing v + α·{1..k}^n for some k"""

    kind: Literal["gallai"] = "gallai"
    n: Literal[1, 2] = 2

    def base_space(self):
        return OMEGA if self.n == 1 else OMEGA_SQUARED

    def judge(self, expr, space, effort):
        k = min(max(effort, 2), 8)
        side = min(max(4 * k, 16), 64)
        codes = expr.window(space.bound_for_side(side), space)
        points = [(c,) if self.n == 1 else space.decode(c) for c in codes]
        found = find_grid_copy(points, k)
        if found is not None:
            return _verdict(
                VerdictKind.EVIDENCE_OUT,
                self,
                f"grid {found.v} + {found.alpha}·{{1..{k}}}^{self.n} ⊆ A",
                effort,
                certificate={"side": side, "k": k},
                witness=found,
            )
        return _verdict(
            VerdictKind.EVIDENCE_IN,
            self,
            f"no grid of side {k} inside the side-{side} box",
            effort,
            certificate={"side": side, "k": k},
        )

    def describe(self):
        return f"G_{self.n}"


def _density_bound(effort: int) -> int:
    return 1 << (10 + min(effort, 10))


def _ratio_at(expr: SetNode, n: int, space: BaseSpace) -> Optional[str]:
    try:
        return str(Fraction(expr.count(0, n, space), n))
    except EffortExceededError:
        return None


class DensityIdeal(IdealNode):
    """I_d: sets of asymptotic density zero"""

    kind: Literal["density"] = "density"

    def judge(self, expr, space, effort):
        d = expr.known_density(space)
        source = "annotation" if _annotation(expr, "density") is not None else "structure"
        if d == 0:
            window = settings.annotation_window
            return _verdict(
                VerdictKind.PROVEN_IN,
                self,
                f"density 0 by {source}",
                effort,
                certificate={"density": "0", "source": source, "window": window, "ratio": _ratio_at(expr, window, space)},
            )
        bound = _density_bound(effort)
        estimate = density_window(expr, bound, space)
        if d is not None:
            return _verdict(
                VerdictKind.PROVEN_OUT,
                self,
                f"density {d} by {source}",
                effort,
                certificate={"density": str(d), "source": source},
                witness=DensityWitness(checkpoints=estimate.checkpoints[-4:]),
            )
        quarter = Fraction(expr.count(0, bound // 4, space), bound // 4)
        certificate = {"window": bound, "ratio": str(estimate.ratio), "quarter_ratio": str(quarter)}
        if _trend_is_vanishing(quarter, estimate.ratio):
            return _verdict(
                VerdictKind.EVIDENCE_IN,
                self,
                f"window density {estimate.ratio} at {bound} is falling",
                effort,
                certificate=certificate,
            )
        return _verdict(
            VerdictKind.EVIDENCE_OUT,
            self,
            f"window density {estimate.ratio} at {bound} is not falling",
            effort,
            certificate=certificate,
            witness=DensityWitness(checkpoints=estimate.checkpoints[-4:]),
        )

    def describe(self):
        return "I_d"


def _divergent_weight(weight: WeightNode, what: str):
    weight.check()
    if weight.converges() is True:
        raise MalformedExpressionError(
            f"Σ {weight.describe()} converges, so {what} would contain every set", position="weight"
        )


class SummableIdeal(IdealNode):
    """I_(w): sets whose weight sum converges"""

    kind: Literal["summable"] = "summable"
    weight: Weight

    def check(self):
        _divergent_weight(self.weight, "the summable ideal")

    def _check_claim(self, expr: SetNode, claim: Fraction, space: BaseSpace) -> Fraction:
        partial = weighted_sum(self.weight, expr, settings.annotation_window, space)
        if partial.lower > claim:
            raise AnnotationMismatchError(
                f"weight sum bound {claim} claimed but the partial sum to {settings.annotation_window} exceeds {partial.lower}",
                claim=str(claim),
                lower=str(partial.lower),
            )
        return partial.lower

    def judge(self, expr, space, effort):
        claim = _annotation(expr, "weight_sum_bound")
        if claim is not None:
            lower = self._check_claim(expr, claim, space)
            return _verdict(
                VerdictKind.PROVEN_IN,
                self,
                f"weight sum bounded by {claim}",
                effort,
                certificate={"weight_sum_bound": str(claim), "window": settings.annotation_window, "partial": str(lower)},
            )
        threshold = settings.divergence_threshold * self.weight.scale()
        sums = []
        for k in range(10, 10 + max(min(effort, 50), 4) + 1):
            try:
                partial = weighted_sum(self.weight, expr, 1 << k, space)
            except EffortExceededError:
                if len(sums) < 5:
                    raise
                break
            sums.append(partial)
            if partial.lower > threshold:
                return _verdict(
                    VerdictKind.EVIDENCE_OUT,
                    self,
                    f"partial sum passes {threshold} by {1 << k}",
                    effort,
                    certificate={"method": partial.method},
                    witness=DivergenceWitness(terms=1 << k, lower=partial.lower, threshold=threshold),
                )
        increments = [(b.lower - a.upper, b.upper - a.lower) for a, b in zip(sums, sums[1:])]
        early, late = increments[-4], increments[-1]
        certificate = {
            "terms": sums[-1].terms,
            "lower": str(sums[-1].lower),
            "upper": str(sums[-1].upper),
            "last_octave": [str(late[0]), str(late[1])],
        }
        if 2 * late[0] >= early[1]:
            return _verdict(
                VerdictKind.EVIDENCE_OUT,
                self,
                "octave increments of the weight sum are not decaying",
                effort,
                certificate=certificate,
            )
        return _verdict(
            VerdictKind.EVIDENCE_IN,
            self,
            "octave increments of the weight sum are decaying",
            effort,
            certificate=certificate,
        )

    def describe(self):
        return f"I_({self.weight.describe()})"


def eu_bounds(weight: WeightNode, expr: SetNode, n: int, space: BaseSpace = OMEGA) -> Tuple[Fraction, Fraction]:
    """Rational bounds on A_w[0, n) / ω_w[0, n)"""
    numerator = weighted_sum(weight, expr, n, space)
    denominator = weighted_sum(weight, ALL, n, space)
    if denominator.lower == 0:
        raise DegenerateWeightError(f"{weight.describe()} has total weight 0 below {n}", n=n)
    return numerator.lower / denominator.upper, numerator.upper / denominator.lower


def eu_checkpoints(weight: WeightNode, effort: int) -> List[int]:
    """Right after the first point and at the end of each weight block, or dyadic"""
    schedule = weight.block_schedule()
    if schedule is None:
        return [1 << k for k in range(1, _density_bound(effort).bit_length())]
    points = []
    for n in range(1, min(max(effort, 2), 8) + 1):
        points.extend([schedule.start(n) + 1, schedule.end(n)])
    return points


class ErdosUlamIdeal(IdealNode):
    """EU_w: sets whose normalized weight tends to zero"""

    kind: Literal["erdos-ulam"] = "erdos-ulam"
    weight: Weight

    def check(self):
        _divergent_weight(self.weight, "the Erdős–Ulam ideal")

    def judge(self, expr, space, effort):
        limits = self.weight.bounds()
        if limits is not None:
            d = expr.known_density(space)
            certificate = {"bounded_weight": [str(limits[0]), str(limits[1])]}
            if d == 0:
                return _verdict(
                    VerdictKind.PROVEN_IN,
                    self,
                    "bounded weight and density 0",
                    effort,
                    certificate={**certificate, "density": "0"},
                )
            if d is not None:
                estimate = density_window(expr, _density_bound(effort), space)
                return _verdict(
                    VerdictKind.PROVEN_OUT,
                    self,
                    f"bounded weight and density {d}",
                    effort,
                    certificate={**certificate, "density": str(d)},
                    witness=DensityWitness(checkpoints=estimate.checkpoints[-4:]),
                )
        ratios = []
        for n in eu_checkpoints(self.weight, effort):
            try:
                lower, upper = eu_bounds(self.weight, expr, n, space)
            except EffortExceededError:
                if len(ratios) < 2:
                    raise
                break
            ratios.append((n, lower, upper))
        half = len(ratios) // 2
        early = max(upper for _, _, upper in ratios[:half])
        late = max(upper for _, _, upper in ratios[half:])
        certificate = {"checkpoints": len(ratios), "early_max": str(early), "late_max": str(late)}
        if _trend_is_vanishing(early, late):
            return _verdict(
                VerdictKind.EVIDENCE_IN, self, "normalized weights are falling", effort, certificate=certificate
            )
        return _verdict(
            VerdictKind.EVIDENCE_OUT,
            self,
            "normalized weights are not falling",
            effort,
            certificate=certificate,
            witness=DensityWitness(checkpoints=[(n, lower) for n, lower, _ in ratios[half:]]),
        )

    def describe(self):
        return f"EU({self.weight.describe()})"


class FarahIdeal(IdealNode):
    """Sets with φ_n(A) = |A ∩ I_n| / |I_n| → 0"""

    kind: Literal["farah"] = "farah"
    schedule: GridSchedule

    def _measures(self, expr: SetNode, space: BaseSpace, top: int) -> List[Tuple[int, Fraction]]:
        values = []
        for n in range(top + 1):
            try:
                values.append((n, farah_block_measure(self.schedule, expr, n, space)))
            except EffortExceededError:
                if len(values) < 4:
                    raise
                break
        return values

    def judge(self, expr, space, effort):
        inner = expr.inner if isinstance(expr, AnnotatedSet) else expr
        if isinstance(inner, BlockRule) and inner.schedule == self.schedule:
            rule = inner.count_rule
            if inner.rule in ("first", "last", "arithmetic") and rule.kind == "constant" and self.schedule.is_growing():
                return _verdict(
                    VerdictKind.PROVEN_IN,
                    self,
                    f"{rule.value} points per block of unbounded length",
                    effort,
                    certificate={"per_block": rule.value},
                )
            full_blocks = inner.rule == "all" and (inner.indices is None or inner.indices.finiteness(OMEGA) is False)
            fixed_share = (
                inner.rule in ("first", "last")
                and inner.indices is None
                and rule.kind == "length-fraction"
                and rule.decay == "none"
                and rule.ratio > 0
            )
            if full_blocks or fixed_share:
                active = [n for n in range(64) if inner.active(n)][:4]
                return _verdict(
                    VerdictKind.PROVEN_OUT,
                    self,
                    "a fixed share of infinitely many blocks",
                    effort,
                    certificate={"rule": inner.rule, "ratio": str(rule.ratio) if fixed_share else "1"},
                    witness=DensityWitness(
                        checkpoints=[(n, farah_block_measure(self.schedule, expr, n, space)) for n in active]
                    ),
                )
        values = self._measures(expr, space, min(max(effort, 4), 9))
        half = len(values) // 2
        early = max(v for _, v in values[:half])
        late = max(v for _, v in values[half:])
        certificate = {"blocks": len(values), "early_max": str(early), "late_max": str(late)}
        if _trend_is_vanishing(early, late):
            return _verdict(VerdictKind.EVIDENCE_IN, self, "block measures are falling", effort, certificate=certificate)
        return _verdict(
            VerdictKind.EVIDENCE_OUT,
            self,
            "block measures are not falling",
            effort,
            certificate=certificate,
            witness=DensityWitness(checkpoints=values[half:]),
        )

    def describe(self):
        return f"Z({self.schedule.describe()})"


# ---------------------------------------------------------------- combinators


def _restricted(expr: SetNode, carrier: SetNode) -> SetNode:
    if expr == carrier or isinstance(carrier, AllSet):
        return expr
    return IntersectionSet(parts=(expr, carrier))


class RestrictionIdeal(IdealNode):
    """I|X = {A ∩ X : A ∈ I}"""

    kind: Literal["restriction"] = "restriction"
    ideal: "IdealExpr"
    carrier: SetExpr

    def base_space(self):
        return self.ideal.base_space()

    def check(self):
        self.ideal.check()
        validate(self.carrier, self.ideal.base_space())

    def judge(self, expr, space, effort):
        subject = _restricted(expr, self.carrier)
        verdict = member(self.ideal, subject, effort)
        extra: Dict[str, Any] = {"carrier": self.carrier.describe()}
        if isinstance(self.ideal, DensityIdeal):
            bound = _density_bound(effort)
            try:
                total = self.carrier.count(0, bound, space)
                if total:
                    extra["relative_density"] = str(Fraction(subject.count(0, bound, space), total))
                    extra["relative_window"] = bound
            except EffortExceededError:
                logger.debug(f"⚠️ No relative density for {subject.describe()} below {bound}")
        return _relabel(verdict, self, extra)

    def describe(self):
        return f"{self.ideal.describe()}|{self.carrier.describe()}"


def _combine(ideal: IdealNode, verdicts: Sequence[Verdict], effort: int) -> Verdict:
    for wanted in (VerdictKind.PROVEN_OUT, VerdictKind.EVIDENCE_OUT, VerdictKind.UNKNOWN):
        for i, verdict in enumerate(verdicts):
            if verdict.kind == wanted:
                return _relabel(verdict, ideal, {"section": i})
    sections = [v.kind.value for v in verdicts]
    if all(v.kind == VerdictKind.PROVEN_IN for v in verdicts):
        return _verdict(VerdictKind.PROVEN_IN, ideal, "both sections are small", effort, certificate={"sections": sections})
    return _verdict(
        VerdictKind.EVIDENCE_IN,
        ideal,
        "both sections look small",
        effort,
        certificate={"sections": sections},
        strength=min(v.strength for v in verdicts),
    )


class DirectSumIdeal(IdealNode):
    """I ⊕ J on {0,1}×ω"""

    kind: Literal["direct-sum"] = "direct-sum"
    first: "IdealExpr"
    second: "IdealExpr"

    def base_space(self):
        return TWO_COPIES

    def check(self):
        for part in (self.first, self.second):
            part.check()
            if part.base_space() != OMEGA:
                raise BaseSpaceMismatchError(
                    f"direct sums take ideals on omega, not on {part.base_space().label()}",
                    space=part.base_space().label(),
                )

    def judge(self, expr, space, effort):
        verdicts = [
            member(part, Section(index=i, of=expr, space=TWO_COPIES), effort)
            for i, part in enumerate((self.first, self.second))
        ]
        return _combine(self, verdicts, effort)

    def describe(self):
        return f"{self.first.describe()}⊕{self.second.describe()}"


def _uniform_rows(expr: SetNode) -> Optional[Tuple[SetNode, SetNode]]:
    """(row indices, common section) for sets whose nonempty sections are all equal"""
    node = expr.inner if isinstance(expr, AnnotatedSet) else expr
    if isinstance(node, ProductSet):
        return node.first, node.second
    if isinstance(node, Columns):
        return node.indices, ALL
    if isinstance(node, Rows):
        return ALL, node.indices
    if isinstance(node, AllSet):
        return ALL, ALL
    return None


def _row_support(expr: SetNode, space: BaseSpace) -> Optional[SetNode]:
    """A set of row indices outside of which every section is empty"""
    if isinstance(expr, AnnotatedSet):
        return _row_support(expr.inner, space)
    if isinstance(expr, Column):
        return ExplicitSet(elements=(expr.index,))
    if isinstance(expr, Columns):
        return expr.indices
    if isinstance(expr, ProductSet):
        return expr.first
    if isinstance(expr, ExplicitSet):
        codes, _ = expr.codes(space)
        return ExplicitSet(elements=tuple(sorted({space.decode(z)[0] for z in codes})))
    if isinstance(expr, UnionSet):
        parts = [_row_support(part, space) for part in expr.parts]
        return None if any(p is None for p in parts) else UnionSet(parts=tuple(parts))
    if isinstance(expr, IntersectionSet):
        return next((s for s in (_row_support(p, space) for p in expr.parts) if s is not None), None)
    if isinstance(expr, DifferenceSet):
        return _row_support(expr.first, space)
    return None


class FubiniIdeal(IdealNode):
    """{A : {i : A_i ∉ J_i} ∈ I} on ω×ω"""

    outer: "IdealExpr"

    def inner_for(self, i: int) -> IdealNode:
        raise NotImplementedError

    def uniform_inner(self) -> Optional[IdealNode]:
        return None

    def large_rows(self, expr: SetNode, effort: int) -> Optional[Tuple[SetNode, bool]]:
        """{i : A_i not in the inner ideal} as a set expression, and whether that set is proven

        Unions split row by row, since a section of A ∪ B is large iff one of its parts is.
        """
        node = expr.inner if isinstance(expr, AnnotatedSet) else expr
        if isinstance(node, Triangle):
            return EMPTY, True
        if isinstance(node, UnionSet):
            parts = [self.large_rows(part, effort) for part in node.parts]
            if any(part is None for part in parts):
                return None
            rows = [part_rows for part_rows, _ in parts if part_rows != EMPTY]
            proven = all(part_proven for _, part_proven in parts)
            if not rows:
                return EMPTY, proven
            return (rows[0] if len(rows) == 1 else UnionSet(parts=tuple(rows))), proven
        uniform = _uniform_rows(node)
        if uniform is None:
            return None
        rows, section = uniform
        verdict = member(self.uniform_inner(), section, effort)
        if verdict.kind == VerdictKind.UNKNOWN:
            return None
        return (rows if verdict.outside else EMPTY), verdict.proven

    def base_space(self):
        return OMEGA_TIMES_OMEGA

    def check(self):
        self.outer.check()
        if self.outer.base_space() != OMEGA:
            raise BaseSpaceMismatchError(
                f"the outer ideal must live on omega, not on {self.outer.base_space().label()}",
                space=self.outer.base_space().label(),
            )

    def judge(self, expr, space, effort):
        inner = self.uniform_inner()
        uniform = _uniform_rows(expr) if inner is not None else None
        if uniform is not None:
            rows, section = uniform
            row_verdict = member(inner, section, effort)
            extra = {"rows": rows.describe(), "section_verdict": row_verdict.kind.value, "subject": "rows"}
            if row_verdict.kind == VerdictKind.PROVEN_IN:
                return _verdict(
                    VerdictKind.PROVEN_IN, self, "every section is small", effort, certificate=extra
                )
            outer = member(self.outer, rows, effort)
            if row_verdict.kind == VerdictKind.PROVEN_OUT:
                return _relabel(outer, self, extra)
            if row_verdict.kind == VerdictKind.UNKNOWN:
                return _verdict(VerdictKind.UNKNOWN, self, "section verdict unknown", effort, certificate=extra)
            if row_verdict.inside:
                return _verdict(VerdictKind.EVIDENCE_IN, self, "every section looks small", effort, certificate=extra)
            return _relabel(outer.model_copy(update={"kind": _as_evidence(outer.kind)}), self, extra)

        large = self.large_rows(expr, effort) if inner is not None else None
        if large is not None:
            rows, proven = large
            outer = member(self.outer, rows, effort)
            kind = outer.kind if proven else _as_evidence(outer.kind)
            return _relabel(
                outer.model_copy(update={"kind": kind}),
                self,
                {"large_rows": rows.describe(), "subject": "large rows"},
            )

        support = _row_support(expr, space)
        if support is not None:
            outer = member(self.outer, support, effort)
            if outer.kind == VerdictKind.PROVEN_IN:
                return _verdict(
                    VerdictKind.PROVEN_IN,
                    self,
                    f"nonempty sections lie in rows {support.describe()}, a small set",
                    effort,
                    certificate={"row_support": support.describe()},
                )

        limit = min(max(effort, 1), MAX_FUBINI_ROWS)
        bad, unknown, seen = [], [], []
        for i in range(limit):
            verdict = member(self.inner_for(i), Section(index=i, of=expr, space=space), effort)
            seen.append((i, verdict.kind.value))
            if verdict.outside:
                bad.append(i)
            elif verdict.kind == VerdictKind.UNKNOWN:
                unknown.append(i)
        certificate = {"rows_inspected": limit, "bad_rows": bad, "unknown_rows": unknown}
        late = any(i >= limit // 2 for i in bad)
        if late and not isinstance(self.outer, FinIdeal):
            # a finite row window is always small in the outer ideal
            return _verdict(
                VerdictKind.UNKNOWN,
                self,
                f"large sections at rows {bad} cannot be placed in {self.outer.describe()} from a window",
                effort,
                certificate=certificate,
            )
        if late:
            return _verdict(
                VerdictKind.EVIDENCE_OUT,
                self,
                f"{len(bad)} of the first {limit} sections are large",
                effort,
                certificate=certificate,
                witness=RowsWitness(rows=[(i, kind) for i, kind in seen if i in bad]),
            )
        if unknown:
            return _verdict(VerdictKind.UNKNOWN, self, "some sections are undecided", effort, certificate=certificate)
        return _verdict(
            VerdictKind.EVIDENCE_IN,
            self,
            f"large sections only among the first {limit // 2} rows",
            effort,
            certificate=certificate,
        )


class FubiniProductIdeal(FubiniIdeal):
    kind: Literal["fubini-product"] = "fubini-product"
    inner: "IdealExpr"

    def inner_for(self, i):
        return self.inner

    def uniform_inner(self):
        return self.inner

    def describe(self):
        return f"{self.outer.describe()}⊗{self.inner.describe()}"


class FubiniSumIdeal(FubiniIdeal):
    """Row i carries inners[i]; rows past the list carry default"""

    kind: Literal["fubini-sum"] = "fubini-sum"
    inners: Tuple["IdealExpr", ...] = ()
    default: "IdealExpr" = Field(default_factory=FinIdeal)

    def inner_for(self, i):
        return self.inners[i] if i < len(self.inners) else self.default

    def uniform_inner(self):
        return None if self.inners else self.default

    def describe(self):
        rows = ", ".join(inner.describe() for inner in self.inners)
        return f"Σ_{self.outer.describe()}({rows}; {self.default.describe()})"


IdealExpr = Annotated[
    Union[
        FinIdeal,
        FinOplusFullIdeal,
        EdFinIdeal,
        RamseyIdeal,
        VdwIdeal,
        HindmanIdeal,
        FolkmanIdeal,
        GallaiIdeal,
        DensityIdeal,
        SummableIdeal,
        ErdosUlamIdeal,
        FarahIdeal,
        RestrictionIdeal,
        DirectSumIdeal,
        FubiniProductIdeal,
        FubiniSumIdeal,
    ],
    Field(discriminator="kind"),
]

for _model in (RestrictionIdeal, DirectSumIdeal, FubiniIdeal, FubiniProductIdeal, FubiniSumIdeal):
    _model.model_rebuild()


# ------------------------------------------------------------------- oracle


def member(ideal: IdealNode, expr: SetNode, effort: Optional[int] = None) -> Verdict:
    """Three-valued membership of expr in ideal"""
    effort = settings.effort_or_default(effort)
    if effort < 0:
        raise MalformedExpressionError(f"effort must be >= 0, got {effort}", position="effort")
    ideal.check()
    space = ideal.base_space()
    validate(expr, space)
    check_annotations(expr, space)
    if expr.finiteness(space) is True:
        return _verdict(
            VerdictKind.PROVEN_IN,
            ideal,
            "finite set",
            effort,
            certificate={"finite": True, "upper_bound": expr.upper_bound(space)},
        )
    try:
        verdict = ideal.judge(expr, space, effort)
    except EffortExceededError as e:
        logger.info(f"⏳ {ideal.describe()} ran out of effort on {expr.describe()}: {e.message}")
        return _verdict(
            VerdictKind.UNKNOWN, ideal, f"effort exhausted: {e.message}", effort, certificate=e.details, exhausted=True
        )
    logger.debug(f"⚖️ {expr.describe()} in {ideal.describe()}: {verdict.kind.value}")
    return verdict


def restrict(ideal: IdealNode, carrier: SetNode) -> RestrictionIdeal:
    return RestrictionIdeal(ideal=ideal, carrier=carrier)


def direct_sum(first: IdealNode, second: IdealNode) -> DirectSumIdeal:
    return DirectSumIdeal(first=first, second=second)


def fubini_product(outer: IdealNode, inner: IdealNode) -> FubiniProductIdeal:
    return FubiniProductIdeal(outer=outer, inner=inner)


def fubini_sum(outer: IdealNode, inners: Sequence[IdealNode], default: Optional[IdealNode] = None) -> FubiniSumIdeal:
    return FubiniSumIdeal(outer=outer, inners=tuple(inners), default=default or FinIdeal())


def fin_power(n: int) -> IdealNode:
    """Fin^1 = Fin, Fin^(n+1) = Fin ⊗ Fin^n"""
    if n < 1:
        raise MalformedExpressionError(f"Fin^n needs n >= 1, got {n}", position="n")
    ideal: IdealNode = FinIdeal()
    for _ in range(n - 1):
        ideal = FubiniProductIdeal(outer=FinIdeal(), inner=ideal)
    return ideal


# ------------------------------------------------------------------- replay


def _witness_subject(ideal: IdealNode, verdict: Verdict, expr: SetNode) -> Tuple[IdealNode, SetNode, BaseSpace]:
    """The leaf ideal, set and space a witness speaks about"""
    if isinstance(ideal, RestrictionIdeal):
        return _witness_subject(ideal.ideal, verdict, _restricted(expr, ideal.carrier))
    if isinstance(ideal, FinOplusFullIdeal):
        return FinIdeal(), Section(index=1, of=expr, space=TWO_COPIES), OMEGA
    if isinstance(ideal, DirectSumIdeal):
        i = verdict.certificate.get("section", 0)
        part = ideal.first if i == 0 else ideal.second
        return _witness_subject(part, verdict, Section(index=i, of=expr, space=TWO_COPIES))
    if isinstance(ideal, FubiniIdeal) and verdict.certificate.get("subject") == "rows":
        uniform = _uniform_rows(expr)
        if uniform is not None:
            return _witness_subject(ideal.outer, verdict, uniform[0])
    return ideal, expr, ideal.base_space()


def replay_witness(ideal: IdealNode, verdict: Verdict, expr: SetNode) -> bool:
    """Re-check the finite witness of an outside verdict straight from the set"""
    witness = verdict.witness
    if witness is None:
        return False
    leaf, subject, space = _witness_subject(ideal, verdict, expr)
    if isinstance(witness, ElementsWitness):
        return all(x < witness.bound and subject.contains(x, space) for x in witness.elements)
    if isinstance(witness, ApWitness):
        return all(subject.contains(t, space) for t in witness.terms())
    if isinstance(witness, GridWitness):
        return all(subject.contains(space.encode(p), space) for p in witness.points())
    if isinstance(witness, FsWitness):
        contained, sums = fs_contained(witness.generators, subject, space)
        return contained and list(sums) == witness.sums
    if isinstance(witness, RamseyWitness):
        return all(
            subject.contains(space.encode(block), space) for block in combinations(witness.block, witness.n)
        )
    if isinstance(witness, ColumnWitness):
        profile = column_profile(subject.window(space.bound_for_side(witness.side), space), space)
        return profile.counts.get(witness.column, 0) >= witness.count
    if isinstance(witness, DivergenceWitness):
        if not isinstance(leaf, SummableIdeal):
            return False
        partial = weighted_sum(leaf.weight, subject, witness.terms, space)
        return partial.lower >= witness.lower > witness.threshold
    if isinstance(witness, DensityWitness):
        if isinstance(leaf, FarahIdeal):
            return all(farah_block_measure(leaf.schedule, subject, n, space) == r for n, r in witness.checkpoints)
        if isinstance(leaf, ErdosUlamIdeal) and leaf.weight.bounds() is None:
            return all(eu_bounds(leaf.weight, subject, n, space)[0] == r for n, r in witness.checkpoints)
        return all(Fraction(subject.count(0, n, space), n) == r for n, r in witness.checkpoints)
    if isinstance(witness, RowsWitness) and isinstance(leaf, FubiniIdeal):
        return all(
            member(leaf.inner_for(i), Section(index=i, of=subject, space=space), verdict.effort).outside
            for i, _ in witness.rows
        )
    return False
