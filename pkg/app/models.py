from enum import Enum
from fractions import Fraction
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.arith import Payload, Rational
from app.expressions import InjectionExpr, SetExpr
from app.spaces import OMEGA, BaseSpace


class VerdictKind(str, Enum):
    PROVEN_IN = "proven-in"
    PROVEN_OUT = "proven-out"
    EVIDENCE_IN = "evidence-in"
    EVIDENCE_OUT = "evidence-out"
    UNKNOWN = "unknown"


class ElementsWitness(BaseModel):
    kind: Literal["elements"] = "elements"
    elements: List[int]
    bound: int


class ApWitness(BaseModel):
    kind: Literal["ap"] = "ap"
    start: int
    step: int
    length: int

    def terms(self) -> List[int]:
        return [self.start + i * self.step for i in range(self.length)]


class GridWitness(BaseModel):
    kind: Literal["grid"] = "grid"
    v: Tuple[int, ...]
    alpha: int
    k: int

    def points(self) -> List[Tuple[int, ...]]:
        points = [()]
        for coordinate in self.v:
            points = [p + (coordinate + self.alpha * t,) for p in points for t in range(1, self.k + 1)]
        return points


class FsWitness(BaseModel):
    kind: Literal["fs"] = "fs"
    generators: List[int]
    sums: List[int]


class RamseyWitness(BaseModel):
    kind: Literal["ramsey"] = "ramsey"
    block: List[int]
    n: int


class ColumnWitness(BaseModel):
    kind: Literal["column"] = "column"
    column: int
    count: int
    side: int


class DivergenceWitness(BaseModel):
    kind: Literal["divergence"] = "divergence"
    terms: int
    lower: Rational
    threshold: Rational


class DensityWitness(BaseModel):
    kind: Literal["density"] = "density"
    checkpoints: List[Tuple[int, Rational]]


class RowsWitness(BaseModel):
    kind: Literal["rows"] = "rows"
    rows: List[Tuple[int, str]]


Witness = Annotated[
    Union[
        ElementsWitness,
        ApWitness,
        GridWitness,
        FsWitness,
        RamseyWitness,
        ColumnWitness,
        DivergenceWitness,
        DensityWitness,
        RowsWitness,
    ],
    Field(discriminator="kind"),
]


class Verdict(BaseModel):
    kind: VerdictKind
    ideal: str
    reason: str
    certificate: Payload = Field(default_factory=dict)
    witness: Optional[Witness] = None
    strength: int = 0
    effort: int = 0
    # set when the effort budget ran out before a decision
    exhausted: bool = False

    @property
    def proven(self) -> bool:
        return self.kind in (VerdictKind.PROVEN_IN, VerdictKind.PROVEN_OUT)

    @property
    def inside(self) -> bool:
        return self.kind in (VerdictKind.PROVEN_IN, VerdictKind.EVIDENCE_IN)

    @property
    def outside(self) -> bool:
        return self.kind in (VerdictKind.PROVEN_OUT, VerdictKind.EVIDENCE_OUT)


class Window(BaseModel):
    bound: int
    elements: Tuple[int, ...]

    @model_validator(mode="after")
    def _check_sorted(self):
        if any(a >= b for a, b in zip(self.elements, self.elements[1:])):
            raise ValueError("window elements must be strictly increasing")
        if self.elements and (self.elements[0] < 0 or self.elements[-1] >= self.bound):
            raise ValueError("window elements must lie in [0, bound)")
        return self


class ColumnProfile(BaseModel):
    counts: Dict[int, int]
    max: int
    argmax: Optional[int] = None


class DensityEstimate(BaseModel):
    bound: int
    count: int
    ratio: Rational
    checkpoints: List[Tuple[int, Rational]]
    liminf: Rational
    limsup: Rational


class PartialSum(BaseModel):
    """Σ w(n) over A ∩ [0, terms); exact when lower == upper"""

    terms: int
    lower: Rational
    upper: Rational
    method: str

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    @property
    def value(self) -> Fraction:
        return self.lower if self.exact else (self.lower + self.upper) / 2


class TailEstimate(BaseModel):
    cut: int
    window: int
    lower: Rational
    upper: Optional[Rational] = None
    method: str


class AbelDiniReport(BaseModel):
    terms: int
    delta: Rational
    lower: Rational
    upper: Rational
    checkpoints: List[Tuple[int, Rational, Rational]]
    cap: Optional[Rational] = None
    bounded: Optional[bool] = None


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: Payload = Field(default_factory=dict)
    counterexample: Optional[Payload] = None


class WitnessReport(BaseModel):
    construction: str
    parameters: Payload = Field(default_factory=dict)
    window: int
    checks: List[CheckResult] = Field(default_factory=list)
    data: Payload = Field(default_factory=dict)
    counterexample: Optional[Payload] = None

    @property
    def outcome(self) -> str:
        return "pass" if all(check.passed for check in self.checks) else "fail"

    def add(self, name: str, passed: bool, counterexample: Optional[Dict[str, Any]] = None, **detail: Any):
        self.checks.append(CheckResult(name=name, passed=passed, detail=detail, counterexample=counterexample))
        if not passed and self.counterexample is None:
            self.counterexample = {"check": name, **(counterexample or detail)}
        return passed

    def summary(self) -> Dict[str, Any]:
        payload = self.model_dump(mode="json", by_alias=True)
        payload["outcome"] = self.outcome
        return payload


class IsoWitness(BaseModel):
    """f maps source bijectively onto target; A ∈ I ⇔ f[A] ∈ I on the checked family"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    source: SetExpr
    target: SetExpr
    map: InjectionExpr
    space: BaseSpace = OMEGA
    target_space: Optional[BaseSpace] = None
    contract: str = "A in I iff f[A] in I"

    @property
    def codomain(self) -> BaseSpace:
        return self.target_space or self.space


class InvarianceEntry(BaseModel):
    set: str
    verdict: VerdictKind
    image_verdict: VerdictKind
    preimage_verdict: Optional[VerdictKind] = None


class InvarianceClass(str, Enum):
    VIOLATION = "violation"
    BI_INVARIANT = "bi-invariant-evidence"
    INVARIANT = "invariant-evidence"
    INCONCLUSIVE = "inconclusive"


class InvarianceReport(BaseModel):
    injection: str
    ideal: str
    entries: List[InvarianceEntry] = Field(default_factory=list)
    failures: List[Payload] = Field(default_factory=list)
    classification: InvarianceClass
    violation: Optional[Payload] = None


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"
    HUMAN = "human"


class RunConfig(BaseModel):
    subcommand: str
    effort: int = 20
    window: int = 1024
    output: Optional[str] = None
    format: OutputFormat = OutputFormat.JSON
    seed: int = 0
    parameters: Payload = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_budget(self):
        if self.window < 1:
            raise ValueError("window bound must be >= 1")
        if self.effort < 0:
            raise ValueError("effort must be >= 0")
        return self


class LimitEntry(BaseModel):
    epsilon: Rational
    level_set: str
    verdict: Verdict


class LimitReport(BaseModel):
    """I-limit of a sequence, judged over a schedule of tolerances"""

    sequence: str
    limit: Rational
    ideal: str
    entries: List[LimitEntry] = Field(default_factory=list)
    converges: Optional[bool] = None


class BiInvarianceCertificate(BaseModel):
    window: int
    bi_invariant: bool
    constant: Optional[int] = None
    ratio_max: Rational
    ratio_max_half: Rational
    image_density: Rational
    image_envelope: Rational
    density_positive: bool


class GridBlock(BaseModel):
    """v + α·{1..side}^2 placed at position (i, j) of the block enumeration"""

    i: int
    j: int
    v: Tuple[int, int]
    alpha: int
    side: int


class C1Extraction(BaseModel):
    pairs: List[Tuple[int, int]]
    window: int

    @property
    def a_points(self) -> List[int]:
        return [a for a, _ in self.pairs]

    @property
    def b_points(self) -> List[int]:
        return [b for _, b in self.pairs]
