"""Named registry of every construction, with per-run statistics."""
import logging
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional

from app.convergence import c5_refuter_idd
from app.errors import IdealLabError, MalformedExpressionError
from app.expressions import (
    AffineMap,
    AllSet,
    ComplementSet,
    DifferenceSet,
    EnumerationMap,
    ExplicitSet,
    Powers,
    Progression,
    ShiftMap,
    Squares,
    SwapPairsMap,
    Triangle,
    UnionSet,
)
from app.ideals import DensityIdeal, FinIdeal, fubini_product
from app.models import IsoWitness, WitnessReport
from app.parsing import parse_ideal, parse_map, parse_rational, parse_schedule, parse_set, parse_weight
from app.schedules import DYADIC_KN, FACTORIAL
from app.spaces import OMEGA_SQUARED
from app.weights import BlockWeight
from app.witnesses import (
    antihomog_partition,
    c1_builder,
    c1_extract_report,
    costar_report,
    edfin_report,
    eu_dense_counterexample,
    eu_nondense_counterexample,
    gallai2_report,
    halved_target,
    idd_enum_report,
    product_report,
    superset_report,
)

logger = logging.getLogger(__name__)

EVENS = Progression(start=0, step=2)
ODDS = Progression(start=1, step=2)


class WitnessRunStats:
    def __init__(self):
        self.total_runs = 0
        self.passed_runs = 0
        self.failed_runs = 0
        self.errored_runs = 0
        self.last_run_time = None
        self.last_error = None
        self.runs_by_name: Dict[str, int] = {}

    def update_run_stats(self, name: str, outcome: Optional[str], error: str = None):
        self.total_runs += 1
        self.last_run_time = datetime.now()
        self.runs_by_name[name] = self.runs_by_name.get(name, 0) + 1
        if outcome == "pass":
            self.passed_runs += 1
        elif outcome == "fail":
            self.failed_runs += 1
        else:
            self.errored_runs += 1
            self.last_error = error

    def get_stats(self) -> Dict[str, Any]:
        return {
            "total_runs": self.total_runs,
            "passed_runs": self.passed_runs,
            "failed_runs": self.failed_runs,
            "errored_runs": self.errored_runs,
            "last_run_time": self.last_run_time.isoformat() if self.last_run_time else None,
            "last_error": self.last_error,
            "runs_by_name": self.runs_by_name,
            "pass_rate": (self.passed_runs / self.total_runs * 100) if self.total_runs > 0 else 0,
        }


# Global statistics instance
stats = WitnessRunStats()


@dataclass
class WitnessSpec:
    name: str
    description: str
    build: Callable[[Dict[str, Any], int, Optional[int]], WitnessReport]
    defaults: Dict[str, Any] = field(default_factory=dict)
    window: int = 1024


def _iso(raw: Dict[str, Any]) -> IsoWitness:
    """{"source": set, "target": set, "map": map}; the source defaults to ω"""
    return IsoWitness(
        source=parse_set(raw.get("source", {"kind": "all"})),
        target=parse_set(raw["target"]),
        map=parse_map(raw["map"]),
    )


def _costar(params, window, effort):
    return costar_report(
        parse_ideal(params["ideal"]),
        parse_set(params["a"]),
        parse_set(params["b"]) if params.get("b") is not None else None,
        window,
        effort,
    )


def _superset(params, window, effort):
    return superset_report(_iso(params["witness"]), parse_set(params["b"]), window)


def _edfin(params, window, effort):
    seed = params.get("seed")
    return edfin_report(
        parse_set(params["a"], OMEGA_SQUARED),
        int(params["depth"]),
        int(params.get("samples", 100)),
        None if seed is None else int(seed),
    )


def _product(params, window, effort):
    rows = [_iso(row) for row in params.get("rows", [])]
    default = _iso(params["default_row"]) if params.get("default_row") is not None else None
    ideal = parse_ideal(params["ideal"]) if params.get("ideal") is not None else None
    return product_report(_iso(params["outer"]), rows, default, window, ideal, effort=effort)


def _gallai2(params, window, effort):
    return gallai2_report(parse_set(params["a"], OMEGA_SQUARED), int(params["depth"]))


def _enum(params, window, effort):
    lower = parse_rational(params["lower"], "lower") if params.get("lower") is not None else None
    return idd_enum_report(parse_set(params["a"]), lower, window, effort)


def _c1_extract(params, window, effort):
    pairs = params.get("pairs")
    return c1_extract_report(parse_map(params["map"]), window, None if pairs is None else int(pairs))


def _c1_build(params, window, effort):
    a, b = parse_set(params["a"]), parse_set(params["b"])
    witness = IsoWitness(source=a, target=b, map=parse_map(params["map"]))
    _, report = c1_builder(a, b, witness, parse_ideal(params["ideal"]), params.get("branch"), effort, window)
    return report


def _eu_nondense(params, window, effort):
    return eu_nondense_counterexample(int(params["n_max"]))


def _eu_dense(params, window, effort):
    g = parse_weight(params["g"]) if params.get("g") is not None else None
    return eu_dense_counterexample(
        int(params["n_max"]), int(params["case"]), parse_rational(params.get("b", 1), "b"), g
    )


def _antihomog(params, window, effort):
    target = parse_set(params["target"]) if params.get("target") is not None else None
    return antihomog_partition(
        parse_map(params["map"]), parse_schedule(params.get("schedule", "factorial")), int(params["n_max"]), target
    )


def _c5(params, window, effort):
    samples = [parse_set(s) for s in params["samples"]] if params.get("samples") is not None else None
    return c5_refuter_idd(window, samples)


def _dump(node) -> Any:
    return node.model_dump(mode="json", by_alias=True)


_halved = halved_target(Powers(base=2))

REGISTRY: Dict[str, WitnessSpec] = {
    spec.name: spec
    for spec in (
        WitnessSpec(
            "costar",
            "I|A ≅ I for A in the co-ideal, by matching B ∪ Aᶜ onto a small B ⊆ A",
            _costar,
            {
                "ideal": _dump(DensityIdeal()),
                "a": _dump(ComplementSet(inner=Squares())),
                "b": _dump(DifferenceSet(first=Powers(base=2), second=Squares())),
            },
            window=4096,
        ),
        WitnessSpec(
            "superset",
            "Extend a witness for A to any superset B by fixing the orbits that start in B∖A",
            _superset,
            {
                "witness": {"target": _dump(EVENS), "map": _dump(AffineMap(scale=2))},
                "b": _dump(UnionSet(parts=(EVENS, ExplicitSet(elements=(1,))))),
            },
            window=64,
        ),
        WitnessSpec("edfin", "ED_fin on the triangle D, column by column", _edfin, {"a": _dump(Triangle()), "depth": 50}),
        WitnessSpec(
            "product",
            "φ(i, j) = (g(i), f_i(j)) for a Fubini product",
            _product,
            {
                "outer": {"target": _dump(EVENS), "map": _dump(AffineMap(scale=2))},
                "default_row": {"target": _dump(EVENS), "map": _dump(AffineMap(scale=2))},
                "ideal": _dump(fubini_product(FinIdeal(), FinIdeal())),
            },
            window=256,
        ),
        WitnessSpec("gallai2", "Separated grids of growing side mapped onto a tiling of ω²", _gallai2,
                    {"a": _dump(AllSet()), "depth": 10}),
        WitnessSpec("enum", "The increasing enumeration of a set of positive lower density", _enum,
                    {"a": _dump(EVENS)}, window=1 << 16),
        WitnessSpec("c1-extract", "Greedy disjoint pairs (a_n, f(a_n)) off the fixed points", _c1_extract,
                    {"map": _dump(SwapPairsMap())}, window=64),
        WitnessSpec(
            "c1-build",
            "g = f on the branch set, f^-1 on its image, identity elsewhere",
            _c1_build,
            {"a": _dump(EVENS), "b": _dump(ODDS), "map": _dump(ShiftMap(by=1)), "ideal": _dump(DensityIdeal())},
        ),
        WitnessSpec("eu-nondense", "Non-dense EU_h over (2^n)! blocks and the shift n+1", _eu_nondense, {"n_max": 5}),
        WitnessSpec(
            "eu-dense",
            "Dense EU_h over the dyadic k_n schedule, case 1 shift or case 2 thinning",
            _eu_dense,
            {"n_max": 20, "case": 1, "b": "1", "g": _dump(BlockWeight(schedule=DYADIC_KN, mode="scale"))},
        ),
        WitnessSpec(
            "antihomog",
            "Forward, backward and staying mass of an injection over factorial blocks",
            _antihomog,
            {"map": _dump(EnumerationMap(of=_halved)), "target": _dump(_halved), "n_max": 7,
             "schedule": FACTORIAL.kind.value},
        ),
        WitnessSpec("c5-refute", "A thin set refuting the lower-density characterization for I_d", _c5, {},
                    window=1 << 34),
    )
}


def list_witnesses() -> List[Dict[str, Any]]:
    return [
        {"name": spec.name, "description": spec.description, "defaults": spec.defaults, "window": spec.window}
        for spec in REGISTRY.values()
    ]


def run_witness(
    name: str,
    params: Optional[Dict[str, Any]] = None,
    window: Optional[int] = None,
    effort: Optional[int] = None,
) -> WitnessReport:
    """Build and check one construction; unspecified parameters take the registry defaults"""
    spec = REGISTRY.get(name)
    if spec is None:
        raise MalformedExpressionError(
            f"unknown witness {name!r}, expected one of {', '.join(REGISTRY)}", position="name"
        )
    merged = {**spec.defaults, **(params or {})}
    window = window or spec.window
    if window < 1:
        raise MalformedExpressionError(f"window must be >= 1, got {window}", position="window")
    logger.info(f"🚀 Running witness {name} on window {window}")
    try:
        report = spec.build(merged, window, effort)
    except IdealLabError as e:
        logger.error(f"❌ Witness {name} failed: {e.message}")
        stats.update_run_stats(name, None, e.message)
        raise
    report.parameters["input"] = merged
    stats.update_run_stats(name, report.outcome)
    logger.info(f"✅ Witness {name}: {report.outcome} ({len(report.checks)} checks)")
    return report


def run_all(names: Optional[List[str]] = None, effort: Optional[int] = None) -> List[Dict[str, Any]]:
    """Run several constructions with their defaults, logging and recording failures"""
    results = []
    for name in names or list(REGISTRY):
        try:
            report = run_witness(name, effort=effort)
            results.append({"name": name, "outcome": report.outcome, "checks": len(report.checks)})
        except IdealLabError as e:
            results.append({"name": name, "outcome": "error", **e.to_dict()})
            continue
    return results
