"""Window checks shared by every construction: bijectivity and membership transfer."""
import logging
from typing import Optional, Sequence

from app.errors import IdealLabError
from app.expressions import ImageSet, SetNode
from app.models import IsoWitness, VerdictKind, WitnessReport

logger = logging.getLogger(__name__)


def check_bijection(report: WitnessReport, iso: IsoWitness, bound: int, label: str = "") -> bool:
    """f maps source ∩ [0, bound) injectively into target and hits every target point below bound"""
    f, space, codomain = iso.map, iso.space, iso.codomain
    prefix = f"{label} " if label else ""
    source = iso.source.window(bound, space)
    images = f.values_on(source)

    stray = next((x for x, y in zip(source, images) if not iso.target.contains(y, codomain)), None)
    report.add(
        f"{prefix}maps into target below {bound}",
        stray is None,
        counterexample=None if stray is None else {"point": stray, "image": f.apply(stray)},
        checked=len(source),
    )

    seen = {}
    collision = None
    for x, y in zip(source, images):
        if y in seen:
            collision = {"pair": [seen[y], x], "image": y}
            break
        seen[y] = x
    report.add(f"{prefix}injective below {bound}", collision is None, counterexample=collision)

    missed = None
    for y in iso.target.window(bound, codomain):
        x = f.invert(y)
        if x is None or not iso.source.contains(x, space) or f.apply(x) != y:
            missed = {"target_point": y, "preimage": x}
            break
    report.add(f"{prefix}onto target below {bound}", missed is None, counterexample=missed)
    return stray is None and collision is None and missed is None


def check_iso(report: WitnessReport, iso: IsoWitness, bound: int, label: str = "") -> bool:
    """Bijectivity at bound and at twice the bound"""
    first = check_bijection(report, iso, bound, label)
    second = check_bijection(report, iso, 2 * bound, label)
    return first and second


def check_transfer(
    report: WitnessReport,
    ideal,
    iso: IsoWitness,
    family: Sequence[SetNode],
    effort: Optional[int] = None,
    target_ideal=None,
) -> bool:
    """X ∈ I ⇔ f[X] ∈ J on the test family; only certified opposite verdicts fail"""
    from app.ideals import member

    target_ideal = target_ideal or ideal
    passed = True
    rows = []
    for expr in family:
        try:
            before = member(ideal, expr, effort)
            after = member(target_ideal, ImageSet(map=iso.map, inner=expr), effort)
        except IdealLabError as e:
            logger.warning(f"⚠️ Transfer check skipped {expr.describe()}: {e.message}")
            rows.append({"set": expr.describe(), "error": e.code})
            continue
        opposite = {before.kind, after.kind} == {VerdictKind.PROVEN_IN, VerdictKind.PROVEN_OUT}
        rows.append({"set": expr.describe(), "verdict": before.kind.value, "image_verdict": after.kind.value})
        ok = report.add(
            f"transfer for {expr.describe()}",
            not opposite,
            counterexample={"set": expr.describe(), "verdict": before.kind.value, "image_verdict": after.kind.value}
            if opposite
            else None,
            verdict=before.kind.value,
            image_verdict=after.kind.value,
        )
        passed = passed and ok
    report.data.setdefault("transfer", []).extend(rows)
    return passed
