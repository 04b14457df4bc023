"""Block-by-block split of an injection into forward, backward and staying points."""
import logging
from bisect import bisect_right
from fractions import Fraction
from typing import Optional

from app.errors import MalformedExpressionError
from app.expressions import BlockRule, ComplementSet, CountRule, MapNode, SetNode
from app.models import WitnessReport
from app.omega_sets import check_injective
from app.schedules import FACTORIAL, GridSchedule

logger = logging.getLogger(__name__)

MAX_ENUMERATED_BLOCK = 9


def halved_target(indices: SetNode, parts: int = 2) -> ComplementSet:
    """ω minus the last (1 - 1/parts) of each factorial block I_n with n in indices"""
    if parts < 2:
        raise MalformedExpressionError(f"parts must be >= 2, got {parts}", position="parts")
    removed = BlockRule(
        schedule=FACTORIAL,
        rule="last",
        count_rule=CountRule(kind="length-fraction", ratio=1 - Fraction(1, parts), rounding="floor"),
        indices=indices,
    )
    return ComplementSet(inner=removed)


def antihomog_partition(
    f: MapNode,
    schedule: GridSchedule = FACTORIAL,
    n_max: int = 7,
    target: Optional[SetNode] = None,
) -> WitnessReport:
    """φ_n of ω⁺ = {f(x) > max I_n}, ω⁻ = {f(x) < min I_n}, ω⁼ and of f[ω⁺], for every n <= n_max"""
    if not 0 <= n_max <= MAX_ENUMERATED_BLOCK:
        raise MalformedExpressionError(
            f"n_max must lie in [0, {MAX_ENUMERATED_BLOCK}], got {n_max}", position="n_max"
        )
    bound = schedule.end(n_max)
    check_injective(f, bound)
    values = f.values(bound)
    starts = [schedule.start(n) for n in range(n_max + 1)]

    pushed_in = [0] * (n_max + 1)
    for x, y in enumerate(values):
        n = bisect_right(starts, x) - 1
        if y >= schedule.end(n) and y < bound:
            pushed_in[bisect_right(starts, y) - 1] += 1

    report = WitnessReport(
        construction="antihomog",
        parameters={
            "map": f.describe(),
            "schedule": schedule.describe(),
            "n_max": n_max,
            "target": target.describe() if target is not None else None,
        },
        window=bound,
    )
    blocks = []
    backward_over = image_over = unbalanced = None
    for n in range(n_max + 1):
        lo, hi = schedule.bounds(n)
        size = hi - lo
        forward = sum(1 for y in values[lo:hi] if y >= hi)
        backward = sum(1 for y in values[lo:hi] if y < lo)
        staying = size - forward - backward
        phi_plus, phi_minus = Fraction(forward, size), Fraction(backward, size)
        phi_equal, phi_image = Fraction(staying, size), Fraction(pushed_in[n], size)
        blocks.append(
            {
                "n": n,
                "plus": str(phi_plus),
                "minus": str(phi_minus),
                "equal": str(phi_equal),
                "image_plus": str(phi_image),
            }
        )
        if phi_plus + phi_minus + phi_equal != 1 and unbalanced is None:
            unbalanced = {"n": n}
        if n >= 2:
            limit = Fraction(2, n)
            if phi_minus > limit and backward_over is None:
                backward_over = {"n": n, "phi": str(phi_minus), "bound": str(limit)}
            if phi_image > limit and image_over is None:
                image_over = {"n": n, "phi": str(phi_image), "bound": str(limit)}

    report.data["blocks"] = blocks
    report.add("ω⁺, ω⁻ and ω⁼ partition every block", unbalanced is None, counterexample=unbalanced)
    report.add("φ_n(ω⁻) <= 2/n for n >= 2", backward_over is None, counterexample=backward_over)
    report.add("φ_n(f[ω⁺]) <= 2/n for n >= 2", image_over is None, counterexample=image_over)
    if target is not None:
        stray = next((x for x, y in enumerate(values) if not target.contains(y)), None)
        report.add(
            f"f maps into {target.describe()}",
            stray is None,
            counterexample=None if stray is None else {"point": stray, "image": values[stray]},
        )
    if blocks:
        last = blocks[-1]
        report.data["plus_carries_mass"] = Fraction(last["plus"]) >= Fraction(last["minus"])
    logger.info(f"🧱 Anti-homogeneity split of {f.describe()} to n={n_max}: {report.outcome}")
    return report
