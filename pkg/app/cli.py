"""Command-line front end: `python -m app.cli <command> ...`

Exit codes: 0 answered or passed, 1 refuted or violation found, 2 usage or
malformed input, 3 effort exceeded. Reports go to stdout (or --output) and
logs to stderr.
"""
import functools
import logging
import sys
from typing import Any, Dict, Optional

import click
import orjson
from pydantic import ValidationError

from app.arith import dyadic_checkpoints
from app.config import settings
from app.convergence import c3_report, c5_refuter_idd, idd_biinvariance, invariance_test, limit_report
from app.detectors import run_detector
from app.errors import IdealLabError, MalformedExpressionError
from app.ideals import member, replay_witness, restrict
from app.measures import abel_dini, density_window, eu_ratio, farah_block_measure
from app.models import InvarianceClass, InvarianceReport, OutputFormat, RunConfig, Verdict, VerdictKind, WitnessReport
from app.parsing import (
    dump_expr,
    load_json,
    parse_family,
    parse_ideal,
    parse_map,
    parse_rational,
    parse_schedule,
    parse_sequence,
    parse_set,
    parse_space,
    parse_weight,
)
from app.reports import dumps, envelope, render, write_bytes
from app.runner import REGISTRY, list_witnesses, run_all, run_witness
from app.spaces import OMEGA, n_subsets

logger = logging.getLogger(__name__)


def _exit_code(result: Any) -> int:
    if isinstance(result, WitnessReport):
        return 0 if result.outcome == "pass" else 1
    if isinstance(result, InvarianceReport):
        return 1 if result.classification == InvarianceClass.VIOLATION else 0
    if isinstance(result, Verdict):
        if result.kind == VerdictKind.UNKNOWN and result.exhausted:
            return 3
        return 0
    return 0


def _config(command: str, window: Optional[int], effort: Optional[int], fmt: str, output: Optional[str], **parameters):
    try:
        return RunConfig(
            subcommand=command,
            effort=settings.effort_or_default(effort),
            window=window if window is not None else 1024,
            format=OutputFormat(fmt),
            output=output,
            seed=settings.seed,
            parameters=parameters,
        )
    except ValidationError as e:
        first = e.errors()[0]
        raise MalformedExpressionError(first["msg"], position=".".join(str(p) for p in first["loc"]) or command)


def _emit(config: RunConfig, result: Any, code: Optional[int] = None):
    """Render the report, write it once, and leave with the command's exit code"""
    if config.format == OutputFormat.CSV:
        data = render(result, OutputFormat.CSV)
    elif config.format == OutputFormat.HUMAN:
        data = f"command: {config.subcommand}\n".encode() + render(result, OutputFormat.HUMAN)
    else:
        parameters = {**config.parameters, "window": config.window, "effort": config.effort, "seed": config.seed}
        data = dumps(envelope(config.subcommand, parameters, result))
    if config.output:
        write_bytes(data, config.output)
    else:
        click.echo(data, nl=False)
    click.get_current_context().exit(_exit_code(result) if code is None else code)


def guarded(func):
    """Turn library errors into a JSON error line on stderr and the matching exit code"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except IdealLabError as e:
            logger.error(f"❌ {e.code}: {e.message}")
            click.echo(orjson.dumps(e.to_dict(), option=orjson.OPT_SORT_KEYS).decode(), err=True)
            click.get_current_context().exit(e.exit_code)

    return wrapper


def run_options(window: Optional[int] = 1024, with_window: bool = True):
    def decorator(func):
        func = click.option(
            "--output", "-o", type=click.Path(dir_okay=False), default=None, help="Write the report to this file"
        )(func)
        func = click.option(
            "--format", "fmt", type=click.Choice([f.value for f in OutputFormat]), default="json", show_default=True
        )(func)
        func = click.option("--effort", type=int, default=None, help="Effort budget [default: IDEAL_LAB_EFFORT]")(func)
        if with_window:
            func = click.option("--window", type=int, default=window, show_default=True, help="Window bound N")(func)
        return func

    return decorator


def set_options(func):
    func = click.option(
        "--set-file", type=click.Path(exists=True, dir_okay=False), default=None, help="File holding the set JSON"
    )(func)
    func = click.option("--set", "set_text", default=None, help="Set expression JSON (or @file)")(func)
    return func


def _set_source(set_text: Optional[str], set_file: Optional[str]) -> str:
    if (set_text is None) == (set_file is None):
        raise click.UsageError("give exactly one of --set and --set-file")
    return set_text if set_text is not None else f"@{set_file}"


@click.group()
@click.option("--seed", type=int, default=None, help="Seed for randomized checks [default: IDEAL_LAB_SEED]")
@click.option("--log-level", default=None, help="Logging level [default: IDEAL_LAB_LOG_LEVEL]")
def cli(seed: Optional[int], log_level: Optional[str]):
    """Ideals on ω: membership oracles, detectors, measures and witness constructions."""
    logging.basicConfig(
        level=(log_level or settings.log_level).upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    if seed is not None:
        settings.seed = seed


# ------------------------------------------------------------------ ideals


@cli.command("member")
@click.option("--ideal", "ideal_text", required=True, help="Ideal descriptor JSON (or @file)")
@set_options
@run_options(with_window=False)
@guarded
def member_command(ideal_text, set_text, set_file, effort, fmt, output):
    """Three-valued membership of a set in an ideal."""
    ideal = parse_ideal(ideal_text)
    expr = parse_set(_set_source(set_text, set_file), ideal.base_space())
    config = _config("member", None, effort, fmt, output, ideal=dump_expr(ideal), set=dump_expr(expr))
    verdict = member(ideal, expr, config.effort)
    if verdict.witness is not None:
        logger.info(f"🔁 Witness replays: {replay_witness(ideal, verdict, expr)}")
    _emit(config, verdict)


@cli.command("restrict")
@click.option("--ideal", "ideal_text", required=True, help="Ideal descriptor JSON (or @file)")
@click.option("--carrier", "carrier_text", required=True, help="Carrier set A of I|A")
@set_options
@run_options(with_window=False)
@guarded
def restrict_command(ideal_text, carrier_text, set_text, set_file, effort, fmt, output):
    """Membership in the restriction I|A = {B ∩ A : B ∈ I}."""
    ideal = parse_ideal(ideal_text)
    carrier = parse_set(carrier_text, ideal.base_space(), "carrier")
    restricted = restrict(ideal, carrier)
    expr = parse_set(_set_source(set_text, set_file), restricted.base_space())
    config = _config(
        "restrict", None, effort, fmt, output, ideal=dump_expr(ideal), carrier=dump_expr(carrier), set=dump_expr(expr)
    )
    _emit(config, member(restricted, expr, config.effort))


# --------------------------------------------------------------- detectors


@cli.group()
def detect():
    """Finite witness search on a window."""


def _detect(name: str, set_text, set_file, space, window, effort, fmt, output, **options):
    expr = parse_set(_set_source(set_text, set_file), space)
    config = _config(f"detect {name}", window, effort, fmt, output, set=dump_expr(expr), space=space.label(), **options)
    _emit(config, run_detector(name, expr, config.window, space, **options))


@detect.command("ap")
@set_options
@click.option("--length", type=int, default=None, help="Search for an AP of exactly this length")
@run_options()
@guarded
def detect_ap(set_text, set_file, length, window, effort, fmt, output):
    """Longest arithmetic progression (or one of a given length)."""
    _detect("ap", set_text, set_file, OMEGA, window, effort, fmt, output, length=length)


@detect.command("grid")
@set_options
@click.option("--space", "space_text", default="omega-squared", show_default=True)
@click.option("--side", type=int, default=2, show_default=True, help="Grid side k")
@run_options()
@guarded
def detect_grid(set_text, set_file, space_text, side, window, effort, fmt, output):
    """Least homothetic copy v + α·{1..k}^n."""
    _detect("grid", set_text, set_file, parse_space(space_text), window, effort, fmt, output, side=side)


@detect.command("fs")
@set_options
@click.option("--size", "-n", "size", type=int, default=2, show_default=True, help="Generator count |B|")
@run_options()
@guarded
def detect_fs(set_text, set_file, size, window, effort, fmt, output):
    """Least B with |B| = n and FS(B) inside the window."""
    _detect("fs", set_text, set_file, OMEGA, window, effort, fmt, output, size=size)


@detect.command("ramsey")
@set_options
@click.option("--arity", "-n", "arity", type=click.IntRange(2, 3), default=2, show_default=True)
@click.option("--block", "-m", "block", type=int, default=3, show_default=True, help="Block size |B|")
@run_options()
@guarded
def detect_ramsey(set_text, set_file, arity, block, window, effort, fmt, output):
    """Colex-least B with [B]^n inside a set of n-subsets."""
    _detect("ramsey", set_text, set_file, n_subsets(arity), window, effort, fmt, output, block=block)


@detect.command("columns")
@set_options
@click.option("--space", "space_text", default="omega-squared", show_default=True)
@run_options()
@guarded
def detect_columns(set_text, set_file, space_text, window, effort, fmt, output):
    """Point count per column of a pair-space window."""
    _detect("columns", set_text, set_file, parse_space(space_text), window, effort, fmt, output)



# ---------------------------------------------------------------- measures


@cli.command("density")
@set_options
@click.option("--space", "space_text", default="omega", show_default=True)
@run_options()
@guarded
def density_command(set_text, set_file, space_text, window, effort, fmt, output):
    """|A ∩ [0, N)| / N with dyadic checkpoints."""
    space = parse_space(space_text)
    expr = parse_set(_set_source(set_text, set_file), space)
    config = _config("density", window, effort, fmt, output, set=dump_expr(expr), space=space_text)
    _emit(config, density_window(expr, config.window, space))


@cli.command("eu-ratio")
@click.option("--weight", "weight_text", required=True, help="Weight JSON (or @file)")
@set_options
@run_options()
@guarded
def eu_ratio_command(weight_text, set_text, set_file, window, effort, fmt, output):
    """Exact A_w[0, n) / ω_w[0, n) at dyadic checkpoints up to N."""
    w = parse_weight(weight_text)
    expr = parse_set(_set_source(set_text, set_file))
    config = _config("eu-ratio", window, effort, fmt, output, weight=dump_expr(w), set=dump_expr(expr))
    checkpoints = [(n, eu_ratio(w, expr, n)) for n in dyadic_checkpoints(config.window)]
    result = {"weight": w.describe(), "set": expr.describe(), "ratio": checkpoints[-1][1], "checkpoints": checkpoints}
    _emit(config, result)


@cli.command("farah")
@click.option("--schedule", "schedule_text", default="factorial", show_default=True, help="Kind name or JSON")
@set_options
@click.option("--n-max", type=int, default=8, show_default=True)
@run_options(with_window=False)
@guarded
def farah_command(schedule_text, set_text, set_file, n_max, effort, fmt, output):
    """φ_n(A) = |A ∩ I_n| / |I_n| for n <= n_max."""
    schedule = parse_schedule(schedule_text)
    expr = parse_set(_set_source(set_text, set_file))
    if n_max < 0:
        raise MalformedExpressionError(f"n_max must be >= 0, got {n_max}", position="n_max")
    config = _config(
        "farah", None, effort, fmt, output, schedule=dump_expr(schedule), set=dump_expr(expr), n_max=n_max
    )
    checkpoints = [(n, farah_block_measure(schedule, expr, n)) for n in range(n_max + 1)]
    _emit(config, {"schedule": schedule.describe(), "set": expr.describe(), "checkpoints": checkpoints})


@cli.command("abel-dini")
@click.option("--weight", "weight_text", required=True, help="Series x_n as a weight JSON (or @file)")
@click.option("--delta", default="1", show_default=True, help="Exponent excess δ (rational)")
@run_options()
@guarded
def abel_dini_command(weight_text, delta, window, effort, fmt, output):
    """Partial sums of x_n / s_n^(1+δ)."""
    w = parse_weight(weight_text)
    delta = parse_rational(delta, "delta")
    config = _config("abel-dini", window, effort, fmt, output, weight=dump_expr(w), delta=str(delta))
    _emit(config, abel_dini(w, delta, config.window))


# --------------------------------------------------------------- witnesses


@cli.command("witness")
@click.argument("name", type=click.Choice(list(REGISTRY)), required=False)
@click.option("--params", "params_text", default=None, help="JSON object (or @file) overriding the defaults")
@click.option("--depth", type=int, default=None, help="Shorthand for the n_max or depth parameter")
@click.option("--list", "list_only", is_flag=True, help="List the constructions and their defaults")
@click.option("--all", "run_everything", is_flag=True, help="Run every construction with its defaults")
@run_options(window=None)
@guarded
def witness_command(name, params_text, depth, list_only, run_everything, window, effort, fmt, output):
    """Build and check a named construction."""
    if list_only:
        _emit(_config("witness --list", None, effort, fmt, output), {"witnesses": list_witnesses()}, 0)
    if run_everything:
        results = run_all(effort=effort)
        config = _config("witness --all", None, effort, fmt, output)
        failed = any(r["outcome"] != "pass" for r in results)
        _emit(config, {"runs": results}, 1 if failed else 0)
    if name is None:
        raise click.UsageError("name a construction, or pass --list or --all")

    params: Dict[str, Any] = {}
    if params_text is not None:
        params = load_json(params_text)
        if not isinstance(params, dict):
            raise MalformedExpressionError("--params must be a JSON object", position="params")
    if depth is not None:
        defaults = REGISTRY[name].defaults
        params["n_max" if "n_max" in defaults else "depth"] = depth
    window = window if window is not None else REGISTRY[name].window
    config = _config(f"witness {name}", window, effort, fmt, output, params=params)
    _emit(config, run_witness(name, params, config.window, effort))


# ------------------------------------------------------------- convergence


@cli.command("converge")
@click.option("--sequence", "sequence_text", required=True, help="Sequence JSON (or @file)")
@click.option("--limit", default="0", show_default=True, help="Candidate limit x (rational)")
@click.option("--ideal", "ideal_text", required=True, help="Ideal descriptor JSON (or @file)")
@run_options(with_window=False)
@guarded
def converge_command(sequence_text, limit, ideal_text, effort, fmt, output):
    """I-limit check over the tolerance schedule 1/k."""
    seq = parse_sequence(sequence_text)
    x = parse_rational(limit, "limit")
    ideal = parse_ideal(ideal_text)
    config = _config(
        "converge", None, effort, fmt, output, sequence=dump_expr(seq), limit=str(x), ideal=dump_expr(ideal)
    )
    _emit(config, limit_report(seq, x, ideal, config.effort))


@cli.command("c3")
@click.option("--family", "family_text", required=True, help="JSON list of sets A_1, A_2, ... (or @file)")
@click.option("--ideal", "ideal_text", default=None, help="Check every A_k is small in this ideal first")
@run_options(window=10_000)
@guarded
def c3_command(family_text, ideal_text, window, effort, fmt, output):
    """Diagonal sequence 1/k on A_k and its level-set cover."""
    family = parse_family(family_text)
    ideal = parse_ideal(ideal_text) if ideal_text is not None else None
    config = _config(
        "c3",
        window,
        effort,
        fmt,
        output,
        family=[dump_expr(expr) for expr in family],
        ideal=dump_expr(ideal) if ideal is not None else None,
    )
    _emit(config, c3_report(family, config.window, ideal, config.effort))


@cli.command("invariance")
@click.option("--map", "map_text", required=True, help="Injection JSON (or @file)")
@click.option("--ideal", "ideal_text", required=True, help="Ideal descriptor JSON (or @file)")
@click.option("--family", "family_text", required=True, help="JSON list of test sets (or @file)")
@run_options(window=None)
@guarded
def invariance_command(map_text, ideal_text, family_text, window, effort, fmt, output):
    """Judge A, f[A] and f⁻¹[A] on a test family and classify f."""
    f = parse_map(map_text)
    ideal = parse_ideal(ideal_text)
    family = parse_family(family_text, ideal.base_space())
    window = window if window is not None else settings.detector_window
    config = _config(
        "invariance",
        window,
        effort,
        fmt,
        output,
        map=dump_expr(f),
        ideal=dump_expr(ideal),
        family=[dump_expr(expr) for expr in family],
    )
    _emit(config, invariance_test(f, ideal, family, config.effort, config.window))


@cli.command("idd-biinv")
@click.option("--map", "map_text", required=True, help="Increasing injection JSON (or @file)")
@run_options(window=1 << 16)
@guarded
def idd_biinv_command(map_text, window, effort, fmt, output):
    """Bi-I_d-invariance of an increasing injection, decided two ways."""
    f = parse_map(map_text)
    config = _config("idd-biinv", window, effort, fmt, output, map=dump_expr(f))
    _emit(config, idd_biinvariance(f, config.window))


@cli.command("c5-refute")
@click.option("--samples", "samples_text", default=None, help="JSON list of sample sets (or @file)")
@run_options(window=1 << 34)
@guarded
def c5_refute_command(samples_text, window, effort, fmt, output):
    """A thin set refuting the lower-density characterization for I_d."""
    samples = parse_family(samples_text, OMEGA, "samples") if samples_text is not None else None
    config = _config(
        "c5-refute",
        window,
        effort,
        fmt,
        output,
        samples=[dump_expr(s) for s in samples] if samples is not None else None,
    )
    _emit(config, c5_refuter_idd(config.window, samples))


if __name__ == "__main__":
    cli()
