"""
Command line surface: report envelopes, formats and exit codes
"""
import orjson

from app.cli import cli
from app.config import settings

SQUARES = '{"kind": "squares"}'
DENSITY = '{"kind": "density"}'


def _error(result):
    line = next(line for line in result.stderr.splitlines() if line.startswith('{"'))
    return orjson.loads(line)


def test_member_writes_a_replayable_envelope(runner):
    result = runner.invoke(cli, ["member", "--ideal", DENSITY, "--set", SQUARES])
    assert result.exit_code == 0
    report = orjson.loads(result.stdout)
    assert report["command"] == "member"
    assert report["result"]["kind"] == "proven-in"
    assert report["parameters"]["set"] == {"kind": "squares"}
    assert "effort" in report["parameters"]
    assert "seed" in report["parameters"]


def test_detect_ap_reads_the_set_file(runner, evens_file):
    result = runner.invoke(cli, ["detect", "ap", "--set-file", evens_file, "--window", "100"])
    assert result.exit_code == 0
    report = orjson.loads(result.stdout)
    assert report["command"] == "detect ap"
    assert report["result"]["length"] == 50
    assert report["parameters"]["window"] == 100


def test_set_source_is_required_once(runner, evens_file):
    result = runner.invoke(cli, ["detect", "ap"])
    assert result.exit_code == 2

    result = runner.invoke(cli, ["detect", "ap", "--set", SQUARES, "--set-file", evens_file])
    assert result.exit_code == 2


def test_malformed_json_reports_on_stderr(runner):
    result = runner.invoke(cli, ["density", "--set", "{oops"])
    assert result.exit_code == 2
    assert result.stdout == ""
    error = _error(result)
    assert error["error"] == "malformed-expression"
    assert "position" in error["details"]


def test_base_space_mismatch_exits_2(runner):
    result = runner.invoke(cli, ["member", "--ideal", '{"kind": "fin"}', "--set", '{"kind": "triangle"}'])
    assert result.exit_code == 2
    assert _error(result)["error"] == "base-space-mismatch"


def test_density_formats(runner, tmp_path):
    result = runner.invoke(cli, ["density", "--set", SQUARES, "--window", "100", "--format", "csv"])
    assert result.exit_code == 0
    assert result.stdout.splitlines()[0] == "n,ratio"

    result = runner.invoke(cli, ["density", "--set", SQUARES, "--window", "100", "--format", "human"])
    assert result.exit_code == 0
    assert result.stdout.startswith("command: density")
    assert "ratio: 1/10" in result.stdout

    target = tmp_path / "density.json"
    result = runner.invoke(cli, ["density", "--set", SQUARES, "--window", "100", "-o", str(target)])
    assert result.exit_code == 0
    assert result.stdout == ""
    assert orjson.loads(target.read_bytes())["result"]["count"] == 10


def test_witness_list_and_run(runner):
    result = runner.invoke(cli, ["witness", "--list"])
    assert result.exit_code == 0
    names = [spec["name"] for spec in orjson.loads(result.stdout)["result"]["witnesses"]]
    assert "eu-nondense" in names
    assert "antihomog" in names

    result = runner.invoke(cli, ["witness", "eu-nondense", "--depth", "3"])
    assert result.exit_code == 0
    report = orjson.loads(result.stdout)
    assert report["command"] == "witness eu-nondense"
    assert report["parameters"]["params"] == {"n_max": 3}


def test_witness_needs_a_name(runner):
    result = runner.invoke(cli, ["witness"])
    assert result.exit_code == 2


def test_idd_biinv(runner):
    result = runner.invoke(cli, ["idd-biinv", "--map", '{"kind": "affine", "scale": 2}', "--window", "1024"])
    assert result.exit_code == 0
    certificate = orjson.loads(result.stdout)["result"]
    assert certificate["bi_invariant"] is True
    assert certificate["constant"] == 2
    assert certificate["image_density"] == "1/2"


def test_injectivity_violation_exits_1(runner):
    table = '{"kind": "table", "pairs": [[0, 1]]}'
    result = runner.invoke(
        cli,
        ["invariance", "--map", table, "--ideal", DENSITY, "--family", '[{"kind": "all"}]', "--window", "16"],
    )
    assert result.exit_code == 1
    assert _error(result)["error"] == "injectivity-violation"


def test_reports_are_byte_identical_across_runs(runner):
    args = ["witness", "gallai2", "--depth", "3"]
    first = runner.invoke(cli, args)
    second = runner.invoke(cli, args)
    assert first.exit_code == 0
    assert first.stdout_bytes == second.stdout_bytes


def test_exhausted_effort_exits_3(runner, monkeypatch):
    monkeypatch.setattr(settings, "enumeration_cap", 64)
    unfiltered = '{"kind": "sum-filter", "inner": {"kind": "progression", "start": 1, "step": 3}}'
    result = runner.invoke(cli, ["member", "--ideal", DENSITY, "--set", unfiltered])
    assert result.exit_code == 3
    report = orjson.loads(result.stdout)
    assert report["result"]["kind"] == "unknown"
    assert report["result"]["exhausted"] is True
