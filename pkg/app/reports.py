"""Report output: sorted, indented orjson for JSON, csv tables for series, plain text for humans."""
import csv
import io
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List

import orjson
from pydantic import BaseModel

from app.models import OutputFormat, WitnessReport

logger = logging.getLogger(__name__)

JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_NON_STR_KEYS | orjson.OPT_APPEND_NEWLINE


def _default(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, BaseModel):
        return to_payload(value)
    if isinstance(value, (set, frozenset, tuple)):
        return list(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def to_payload(result: Any) -> Any:
    if isinstance(result, WitnessReport):
        return result.summary()
    if isinstance(result, BaseModel):
        return result.model_dump(mode="json", by_alias=True)
    return result


def dumps(result: Any) -> bytes:
    return orjson.dumps(to_payload(result), default=_default, option=JSON_OPTIONS)


def csv_rows(payload: Dict[str, Any]) -> List[Dict[str, Any]]:
    """The tabular part of a result: checks, checkpoints or per-epsilon entries"""
    if "checks" in payload:
        return [
            {
                "check": check["name"],
                "passed": check["passed"],
                "counterexample": orjson.dumps(check["counterexample"]).decode() if check["counterexample"] else "",
            }
            for check in payload["checks"]
        ]
    if "runs" in payload:
        return [
            {"name": run["name"], "outcome": run["outcome"], "checks": run.get("checks", ""), "error": run.get("error", "")}
            for run in payload["runs"]
        ]
    if "witnesses" in payload:
        return [
            {"name": spec["name"], "window": spec["window"], "description": spec["description"]}
            for spec in payload["witnesses"]
        ]
    if "entries" in payload:
        return [
            {
                "epsilon": entry.get("epsilon"),
                "level_set": entry.get("level_set", entry.get("set")),
                "verdict": entry["verdict"]["kind"] if isinstance(entry["verdict"], dict) else entry["verdict"],
            }
            for entry in payload["entries"]
        ]
    if "checkpoints" in payload:
        rows = []
        for point in payload["checkpoints"]:
            if len(point) == 3:
                rows.append({"n": point[0], "lower": point[1], "upper": point[2]})
            else:
                rows.append({"n": point[0], "ratio": point[1]})
        return rows
    return [{key: value for key, value in payload.items() if not isinstance(value, (dict, list))}]


def render_csv(result: Any) -> str:
    rows = csv_rows(to_payload(result))
    buffer = io.StringIO()
    if rows:
        writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buffer.getvalue()


def render_human(result: Any) -> str:
    payload = to_payload(result)
    if not isinstance(payload, dict):
        return f"{payload}\n"
    lines = []
    for key in sorted(payload):
        value = payload[key]
        if isinstance(value, (dict, list)):
            value = orjson.dumps(value, default=_default).decode()
        lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"


def render(result: Any, fmt: OutputFormat = OutputFormat.JSON) -> bytes:
    if fmt == OutputFormat.CSV:
        return render_csv(result).encode()
    if fmt == OutputFormat.HUMAN:
        return render_human(result).encode()
    return dumps(result)


def write_bytes(data: bytes, path: str) -> bytes:
    """Written to a sibling .partial file, then renamed into place"""
    target = Path(path)
    partial = target.with_name(target.name + ".partial")
    partial.write_bytes(data)
    partial.replace(target)
    logger.info(f"💾 Report written to {path}")
    return data


def write_report(result: Any, path: str, fmt: OutputFormat = OutputFormat.JSON) -> bytes:
    return write_bytes(render(result, fmt), path)


def envelope(command: str, parameters: Dict[str, Any], result: Any) -> Dict[str, Any]:
    """A replayable report: the command, every parameter it ran with, and its result"""
    return {"command": command, "parameters": parameters, "result": to_payload(result)}
