"""Versioned, bit-stable CSV emitters and readers."""
from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

SCHEMAS = {
    "run": ("t", "v", "d", "bid", "win", "payment", "utility", "roi_balance"),
    "revenue": ("price", "revenue", "class", "roi_slack", "budget_slack"),
    "aggregate": ("bidder", "regime", "median_norm_utility", "q25", "q75",
                  "roi_attained_frac", "final_depletion"),
    "pricing": ("t", "price", "take", "phase"),
    "sweep": ("T", "mean_regret", "stderr", "slope"),
    "solution": ("field", "value"),
}
VERSION = 1


class SchemaError(ValueError):
    pass


def fmt(x) -> str:
    """Shortest round-trip text for floats; ints and bools as integers."""
    if isinstance(x, str):
        return str(x)
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float) or hasattr(x, "dtype"):
        f = float(x)
        if f.is_integer() and hasattr(x, "dtype") and x.dtype.kind in "iub":
            return str(int(f))
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return repr(f)
    if x is None:
        return ""
    return str(x)


def header_line(schema: str) -> str:
    return f"#schema={schema}/{VERSION}"


def render(schema: str, rows: Iterable[Mapping | tuple]) -> str:
    if schema not in SCHEMAS:
        raise SchemaError(f"unknown schema {schema!r}")
    cols = SCHEMAS[schema]
    buf = io.StringIO()
    buf.write(header_line(schema) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        vals = [row[c] for c in cols] if isinstance(row, Mapping) else row
        if len(vals) != len(cols):
            raise SchemaError(f"{schema} rows need {len(cols)} fields, got {len(vals)}")
        w.writerow([fmt(v) for v in vals])
    return buf.getvalue()


def write_csv(path: Path | str, schema: str, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render(schema, rows), encoding="utf-8")
    return path


def read_csv(path: Path | str, schema: str | None = None) -> tuple[str, list[dict[str, str]]]:
    """Return (schema, rows); rejects missing or unknown version headers."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("#schema="):
        raise SchemaError(f"{path}: missing schema header")
    name, _, version = text[0][len("#schema="):].partition("/")
    if name not in SCHEMAS or version != str(VERSION):
        raise SchemaError(f"{path}: unsupported schema {name}/{version}")
    if schema is not None and name != schema:
        raise SchemaError(f"{path}: expected {schema}, found {name}")
    reader = csv.DictReader(text[1:])
    if tuple(reader.fieldnames or ()) != SCHEMAS[name]:
        raise SchemaError(f"{path}: columns do not match {name}/{VERSION}")
    return name, list(reader)


def run_rows(record):
    """Per-period rows of a RunRecord in the run schema."""
    pay, util, roi = record.payment, record.utility, record.roi_balance
    for t in range(record.T):
        yield (t + 1, record.v[t], record.d[t], record.bid[t], bool(record.win[t]),
               pay[t], util[t], roi[t])


def write_meta(out_dir: Path | str, **fields) -> Path:
    """Sidecar with the wall-clock timestamp; data files never carry one."""
    path = Path(out_dir) / "meta.json"
    payload = {"created": datetime.now(timezone.utc).isoformat(), **fields}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path
