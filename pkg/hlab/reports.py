"""CSV and JSON result files"""

import json
import os
from typing import Optional, Sequence

import pandas as pd

from hlab.config import SETTINGS
from hlab.errors import ReportError
from hlab.progress import say

SCHEMA_VERSION = "v1"
CSV_COLUMNS = [
    "scenario",
    "n_pts",
    "p",
    "q",
    "s",
    "beta",
    "constant",
    "lower",
    "upper",
    "pass",
    "in_hypothesis",
    "label",
]
FLOAT_FORMAT = "%.10g"


def rows_frame(rows: Sequence[dict]) -> pd.DataFrame:
    """One row per parameter point; extra keys go after the fixed columns."""
    frame = pd.DataFrame(list(rows))
    for column in CSV_COLUMNS:
        if column not in frame.columns:
            frame[column] = ""
    extra = sorted(c for c in frame.columns if c not in CSV_COLUMNS)
    return frame[CSV_COLUMNS + extra]


def write_csv(rows: Sequence[dict], path: str) -> str:
    """UTF-8 CSV with a header row and fixed float formatting."""
    frame = rows_frame(rows)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding="utf-8", lineterminator="\n")
    return path


def write_json(payload: dict, path: str) -> str:
    """Versioned report, sorted keys."""
    document = {"schema": SCHEMA_VERSION, **payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(document, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    return path


def read_report(path: str) -> dict:
    """Load a JSON report and check its schema version."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            document = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportError(f"cannot read report {path}: {exc}") from exc
    if document.get("schema") != SCHEMA_VERSION:
        raise ReportError(f"report {path} has schema {document.get('schema')!r}, expected {SCHEMA_VERSION}")
    return document


def write_outputs(
    stem: str,
    rows: Sequence[dict],
    payload: dict,
    output_dir: Optional[str] = None,
) -> tuple:
    """Write <stem>.csv and <stem>.json under output_dir; returns both paths."""
    output_dir = output_dir or SETTINGS.output_dir
    try:
        os.makedirs(output_dir, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create output directory {output_dir}: {exc}") from exc
    csv_path = write_csv(rows, os.path.join(output_dir, f"{stem}.csv"))
    json_path = write_json(payload, os.path.join(output_dir, f"{stem}.json"))
    say(f"Wrote {len(rows)} rows to {csv_path}")
    say(f"Wrote report to {json_path}")
    return csv_path, json_path
