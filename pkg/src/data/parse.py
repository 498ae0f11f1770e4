import json
import logging
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from src.utils.errors import CatGANError

logger = logging.getLogger(__name__)

# Columns every parsed log frame carries, whatever the records contain
BASE_COLUMNS = ["run", "phase", "step", "round", "epoch"]


@dataclass
class ParsedLog:
    frame: pd.DataFrame
    skipped: int
    path: Path


# Helper functions for record processing
def parse_record(line):
    """Parse one metrics-log line into a flat dict, or None if it is not a record."""
    line = line.strip()
    if not line:
        return None
    try:
        record = json.loads(line)
    except json.JSONDecodeError:
        return None
    if not isinstance(record, dict) or "phase" not in record or "step" not in record:
        return None
    flat = {k: v for k, v in record.items() if not isinstance(v, (dict, list))}
    for category, values in (record.get("per_category") or {}).items():
        for name, value in values.items():
            flat[f"{name}/{category}"] = value
    return flat


def read_metrics_log(path, run=None):
    """Load a JSON-lines metrics log into a DataFrame sorted by step.

    Corrupt or foreign lines are skipped and counted.
    """
    path = Path(path)
    if not path.is_file():
        raise CatGANError(f"Metrics log not found: {path}")

    rows, skipped = [], 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = parse_record(line)
            if record is None:
                skipped += 1
                continue
            rows.append(record)
    if skipped:
        logger.warning("Skipped %d corrupt line(s) in %s", skipped, path)

    df = pd.DataFrame(rows)
    for col in BASE_COLUMNS:
        if col not in df.columns:
            df[col] = pd.NA
    df["run"] = run or path.parent.name or path.stem
    df = df.sort_values("step", kind="stable").reset_index(drop=True)
    return ParsedLog(df, skipped, path)


def combine_logs(paths):
    """Several logs in one frame; runs are labelled by directory name, deduplicated."""
    parsed = []
    seen = {}
    for path in paths:
        path = Path(path)
        label = path.parent.name or path.stem
        seen[label] = seen.get(label, 0) + 1
        if seen[label] > 1:
            label = f"{label} ({seen[label]})"
        parsed.append(read_metrics_log(path, run=label))
    frame = pd.concat([p.frame for p in parsed], ignore_index=True) if parsed else pd.DataFrame()
    return frame, sum(p.skipped for p in parsed)


def pretrain_boundary(df):
    """Step at which pre-training ended, or None when the log has no pre-training records."""
    pretrain = df[df["phase"] == "pretrain"]
    if pretrain.empty:
        return None
    return float(pretrain["step"].max())


def metric_series(df, metric):
    """(step, value) rows of one metric, per run, with missing values dropped."""
    if metric not in df.columns:
        return pd.DataFrame(columns=["run", "phase", "step", metric])
    return df.loc[df[metric].notna(), ["run", "phase", "step", metric]]


def format_duration(seconds):
    """Format seconds like '1h 02m 05s', '3m 07s' or '12.4s'."""
    if seconds < 60:
        return f"{seconds:.1f}s"
    total = int(round(seconds))
    hours, rest = divmod(total, 3600)
    minutes, secs = divmod(rest, 60)
    if hours:
        return f"{hours}h {minutes:02d}m {secs:02d}s"
    return f"{minutes}m {secs:02d}s"


def format_metric(value, digits=4):
    if value is None or pd.isna(value):
        return "-"
    return f"{value:.{digits}f}"
