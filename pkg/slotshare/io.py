"""Metric table emission and reload."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict

import pandas as pd

from .exceptions import SlotShareError
from .report import MetricsLog

logger = logging.getLogger(__name__)

METRIC_FILES = {
    "slots": "slots.csv",
    "users": "users.csv",
    "summary": "summary.csv",
    "decisions": "decisions.csv",
}


def load_dataframe(path: str | Path) -> pd.DataFrame:
    ext = Path(path).suffix.lower()
    if ext != ".csv":
        raise SlotShareError(f"Unsupported data format: {ext}")
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except OSError as exc:
        raise SlotShareError(f"Cannot read {path}: {exc}") from exc


def save_dataframe(df: pd.DataFrame, path: str | Path) -> None:
    ext = Path(path).suffix.lower()
    if ext != ".csv":
        raise SlotShareError(f"Unsupported output format: {ext}")
    df.to_csv(path, index=False)


def emit_metrics(log: MetricsLog, out_dir: str | Path) -> Dict[str, Path]:
    """Write every table of ``log`` under ``out_dir``; returns the written paths by table."""

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: Dict[str, Path] = {}
    for table, name in METRIC_FILES.items():
        path = out / name
        save_dataframe(getattr(log, table), path)
        written[table] = path
    logger.info("metrics written dir=%s", out)
    return written


def load_metrics(out_dir: str | Path) -> MetricsLog:
    out = Path(out_dir)
    tables = {table: load_dataframe(out / name) for table, name in METRIC_FILES.items()}
    return MetricsLog(**tables)
