"""CSV emission and parsing for series, evaluations, and summaries.

All CSVs are comma-separated with a header row, UTF-8, LF line endings.
Floats are written with repr so re-reading reproduces them bit-for-bit.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dynamics import TimeSeries

__all__ = [
    "write_timeseries_csv",
    "read_timeseries_csv",
    "write_summary_json",
]


def write_timeseries_csv(series: TimeSeries, path) -> None:
    """Columns: t, u0..u{D-1}; time is index * dt."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["t"] + [f"u{i}" for i in range(series.dim)]) + "\n")
        for k in range(series.len):
            cells = [repr(k * series.dt)]
            cells += [repr(float(v)) for v in series.values[:, k]]
            fh.write(",".join(cells) + "\n")


def read_timeseries_csv(path) -> TimeSeries:
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    if data.ndim == 1:
        data = data[None, :]
    if data.shape[0] < 2 or data.shape[1] < 2:
        raise ValueError(f"{path}: expected a header and >= 2 rows of t,u...")
    t = data[:, 0]
    return TimeSeries(data[:, 1:].T.copy(), float(t[1] - t[0]))


def write_summary_json(summary_dict: dict, path) -> None:
    Path(path).write_text(
        json.dumps(summary_dict, indent=2, sort_keys=True) + "\n", encoding="utf-8")
