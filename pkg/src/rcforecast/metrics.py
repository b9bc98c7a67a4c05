"""Forecast evaluation: normalized RMSE, valid prediction time, distributions.

RMSE(t) = sqrt( (1/D) sum_i [(u_f_i(t) - u_i(t)) / sigma_i]^2 ) with sigma_i
the per-dimension climatological standard deviation of the training data.
The valid prediction time (VPT) is the first step at which RMSE strictly
exceeds the threshold epsilon, reported both in steps and in Lyapunov times.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import TimeSeries

__all__ = [
    "ForecastEval",
    "VptSummary",
    "nrmse",
    "vpt",
    "vpt_distribution",
    "write_evaluation_csv",
]


@dataclass(frozen=True)
class ForecastEval:
    """Evaluation of one forecast against truth."""

    rmse_series: np.ndarray
    vpt_steps: int
    vpt_lyapunov: float
    threshold: float
    truncated: bool
    climatology_std: np.ndarray | None = None
    ic_index: int | None = None


@dataclass(frozen=True)
class VptSummary:
    """Distribution statistics of VPTs (in Lyapunov times) across test ICs."""

    count: int
    mean: float
    median: float
    q25: float
    q75: float
    vmin: float
    vmax: float
    truncated: int
    hist_counts: tuple
    hist_edges: tuple

    def as_dict(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "median": self.median,
            "q25": self.q25,
            "q75": self.q75,
            "min": self.vmin,
            "max": self.vmax,
            "truncated": self.truncated,
            "hist_counts": list(self.hist_counts),
            "hist_edges": list(self.hist_edges),
        }


def nrmse(forecast: TimeSeries, truth: TimeSeries,
          climatology_std: np.ndarray) -> np.ndarray:
    """Per-step normalized RMSE between a forecast and the truth."""
    if forecast.dim != truth.dim or forecast.len != truth.len:
        raise ValueError(
            f"forecast {forecast.values.shape} and truth {truth.values.shape} "
            "must have identical shape")
    std = np.asarray(climatology_std, dtype=float)
    if std.shape != (forecast.dim,):
        raise ValueError(f"climatology_std must have shape ({forecast.dim},)")
    bad = np.nonzero(std <= 0)[0]
    if bad.size:
        raise ValueError(f"climatology std must be positive; zero in dimension(s) {bad.tolist()}")
    e = (forecast.values - truth.values) / std[:, None]
    return np.sqrt(np.mean(e * e, axis=0))


def vpt(rmse_series: np.ndarray, threshold: float, dt: float,
        tau_lambda: float, climatology_std: np.ndarray | None = None,
        ic_index: int | None = None) -> ForecastEval:
    """First strict threshold exceedance of the RMSE trajectory.

    Non-finite RMSE entries count as exceedances. If the series never
    crosses, vpt_steps equals its length and the evaluation is flagged
    truncated.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    series = np.asarray(rmse_series, dtype=float)
    crossed = (series > threshold) | ~np.isfinite(series)
    if crossed.any():
        steps = int(np.argmax(crossed))
        truncated = False
    else:
        steps = series.shape[0]
        truncated = True
    return ForecastEval(
        rmse_series=series,
        vpt_steps=steps,
        vpt_lyapunov=steps * dt / tau_lambda,
        threshold=threshold,
        truncated=truncated,
        climatology_std=climatology_std,
        ic_index=ic_index,
    )


def vpt_distribution(evals: list, bins: int = 20) -> VptSummary:
    """Summary statistics over the VPTs (in Lyapunov times) of many forecasts."""
    if not evals:
        raise ValueError("need at least one evaluation")
    vals = np.array([e.vpt_lyapunov for e in evals])
    top = float(vals.max())
    edges = np.histogram_bin_edges(vals, bins=bins, range=(0.0, top if top > 0 else 1.0))
    counts, _ = np.histogram(vals, bins=edges)
    return VptSummary(
        count=len(evals),
        mean=float(vals.mean()),
        median=float(np.median(vals)),
        q25=float(np.percentile(vals, 25)),
        q75=float(np.percentile(vals, 75)),
        vmin=float(vals.min()),
        vmax=float(vals.max()),
        truncated=int(sum(e.truncated for e in evals)),
        hist_counts=tuple(int(c) for c in counts),
        hist_edges=tuple(float(x) for x in edges),
    )


def write_evaluation_csv(evals: list, path) -> None:
    """Per-IC evaluation rows: ic_index, vpt_steps, vpt_lyapunov, truncated_flag."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("ic_index,vpt_steps,vpt_lyapunov,truncated\n")
        for i, ev in enumerate(evals):
            idx = ev.ic_index if ev.ic_index is not None else i
            fh.write(f"{idx},{ev.vpt_steps},{ev.vpt_lyapunov!r},{int(ev.truncated)}\n")
