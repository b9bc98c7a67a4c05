"""Matplotlib rendering of the standard report figures.

Every function writes a PNG next to the CSV data it depicts and returns the
path. The Agg backend is forced so rendering works headless.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "vpt_histogram",
    "vpt_box_comparison",
    "rmse_curves",
    "stability_heatmap",
    "spectrum_comparison",
    "trajectory_figure",
]


def _finish(fig, path):
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def vpt_histogram(groups: dict, path, epsilon: float = 0.3):
    """Histogram(s) of VPT (Lyapunov times); groups maps label -> evals."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, evals in groups.items():
        vals = [e.vpt_lyapunov for e in evals]
        ax.hist(vals, bins=24, alpha=0.55, label=label)
    ax.set_xlabel(r"valid prediction time  [$\tau_\lambda$]")
    ax.set_ylabel("count")
    ax.set_title(f"VPT distribution (threshold {epsilon})")
    if len(groups) > 1 or any(groups):
        ax.legend(fontsize=8)
    return _finish(fig, path)


def vpt_box_comparison(groups: dict, path, title: str = "VPT comparison"):
    """Box plot of VPTs per labelled run."""
    labels = list(groups)
    data = [[e.vpt_lyapunov for e in evals] for evals in groups.values()]
    fig, ax = plt.subplots(figsize=(max(5, 1.3 * len(labels)), 4))
    ax.boxplot(data, tick_labels=labels)
    ax.set_ylabel(r"VPT  [$\tau_\lambda$]")
    ax.set_title(title)
    ax.tick_params(axis="x", rotation=20)
    return _finish(fig, path)


def rmse_curves(rmse_list, dt: float, tau_lambda: float, path,
                epsilon: float = 0.3, max_curves: int = 20):
    """Normalized RMSE trajectories against lead time."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for series in rmse_list[:max_curves]:
        t = np.arange(len(series)) * dt / tau_lambda
        ax.plot(t, series, lw=0.8, alpha=0.7)
    ax.axhline(epsilon, color="k", ls="--", lw=1, label=f"threshold {epsilon}")
    ax.set_xlabel(r"lead time  [$\tau_\lambda$]")
    ax.set_ylabel("normalized RMSE")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def stability_heatmap(smap, path):
    """Max |eigenvalue| of the driven Jacobian over the (rho, input) grid."""
    fig, ax = plt.subplots(figsize=(6, 5))
    vals = np.ma.masked_invalid(smap.values)
    mesh = ax.pcolormesh(
        smap.input_values, smap.rho_values, vals, shading="nearest",
        cmap="RdBu_r", vmin=0.0, vmax=2.0)
    cs = ax.contour(smap.input_values, smap.rho_values, vals,
                    levels=[1.0], colors="k", linewidths=1.2)
    ax.clabel(cs, fmt={1.0: "1"})
    ax.axhline(1.0, color="w", lw=1.0)
    fig.colorbar(mesh, ax=ax, label="max |eigenvalue|")
    ax.set_xlabel("input magnitude")
    ax.set_ylabel("spectral radius")
    ax.set_title(f"fixed-point stability (N={smap.size}, leak={smap.leak})")
    return _finish(fig, path)


def spectrum_comparison(computed, path, reference=None, title="Lyapunov spectrum"):
    fig, ax = plt.subplots(figsize=(6, 4))
    idx = np.arange(len(computed))
    ax.plot(idx, computed, "o-", label="computed")
    if reference is not None:
        ref = np.asarray(reference, dtype=float)
        ax.plot(np.arange(len(ref)), ref, "s--", label="reference")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("index")
    ax.set_ylabel("exponent")
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def trajectory_figure(series, path, max_dims: int = 4, title="trajectory"):
    fig, ax = plt.subplots(figsize=(8, 4))
    t = np.arange(series.len) * series.dt
    for i in range(min(series.dim, max_dims)):
        ax.plot(t, series.values[i], lw=0.8, label=f"u{i}")
    ax.set_xlabel("time")
    ax.set_ylabel("state")
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _finish(fig, path)
