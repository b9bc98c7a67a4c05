"""Data preparation: normalization, additive noise, subsampling, splitting.

Normalization statistics are always computed from the training segment only
("climatological" statistics) and can be applied to or inverted on any other
segment of the same dimensionality.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import TimeSeries, sample_test_ics

__all__ = [
    "SCHEMES",
    "NormalizationStats",
    "DataSplit",
    "normalize",
    "apply_stats",
    "invert_stats",
    "add_noise",
    "subsample",
    "make_split",
]

SCHEMES = ("none", "per_variable", "joint")


@dataclass(frozen=True)
class NormalizationStats:
    """Parameters of a fitted normalization, sufficient to apply or invert it.

    scheme "per_variable": u_i -> (u_i - mean_i) / std_i per dimension.
    scheme "joint":        u_i -> (u_i - mean(u)) / (max u - min u), scalars
    computed over all variables jointly.
    """

    scheme: str
    mean: np.ndarray | float | None = None
    std: np.ndarray | None = None
    vmax: float | None = None
    vmin: float | None = None

    def as_dict(self) -> dict:
        d = {"scheme": self.scheme}
        if self.scheme == "per_variable":
            d["mean"] = [float(m) for m in np.atleast_1d(self.mean)]
            d["std"] = [float(s) for s in np.atleast_1d(self.std)]
        elif self.scheme == "joint":
            d.update(mean=float(self.mean), max=float(self.vmax), min=float(self.vmin))
        return d


def normalize(series: TimeSeries, scheme: str) -> tuple[TimeSeries, NormalizationStats]:
    """Fit a normalization on `series` and return the transformed series.

    Pass the training segment here; use apply_stats for validation/test data
    so the statistics never leak out of the training climatology.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if scheme == "none":
        return series, NormalizationStats(scheme="none")
    u = series.values
    if scheme == "per_variable":
        mean = u.mean(axis=1)
        std = u.std(axis=1)
        bad = np.nonzero(std == 0.0)[0]
        if bad.size:
            raise ValueError(f"zero standard deviation in dimension(s) {bad.tolist()}")
        stats = NormalizationStats(scheme=scheme, mean=mean, std=std)
    else:
        mean = float(u.mean())
        vmax, vmin = float(u.max()), float(u.min())
        if vmax == vmin:
            raise ValueError("degenerate data: max equals min, joint scheme undefined")
        stats = NormalizationStats(scheme=scheme, mean=mean, vmax=vmax, vmin=vmin)
    return apply_stats(series, stats), stats


def apply_stats(series: TimeSeries, stats: NormalizationStats) -> TimeSeries:
    if stats.scheme == "none":
        return series
    u = series.values
    if stats.scheme == "per_variable":
        out = (u - stats.mean[:, None]) / stats.std[:, None]
    else:
        out = (u - stats.mean) / (stats.vmax - stats.vmin)
    return TimeSeries(out, series.dt)


def invert_stats(series: TimeSeries, stats: NormalizationStats) -> TimeSeries:
    if stats.scheme == "none":
        return series
    u = series.values
    if stats.scheme == "per_variable":
        out = u * stats.std[:, None] + stats.mean[:, None]
    else:
        out = u * (stats.vmax - stats.vmin) + stats.mean
    return TimeSeries(out, series.dt)


def add_noise(series: TimeSeries, percent: float, seed: int) -> TimeSeries:
    """Additive Gaussian noise, std = (percent/100) * per-variable std."""
    if percent < 0:
        raise ValueError("percent must be >= 0")
    if percent == 0:
        return series
    rng = np.random.default_rng(seed)
    scale = (percent / 100.0) * series.values.std(axis=1)
    noisy = series.values + scale[:, None] * rng.standard_normal(series.values.shape)
    return TimeSeries(noisy, series.dt)


def subsample(series: TimeSeries, factor: int) -> TimeSeries:
    """Keep every factor-th sample; dt grows by the same factor.

    The spanned time is preserved up to truncation of the last partial
    stride. Phase always starts at index 0.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return series
    return TimeSeries(series.values[:, ::factor].copy(), series.dt * factor)


@dataclass(frozen=True)
class DataSplit:
    """Training segment, macro-loss forecast windows, and test ICs.

    All index fields refer to columns of `full`. The layout is

        [ ridge training | spinup+window blocks ... | test region ]

    so windows and test initial conditions never overlap each other or the
    ridge segment.
    """

    full: TimeSeries
    train: TimeSeries
    macro_windows: tuple            # ((start, length), ...)
    test_ics: tuple                 # ((index, state), ...)
    spinup_steps: int
    horizon: int

    @property
    def climatology_std(self) -> np.ndarray:
        """Per-dimension std of the training segment (used by NRMSE)."""
        return self.train.values.std(axis=1)


def make_split(full: TimeSeries, train_len: int, spinup_steps: int,
               m_windows: int, window_len: int,
               test_count: int, test_min_separation: int, horizon: int,
               seed: int = 0) -> DataSplit:
    """Carve a long series into disjoint training / macro-window / test parts."""
    if train_len <= spinup_steps + 1:
        raise ValueError("train_len must exceed spinup_steps + 1")
    stride = spinup_steps + window_len
    macro_end = train_len + m_windows * stride
    if macro_end > full.len:
        raise ValueError(
            f"series too short for {m_windows} windows of {window_len} "
            f"(+{spinup_steps} spinup): need {macro_end}, have {full.len}"
        )
    windows = tuple(
        (train_len + i * stride + spinup_steps, window_len) for i in range(m_windows)
    )
    ics = sample_test_ics(
        full, test_count, test_min_separation, seed=seed,
        lo=macro_end + spinup_steps, hi=full.len - horizon,
    )
    return DataSplit(
        full=full,
        train=full.window(0, train_len),
        macro_windows=windows,
        test_ics=tuple(ics),
        spinup_steps=spinup_steps,
        horizon=horizon,
    )
