"""Experiment harness: prepared data bundles, batched evaluation, protocols.

Evaluation sweeps hundreds of forecast initial conditions; the harness
advances all of them as one state matrix per reservoir so the sparse matrix
products are batched. Forecasts that go non-finite simply stop counting
(their RMSE is treated as an exceedance from that step on).

When measurement noise is configured, the model sees the noisy series for
training and spinup while forecasts are scored against the clean truth, both
in the same (optionally normalized) space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dataops import DataSplit, add_noise, apply_stats, make_split, normalize, subsample
from .dynamics import SystemSpec, TimeSeries, builtin_system, generate
from .localization import LocalizedEnsemble, make_layout, train_localized
from .metrics import ForecastEval, VptSummary, vpt, vpt_distribution
from .reservoir import MacroParams, Reservoir, advance_states, build, readout
from .training import train_readout

__all__ = [
    "Protocol",
    "SystemData",
    "RunResult",
    "prepare_system",
    "evaluate_reservoir",
    "evaluate_localized",
    "run_single",
    "run_localized",
]


@dataclass(frozen=True)
class Protocol:
    """Shared experiment protocol: data sizes, evaluation settings, seeds.

    horizon_tau and min_sep_tau are expressed in Lyapunov times of the
    system under study and converted to steps per system.
    """

    train_len: int = 100_000
    spinup_steps: int = 30
    ic_count: int = 200
    epsilon: float = 0.3
    horizon_tau: float = 12.0
    min_sep_tau: float = 1.0
    min_sep_floor: int = 50
    m_windows: int = 0
    window_len: int = 200
    data_seed: int = 0
    ic_seed: int = 7
    noise_seed: int = 1234


@dataclass(frozen=True)
class SystemData:
    """A prepared dataset: model-side series, clean truth, split, and scales."""

    sys: SystemSpec
    model: TimeSeries
    truth: TimeSeries
    split: DataSplit
    climatology_std: np.ndarray
    stats_dict: dict
    horizon: int
    epsilon: float

    @property
    def tau_lambda(self) -> float:
        return self.sys.tau_lambda

    @property
    def ic_indices(self) -> list:
        return [i for i, _ in self.split.test_ics]


def prepare_system(name: str, protocol: Protocol = Protocol(), *,
                   dt: float | None = None, scheme: str = "none",
                   noise_percent: float = 0.0, subsample_factor: int = 1,
                   unit_scale: np.ndarray | None = None) -> SystemData:
    """Generate and prepare one system's data per the protocol.

    unit_scale, when given, multiplies each state dimension after generation
    (used for the mixed-units studies, e.g. expressing positions in microns).
    """
    sys = builtin_system(name)
    base_dt = sys.default_dt if dt is None else dt
    eff_dt = base_dt * subsample_factor
    tau = sys.tau_lambda
    horizon = max(int(math.ceil(protocol.horizon_tau * tau / eff_dt)), 10)
    min_sep = max(protocol.min_sep_floor,
                  int(round(protocol.min_sep_tau * tau / eff_dt)))

    needed = (protocol.train_len
              + protocol.m_windows * (protocol.spinup_steps + protocol.window_len)
              + protocol.spinup_steps
              + (protocol.ic_count - 1) * min_sep + 1
              + horizon + 1000)
    raw = generate(sys, needed * subsample_factor, dt=base_dt, seed=protocol.data_seed)
    if unit_scale is not None:
        raw = TimeSeries(raw.values * np.asarray(unit_scale, dtype=float)[:, None], raw.dt)
    clean = subsample(raw, subsample_factor)
    noisy = add_noise(clean, noise_percent, protocol.noise_seed) \
        if noise_percent > 0 else clean

    _, stats = normalize(noisy.window(0, protocol.train_len), scheme)
    model_series = apply_stats(noisy, stats)
    truth_series = apply_stats(clean, stats) if noisy is not clean else model_series

    split = make_split(
        model_series, protocol.train_len, protocol.spinup_steps,
        protocol.m_windows, protocol.window_len,
        protocol.ic_count, min_sep, horizon, seed=protocol.ic_seed)
    return SystemData(
        sys=sys, model=model_series, truth=truth_series, split=split,
        climatology_std=split.climatology_std, stats_dict=stats.as_dict(),
        horizon=horizon, epsilon=protocol.epsilon)


# ---------------------------------------------------------------------------
# Batched evaluation


def _finish_evals(rmse: np.ndarray, starts: np.ndarray, epsilon: float,
                  dt: float, tau_lambda: float,
                  climatology_std: np.ndarray) -> list:
    evals = []
    for b in range(starts.size):
        evals.append(vpt(rmse[:, b], epsilon, dt, tau_lambda,
                         climatology_std=climatology_std,
                         ic_index=int(starts[b])))
    return evals


def evaluate_reservoir(res: Reservoir, inputs: TimeSeries, truth: TimeSeries,
                       ic_indices, spinup_steps: int, horizon: int,
                       epsilon: float, tau_lambda: float,
                       climatology_std: np.ndarray,
                       early_stop: bool = True) -> list:
    """Forecast from every IC at once and score against truth.

    Spinup inputs are read from `inputs` (the model-side series); errors are
    measured against `truth`. With early_stop, stepping ends once every
    forecast has crossed the threshold; each returned RMSE series still
    contains its own crossing.
    """
    starts = np.asarray(list(ic_indices), dtype=int)
    if starts.min() < max(spinup_steps, 1):
        raise ValueError("every IC needs spinup_steps of preceding data")
    if starts.max() + horizon > truth.len:
        raise ValueError("horizon runs past the end of the series")
    std = np.asarray(climatology_std, dtype=float)
    biased = res.params.readout == "biased"

    idx = starts[None, :] - spinup_steps + np.arange(spinup_steps)[:, None]
    R = np.zeros((res.size, starts.size))
    for t in range(spinup_steps):
        R = advance_states(res, R, inputs.values[:, idx[t]])
    u_prev = inputs.values[:, starts - 1] if biased else None

    rmse = np.full((horizon, starts.size), np.inf)
    crossed = np.zeros(starts.size, dtype=bool)
    dt = res.train_dt if res.train_dt is not None else inputs.dt
    P = readout(res, R, u_prev=u_prev)
    steps_done = horizon
    for k in range(horizon):
        with np.errstate(invalid="ignore", over="ignore"):
            e = (P - truth.values[:, starts + k]) / std[:, None]
            row = np.sqrt(np.mean(e * e, axis=0))
        row = np.where(np.isfinite(row), row, np.inf)
        rmse[k] = row
        crossed |= row > epsilon
        if early_stop and crossed.all():
            steps_done = k + 1
            break
        if k + 1 < horizon:
            with np.errstate(invalid="ignore", over="ignore"):
                R = advance_states(res, R, P)
                if biased:
                    u_prev = P
                P = readout(res, R, u_prev=u_prev)
    return _finish_evals(rmse[:steps_done], starts, epsilon, dt, tau_lambda, std)


def evaluate_localized(ensemble: LocalizedEnsemble, inputs: TimeSeries,
                       truth: TimeSeries, ic_indices, spinup_steps: int,
                       horizon: int, epsilon: float, tau_lambda: float,
                       climatology_std: np.ndarray,
                       early_stop: bool = True) -> list:
    """Batched evaluation of a localized ensemble (synchronous halo exchange)."""
    lay = ensemble.layout
    starts = np.asarray(list(ic_indices), dtype=int)
    if starts.min() < max(spinup_steps, 1):
        raise ValueError("every IC needs spinup_steps of preceding data")
    if starts.max() + horizon > truth.len:
        raise ValueError("horizon runs past the end of the series")
    std = np.asarray(climatology_std, dtype=float)
    biased = ensemble.params.readout == "biased"
    members = ensemble.members
    b = starts.size

    idx = starts[None, :] - spinup_steps + np.arange(spinup_steps)[:, None]
    states = []
    for g, res in enumerate(members):
        R = np.zeros((res.size, b))
        rows = lay.input_indices[g]
        for t in range(spinup_steps):
            R = advance_states(res, R, inputs.values[np.ix_(rows, idx[t])])
        states.append(R)
    u_prev = [inputs.values[np.ix_(lay.input_indices[g], starts - 1)]
              for g in range(lay.num_groups)] if biased else [None] * lay.num_groups

    dt = ensemble.train_dt if ensemble.train_dt is not None else inputs.dt
    rmse = np.full((horizon, b), np.inf)
    crossed = np.zeros(b, dtype=bool)
    assembled = np.empty((lay.system_dim, b))
    steps_done = horizon
    for k in range(horizon):
        with np.errstate(invalid="ignore", over="ignore"):
            for g, res in enumerate(members):
                assembled[lay.output_indices[g]] = readout(
                    res, states[g], u_prev=u_prev[g])
            e = (assembled - truth.values[:, starts + k]) / std[:, None]
            row = np.sqrt(np.mean(e * e, axis=0))
        row = np.where(np.isfinite(row), row, np.inf)
        rmse[k] = row
        crossed |= row > epsilon
        if early_stop and crossed.all():
            steps_done = k + 1
            break
        if k + 1 < horizon:
            with np.errstate(invalid="ignore", over="ignore"):
                for g, res in enumerate(members):
                    gathered = assembled[lay.input_indices[g]]
                    states[g] = advance_states(res, states[g], gathered)
                    if biased:
                        u_prev[g] = gathered
    return _finish_evals(rmse[:steps_done], starts, epsilon, dt, tau_lambda, std)


# ---------------------------------------------------------------------------
# Standard runs


@dataclass
class RunResult:
    label: str
    params: MacroParams
    evals: list
    summary: VptSummary
    model: object = None  # Reservoir or LocalizedEnsemble

    @property
    def mean_vpt(self) -> float:
        return self.summary.mean

    @property
    def median_vpt(self) -> float:
        return self.summary.median


def run_single(data: SystemData, params: MacroParams, label: str = "",
               keep_model: bool = True) -> RunResult:
    """Train one reservoir on the prepared split and evaluate over all ICs."""
    res = build(params, data.model.dim)
    train_readout(res, data.split.train, data.split.spinup_steps)
    evals = evaluate_reservoir(
        res, data.model, data.truth, data.ic_indices,
        data.split.spinup_steps, data.horizon, data.epsilon,
        data.tau_lambda, data.climatology_std)
    return RunResult(label=label or data.sys.name, params=params, evals=evals,
                     summary=vpt_distribution(evals),
                     model=res if keep_model else None)


def run_localized(data: SystemData, n_output: int, n_halo: int,
                  params: MacroParams, label: str = "",
                  keep_model: bool = True) -> RunResult:
    """Train a localized ensemble on the prepared split and evaluate it."""
    layout = make_layout(data.model.dim, n_output, n_halo)
    ens = train_localized(layout, params, data.split.train, data.split.spinup_steps)
    evals = evaluate_localized(
        ens, data.model, data.truth, data.ic_indices,
        data.split.spinup_steps, data.horizon, data.epsilon,
        data.tau_lambda, data.climatology_std)
    lbl = label or f"{data.sys.name} ({n_output},{n_halo},{params.size})"
    return RunResult(label=lbl, params=params, evals=evals,
                     summary=vpt_distribution(evals),
                     model=ens if keep_model else None)
