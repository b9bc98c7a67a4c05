"""Two-step training: ridge regression for W_out, surrogate search for the rest.

The micro step solves W_out = u r^T (r r^T + beta I)^{-1} through a symmetric
positive-definite factorization, never an explicit inverse; feature/target
pairs are accumulated into Gram matrices in chunks so arbitrarily long
training series never materialize a Q x L feature matrix.

The macro step scores a full parameter set by training a reservoir and
summing exponentially discounted squared errors over M autonomous forecast
windows, then minimizes that loss with a Gaussian-process surrogate and
expected-improvement acquisition over a Latin-hypercube seeded design.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields as dc_fields

import numpy as np
import scipy.linalg as sla
from scipy.stats import norm, qmc

from .dataops import DataSplit
from .dynamics import TimeSeries
from .reservoir import (MacroParams, Reservoir, advance_states, build,
                        feature_dim, readout)

__all__ = [
    "RidgeProblem",
    "RidgeError",
    "MacroSearchSpace",
    "ridge_solve",
    "solve_ridge_gram",
    "train_readout",
    "macro_loss",
    "discounted_window_error",
    "optimize_macro",
    "write_trace_csv",
]

_CHUNK = 4096


class RidgeError(RuntimeError):
    """Ridge system could not be solved (singular Gram with beta = 0)."""


@dataclass(frozen=True)
class RidgeProblem:
    """Feature matrix Q x L, target matrix D x L, and the Tikhonov weight."""

    features: np.ndarray
    targets: np.ndarray
    tikhonov: float

    def __post_init__(self):
        if self.features.shape[1] != self.targets.shape[1]:
            raise ValueError(
                f"features and targets disagree in length: "
                f"{self.features.shape[1]} vs {self.targets.shape[1]}")
        if self.tikhonov < 0:
            raise ValueError("tikhonov must be >= 0")


def solve_ridge_gram(G: np.ndarray, C: np.ndarray, beta: float) -> np.ndarray:
    """Solve W (G + beta I) = C for W given Gram accumulators.

    G = r r^T (Q x Q), C = u r^T (D x Q). Uses a Cholesky factorization with
    one step of iterative refinement; relative residual of the normal
    equations is kept below 1e-8 on solvable systems.
    """
    q = G.shape[0]
    H = G + beta * np.eye(q)
    solve = None
    try:
        fact = sla.cho_factor(H, lower=True, check_finite=False)
        solve = lambda B: sla.cho_solve(fact, B, check_finite=False)
    except np.linalg.LinAlgError:
        if beta == 0:
            raise RidgeError(
                "Gram matrix is singular with tikhonov = 0; set tikhonov > 0"
            ) from None
        # rounding can leave tiny negative eigenvalues when beta is far below
        # eps * ||G||; an LDL^T solve still handles the symmetric system
        solve = lambda B: sla.solve(H, B, assume_a="sym", check_finite=False)
    W = solve(C.T).T
    # one refinement pass tightens the residual when H is ill-conditioned
    resid = C - W @ H
    cnorm = np.linalg.norm(C)
    if cnorm > 0 and np.linalg.norm(resid) / cnorm > 1e-10:
        W = W + solve(resid.T).T
    return W


def ridge_solve(problem: RidgeProblem) -> np.ndarray:
    """W_out minimizing ||W r - u||^2 + beta ||W||^2."""
    F, T = problem.features, problem.targets
    return solve_ridge_gram(F @ F.T, T @ F.T, problem.tikhonov)


def train_readout(res: Reservoir, train: TimeSeries, spinup_steps: int,
                  targets: TimeSeries | None = None) -> Reservoir:
    """Drive the reservoir over the training series and fit W_out in place.

    Alignment: the state r(t), produced from inputs up to u(t-1), predicts
    the target at t. Pairs with t < spinup_steps are discarded (the biased
    readout additionally needs t >= 1 for its lagged input).

    `targets` defaults to the input series itself; localized training passes
    the member's output slice instead.
    """
    if train.dim != res.input_dim:
        raise ValueError(f"series dim {train.dim} != reservoir input dim {res.input_dim}")
    if train.len <= spinup_steps + 1:
        raise ValueError("training series must be longer than spinup_steps + 1")
    tgt = train if targets is None else targets
    if tgt.len != train.len:
        raise ValueError("targets must be aligned with the training series")

    kind = res.params.readout
    t_start = max(spinup_steps, 1) if kind == "biased" else spinup_steps
    n, q = res.size, feature_dim(res)
    d_out = tgt.dim
    u = train.values
    y = tgt.values

    G = np.zeros((q, q))
    C = np.zeros((d_out, q))
    buf = np.empty((n, _CHUNK))
    tbuf = np.empty(_CHUNK, dtype=int)
    k = 0

    def flush(k):
        if k == 0:
            return
        R = buf[:, :k]
        ts = tbuf[:k]
        if kind == "linear":
            F = R
        elif kind == "quadratic":
            F = np.concatenate([R, R * R], axis=0)
        else:
            F = np.concatenate([R, u[:, ts - 1]], axis=0)
        np.add(G, F @ F.T, out=G)
        np.add(C, y[:, ts] @ F.T, out=C)

    r = np.zeros(n)
    for t in range(train.len):
        if t > 0:
            r = advance_states(res, r, u[:, t - 1])
        if t >= t_start:
            buf[:, k] = r
            tbuf[k] = t
            k += 1
            if k == _CHUNK:
                flush(k)
                k = 0
    flush(k)

    res.W_out = solve_ridge_gram(G, C, res.params.tikhonov)
    res.output_dim = d_out
    res.train_dt = train.dt
    res.reset()
    return res


# ---------------------------------------------------------------------------
# Macro loss


def discounted_window_error(errors_sq: np.ndarray) -> float:
    """Sum of per-step squared errors weighted by exp(-(t - t_i)/(t_f - t_i)).

    errors_sq holds ||u_f(t) - u(t)||^2 for t = t_i .. t_f (length >= 1).
    """
    m = errors_sq.shape[0]
    if m == 1:
        return float(errors_sq[0])
    w = np.exp(-np.arange(m) / (m - 1))
    return float(w @ errors_sq)


def macro_loss(params: MacroParams, data: DataSplit, builder=build) -> float:
    """Exponentially discounted multi-window forecast loss for one parameter set.

    Builds and trains a fresh reservoir from `params`, spins up on the data
    preceding each macro window, then forecasts each window autonomously and
    accumulates the discounted squared error. Returns +inf when training
    fails or any forecast leaves the finite range (the optimizer maps that to
    a large documented penalty).
    """
    try:
        res = builder(params, data.full.dim)
        train_readout(res, data.train, data.spinup_steps)
    except (RidgeError, np.linalg.LinAlgError):
        return math.inf

    starts = np.array([w[0] for w in data.macro_windows])
    length = data.macro_windows[0][1]
    if any(w[1] != length for w in data.macro_windows):
        raise ValueError("macro windows must share one length")
    s = data.spinup_steps
    full = data.full.values
    b = starts.size

    idx = starts[None, :] - s + np.arange(s)[:, None]          # (s, B)
    R = np.zeros((res.size, b))
    for t in range(s):
        R = advance_states(res, R, full[:, idx[t]])

    biased = res.params.readout == "biased"
    u_prev = full[:, starts - 1] if biased else None
    weights = np.exp(-np.arange(length) / (length - 1)) if length > 1 else np.ones(1)
    total = 0.0
    for k in range(length):
        P = readout(res, R, u_prev=u_prev)
        if not np.isfinite(P).all():
            return math.inf
        err = P - full[:, starts + k]
        total += weights[k] * float(np.sum(err * err))
        if k + 1 < length:
            R = advance_states(res, R, P)
            if biased:
                u_prev = P
    return total


# ---------------------------------------------------------------------------
# Surrogate optimization of the macro parameters


_PARAM_NAMES = tuple(f.name for f in dc_fields(MacroParams))


@dataclass(frozen=True)
class MacroSearchSpace:
    """Box bounds for the searched parameters plus fixed values for the rest.

    Parameters named in `log_scale` are searched in log10 space. `n_init`
    Latin-hypercube points seed the surrogate; the search stops after
    `n_total` loss evaluations, acquiring `batch` points per surrogate refit.
    m_windows/window_len document the macro-loss windows the split should
    provide (make_split consumes them).
    """

    bounds: dict
    fixed: dict = field(default_factory=dict)
    log_scale: tuple = ("input_strength", "tikhonov")
    n_init: int = 24
    n_total: int = 80
    batch: int = 4
    m_windows: int = 15
    window_len: int = 200

    def __post_init__(self):
        if not self.bounds:
            raise ValueError("search space needs at least one bounded parameter")
        for name, (lo, hi) in self.bounds.items():
            if name not in _PARAM_NAMES:
                raise ValueError(f"unknown macro parameter {name!r}")
            if name in self.fixed:
                raise ValueError(f"{name!r} is both bounded and fixed")
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"bad bounds for {name!r}: ({lo}, {hi})")
            if name in self.log_scale and lo <= 0:
                raise ValueError(f"log-scaled parameter {name!r} needs positive bounds")
        for name in self.fixed:
            if name not in _PARAM_NAMES:
                raise ValueError(f"unknown fixed parameter {name!r}")
        if not 0 < self.n_init < self.n_total:
            raise ValueError("need 0 < n_init < n_total")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")

    @property
    def names(self) -> list:
        return list(self.bounds)

    def params_from_unit(self, x: np.ndarray) -> MacroParams:
        """Map a point in the unit cube to a MacroParams instance."""
        values = dict(self.fixed)
        for xi, name in zip(x, self.names):
            lo, hi = self.bounds[name]
            if name in self.log_scale:
                v = 10.0 ** (math.log10(lo) + xi * (math.log10(hi) - math.log10(lo)))
            else:
                v = lo + xi * (hi - lo)
            values[name] = int(round(v)) if name == "size" else v
        return MacroParams(**values)


def _expected_improvement(mu, sd, best):
    imp = best - mu
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, imp / sd, 0.0)
        ei = np.where(sd > 0, imp * norm.cdf(z) + sd * norm.pdf(z), 0.0)
    return ei


def optimize_macro(space: MacroSearchSpace, data: DataSplit | None = None,
                   seed: int = 0, loss_fn=None, n_workers: int = 1,
                   ) -> tuple[MacroParams, list[dict]]:
    """Surrogate global minimization of the macro loss.

    Returns the incumbent MacroParams (lowest observed loss; earliest
    evaluation wins ties) and the full evaluation trace. Non-finite losses
    are replaced, for surrogate fitting only, by 1e6 x the median finite
    loss observed so far; the trace records the raw values.
    """
    from sklearn.gaussian_process import GaussianProcessRegressor
    from sklearn.gaussian_process.kernels import RBF, ConstantKernel

    if loss_fn is None:
        if data is None:
            raise ValueError("pass a DataSplit or an explicit loss_fn")
        loss_fn = lambda p: macro_loss(p, data)

    dims = len(space.names)
    rng = np.random.default_rng(seed)
    X: list[np.ndarray] = []
    losses: list[float] = []
    trace: list[dict] = []

    def evaluate(points):
        params = [space.params_from_unit(x) for x in points]
        t0 = [0.0] * len(points)
        if n_workers > 1:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                started = time.perf_counter()
                vals = list(pool.map(loss_fn, params))
                elapsed = (time.perf_counter() - started) * 1000 / max(len(points), 1)
                walls = [elapsed] * len(points)
        else:
            vals, walls = [], []
            for p in params:
                started = time.perf_counter()
                vals.append(loss_fn(p))
                walls.append((time.perf_counter() - started) * 1000)
        for x, p, v, w in zip(points, params, vals, walls):
            X.append(np.asarray(x, dtype=float))
            losses.append(float(v))
            row = {"eval_id": len(trace)}
            for name in space.names:
                row[name] = getattr(p, name)
            row["loss"] = float(v)
            row["wall_ms"] = w
            trace.append(row)

    sampler = qmc.LatinHypercube(d=dims, seed=seed)
    evaluate(sampler.random(space.n_init))

    loss_arr = np.array(losses)
    if not np.isfinite(loss_arr).any():
        raise RuntimeError(
            "all initial macro-loss evaluations were non-finite; widen the "
            "training data or the search bounds")

    kernel = ConstantKernel(1.0, (1e-3, 1e3)) * RBF(
        length_scale=np.full(dims, 0.3), length_scale_bounds=(1e-2, 10.0))

    while len(losses) < space.n_total:
        y = np.array(losses)
        finite = np.isfinite(y)
        penalty = 1e6 * float(np.median(y[finite]))
        y = np.where(finite, y, penalty)
        logy = np.log10(np.maximum(y, 1e-300))
        gp = GaussianProcessRegressor(
            kernel=kernel, alpha=1e-8, normalize_y=True,
            n_restarts_optimizer=2, random_state=seed)
        gp.fit(np.array(X), logy)

        cand = rng.random((max(1024, 256 * dims), dims))
        mu, sd = gp.predict(cand, return_std=True)
        ei = _expected_improvement(mu, sd, logy.min())
        picks = []
        want = min(space.batch, space.n_total - len(losses))
        for _ in range(want):
            j = int(np.argmax(ei))
            picks.append(cand[j])
            # suppress near-duplicates so one refit yields a spread batch
            near = np.linalg.norm(cand - cand[j], axis=1) < 0.05
            ei[near] = -np.inf
        evaluate(picks)

    y = np.array(losses)
    finite = np.isfinite(y)
    penalty = 1e6 * float(np.median(y[finite]))
    y = np.where(finite, y, penalty)
    best = int(np.argmin(y))
    return space.params_from_unit(X[best]), trace


def write_trace_csv(trace: list[dict], path, names=None) -> None:
    """Optimization trace as CSV: eval_id, each macro parameter, loss, wall_ms."""
    if not trace:
        raise ValueError("empty trace")
    if names is None:
        names = [k for k in trace[0] if k not in ("eval_id", "loss", "wall_ms")]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["eval_id", *names, "loss", "wall_ms"]) + "\n")
        for row in trace:
            cells = [str(row["eval_id"])]
            cells += [repr(float(row[n])) for n in names]
            cells.append(repr(float(row["loss"])))
            cells.append(f"{row['wall_ms']:.3f}")
            fh.write(",".join(cells) + "\n")
