"""Benchmark dynamical systems: trajectories, Jacobians, and test-point sampling.

Every generator is a smooth autonomous ODE integrated with fixed-step RK4.
The returned `TimeSeries` (a D x L array plus its time step) is the common
currency passed between the data-preparation, training, and evaluation layers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "TimeSeries",
    "SystemSpec",
    "DivergenceError",
    "builtin_system",
    "builtin_names",
    "integrate",
    "generate",
    "sample_test_ics",
]


class DivergenceError(RuntimeError):
    """Raised when a trajectory or forecast leaves the finite range."""


@dataclass(frozen=True)
class TimeSeries:
    """A D-dimensional real-valued sequence sampled at a fixed time step.

    values has shape (dim, len); column t is the state at time t * dt
    relative to the start of the series.
    """

    values: np.ndarray
    dt: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D (dim, len), got shape {values.shape}")
        if values.shape[1] < 2:
            raise ValueError("a time series needs at least 2 samples")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.isfinite(values).all():
            raise ValueError("time series contains non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def len(self) -> int:
        return self.values.shape[1]

    @property
    def span(self) -> float:
        """Total time covered, len * dt."""
        return self.values.shape[1] * self.dt

    def window(self, start: int, stop: int) -> "TimeSeries":
        """Columns [start, stop) as a new series (data is copied)."""
        return TimeSeries(self.values[:, start:stop].copy(), self.dt)


@dataclass(frozen=True)
class SystemSpec:
    """An ODE right-hand side with its Jacobian and published Lyapunov data.

    reference_les lists the published exponents; for most systems it is the
    complete spectrum, for l96_40d and malkus only the leading exponent is
    published and the list is partial. lambda1 is the leading exponent used
    to report forecast horizons in Lyapunov times (tau_lambda = 1/lambda1).
    """

    name: str
    dim: int
    rhs: Callable[[np.ndarray, float], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    reference_les: tuple
    lambda1: float
    default_dt: float
    default_ic: np.ndarray
    default_discard: int = 1000

    @property
    def tau_lambda(self) -> float:
        return 1.0 / self.lambda1

    @property
    def reference_complete(self) -> bool:
        return len(self.reference_les) == self.dim


# ---------------------------------------------------------------------------
# System definitions


def _l63() -> SystemSpec:
    sigma, rho, beta = 10.0, 28.0, 8.0 / 3.0

    def rhs(x, t=0.0):
        return np.array([
            sigma * (x[1] - x[0]),
            x[0] * (rho - x[2]) - x[1],
            x[0] * x[1] - beta * x[2],
        ])

    def jac(x):
        return np.array([
            [-sigma, sigma, 0.0],
            [rho - x[2], -1.0, -x[0]],
            [x[1], x[0], -beta],
        ])

    return SystemSpec(
        name="l63", dim=3, rhs=rhs, jacobian=jac,
        reference_les=(0.9, 0.0, -14.7), lambda1=0.9,
        default_dt=0.01, default_ic=np.array([-8.6, -8.4, 27.0]),
    )


def _rossler() -> SystemSpec:
    a, b, c = 0.2, 0.2, 5.7

    def rhs(x, t=0.0):
        return np.array([
            -(x[1] + x[2]),
            x[0] + a * x[1],
            b + x[2] * (x[0] - c),
        ])

    def jac(x):
        return np.array([
            [0.0, -1.0, -1.0],
            [1.0, a, 0.0],
            [x[2], 0.0, x[0] - c],
        ])

    return SystemSpec(
        name="rossler", dim=3, rhs=rhs, jacobian=jac,
        reference_les=(0.06, 0.0, -4.9), lambda1=0.065,
        default_dt=0.05, default_ic=np.array([0.0, -6.78, 0.02]),
    )


def _colpitts() -> SystemSpec:
    alpha, gamma, q, eta = 5.0, 0.0797, 0.6898, 6.2723

    def rhs(x, t=0.0):
        return np.array([
            alpha * x[1],
            -gamma * (x[0] + x[2]) - q * x[1],
            eta * (x[1] + 1.0 - np.exp(-x[0])),
        ])

    def jac(x):
        return np.array([
            [0.0, alpha, 0.0],
            [-gamma, -q, -gamma],
            [eta * np.exp(-x[0]), eta, 0.0],
        ])

    return SystemSpec(
        name="colpitts", dim=3, rhs=rhs, jacobian=jac,
        reference_les=(0.09, 0.0, -0.8), lambda1=0.07,
        default_dt=0.05, default_ic=np.array([0.1, 0.1, 0.1]),
        default_discard=2000,
    )


def _l96(dim: int, lambda1: float, reference: tuple) -> SystemSpec:
    forcing = 8.0

    def rhs(x, t=0.0):
        # periodic ring: x[a-1]*(x[a+1] - x[a-2]) - x[a] + f
        return np.roll(x, 1) * (np.roll(x, -1) - np.roll(x, 2)) - x + forcing

    def jac(x):
        n = x.size
        j = -np.eye(n)
        idx = np.arange(n)
        j[idx, (idx + 1) % n] = np.roll(x, 1)
        j[idx, (idx - 2) % n] = -np.roll(x, 1)
        j[idx, (idx - 1) % n] += np.roll(x, -1) - np.roll(x, 2)
        return j

    ic = np.full(dim, forcing)
    ic[0] += 0.01
    return SystemSpec(
        name=f"l96_{dim}d", dim=dim, rhs=rhs, jacobian=jac,
        reference_les=reference, lambda1=lambda1,
        default_dt=0.01, default_ic=ic, default_discard=2000,
    )


def _cl63() -> SystemSpec:
    # three coupled convection cells: extratropical / tropical / ocean
    sigma, rho, beta = 10.0, 28.0, 8.0 / 3.0
    s, k1, k2 = 1.0, 10.0, -11.0
    tau, kap, kap_e, kap_z = 0.1, 1.0, 0.08, 1.0

    def rhs(x, t=0.0):
        xe, ye, ze, xt, yt, zt, xo, yo, zo = x
        return np.array([
            sigma * (ye - xe) - kap_e * (s * xt + k1),
            rho * xe - ye - xe * ze + kap_e * (s * yt + k1),
            xe * ye - beta * ze,
            sigma * (yt - xt) - kap * (s * xo + k2) - kap_e * (s * xe + k1),
            rho * xt - yt - xt * zt + kap * (s * yo + k2) + kap_e * (s * ye + k1),
            xt * yt - beta * zt + kap_z * zo,
            tau * sigma * (yo - xo) - kap * (xt + k2),
            tau * rho * xo - tau * yo - tau * s * xo * zo + kap * (yt + k2),
            tau * s * xo * yo - tau * beta * zo - kap_z * zt,
        ])

    def jac(x):
        xe, ye, ze, xt, yt, zt, xo, yo, zo = x
        j = np.zeros((9, 9))
        j[0, 0], j[0, 1], j[0, 3] = -sigma, sigma, -kap_e * s
        j[1, 0], j[1, 1], j[1, 2], j[1, 4] = rho - ze, -1.0, -xe, kap_e * s
        j[2, 0], j[2, 1], j[2, 2] = ye, xe, -beta
        j[3, 3], j[3, 4], j[3, 6], j[3, 0] = -sigma, sigma, -kap * s, -kap_e * s
        j[4, 3], j[4, 4], j[4, 5], j[4, 7], j[4, 1] = rho - zt, -1.0, -xt, kap * s, kap_e * s
        j[5, 3], j[5, 4], j[5, 5], j[5, 8] = yt, xt, -beta, kap_z
        j[6, 6], j[6, 7], j[6, 3] = -tau * sigma, tau * sigma, -kap
        j[7, 6], j[7, 7], j[7, 8], j[7, 4] = tau * rho - tau * s * zo, -tau, -tau * s * xo, kap
        j[8, 6], j[8, 7], j[8, 8], j[8, 5] = tau * s * yo, tau * s * xo, -tau * beta, -kap_z
        return j

    ic = np.array([-8.6, -8.4, 27.0, 8.6, 8.4, 27.0, -8.6, -8.4, 27.0])
    return SystemSpec(
        name="cl63", dim=9, rhs=rhs, jacobian=jac,
        reference_les=(0.9, 0.4, 0.0, -0.1, -0.6, -0.8, -1.6, -11.7, -14.0),
        lambda1=0.9, default_dt=0.01, default_ic=ic, default_discard=2000,
    )


def _malkus() -> SystemSpec:
    # chaotic water wheel; state (omega, y, z): wheel angular velocity and
    # in-plane center-of-mass position
    rr, a, f, leak = 1.0, 1.0, 0.4, 0.1

    def rhs(x, t=0.0):
        w, y, z = x
        return np.array([
            a * y - f * w,
            w * z - leak * y,
            -w * y + leak * (rr - z),
        ])

    def jac(x):
        w, y, z = x
        return np.array([
            [-f, a, 0.0],
            [z, -leak, w],
            [-y, -w, -leak],
        ])

    return SystemSpec(
        name="malkus", dim=3, rhs=rhs, jacobian=jac,
        reference_les=(0.053,), lambda1=0.053,
        default_dt=0.05, default_ic=np.array([0.5, 0.3, 0.9]),
        default_discard=4000,
    )


_REGISTRY: dict[str, Callable[[], SystemSpec]] = {
    "rossler": _rossler,
    "colpitts": _colpitts,
    "l63": _l63,
    "l96_5d": lambda: _l96(5, 0.4, (0.4, 0.0, -0.5, -1.3, -3.5)),
    "l96_10d": lambda: _l96(
        10, 1.1, (1.1, 0.7, 0.1, 0.0, -0.4, -0.8, -1.3, -1.9, -2.7, -4.5)),
    "l96_40d": lambda: _l96(40, 1.68, (1.68,)),
    "cl63": _cl63,
    "malkus": _malkus,
}


def builtin_names() -> list[str]:
    return sorted(_REGISTRY)


def builtin_system(name: str) -> SystemSpec:
    """Look up a benchmark system by name.

    Valid names: rossler, colpitts, l63, l96_5d, l96_10d, l96_40d, cl63,
    malkus.
    """
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown system {name!r}; valid names: {', '.join(builtin_names())}"
        ) from None
    return factory()


# ---------------------------------------------------------------------------
# Integration


def _rk4_step(rhs, x, t, dt):
    k1 = rhs(x, t)
    k2 = rhs(x + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = rhs(x + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = rhs(x + dt * k3, t + dt)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(sys: SystemSpec, x0: np.ndarray, dt: float, steps: int,
              transient_discard: int = 0) -> TimeSeries:
    """Fixed-step RK4 trajectory of `sys` from `x0`.

    The first transient_discard steps are dropped so the returned data lie on
    the attractor; the result has exactly `steps` columns (the initial
    condition itself is not included).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if transient_discard < 0:
        raise ValueError("transient_discard must be >= 0")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (sys.dim,):
        raise ValueError(f"x0 must have shape ({sys.dim},), got {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("x0 must be finite")

    out = np.empty((sys.dim, steps))
    t = 0.0
    total = transient_discard + steps
    for i in range(total):
        x = _rk4_step(sys.rhs, x, t, dt)
        t += dt
        if not np.isfinite(x).all():
            raise DivergenceError(
                f"non-finite state at step {i} (dt={dt} may be too large for {sys.name})"
            )
        if i >= transient_discard:
            out[:, i - transient_discard] = x
    return TimeSeries(out, dt)


def generate(sys: SystemSpec, steps: int, dt: float | None = None,
             seed: int = 0, transient_discard: int | None = None) -> TimeSeries:
    """On-attractor trajectory from the system's documented base point.

    The base point is perturbed by 1e-3 * standard normal draws from `seed`
    so that different seeds give independent trajectories, then the default
    transient is discarded.
    """
    rng = np.random.default_rng(seed)
    x0 = sys.default_ic + 1e-3 * rng.standard_normal(sys.dim)
    return integrate(
        sys, x0,
        dt if dt is not None else sys.default_dt,
        steps,
        sys.default_discard if transient_discard is None else transient_discard,
    )


def sample_test_ics(series: TimeSeries, count: int, min_separation: int,
                    seed: int = 0, lo: int = 0, hi: int | None = None,
                    ) -> list[tuple[int, np.ndarray]]:
    """Pick `count` forecast initial conditions at least min_separation apart.

    Indices are drawn deterministically from `seed` inside [lo, hi) and
    returned sorted with their state columns. Spreading the picks over the
    whole usable range makes the test points sample the attractor widely.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if min_separation < 1:
        raise ValueError("min_separation must be >= 1")
    hi = series.len if hi is None else hi
    if not 0 <= lo < hi <= series.len:
        raise ValueError(f"bad index range [{lo}, {hi}) for series of length {series.len}")
    span = hi - lo
    needed = (count - 1) * min_separation + 1
    if needed > span:
        raise ValueError(
            f"series too short: {count} ICs spaced >= {min_separation} need "
            f"{needed} usable samples, have {span}"
        )
    slack = span - needed
    rng = np.random.default_rng(seed)
    offsets = np.sort(rng.integers(0, slack + 1, size=count))
    indices = lo + np.arange(count) * min_separation + offsets
    return [(int(i), series.values[:, int(i)].copy()) for i in indices]
