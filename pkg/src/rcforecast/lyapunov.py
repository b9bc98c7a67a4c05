"""Lyapunov spectra via QR re-orthonormalization, and the fixed-point stability map.

Source-system exponents propagate a tangent basis with the exact
linearization of the RK4 step (the same stages as the state), so the
reported exponents are those of the discrete map actually simulated.
Reservoir exponents iterate the map's analytic propagator alongside the
state. In both cases the basis is QR-re-orthonormalized every few steps and
the accumulated log |R_ii| divided by elapsed time; the leading tenth of the
accumulation is discarded as transient.
"""
from __future__ import annotations

from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .dynamics import SystemSpec, TimeSeries
from .reservoir import MacroParams, NotTrainedError, Reservoir, random_adjacency

__all__ = [
    "CLE_FLOOR",
    "StabilityMap",
    "les_ode",
    "les_autonomous_rc",
    "cles_driven_rc",
    "driven_jacobian",
    "stability_map",
    "write_spectrum_csv",
]

# Reported in place of -inf when the tangent growth is exactly zero
# (e.g. leak = 1 with a zero adjacency: the state forgets instantly).
CLE_FLOOR = -1.0e6


def _qr_accumulate(basis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Re-orthonormalize; returns (Q, log |diag R|) with -inf for dead columns."""
    q, r = np.linalg.qr(basis)
    d = np.abs(np.diag(r))
    with np.errstate(divide="ignore"):
        logs = np.log(d)
    return q, logs


def _finish(blocks: list, kept_time_per_block: float, discard_fraction: float,
            floor: float | None = None) -> np.ndarray:
    logs = np.asarray(blocks)
    n_skip = int(np.ceil(discard_fraction * logs.shape[0]))
    kept = logs[n_skip:]
    if kept.shape[0] == 0:
        raise ValueError("too few renormalization blocks; increase steps")
    total = kept.shape[0] * kept_time_per_block
    with np.errstate(invalid="ignore"):
        les = kept.sum(axis=0) / total
    if floor is not None:
        les = np.where(np.isfinite(les), les, floor)
    return np.sort(les)[::-1]


def les_ode(sys: SystemSpec, dt: float, steps: int, renorm_every: int = 10,
            x0: np.ndarray | None = None, transient_discard: int | None = None,
            num_exponents: int | None = None, seed: int = 0,
            discard_fraction: float = 0.1) -> np.ndarray:
    """Lyapunov spectrum of a source system, descending.

    State and tangent matrix are integrated jointly: RK4 stages for the
    state, the matching linearized stages for the tangents, QR every
    `renorm_every` steps.
    """
    if steps < renorm_every * 10:
        raise ValueError("need at least 10 renormalization blocks")
    k = sys.dim if num_exponents is None else min(num_exponents, sys.dim)
    rng = np.random.default_rng(seed)
    if x0 is None:
        x = sys.default_ic + 1e-3 * rng.standard_normal(sys.dim)
        n_discard = sys.default_discard if transient_discard is None else transient_discard
    else:
        x = np.asarray(x0, dtype=float).copy()
        n_discard = 0 if transient_discard is None else transient_discard
    rhs, jac = sys.rhs, sys.jacobian

    for _ in range(n_discard):
        k1 = rhs(x, 0.0)
        k2 = rhs(x + 0.5 * dt * k1, 0.0)
        k3 = rhs(x + 0.5 * dt * k2, 0.0)
        k4 = rhs(x + dt * k3, 0.0)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    phi = np.eye(sys.dim, k)
    blocks = []
    for step in range(steps):
        k1 = rhs(x, 0.0)
        x1 = x + 0.5 * dt * k1
        k2 = rhs(x1, 0.0)
        x2 = x + 0.5 * dt * k2
        k3 = rhs(x2, 0.0)
        x3 = x + dt * k3
        k4 = rhs(x3, 0.0)

        j0 = jac(x)
        p1 = j0 @ phi
        p2 = jac(x1) @ (phi + 0.5 * dt * p1)
        p3 = jac(x2) @ (phi + 0.5 * dt * p2)
        p4 = jac(x3) @ (phi + dt * p3)
        phi = phi + (dt / 6.0) * (p1 + 2 * p2 + 2 * p3 + p4)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

        if (step + 1) % renorm_every == 0:
            if not np.isfinite(phi).all():
                raise RuntimeError(
                    "tangent matrix blew up between renormalizations; "
                    "reduce renorm_every")
            phi, logs = _qr_accumulate(phi)
            blocks.append(logs)
    return _finish(blocks, renorm_every * dt, discard_fraction)


def _autonomous_propagate(res: Reservoir, r: np.ndarray, v: np.ndarray):
    """One autonomous step of state r and tangent block v; returns (r', v', pred)."""
    p = res.params
    n = res.size
    W = res.W_out
    if p.readout == "linear":
        u_fb = W @ r
        dudr_v = W @ v
    elif p.readout == "quadratic":
        w1, w2 = W[:, :n], W[:, n:]
        u_fb = w1 @ r + w2 @ (r * r)
        dudr_v = w1 @ v + 2.0 * (w2 @ (r[:, None] * v))
    else:
        raise NotImplementedError(
            "autonomous exponents are defined here for linear and quadratic "
            "readouts; the biased readout closes through an augmented state")
    z = res.A @ r + res.W_in @ u_fb + p.input_bias
    th = np.tanh(z)
    g = p.leak * (1.0 - th * th)
    v_new = g[:, None] * (res.A @ v + res.W_in @ dudr_v) + (1.0 - p.leak) * v
    r_new = p.leak * th + (1.0 - p.leak) * r
    return r_new, v_new, u_fb


def les_autonomous_rc(res: Reservoir, steps: int, renorm_every: int = 10,
                      num_exponents: int = 20, dt: float | None = None,
                      discard_fraction: float = 0.1) -> np.ndarray:
    """Lyapunov spectrum of the closed-loop reservoir, per unit model time.

    The reservoir must be trained and spun up (its current state is the
    starting point). Exponents are divided by the training time step so they
    are comparable with the source system's spectrum.
    """
    if res.W_out is None:
        raise NotTrainedError("train the reservoir before computing its exponents")
    dt = res.train_dt if dt is None else dt
    if dt is None:
        raise ValueError("no training dt recorded; pass dt explicitly")
    if num_exponents > res.size:
        raise ValueError("num_exponents cannot exceed the reservoir size")
    r = res.state.copy()
    v = np.eye(res.size, num_exponents)
    blocks = []
    for step in range(steps):
        r, v, pred = _autonomous_propagate(res, r, v)
        if not np.isfinite(pred).all():
            raise RuntimeError(f"forecast diverged at step {step}")
        if (step + 1) % renorm_every == 0:
            if not np.isfinite(v).all():
                raise RuntimeError(
                    "tangent basis blew up between renormalizations; "
                    "reduce renorm_every")
            v, logs = _qr_accumulate(v)
            blocks.append(logs)
    return _finish(blocks, renorm_every * dt, discard_fraction, floor=CLE_FLOOR)


def cles_driven_rc(res: Reservoir, drive: TimeSeries, renorm_every: int = 10,
                   num_exponents: int = 20,
                   discard_fraction: float = 0.1) -> np.ndarray:
    """Conditional Lyapunov exponents of the reservoir driven by `drive`.

    All-negative CLEs certify the echo-state property along this input.
    Exactly-zero tangent growth is reported as the documented floor value
    CLE_FLOOR instead of -inf.
    """
    if drive.dim != res.input_dim:
        raise ValueError(f"drive dim {drive.dim} != reservoir input dim {res.input_dim}")
    if num_exponents > res.size:
        raise ValueError("num_exponents cannot exceed the reservoir size")
    p = res.params
    r = np.zeros(res.size)
    v = np.eye(res.size, num_exponents)
    blocks = []
    for t in range(drive.len):
        z = res.A @ r + res.W_in @ drive.values[:, t] + p.input_bias
        th = np.tanh(z)
        g = p.leak * (1.0 - th * th)
        v = g[:, None] * (res.A @ v) + (1.0 - p.leak) * v
        r = p.leak * th + (1.0 - p.leak) * r
        if (t + 1) % renorm_every == 0:
            if not np.isfinite(v).all():
                raise RuntimeError(
                    "tangent basis blew up between renormalizations; "
                    "reduce renorm_every")
            v, logs = _qr_accumulate(v)
            blocks.append(logs)
            if not np.isfinite(logs).any():
                # dead basis (zero Jacobian); reseed to keep iterating
                v = np.eye(res.size, num_exponents)
    return _finish(blocks, renorm_every * drive.dt, discard_fraction, floor=CLE_FLOOR)


def driven_jacobian(res: Reservoir, r: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Analytic Jacobian of the driven update at state r under input u (dense)."""
    p = res.params
    z = res.A @ r + res.W_in @ u + p.input_bias
    th = np.tanh(z)
    A = res.A.toarray()
    return p.leak * (1.0 - th * th)[:, None] * A + (1.0 - p.leak) * np.eye(res.size)


# ---------------------------------------------------------------------------
# Fixed-point stability map


@dataclass(frozen=True)
class StabilityMap:
    """Max |eigenvalue| of the driven Jacobian at the approximate fixed point.

    values[i, j] corresponds to spectral radius rho_values[i] and input
    magnitude input_values[j]; flagged marks cells whose linear solve was
    singular. The input axis sweeps the magnitude m of u~ = m * w for a fixed
    seed-drawn direction w with entries uniform in [-1, 1] (the image of a
    1-D unit input through a sigma = 1 input map).
    """

    rho_values: np.ndarray
    input_values: np.ndarray
    values: np.ndarray
    flagged: np.ndarray
    size: int
    leak: float
    density: float
    input_bias: float
    seed: int

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("spectral_radius,input_magnitude,max_abs_eigenvalue,flagged\n")
            for i, rho in enumerate(self.rho_values):
                for j, m in enumerate(self.input_values):
                    fh.write(f"{rho!r},{m!r},{self.values[i, j]!r},"
                             f"{int(self.flagged[i, j])}\n")


def stability_map(size: int, leak: float, density: float, input_bias: float,
                  rho_values, input_values, seed: int = 0,
                  n_workers: int = 1) -> StabilityMap:
    """Map fixed-point stability over (spectral radius, input magnitude).

    For each cell the approximate fixed point solves
    r* = (I - diag(sech^2(z)) A)^{-1} tanh(z) with z = u~ + sigma_b, and the
    recorded value is the largest eigenvalue magnitude of
    alpha diag(1 - r*^2) A + (1 - alpha) I.
    """
    rho_values = np.asarray(list(rho_values), dtype=float)
    input_values = np.asarray(list(input_values), dtype=float)
    if rho_values.size == 0 or input_values.size == 0:
        raise ValueError("grid must be non-empty")
    rng = np.random.default_rng(seed)
    A0 = random_adjacency(size, density, rng).toarray()
    direction = rng.uniform(-1.0, 1.0, size=size)
    lam0 = float(np.max(np.abs(np.linalg.eigvals(A0))))
    if lam0 < 1e-12:
        raise ValueError("adjacency spectral radius is ~0; increase the density")

    values = np.empty((rho_values.size, input_values.size))
    flagged = np.zeros_like(values, dtype=bool)
    eye = np.eye(size)

    def fill_row(i):
        a = A0 * (rho_values[i] / lam0)
        for j, mag in enumerate(input_values):
            z = mag * direction + input_bias
            th = np.tanh(z)
            sech2 = 1.0 - th * th
            try:
                r_star = np.linalg.solve(eye - sech2[:, None] * a, th)
            except np.linalg.LinAlgError:
                values[i, j] = np.nan
                flagged[i, j] = True
                continue
            if not np.isfinite(r_star).all():
                values[i, j] = np.nan
                flagged[i, j] = True
                continue
            jac = leak * (1.0 - r_star * r_star)[:, None] * a + (1.0 - leak) * eye
            values[i, j] = float(np.max(np.abs(np.linalg.eigvals(jac))))

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(fill_row, range(rho_values.size)))
    else:
        for i in range(rho_values.size):
            fill_row(i)

    return StabilityMap(
        rho_values=rho_values, input_values=input_values, values=values,
        flagged=flagged, size=size, leak=leak, density=density,
        input_bias=input_bias, seed=seed)


def write_spectrum_csv(exponents: np.ndarray, path, reference=None) -> None:
    """Spectrum as CSV rows (index, exponent[, reference])."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if reference is None:
            fh.write("index,exponent\n")
            for i, le in enumerate(exponents):
                fh.write(f"{i},{le!r}\n")
        else:
            fh.write("index,exponent,reference\n")
            for i, le in enumerate(exponents):
                ref = repr(float(reference[i])) if i < len(reference) else ""
                fh.write(f"{i},{le!r},{ref}\n")
