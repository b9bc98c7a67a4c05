"""Echo-state reservoir: construction, state evolution, readout, persistence.

The reservoir consists of a fixed sparse adjacency matrix A (non-zeros drawn
uniformly from [-1, 1], rescaled to a target spectral radius), a fixed input
map W_in (entries uniform in [-sigma, sigma]), and a trained readout W_out.
Only W_out and the evolving state mutate after construction.

State update (driven):   r' = alpha * tanh(A r + W_in u + sigma_b) + (1 - alpha) r
State update (forecast): same, with u replaced by the readout of the state.

Model file layout (version 1, all multi-byte values little-endian):

    bytes 0..19   magic line b"rcforecast-model 1\\n" padded with NUL
    bytes 20..27  uint64 header length H
    bytes 28..28+H-1  UTF-8 JSON header: params, dims, seed, train_dt and an
                  ordered array manifest [{name, dtype, shape}, ...]
    remainder     the arrays' raw bytes, concatenated in manifest order

Round-tripping a model through save/load is bit-exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dynamics import TimeSeries, DivergenceError

__all__ = [
    "READOUT_KINDS",
    "MacroParams",
    "Reservoir",
    "NotTrainedError",
    "build",
    "random_adjacency",
    "spectral_radius",
    "scale_to_spectral_radius",
    "advance_states",
    "drive_step",
    "forecast_step",
    "readout",
    "features",
    "feature_dim",
    "spinup",
    "forecast",
    "save_model",
    "load_model",
]

READOUT_KINDS = ("linear", "biased", "quadratic")

_MAGIC = b"rcforecast-model 1\n"
FORMAT_VERSION = 1


class NotTrainedError(RuntimeError):
    """Raised when a forecast is requested before W_out has been trained."""


@dataclass(frozen=True)
class MacroParams:
    """The global scalar parameters of the reservoir plus the readout kind.

    input_strength may be a scalar or a per-input-dimension sequence (used
    for mixed-unit data, one entry per unit class/dimension).
    """

    spectral_radius: float
    leak: float = 1.0
    input_strength: float | tuple = 0.1
    input_bias: float = 0.0
    tikhonov: float = 1e-8
    density: float = 0.02
    size: int = 2000
    readout: str = "linear"
    seed: int = 1

    def __post_init__(self):
        if isinstance(self.input_strength, (list, np.ndarray)):
            object.__setattr__(self, "input_strength",
                               tuple(float(s) for s in self.input_strength))
        if not self.spectral_radius > 0:
            raise ValueError("spectral_radius must be positive")
        if not 0.0 < self.leak <= 1.0:
            raise ValueError("leak must lie in (0, 1]")
        if not 0.0 < self.density <= 1.0:
            raise ValueError("density must lie in (0, 1]")
        if self.size < 1:
            raise ValueError("size must be >= 1")
        if self.tikhonov < 0:
            raise ValueError("tikhonov must be >= 0")
        if self.input_bias < 0:
            raise ValueError("input_bias must be >= 0")
        sig = np.atleast_1d(np.asarray(self.input_strength, dtype=float))
        if not (sig > 0).all():
            raise ValueError("input_strength entries must be positive")
        if self.readout not in READOUT_KINDS:
            raise ValueError(f"readout must be one of {READOUT_KINDS}")

    def sigma_vector(self, input_dim: int) -> np.ndarray:
        sig = np.atleast_1d(np.asarray(self.input_strength, dtype=float))
        if sig.size == 1:
            return np.full(input_dim, sig[0])
        if sig.size != input_dim:
            raise ValueError(
                f"input_strength vector has {sig.size} entries for input_dim={input_dim}")
        return sig


class Reservoir:
    """Frozen random matrices plus a trained readout and an evolving state."""

    def __init__(self, params: MacroParams, input_dim: int, A: sp.csr_matrix,
                 W_in: np.ndarray, W_out: np.ndarray | None = None,
                 output_dim: int | None = None, train_dt: float | None = None):
        self.params = params
        self.input_dim = int(input_dim)
        self.A = A
        self.W_in = W_in
        self.W_out = W_out
        self.output_dim = output_dim
        self.train_dt = train_dt
        self.state = np.zeros(A.shape[0])
        self.last_output: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.A.shape[0]

    @property
    def trained(self) -> bool:
        return self.W_out is not None

    def reset(self):
        self.state = np.zeros(self.size)
        self.last_output = None

    def __repr__(self):
        return (f"<Reservoir N={self.size} D_in={self.input_dim} "
                f"readout={self.params.readout} trained={self.trained}>")


# ---------------------------------------------------------------------------
# Construction


def random_adjacency(size: int, density: float, rng: np.random.Generator,
                     chunk_rows: int = 1024) -> sp.csr_matrix:
    """Sparse random matrix: pattern first, then values uniform in [-1, 1].

    The draw order (row-major pattern, then one value per non-zero) is fixed
    so a given seed reproduces the same matrix across versions.
    """
    rows, cols = [], []
    for r0 in range(0, size, chunk_rows):
        r1 = min(r0 + chunk_rows, size)
        mask = rng.random((r1 - r0, size)) < density
        rr, cc = np.nonzero(mask)
        rows.append(rr + r0)
        cols.append(cc)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = rng.uniform(-1.0, 1.0, size=rows.size)
    return sp.csr_matrix((vals, (rows, cols)), shape=(size, size))


def spectral_radius(A, tol: float = 1e-9) -> float:
    """Largest eigenvalue magnitude; Arnoldi for large sparse, dense below 500.

    Several leading eigenvalues are requested because the extremes of a
    random matrix often come in near-degenerate complex pairs, where a
    single-vector Arnoldi run can lock onto the wrong one.
    """
    n = A.shape[0]
    if sp.issparse(A) and A.nnz == 0:
        return 0.0
    if n <= 500:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        return float(np.max(np.abs(np.linalg.eigvals(dense))))
    k = min(6, n - 2)
    try:
        vals = spla.eigs(A, k=k, which="LM", v0=np.ones(n),
                         tol=tol, ncv=min(n, 64), return_eigenvectors=False)
    except spla.ArpackNoConvergence:
        vals = spla.eigs(A, k=k, which="LM", v0=np.ones(n), tol=tol,
                         ncv=min(n, 128), maxiter=50 * n,
                         return_eigenvectors=False)
    return float(np.max(np.abs(vals)))


def scale_to_spectral_radius(A, target: float):
    """Rescale a matrix so its largest eigenvalue magnitude equals `target`."""
    lam = spectral_radius(A)
    if lam < 1e-12:
        raise ValueError(
            "adjacency matrix has (near-)zero spectral radius before scaling; "
            "increase the density so the matrix has usable structure"
        )
    return A * (target / lam)


def build(params: MacroParams, input_dim: int) -> Reservoir:
    """Construct the frozen reservoir matrices for the given parameters.

    Deterministic in params.seed: adjacency pattern, then adjacency values,
    then W_in are drawn in that fixed order.
    """
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    rng = np.random.default_rng(params.seed)
    A = random_adjacency(params.size, params.density, rng)
    if A.nnz == 0:
        raise ValueError(
            f"adjacency has no non-zeros at size={params.size} "
            f"density={params.density}; increase the density"
        )
    A = scale_to_spectral_radius(A, params.spectral_radius)
    sigma = params.sigma_vector(input_dim)
    W_in = rng.uniform(-1.0, 1.0, size=(params.size, input_dim)) * sigma[None, :]
    return Reservoir(params=params, input_dim=input_dim, A=A.tocsr(), W_in=W_in)


# ---------------------------------------------------------------------------
# State evolution and readout


def advance_states(res: Reservoir, r, u):
    """One driven update; works on single states (N,) or batches (N, B)."""
    z = res.A @ r + res.W_in @ u + res.params.input_bias
    np.tanh(z, out=z)
    alpha = res.params.leak
    if alpha == 1.0:
        return z
    return alpha * z + (1.0 - alpha) * r


def feature_dim(res: Reservoir) -> int:
    if res.params.readout == "linear":
        return res.size
    if res.params.readout == "quadratic":
        return 2 * res.size
    return res.size + res.input_dim


def features(res: Reservoir, r, u_prev=None):
    """Feature vector(s) Q(r) the readout acts on; stacks along axis 0."""
    kind = res.params.readout
    if kind == "linear":
        return r
    if kind == "quadratic":
        return np.concatenate([r, r * r], axis=0)
    if u_prev is None:
        raise ValueError("biased readout needs the lagged input u_prev")
    return np.concatenate([r, u_prev], axis=0)


def readout(res: Reservoir, r, u_prev=None):
    """Apply the trained readout to state(s) r."""
    if res.W_out is None:
        raise NotTrainedError("readout requested but W_out has not been trained")
    kind = res.params.readout
    n = res.size
    W = res.W_out
    if kind == "linear":
        return W @ r
    if kind == "quadratic":
        return W[:, :n] @ r + W[:, n:] @ (r * r)
    if u_prev is None:
        raise ValueError("biased readout needs the lagged input u_prev")
    return W[:, :n] @ r + W[:, n:] @ u_prev


def drive_step(res: Reservoir, u: np.ndarray) -> np.ndarray:
    """Advance the reservoir one step under external input u; state replaced."""
    u = np.asarray(u, dtype=float)
    if u.shape != (res.input_dim,):
        raise ValueError(f"input must have shape ({res.input_dim},), got {u.shape}")
    new = advance_states(res, res.state, u)
    if not np.isfinite(new).all():
        raise DivergenceError("reservoir state became non-finite during drive")
    res.state = new
    return res.state


def forecast_step(res: Reservoir) -> tuple[np.ndarray, np.ndarray]:
    """One autonomous step: feed back the current prediction, predict again.

    For the biased readout the lagged input of the new prediction is the
    prediction that was just fed back (the only causally available signal).
    """
    if res.W_out is None:
        raise NotTrainedError("cannot forecast before training W_out")
    if res.last_output is None:
        if res.params.readout == "biased":
            raise NotTrainedError(
                "biased readout needs a spinup with at least one input before forecasting")
        res.last_output = readout(res, res.state)
    u_fb = res.last_output
    new = advance_states(res, res.state, u_fb)
    pred = readout(res, new, u_prev=u_fb if res.params.readout == "biased" else None)
    if not np.isfinite(pred).all():
        raise DivergenceError("forecast became non-finite (unstable reservoir)")
    res.state = new
    res.last_output = pred
    return res.state, pred


def spinup(res: Reservoir, series: TimeSeries, steps: int) -> np.ndarray:
    """Drive the reservoir from the zero state through the first `steps` columns.

    Synchronizes the state with the input signal; with steps = 0 the state is
    simply reset to zero.
    """
    if steps > series.len:
        raise ValueError(f"spinup of {steps} steps exceeds series length {series.len}")
    if series.dim != res.input_dim:
        raise ValueError(f"series dim {series.dim} != reservoir input dim {res.input_dim}")
    r = np.zeros(res.size)
    for t in range(steps):
        r = advance_states(res, r, series.values[:, t])
    res.state = r
    res.last_output = None
    if res.trained and steps > 0:
        u_prev = series.values[:, steps - 1] if res.params.readout == "biased" else None
        res.last_output = readout(res, r, u_prev=u_prev)
    return res.state


def forecast(res: Reservoir, spinup_series: TimeSeries, horizon: int) -> TimeSeries:
    """Spin up on truth, then forecast autonomously for `horizon` steps.

    Column k of the result predicts the source system `k+1` steps after the
    last spinup sample (column 0 is the model's estimate of the first unseen
    step).
    """
    if res.W_out is None:
        raise NotTrainedError("cannot forecast before training W_out")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    spinup(res, spinup_series, spinup_series.len)
    if res.last_output is None:
        res.last_output = readout(res, res.state)
    dt = res.train_dt if res.train_dt is not None else spinup_series.dt
    out = np.empty((res.last_output.shape[0], horizon))
    out[:, 0] = res.last_output
    for k in range(1, horizon):
        _, pred = forecast_step(res)
        out[:, k] = pred
    return TimeSeries(out, dt)


# ---------------------------------------------------------------------------
# Persistence


def _array_blocks(res: Reservoir) -> list[tuple[str, np.ndarray]]:
    blocks = [
        ("A_data", res.A.data.astype("<f8")),
        ("A_indices", res.A.indices.astype("<i8")),
        ("A_indptr", res.A.indptr.astype("<i8")),
        ("W_in", res.W_in.astype("<f8")),
        ("state", res.state.astype("<f8")),
    ]
    if res.W_out is not None:
        blocks.append(("W_out", res.W_out.astype("<f8")))
    if res.last_output is not None:
        blocks.append(("last_output", res.last_output.astype("<f8")))
    return blocks


def model_header(res: Reservoir) -> dict:
    return {
        "format": "rcforecast-model",
        "format_version": FORMAT_VERSION,
        "params": asdict(res.params),
        "input_dim": res.input_dim,
        "output_dim": res.output_dim,
        "train_dt": res.train_dt,
        "size": res.size,
    }


def save_model(res: Reservoir, path) -> None:
    """Write the model in the container format documented in the module docstring."""
    blocks = _array_blocks(res)
    header = model_header(res)
    header["arrays"] = [
        {"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)}
        for name, arr in blocks
    ]
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(np.uint64(len(payload)).tobytes())
        fh.write(payload)
        for _, arr in blocks:
            fh.write(np.ascontiguousarray(arr).tobytes())


def read_container(path) -> tuple[dict, dict]:
    """Read a model container; returns (header, {array name: array})."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path} is not a rcforecast model file")
        (hlen,) = np.frombuffer(fh.read(8), dtype="<u8")
        header = json.loads(fh.read(int(hlen)).decode("utf-8"))
        arrays = {}
        for spec in header["arrays"]:
            dtype = np.dtype(spec["dtype"])
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * dtype.itemsize)
            arrays[spec["name"]] = np.frombuffer(buf, dtype=dtype).reshape(shape).copy()
    return header, arrays


def load_model(path) -> Reservoir:
    header, arrays = read_container(path)
    if header.get("format") != "rcforecast-model":
        raise ValueError(f"{path} is not a rcforecast model file")
    params = MacroParams(**header["params"])
    n = header["size"]
    A = sp.csr_matrix(
        (arrays["A_data"], arrays["A_indices"], arrays["A_indptr"]), shape=(n, n))
    res = Reservoir(
        params=params,
        input_dim=header["input_dim"],
        A=A,
        W_in=arrays["W_in"],
        W_out=arrays.get("W_out"),
        output_dim=header["output_dim"],
        train_dt=header["train_dt"],
    )
    res.state = arrays["state"]
    res.last_output = arrays.get("last_output")
    return res
