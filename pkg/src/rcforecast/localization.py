"""Localization: a ring of reservoirs, each forecasting a slice of the state.

The D-dimensional state is split into N_g contiguous groups of N_output
variables. Each group's reservoir reads its own outputs plus N_halo
neighbors on each side (periodic wrap), so its input dimension is
N_input = 2 N_halo + N_output. In autonomous mode every member predicts its
slice, the global vector is assembled, and each member's next input is
gathered from that assembled prediction (synchronous exchange: no member
ever sees a mix of old and new values).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace, asdict

import numpy as np
import scipy.sparse as sp

from .dynamics import TimeSeries
from .reservoir import (MacroParams, Reservoir, advance_states, build,
                        readout, _MAGIC, FORMAT_VERSION)
from . import reservoir as _reservoir
from .training import train_readout

__all__ = [
    "LocalizationLayout",
    "LocalizedEnsemble",
    "LocalizedForecast",
    "make_layout",
    "train_localized",
    "forecast_localized",
    "save_ensemble",
    "load_ensemble",
]

_ENS_MAGIC = b"rcforecast-ensemble 1\n"


@dataclass(frozen=True, eq=False)
class LocalizationLayout:
    """Partition of a periodic 1-D state into groups with halos.

    The index arrays are fully determined by (system_dim, group_output,
    halo), which is also what equality compares.
    """

    system_dim: int
    group_output: int
    halo: int
    num_groups: int
    input_dim: int
    output_indices: tuple
    input_indices: tuple

    def __eq__(self, other):
        if not isinstance(other, LocalizationLayout):
            return NotImplemented
        return (self.system_dim, self.group_output, self.halo) == \
            (other.system_dim, other.group_output, other.halo)

    def __hash__(self):
        return hash((self.system_dim, self.group_output, self.halo))

    def as_dict(self) -> dict:
        return {
            "system_dim": self.system_dim,
            "group_output": self.group_output,
            "halo": self.halo,
        }


def make_layout(system_dim: int, n_output: int, n_halo: int) -> LocalizationLayout:
    """Contiguous equal groups with periodic halo indexing.

    Requires system_dim divisible by n_output and
    2 * n_halo + n_output <= system_dim.
    """
    if n_output < 1:
        raise ValueError("n_output must be >= 1")
    if n_halo < 0:
        raise ValueError("n_halo must be >= 0")
    if system_dim % n_output != 0:
        raise ValueError(
            f"system dimension {system_dim} is not divisible by group output "
            f"size {n_output}")
    n_input = 2 * n_halo + n_output
    if n_input > system_dim:
        raise ValueError(
            f"halo overflow: 2*{n_halo} + {n_output} = {n_input} exceeds the "
            f"system dimension {system_dim}")
    n_groups = system_dim // n_output
    outs, ins = [], []
    for g in range(n_groups):
        start = g * n_output
        outs.append(np.arange(start, start + n_output))
        ins.append(np.arange(start - n_halo, start + n_output + n_halo) % system_dim)
    return LocalizationLayout(
        system_dim=system_dim, group_output=n_output, halo=n_halo,
        num_groups=n_groups, input_dim=n_input,
        output_indices=tuple(outs), input_indices=tuple(ins))


@dataclass
class LocalizedEnsemble:
    """One trained reservoir per group, sharing macro parameters."""

    layout: LocalizationLayout
    params: MacroParams
    members: tuple

    @property
    def train_dt(self):
        return self.members[0].train_dt


def train_localized(layout: LocalizationLayout, params: MacroParams,
                    train: TimeSeries, spinup_steps: int) -> LocalizedEnsemble:
    """Train each group's reservoir on its input slice against its output slice.

    Members share the macro parameters but draw their matrices from derived
    seeds (params.seed + group index).
    """
    if train.dim != layout.system_dim:
        raise ValueError(
            f"training series dim {train.dim} != layout dim {layout.system_dim}")
    members = []
    for g in range(layout.num_groups):
        member_params = replace(params, seed=params.seed + g)
        res = build(member_params, layout.input_dim)
        inputs = TimeSeries(train.values[layout.input_indices[g]], train.dt)
        targets = TimeSeries(train.values[layout.output_indices[g]], train.dt)
        train_readout(res, inputs, spinup_steps, targets=targets)
        members.append(res)
    return LocalizedEnsemble(layout=layout, params=params, members=tuple(members))


@dataclass(frozen=True)
class LocalizedForecast:
    """Assembled global forecast; diverged marks early truncation."""

    values: np.ndarray
    dt: float
    diverged: bool

    def as_timeseries(self) -> TimeSeries:
        return TimeSeries(self.values, self.dt)


def forecast_localized(ensemble: LocalizedEnsemble, spinup: TimeSeries,
                       horizon: int) -> LocalizedForecast:
    """Spin all members up on truth, then forecast with synchronous halo exchange.

    Column k of the result predicts the state k+1 steps after the last
    spinup sample. A non-finite prediction truncates the output and sets the
    diverged flag.
    """
    lay = ensemble.layout
    if spinup.dim != lay.system_dim:
        raise ValueError(f"spinup dim {spinup.dim} != layout dim {lay.system_dim}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    members = ensemble.members
    biased = ensemble.params.readout == "biased"

    states = []
    for g, res in enumerate(members):
        r = np.zeros(res.size)
        sl = spinup.values[lay.input_indices[g]]
        for t in range(spinup.len):
            r = advance_states(res, r, sl[:, t])
        states.append(r)

    u_prev = [spinup.values[lay.input_indices[g], -1] for g in range(lay.num_groups)] \
        if biased else [None] * lay.num_groups

    dt = ensemble.train_dt if ensemble.train_dt is not None else spinup.dt
    out = np.empty((lay.system_dim, horizon))
    for k in range(horizon):
        assembled = np.empty(lay.system_dim)
        for g, res in enumerate(members):
            assembled[lay.output_indices[g]] = readout(res, states[g], u_prev=u_prev[g])
        if not np.isfinite(assembled).all():
            return LocalizedForecast(out[:, :k].copy(), dt, True)
        out[:, k] = assembled
        if k + 1 < horizon:
            for g, res in enumerate(members):
                gathered = assembled[lay.input_indices[g]]
                states[g] = advance_states(res, states[g], gathered)
                if biased:
                    u_prev[g] = gathered
    return LocalizedForecast(out, dt, False)


# ---------------------------------------------------------------------------
# Persistence: layout header followed by every member in the model format


def save_ensemble(ensemble: LocalizedEnsemble, path) -> None:
    blocks = []
    member_headers = []
    for g, res in enumerate(ensemble.members):
        member_headers.append(_reservoir.model_header(res))
        for name, arr in _reservoir._array_blocks(res):
            blocks.append((f"m{g}/{name}", arr))
    header = {
        "format": "rcforecast-ensemble",
        "format_version": FORMAT_VERSION,
        "layout": ensemble.layout.as_dict(),
        "params": asdict(ensemble.params),
        "num_members": len(ensemble.members),
        "member_headers": member_headers,
        "arrays": [
            {"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)}
            for name, arr in blocks
        ],
    }
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_ENS_MAGIC)
        fh.write(np.uint64(len(payload)).tobytes())
        fh.write(payload)
        for _, arr in blocks:
            fh.write(np.ascontiguousarray(arr).tobytes())


def load_ensemble(path) -> LocalizedEnsemble:
    with open(path, "rb") as fh:
        magic = fh.read(len(_ENS_MAGIC))
        if magic != _ENS_MAGIC:
            raise ValueError(f"{path} is not a rcforecast ensemble file")
        (hlen,) = np.frombuffer(fh.read(8), dtype="<u8")
        header = json.loads(fh.read(int(hlen)).decode("utf-8"))
        arrays = {}
        for spec in header["arrays"]:
            dtype = np.dtype(spec["dtype"])
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * dtype.itemsize)
            arrays[spec["name"]] = np.frombuffer(buf, dtype=dtype).reshape(shape).copy()

    lay_dict = header["layout"]
    layout = make_layout(lay_dict["system_dim"], lay_dict["group_output"], lay_dict["halo"])
    members = []
    for g, mh in enumerate(header["member_headers"]):
        pref = f"m{g}/"
        n = mh["size"]
        A = sp.csr_matrix(
            (arrays[pref + "A_data"], arrays[pref + "A_indices"],
             arrays[pref + "A_indptr"]), shape=(n, n))
        res = Reservoir(
            params=MacroParams(**mh["params"]),
            input_dim=mh["input_dim"],
            A=A,
            W_in=arrays[pref + "W_in"],
            W_out=arrays.get(pref + "W_out"),
            output_dim=mh["output_dim"],
            train_dt=mh["train_dt"],
        )
        res.state = arrays[pref + "state"]
        res.last_output = arrays.get(pref + "last_output")
        members.append(res)
    return LocalizedEnsemble(
        layout=layout, params=MacroParams(**header["params"]), members=tuple(members))
