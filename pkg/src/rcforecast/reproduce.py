"""Named end-to-end experiments: each target rebuilds one standard study.

Targets write per-run evaluation CSVs, a combined summary CSV, comparison
figures, and a manifest into the chosen output directory. The full protocols
are sized like the reference studies (hundreds of test forecasts, 1e5
training steps) and can take minutes to tens of minutes each; pass
quick=True to exercise the same code paths at toy scale.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace, asdict
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .dynamics import builtin_system
from .experiments import Protocol, RunResult, prepare_system, run_localized, run_single
from .figures import (spectrum_comparison, stability_heatmap, vpt_box_comparison,
                      vpt_histogram)
from .io import write_summary_json
from .lyapunov import les_ode, stability_map, write_spectrum_csv
from .metrics import write_evaluation_csv
from .presets import (BEST, INPUT_BIAS, L96_40_SINGLE, LOCAL_STENCIL,
                      NORMALIZATION, RES_DIM, SHOWDOWN, SYSTEMS_SMALL,
                      TIMESTEP, TRAIN_DATA)
from .training import MacroSearchSpace, optimize_macro, write_trace_csv

__all__ = ["ReproduceOptions", "REPRODUCE_TARGETS", "reproduce", "list_targets"]


@dataclass(frozen=True)
class ReproduceOptions:
    """Scale and filter knobs shared by every reproduce target."""

    systems: tuple | None = None
    ic_count: int | None = None
    train_len: int | None = None
    quick: bool = False
    workers: int = 1
    seed: int = 0
    optimize: bool = False


def _systems(opt: ReproduceOptions, default=SYSTEMS_SMALL):
    if opt.systems:
        return tuple(s for s in default if s in opt.systems)
    return default


def _proto(opt: ReproduceOptions, train_len=100_000, spinup=30, ic_count=200,
           horizon_tau=12.0, min_sep_tau=1.0, m_windows=0,
           window_len=200) -> Protocol:
    if opt.quick:
        train_len, spinup, ic_count = 3000, 10, 8
        horizon_tau, min_sep_tau = 3.0, 0.3
    if opt.train_len:
        train_len = opt.train_len
    if opt.ic_count:
        ic_count = opt.ic_count
    return Protocol(train_len=train_len, spinup_steps=spinup, ic_count=ic_count,
                    horizon_tau=horizon_tau, min_sep_tau=min_sep_tau,
                    m_windows=m_windows, window_len=window_len,
                    data_seed=opt.seed)


def _shrink(params, opt: ReproduceOptions, cap=250):
    return replace(params, size=min(params.size, cap)) if opt.quick else params


def _emit_group(out: Path, groups: dict, title: str, epsilon=0.3) -> dict:
    """Write per-run CSVs, a combined summary, and comparison figures."""
    rows = []
    for label, rr in groups.items():
        write_evaluation_csv(rr.evals, out / f"eval_{label}.csv")
        s = rr.summary
        rows.append((label, s.mean, s.median, s.q25, s.q75, s.vmin, s.vmax,
                     s.truncated, s.count))
    with open(out / "summary.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("label,mean_vpt,median_vpt,q25,q75,min,max,truncated,count\n")
        for r in rows:
            fh.write(",".join(str(x) for x in r) + "\n")
    vpt_box_comparison({k: v.evals for k, v in groups.items()},
                       out / "vpt_comparison.png", title=title)
    vpt_histogram({k: v.evals for k, v in groups.items()},
                  out / "vpt_histogram.png", epsilon=epsilon)
    return {label: {"mean_vpt": rr.summary.mean, "median_vpt": rr.summary.median}
            for label, rr in groups.items()}


def _finish(out: Path, target: str, opt: ReproduceOptions, results: dict):
    (out / "manifest.yaml").write_text(yaml.safe_dump({
        "tool": "rcforecast",
        "version": __version__,
        "target": target,
        "options": asdict(opt),
        "results": results,
    }, sort_keys=True), encoding="utf-8")
    return results


# ---------------------------------------------------------------------------
# Targets


def _target_best(out: Path, opt: ReproduceOptions):
    groups = {}
    for name in _systems(opt):
        data = prepare_system(name, _proto(opt))
        groups[name] = run_single(data, _shrink(BEST[name], opt), name,
                                  keep_model=False)
    return _emit_group(out, groups, "best parameter rows (N=2000)")


def _target_reservoir_size(out: Path, opt: ReproduceOptions):
    groups = {}
    for name in _systems(opt):
        data = prepare_system(name, _proto(opt))
        for size, params in RES_DIM[name].items():
            groups[f"{name}_N{size}"] = run_single(
                data, _shrink(params, opt), keep_model=False)
    return _emit_group(out, groups, "reservoir size study")


def _target_spinup(out: Path, opt: ReproduceOptions):
    groups = {}
    for name in _systems(opt, ("l63", "l96_5d")):
        for steps in (0, 1, 3, 10, 30, 100):
            proto = _proto(opt)
            proto = replace(proto, spinup_steps=steps)
            data = prepare_system(name, proto)
            groups[f"{name}_s{steps}"] = run_single(
                data, _shrink(BEST[name], opt), keep_model=False)
    return _emit_group(out, groups, "spinup length study")


def _target_input_bias(out: Path, opt: ReproduceOptions):
    groups = {}
    for name in _systems(opt):
        data = prepare_system(name, _proto(opt))
        for kind in ("optimized", "zero"):
            groups[f"{name}_{kind}"] = run_single(
                data, _shrink(INPUT_BIAS[name][kind], opt), keep_model=False)
    return _emit_group(out, groups, "input bias on vs off (N=1200)")


def _target_readout(out: Path, opt: ReproduceOptions):
    base = BEST["l63"]
    data = prepare_system("l63", _proto(opt))
    groups = {}
    for kind in ("linear", "biased", "quadratic"):
        groups[kind] = run_single(
            data, _shrink(replace(base, readout=kind), opt), keep_model=False)
    return _emit_group(out, groups, "readout kinds on l63")


def _target_training_data(out: Path, opt: ReproduceOptions):
    groups = {}
    for name in _systems(opt, tuple(TRAIN_DATA)):
        for length, params in TRAIN_DATA[name].items():
            proto = _proto(opt, train_len=length)
            if opt.quick and length > 3000:
                continue
            data = prepare_system(name, proto)
            groups[f"{name}_L{length}"] = run_single(
                data, _shrink(params, opt), keep_model=False)
    return _emit_group(out, groups, "training data volume study")


def _target_normalization(out: Path, opt: ReproduceOptions):
    groups = {}
    for name in _systems(opt):
        for scheme in ("per_variable", "joint"):
            data = prepare_system(name, _proto(opt), scheme=scheme)
            groups[f"{name}_{scheme}"] = run_single(
                data, _shrink(NORMALIZATION[name][scheme], opt), keep_model=False)
    return _emit_group(out, groups, "normalization schemes")


def _target_noise(out: Path, opt: ReproduceOptions):
    levels = (0.0, 1.0, 2.0, 5.0, 10.0)
    groups = {}
    for name in _systems(opt, ("l63", "l96_5d")):
        for pct in levels:
            data = prepare_system(name, _proto(opt), noise_percent=pct)
            params = _shrink(BEST[name], opt)
            if opt.optimize:
                space = MacroSearchSpace(
                    bounds={"spectral_radius": (0.01, 2.0), "leak": (0.1, 1.0),
                            "input_strength": (1e-3, 10.0),
                            "input_bias": (1e-6, 4.0), "tikhonov": (1e-10, 1.0)},
                    fixed={"size": params.size, "density": params.density,
                           "readout": "linear", "seed": params.seed},
                    n_init=16, n_total=40)
                data_opt = prepare_system(
                    name, replace(_proto(opt), m_windows=15, window_len=200),
                    noise_percent=pct)
                params, trace = optimize_macro(space, data_opt.split, seed=opt.seed,
                                               n_workers=opt.workers)
                write_trace_csv(trace, out / f"trace_{name}_{pct:g}.csv")
            groups[f"{name}_{pct:g}pct"] = run_single(data, params, keep_model=False)
    return _emit_group(out, groups, "additive training noise study")


def _target_timestep(out: Path, opt: ReproduceOptions):
    # fixed total training time T = L * dt; finer steps get more samples
    base_dt = 0.005
    total_time = 500.0
    groups = {}
    for name in _systems(opt):
        for dt_target, params in TIMESTEP[name].items():
            factor = int(round(dt_target / base_dt))
            train_len = int(total_time / dt_target)
            if opt.quick:
                train_len = min(train_len, 3000)
            proto = replace(_proto(opt), train_len=train_len)
            data = prepare_system(name, proto, dt=base_dt, subsample_factor=factor)
            groups[f"{name}_dt{dt_target:g}"] = run_single(
                data, _shrink(params, opt), keep_model=False)
    return _emit_group(out, groups, "sampling step study (fixed total time)")


_L96_40_PROTO = dict(train_len=30_000, spinup=100, ic_count=200,
                     horizon_tau=12.0, min_sep_tau=1.0)


def _target_single_rc_scaling(out: Path, opt: ReproduceOptions):
    data = prepare_system("l96_40d", _proto(opt, **_L96_40_PROTO))
    groups = {}
    for size, params in L96_40_SINGLE.items():
        groups[f"N{size}"] = run_single(data, _shrink(params, opt), keep_model=False)
    return _emit_group(out, groups, "single reservoir on the 40-variable ring")


def _target_localization_stencil(out: Path, opt: ReproduceOptions):
    data = prepare_system("l96_40d", _proto(opt, **_L96_40_PROTO))
    groups = {}
    for (n_out, n_halo), params in LOCAL_STENCIL.items():
        groups[f"o{n_out}_h{n_halo}"] = run_localized(
            data, n_out, n_halo, _shrink(params, opt), keep_model=False)
    return _emit_group(out, groups, "localization stencil study (member N=2000)")


def _target_localization_showdown(out: Path, opt: ReproduceOptions):
    data = prepare_system("l96_40d", _proto(opt, **_L96_40_PROTO))
    local = SHOWDOWN["local"]
    base = SHOWDOWN["baseline"]
    groups = {
        "local_2_2_720": run_localized(
            data, local["n_output"], local["n_halo"],
            _shrink(local["params"], opt), keep_model=False),
        "single_6000": run_single(
            data, _shrink(SHOWDOWN["single"]["params"], opt), keep_model=False),
        "baseline_2_4_6000": run_localized(
            data, base["n_output"], base["n_halo"],
            _shrink(base["params"], opt), keep_model=False),
    }
    return _emit_group(out, groups, "localized vs single vs bias-free baseline")


def _target_malkus_units(out: Path, opt: ReproduceOptions):
    """Mixed-units study: raw micron measurements vs rescaled variables."""
    proto = replace(_proto(opt, train_len=40_000), m_windows=15, window_len=300)
    n = 250 if opt.quick else 1000
    budget = (8, 20) if opt.quick else (24, 60)
    cases = {
        # angular velocity in rad/s, positions in microns: scales differ by 1e6
        "micron": np.array([1.0, 1e6, 1e6]),
        # rescaled: omega / leak-rate, positions / wheel radius
        "corrected": np.array([10.0, 1.0, 1.0]),
    }
    groups = {}
    for label, scale in cases.items():
        data = prepare_system("malkus", proto, unit_scale=scale)
        space = MacroSearchSpace(
            bounds={"spectral_radius": (0.01, 2.0), "leak": (0.1, 1.0),
                    "input_strength": (1e-5, 10.0), "input_bias": (1e-6, 4.0),
                    "tikhonov": (1e-10, 1.0)},
            fixed={"size": n, "density": 0.02, "readout": "linear", "seed": 1},
            n_init=budget[0], n_total=budget[1])
        params, trace = optimize_macro(space, data.split, seed=opt.seed,
                                       n_workers=opt.workers)
        write_trace_csv(trace, out / f"trace_{label}.csv")
        groups[label] = run_single(data, params, keep_model=False)
    return _emit_group(out, groups, "mixed measurement units on the water wheel")


def _target_stability_map(out: Path, opt: ReproduceOptions):
    n_grid = 8 if opt.quick else 41
    smap = stability_map(
        size=200, leak=0.5, density=0.9, input_bias=0.0,
        rho_values=np.linspace(0.05, 2.0, n_grid),
        input_values=np.linspace(0.0, 3.0, n_grid),
        seed=opt.seed, n_workers=opt.workers)
    smap.write_csv(out / "stability_map.csv")
    stability_heatmap(smap, out / "stability_map.png")
    stable_above = int(np.sum((smap.rho_values[:, None] > 1) & (smap.values < 1)))
    unstable_below = int(np.sum((smap.rho_values[:, None] < 1) & (smap.values > 1)))
    return {"stable_cells_rho_gt_1": stable_above,
            "unstable_cells_rho_lt_1": unstable_below}


def _target_lyapunov_spectra(out: Path, opt: ReproduceOptions):
    steps = 20_000 if opt.quick else 200_000
    results = {}
    for name in _systems(opt):
        sys = builtin_system(name)
        t0 = time.perf_counter()
        les = les_ode(sys, 0.01, steps)
        write_spectrum_csv(les, out / f"les_{name}.csv", reference=sys.reference_les)
        spectrum_comparison(les, out / f"les_{name}.png",
                            reference=sys.reference_les,
                            title=f"{name} Lyapunov spectrum")
        results[name] = {"les": [float(x) for x in les],
                         "seconds": time.perf_counter() - t0}
    return results


REPRODUCE_TARGETS = {
    "stability_map": (_target_stability_map, "fixed-point stability over (rho, input)"),
    "best": (_target_best, "best-row VPT distributions for the six small systems"),
    "reservoir_size": (_target_reservoir_size, "N=250 vs N=2000 rows"),
    "spinup": (_target_spinup, "spinup length sweep"),
    "input_bias": (_target_input_bias, "bias optimized vs pinned to zero"),
    "readout": (_target_readout, "linear/biased/quadratic readouts on l63"),
    "training_data": (_target_training_data, "training length sweep"),
    "normalization": (_target_normalization, "per-variable vs joint normalization"),
    "noise": (_target_noise, "additive training noise sweep"),
    "timestep": (_target_timestep, "sampling step sweep at fixed total time"),
    "single_rc_scaling": (_target_single_rc_scaling, "single reservoir sizes on l96_40d"),
    "localization_stencil": (_target_localization_stencil, "output/halo stencil sweep"),
    "localization_showdown": (_target_localization_showdown,
                              "local (2,2,720) vs single 6000 vs bias-free (2,4,6000)"),
    "malkus_units": (_target_malkus_units, "mixed units: micron failure vs rescaled"),
    "lyapunov_spectra": (_target_lyapunov_spectra, "source-system spectra vs references"),
}


def list_targets() -> list:
    return [f"{name}: {desc}" for name, (_, desc) in REPRODUCE_TARGETS.items()]


def reproduce(target: str, out, options: ReproduceOptions = ReproduceOptions()) -> dict:
    """Run one named experiment; returns its result summary."""
    if target not in REPRODUCE_TARGETS:
        known = ", ".join(sorted(REPRODUCE_TARGETS))
        raise ValueError(f"unknown figure id {target!r}; known ids: {known}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    fn, _ = REPRODUCE_TARGETS[target]
    results = fn(out, options)
    return _finish(out, target, options, results)
