"""Command-line harness for the reservoir forecasting toolkit.

Subcommands compose the library operations into batch experiments:

    generate   integrate a benchmark system to CSV
    prepare    normalize / add noise / subsample a series CSV
    optimize   surrogate search of the macro parameters
    train      train a model from a config or preset
    forecast   roll a trained model forward from a point in a series
    evaluate   VPT distribution of a trained model over many ICs
    lyapunov   exponent spectrum of a system or trained model
    stability  fixed-point stability map over (rho, input magnitude)
    localize   train + evaluate a localized ensemble from a config
    run        full pipeline from a config or preset
    reproduce  rebuild one of the named standard experiments
    inspect    print a stored model's parameters and contracts
    presets    list or show the bundled experiment presets

Exit code is 0 on success; on failure a machine-readable JSON error record
is printed to stderr and the exit code is 1.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import (ConfigError, ExperimentConfig, LocalizationConfig,
                     load_config, render_config)
from .dataops import add_noise, normalize, subsample
from .dynamics import builtin_names, builtin_system, generate, sample_test_ics
from .experiments import evaluate_reservoir
from .figures import (rmse_curves, spectrum_comparison, stability_heatmap,
                      trajectory_figure, vpt_histogram)
from .io import read_timeseries_csv, write_summary_json, write_timeseries_csv
from .lyapunov import (cles_driven_rc, les_autonomous_rc, les_ode,
                       stability_map, write_spectrum_csv)
from .metrics import vpt_distribution, write_evaluation_csv
from .pipeline import run_experiment
from .presets import experiment_presets
from .reproduce import REPRODUCE_TARGETS, ReproduceOptions, list_targets, reproduce
from .reservoir import load_model, spectral_radius, forecast as forecast_model, spinup
from .training import optimize_macro, write_trace_csv


def _out_dir(args, default="runs/out") -> Path:
    out = Path(args.out if args.out else default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve_config(args) -> ExperimentConfig:
    if getattr(args, "preset", None):
        presets = experiment_presets()
        if args.preset not in presets:
            near = [p for p in sorted(presets) if args.preset.split("_")[-1] in p]
            hint = f"; similar: {', '.join(near[:6])}" if near else ""
            raise ConfigError(f"unknown preset {args.preset!r}{hint} "
                              f"(see `rcforecast presets --list`)")
        return presets[args.preset]
    if getattr(args, "config", None):
        return load_config(args.config)
    raise ConfigError("pass --config FILE or --preset NAME")


# ---------------------------------------------------------------------------
# Subcommand implementations


def _cmd_generate(args) -> int:
    sys_ = builtin_system(args.system)
    series = generate(sys_, args.steps, dt=args.dt, seed=args.seed,
                      transient_discard=args.discard)
    out = _out_dir(args, f"runs/data_{args.system}")
    write_timeseries_csv(series, out / "series.csv")
    trajectory_figure(series.window(0, min(series.len, 5000)),
                      out / "series.png", title=f"{args.system} trajectory")
    print(out / "series.csv")
    return 0


def _cmd_prepare(args) -> int:
    series = read_timeseries_csv(args.data)
    out = _out_dir(args, "runs/prepared")
    series = subsample(series, args.subsample)
    if args.noise > 0:
        series = add_noise(series, args.noise, args.noise_seed)
    series, stats = normalize(series, args.scheme)
    write_timeseries_csv(series, out / "prepared.csv")
    write_summary_json(stats.as_dict(), out / "normalization.json")
    print(out / "prepared.csv")
    return 0


def _cmd_optimize(args) -> int:
    cfg = _resolve_config(args)
    if cfg.model.search is None:
        raise ConfigError("the config has no model.search section to optimize")
    from .experiments import prepare_system
    from .pipeline import _protocol_from_config
    proto = _protocol_from_config(cfg)
    if proto.m_windows < 1:
        raise ConfigError("data.macro_windows must be >= 1 to optimize")
    data = prepare_system(cfg.system.name, proto, dt=cfg.system.dt,
                          scheme=cfg.data.scheme,
                          noise_percent=cfg.data.noise_percent,
                          subsample_factor=cfg.data.subsample)
    params, trace = optimize_macro(cfg.model.search, data.split,
                                   seed=cfg.model.search_seed,
                                   n_workers=args.workers)
    out = _out_dir(args, "runs/optimize")
    write_trace_csv(trace, out / "optimization_trace.csv",
                    names=cfg.model.search.names)
    from dataclasses import asdict
    write_summary_json({"best_params": asdict(params)}, out / "best_params.json")
    print(out / "optimization_trace.csv")
    return 0


def _cmd_train(args) -> int:
    cfg = _resolve_config(args)
    out = run_experiment(cfg, out=args.out, workers=args.workers)
    print(out)
    return 0


def _cmd_run(args) -> int:
    cfg = _resolve_config(args)
    out = run_experiment(cfg, out=args.out, workers=args.workers)
    print(out)
    return 0


def _cmd_forecast(args) -> int:
    res = load_model(args.model)
    series = read_timeseries_csv(args.data)
    start = args.start if args.start is not None else series.len // 2
    spin = series.window(max(0, start - args.spinup), start)
    fc = forecast_model(res, spin, args.horizon)
    out = _out_dir(args, "runs/forecast")
    write_timeseries_csv(fc, out / "forecast.csv")
    end = min(start + args.horizon, series.len)
    truth = series.window(start, end)
    trajectory_figure(fc, out / "forecast.png", title="forecast")
    if truth.len >= 2:
        write_timeseries_csv(truth, out / "truth.csv")
    print(out / "forecast.csv")
    return 0


def _cmd_evaluate(args) -> int:
    res = load_model(args.model)
    series = read_timeseries_csv(args.data)
    sys_ = builtin_system(args.system) if args.system else None
    tau = args.tau_lambda or (sys_.tau_lambda if sys_ else 1.0)
    horizon = args.horizon
    train_ref = series.window(0, min(series.len // 2, 50_000))
    std = train_ref.values.std(axis=1)
    ics = sample_test_ics(series, args.ics, args.min_sep, seed=args.seed,
                          lo=max(args.spinup, 1), hi=series.len - horizon)
    evals = evaluate_reservoir(res, series, series, [i for i, _ in ics],
                               args.spinup, horizon, args.eps, tau, std)
    out = _out_dir(args, "runs/evaluate")
    write_evaluation_csv(evals, out / "evaluation.csv")
    write_summary_json(vpt_distribution(evals).as_dict(), out / "summary.json")
    vpt_histogram({"model": evals}, out / "vpt_histogram.png", epsilon=args.eps)
    rmse_curves([e.rmse_series for e in evals[:16]], series.dt, tau,
                out / "rmse_curves.png", epsilon=args.eps)
    print(out / "evaluation.csv")
    return 0


def _cmd_lyapunov(args) -> int:
    out = _out_dir(args, "runs/lyapunov")
    if args.model:
        res = load_model(args.model)
        if args.data:
            series = read_timeseries_csv(args.data)
            spinup(res, series.window(0, min(500, series.len)), min(500, series.len))
            if args.cles:
                les = cles_driven_rc(res, series, num_exponents=args.num_exponents)
                name = "driven_cles"
            else:
                les = les_autonomous_rc(res, args.steps,
                                        num_exponents=args.num_exponents)
                name = "autonomous_les"
        else:
            les = les_autonomous_rc(res, args.steps, num_exponents=args.num_exponents)
            name = "autonomous_les"
        write_spectrum_csv(les, out / f"{name}.csv")
        spectrum_comparison(les, out / f"{name}.png", title=name)
        print(out / f"{name}.csv")
        return 0
    sys_ = builtin_system(args.system)
    les = les_ode(sys_, args.dt, args.steps, renorm_every=args.renorm)
    write_spectrum_csv(les, out / "les.csv", reference=sys_.reference_les)
    spectrum_comparison(les, out / "les.png", reference=sys_.reference_les,
                        title=f"{args.system} Lyapunov spectrum")
    print(out / "les.csv")
    return 0


def _cmd_stability(args) -> int:
    smap = stability_map(
        size=args.size, leak=args.leak, density=args.density,
        input_bias=args.bias,
        rho_values=np.linspace(args.rho_min, args.rho_max, args.rho_num),
        input_values=np.linspace(args.input_min, args.input_max, args.input_num),
        seed=args.seed, n_workers=args.workers)
    out = _out_dir(args, "runs/stability")
    smap.write_csv(out / "stability_map.csv")
    stability_heatmap(smap, out / "stability_map.png")
    print(out / "stability_map.csv")
    return 0


def _cmd_localize(args) -> int:
    cfg = _resolve_config(args)
    if cfg.localization is None:
        cfg = replace(cfg, localization=LocalizationConfig(
            n_output=args.n_output, n_halo=args.n_halo))
    out = run_experiment(cfg, out=args.out, workers=args.workers)
    print(out)
    return 0


def _cmd_reproduce(args) -> int:
    opt = ReproduceOptions(
        systems=tuple(args.system) if args.system else None,
        ic_count=args.ics, train_len=args.train_len, quick=args.quick,
        workers=args.workers, seed=args.seed, optimize=args.optimize)
    out = Path(args.out) if args.out else Path(f"runs/reproduce_{args.target}")
    results = reproduce(args.target, out, opt)
    print(json.dumps(results, indent=2, sort_keys=True, default=str))
    return 0


def _cmd_inspect(args) -> int:
    res = load_model(args.model)
    actual = spectral_radius(res.A)
    target = res.params.spectral_radius
    rel = abs(actual - target) / target
    print(f"model:            {args.model}")
    print(f"reservoir size:   {res.size}")
    print(f"input dim:        {res.input_dim}")
    print(f"output dim:       {res.output_dim}")
    print(f"readout:          {res.params.readout}")
    print(f"trained:          {res.trained}")
    print(f"train dt:         {res.train_dt}")
    print(f"seed:             {res.params.seed}")
    print(f"leak:             {res.params.leak}")
    print(f"input strength:   {res.params.input_strength}")
    print(f"input bias:       {res.params.input_bias}")
    print(f"tikhonov:         {res.params.tikhonov}")
    print(f"density:          {res.params.density} (nnz={res.A.nnz})")
    print(f"spectral radius:  target {target}, measured {actual:.9f} "
          f"(rel err {rel:.2e}, contract 1e-6: {'ok' if rel < 1e-6 else 'VIOLATED'})")
    return 0


def _cmd_presets(args) -> int:
    presets = experiment_presets()
    if args.show:
        if args.show not in presets:
            raise ConfigError(f"unknown preset {args.show!r}")
        print(render_config(presets[args.show]), end="")
        return 0
    for name in sorted(presets):
        print(name)
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_common(p, config=True):
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    if config:
        p.add_argument("--config", help="experiment config YAML")
        p.add_argument("--preset", help="bundled preset name")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rcforecast",
        description="Echo-state-network forecasting toolkit for chaotic systems")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="integrate a benchmark system to CSV")
    p.add_argument("--system", required=True, choices=builtin_names())
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--discard", type=int, default=None)
    _add_common(p, config=False)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("prepare", help="normalize / noise / subsample a series CSV")
    p.add_argument("--data", required=True, help="input series CSV")
    p.add_argument("--scheme", default="none", choices=["none", "per_variable", "joint"])
    p.add_argument("--noise", type=float, default=0.0, help="noise percent")
    p.add_argument("--noise-seed", type=int, default=1234)
    p.add_argument("--subsample", type=int, default=1)
    _add_common(p, config=False)
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("optimize", help="surrogate search of macro parameters")
    _add_common(p)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("train", help="train a model from config/preset")
    _add_common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("run", help="full pipeline from config/preset")
    _add_common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("forecast", help="forecast from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="series CSV for spinup/truth")
    p.add_argument("--start", type=int, default=None)
    p.add_argument("--spinup", type=int, default=30)
    p.add_argument("--horizon", type=int, default=1000)
    _add_common(p, config=False)
    p.set_defaults(func=_cmd_forecast)

    p = sub.add_parser("evaluate", help="VPT distribution over many ICs")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--system", choices=builtin_names(),
                   help="names the reference timescale")
    p.add_argument("--tau-lambda", type=float, default=None)
    p.add_argument("--ics", type=int, default=200)
    p.add_argument("--min-sep", type=int, default=100)
    p.add_argument("--spinup", type=int, default=30)
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--eps", type=float, default=0.3)
    _add_common(p, config=False)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("lyapunov", help="Lyapunov spectrum of a system or model")
    p.add_argument("--system", choices=builtin_names())
    p.add_argument("--model", help="trained model file")
    p.add_argument("--data", help="series CSV (spinup / conditional exponents)")
    p.add_argument("--cles", action="store_true",
                   help="conditional exponents along --data instead of closed loop")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=200_000)
    p.add_argument("--renorm", type=int, default=10)
    p.add_argument("--num-exponents", type=int, default=5)
    _add_common(p, config=False)
    p.set_defaults(func=_cmd_lyapunov)

    p = sub.add_parser("stability", help="fixed-point stability map")
    p.add_argument("--size", type=int, default=200)
    p.add_argument("--leak", type=float, default=0.5)
    p.add_argument("--density", type=float, default=0.9)
    p.add_argument("--bias", type=float, default=0.0)
    p.add_argument("--rho-min", type=float, default=0.05)
    p.add_argument("--rho-max", type=float, default=2.0)
    p.add_argument("--rho-num", type=int, default=41)
    p.add_argument("--input-min", type=float, default=0.0)
    p.add_argument("--input-max", type=float, default=3.0)
    p.add_argument("--input-num", type=int, default=41)
    _add_common(p, config=False)
    p.set_defaults(func=_cmd_stability)

    p = sub.add_parser("localize", help="train + evaluate a localized ensemble")
    p.add_argument("--n-output", type=int, default=2)
    p.add_argument("--n-halo", type=int, default=2)
    _add_common(p)
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("reproduce", help="rebuild a named standard experiment")
    p.add_argument("target", nargs="?", default="")
    p.add_argument("--list", action="store_true", dest="list_targets")
    p.add_argument("--system", action="append", help="restrict to system(s)")
    p.add_argument("--ics", type=int, default=None)
    p.add_argument("--train-len", type=int, default=None)
    p.add_argument("--quick", action="store_true",
                   help="toy scale; exercises the pipeline only")
    p.add_argument("--optimize", action="store_true",
                   help="re-optimize instead of using preset rows (noise target)")
    _add_common(p, config=False)
    p.set_defaults(func=_cmd_reproduce)

    p = sub.add_parser("inspect", help="print a stored model's parameters")
    p.add_argument("model")
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("presets", help="list or show bundled presets")
    p.add_argument("--show", help="print one preset as YAML")
    p.set_defaults(func=_cmd_presets)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "reproduce" and getattr(args, "list_targets", False):
        for line in list_targets():
            print(line)
        return 0
    if args.command == "reproduce" and not args.target:
        print(json.dumps({"error": "ValueError",
                          "message": "missing target; known ids: "
                          + ", ".join(sorted(REPRODUCE_TARGETS))}),
              file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except Exception as exc:
        record = {"error": type(exc).__name__, "message": str(exc),
                  "command": args.command}
        print(json.dumps(record), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
