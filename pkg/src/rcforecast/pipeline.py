"""End-to-end experiment pipeline: config in, run directory out.

Stages: generate -> prepare/split -> (optimize) -> train -> evaluate ->
(analyze). Every run writes a manifest recording the resolved config, all
seeds, package versions, and the emitted files; reruns of the same config
produce bit-identical model files and evaluation CSVs. Failures are recorded
in the manifest with partial outputs preserved, then re-raised.
"""
from __future__ import annotations

import platform
import time
import traceback
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import ExperimentConfig, config_to_dict, load_config
from .dynamics import builtin_system
from .experiments import (Protocol, evaluate_localized, evaluate_reservoir,
                          prepare_system, run_localized, run_single)
from .figures import rmse_curves, spectrum_comparison, vpt_histogram
from .io import write_summary_json, write_timeseries_csv
from .localization import make_layout, save_ensemble, train_localized
from .lyapunov import cles_driven_rc, les_autonomous_rc, write_spectrum_csv
from .metrics import vpt_distribution, write_evaluation_csv
from .reservoir import build, save_model, spinup
from .training import optimize_macro, train_readout, write_trace_csv

__all__ = ["run_experiment"]


def _protocol_from_config(cfg: ExperimentConfig) -> Protocol:
    return Protocol(
        train_len=cfg.data.train_len,
        spinup_steps=cfg.data.spinup_steps,
        ic_count=cfg.evaluation.ic_count,
        epsilon=cfg.evaluation.epsilon,
        horizon_tau=cfg.evaluation.horizon_tau,
        min_sep_tau=cfg.evaluation.min_sep_tau,
        m_windows=cfg.data.macro_windows,
        window_len=cfg.data.window_len,
        data_seed=cfg.system.seed,
        ic_seed=cfg.evaluation.seed,
        noise_seed=cfg.data.noise_seed,
    )


def run_experiment(config, out: str | Path | None = None,
                   workers: int = 1) -> Path:
    """Execute the full pipeline for a config (path or ExperimentConfig)."""
    cfg = load_config(config) if not isinstance(config, ExperimentConfig) else config
    cfg.validate()
    out_dir = Path(out) if out is not None else Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    manifest: dict = {
        "tool": "rcforecast",
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "config": config_to_dict(cfg),
        "outputs": [],
        "started_unix": time.time(),
    }
    outputs = manifest["outputs"]

    def emit(name):
        outputs.append(str(name))
        return out_dir / name

    try:
        proto = _protocol_from_config(cfg)
        data = prepare_system(
            cfg.system.name, proto, dt=cfg.system.dt, scheme=cfg.data.scheme,
            noise_percent=cfg.data.noise_percent,
            subsample_factor=cfg.data.subsample)
        manifest["normalization_stats"] = data.stats_dict
        manifest["horizon_steps"] = data.horizon
        manifest["tau_lambda"] = data.tau_lambda
        manifest["dt"] = data.model.dt

        if cfg.data.write_full_csv:
            write_timeseries_csv(data.model, emit("data_model.csv"))
            if data.truth is not data.model:
                write_timeseries_csv(data.truth, emit("data_truth.csv"))
        else:
            write_timeseries_csv(data.split.train, emit("train_data.csv"))

        if cfg.model.search is not None:
            params, trace = optimize_macro(
                cfg.model.search, data.split, seed=cfg.model.search_seed,
                n_workers=workers)
            write_trace_csv(trace, emit("optimization_trace.csv"),
                            names=cfg.model.search.names)
            manifest["optimized_params"] = asdict(params)
        else:
            params = cfg.model.params

        if cfg.localization is not None:
            result = run_localized(
                data, cfg.localization.n_output, cfg.localization.n_halo, params)
            save_ensemble(result.model, emit("ensemble.rcens"))
        else:
            result = run_single(data, params)
            save_model(result.model, emit("model.rcmodel"))

        write_evaluation_csv(result.evals, emit("evaluation.csv"))
        write_summary_json(
            {"label": result.label, "params": asdict(params),
             "vpt": result.summary.as_dict()},
            emit("summary.json"))
        vpt_histogram({result.label: result.evals}, emit("vpt_histogram.png"),
                      epsilon=cfg.evaluation.epsilon)
        rmse_curves([e.rmse_series for e in result.evals[:16]], data.model.dt,
                    data.tau_lambda, emit("rmse_curves.png"),
                    epsilon=cfg.evaluation.epsilon)

        if cfg.analysis.autonomous_les and cfg.localization is None:
            res = result.model
            spinup(res, data.split.train.window(0, 200), 200)
            les = les_autonomous_rc(
                res, cfg.analysis.les_steps, num_exponents=cfg.analysis.num_exponents)
            write_spectrum_csv(les, emit("autonomous_les.csv"),
                               reference=data.sys.reference_les)
            spectrum_comparison(les, emit("autonomous_les.png"),
                                reference=data.sys.reference_les,
                                title=f"{data.sys.name}: closed-loop exponents")
        if cfg.analysis.driven_cles and cfg.localization is None:
            cles = cles_driven_rc(
                result.model, data.split.train.window(0, min(10_000, data.split.train.len)),
                num_exponents=cfg.analysis.num_exponents)
            write_spectrum_csv(cles, emit("driven_cles.csv"))

        manifest["summary"] = result.summary.as_dict()
        manifest["elapsed_s"] = time.time() - manifest["started_unix"]
    except Exception as exc:
        manifest["error"] = {
            "type": type(exc).__name__,
            "message": str(exc),
            "trace": traceback.format_exc(limit=8),
        }
        (out_dir / "manifest.yaml").write_text(
            yaml.safe_dump(manifest, sort_keys=True), encoding="utf-8")
        raise

    (out_dir / "manifest.yaml").write_text(
        yaml.safe_dump(manifest, sort_keys=True), encoding="utf-8")
    return out_dir
