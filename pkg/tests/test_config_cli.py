import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from rcforecast import cli
from rcforecast.config import (ConfigError, DataConfig, EvaluationConfig,
                               ExperimentConfig, GenerationConfig,
                               LocalizationConfig, ModelConfig, parse_config,
                               render_config)
from rcforecast.experiments import Protocol, evaluate_reservoir, prepare_system
from rcforecast.pipeline import run_experiment
from rcforecast.presets import BEST, experiment_presets
from rcforecast.reservoir import MacroParams
from rcforecast.training import MacroSearchSpace

TINY_PARAMS = MacroParams(spectral_radius=0.8, leak=0.6, input_strength=0.084,
                          input_bias=1.6, tikhonov=1e-8, density=0.05,
                          size=100, seed=1)


def tiny_config(out="runs/tiny", **data_kw):
    data = dict(train_len=1500, spinup_steps=10)
    data.update(data_kw)
    return ExperimentConfig(
        system=GenerationConfig(name="l63", seed=0),
        model=ModelConfig(params=TINY_PARAMS),
        data=DataConfig(**data),
        evaluation=EvaluationConfig(epsilon=0.3, horizon_tau=2.0, ic_count=6,
                                    min_sep_tau=0.3, seed=7),
        output_dir=out,
    )


class TestConfigRoundTrip:
    def test_params_config(self):
        cfg = tiny_config()
        assert parse_config(render_config(cfg)) == cfg

    def test_search_config(self):
        cfg = ExperimentConfig(
            system=GenerationConfig(name="l96_5d", dt=0.01, seed=3),
            model=ModelConfig(search=MacroSearchSpace(
                bounds={"spectral_radius": (0.1, 1.5), "tikhonov": (1e-10, 1.0)},
                fixed={"leak": 0.7, "input_strength": 0.1, "input_bias": 1.0,
                       "density": 0.05, "size": 80, "readout": "linear",
                       "seed": 2},
                n_init=4, n_total=8, batch=2, m_windows=3, window_len=40),
                search_seed=5),
            data=DataConfig(train_len=2000, macro_windows=3, window_len=40),
            localization=None,
            output_dir="runs/search",
        )
        assert parse_config(render_config(cfg)) == cfg

    def test_localized_and_vector_sigma(self):
        cfg = ExperimentConfig(
            system=GenerationConfig(name="l96_10d"),
            model=ModelConfig(params=MacroParams(
                spectral_radius=0.9, input_strength=(0.1, 0.2, 0.1, 0.1, 0.2, 0.1),
                size=50, density=0.1, seed=4)),
            localization=LocalizationConfig(n_output=2, n_halo=2),
            output_dir="runs/loc",
        )
        again = parse_config(render_config(cfg))
        assert again == cfg
        assert again.model.params.input_strength == (0.1, 0.2, 0.1, 0.1, 0.2, 0.1)

    def test_empty_config_lists_required(self):
        with pytest.raises(ConfigError, match="system.*model"):
            parse_config("")

    def test_unknown_field_named(self):
        text = yaml.safe_dump({
            "system": {"name": "l63", "flavor": "spicy"},
            "model": {"params": {"spectral_radius": 0.9}},
        })
        with pytest.raises(ConfigError, match="flavor"):
            parse_config(text)

    def test_unknown_system_named(self):
        text = yaml.safe_dump({
            "system": {"name": "lorenz63"},
            "model": {"params": {"spectral_radius": 0.9}},
        })
        with pytest.raises(ConfigError, match="system.name"):
            parse_config(text)

    def test_model_requires_exactly_one(self):
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config(yaml.safe_dump({"system": {"name": "l63"}, "model": {}}))


class TestPipeline:
    def test_run_outputs(self, tmp_path):
        out = run_experiment(tiny_config(str(tmp_path / "run")))
        for name in ("manifest.yaml", "model.rcmodel", "evaluation.csv",
                     "summary.json", "vpt_histogram.png", "rmse_curves.png",
                     "train_data.csv"):
            assert (out / name).exists(), name
        manifest = yaml.safe_load((out / "manifest.yaml").read_text())
        assert "error" not in manifest
        assert manifest["config"]["system"]["name"] == "l63"
        assert manifest["summary"]["count"] == 6
        listed = set(manifest["outputs"])
        assert {"model.rcmodel", "evaluation.csv"} <= listed

    def test_reproducible_bits(self, tmp_path):
        cfg = tiny_config()
        out1 = run_experiment(cfg, out=tmp_path / "r1")
        out2 = run_experiment(cfg, out=tmp_path / "r2")
        assert ((out1 / "model.rcmodel").read_bytes()
                == (out2 / "model.rcmodel").read_bytes())
        assert ((out1 / "evaluation.csv").read_text()
                == (out2 / "evaluation.csv").read_text())

    def test_failure_recorded_in_manifest(self, tmp_path):
        # l63 has dimension 3: a 2-wide output group cannot tile it
        cfg = tiny_config(str(tmp_path / "fail"))
        cfg = ExperimentConfig(
            system=cfg.system, model=cfg.model, data=cfg.data,
            localization=LocalizationConfig(n_output=2, n_halo=0),
            evaluation=cfg.evaluation, output_dir=cfg.output_dir)
        with pytest.raises(ValueError, match="divisible"):
            run_experiment(cfg, out=tmp_path / "fail")
        manifest = yaml.safe_load((tmp_path / "fail" / "manifest.yaml").read_text())
        assert manifest["error"]["type"] == "ValueError"
        # partial outputs from the stages that ran are preserved
        assert (tmp_path / "fail" / "train_data.csv").exists()

    def test_localized_pipeline(self, tmp_path):
        cfg = ExperimentConfig(
            system=GenerationConfig(name="l96_5d", seed=1),
            model=ModelConfig(params=MacroParams(
                spectral_radius=0.8, leak=0.7, input_strength=0.3,
                input_bias=0.8, tikhonov=1e-9, density=0.1, size=60, seed=2)),
            data=DataConfig(train_len=1500, spinup_steps=10),
            localization=LocalizationConfig(n_output=1, n_halo=2),
            evaluation=EvaluationConfig(horizon_tau=1.0, ic_count=4,
                                        min_sep_tau=0.2, seed=3),
            output_dir=str(tmp_path / "loc"),
        )
        out = run_experiment(cfg)
        assert (out / "ensemble.rcens").exists()
        assert (out / "evaluation.csv").exists()


class TestEvaluateHarness:
    def test_nonfinite_forecast_counts_crossed(self):
        proto = Protocol(train_len=1200, spinup_steps=10, ic_count=4,
                         horizon_tau=1.0, min_sep_tau=0.2)
        data = prepare_system("l63", proto)
        from rcforecast.reservoir import build
        from rcforecast.training import train_readout
        res = build(TINY_PARAMS, 3)
        train_readout(res, data.split.train, 10)
        res.W_out = np.full_like(res.W_out, 1e308)  # force overflow
        evals = evaluate_reservoir(res, data.model, data.truth,
                                   data.ic_indices, 10, data.horizon, 0.3,
                                   data.tau_lambda, data.climatology_std)
        assert all(e.vpt_steps == 0 for e in evals)


class TestCli:
    def test_generate_prepare_evaluate_flow(self, tmp_path, capsys):
        gen = tmp_path / "gen"
        rc = cli.main(["generate", "--system", "l63", "--steps", "4000",
                       "--seed", "2", "--out", str(gen)])
        assert rc == 0
        assert (gen / "series.csv").exists()
        assert (gen / "series.png").exists()

        prep = tmp_path / "prep"
        rc = cli.main(["prepare", "--data", str(gen / "series.csv"),
                       "--scheme", "joint", "--out", str(prep)])
        assert rc == 0
        assert (prep / "prepared.csv").exists()
        assert (prep / "normalization.json").exists()

    def test_train_forecast_inspect(self, tmp_path, capsys):
        cfgfile = tmp_path / "cfg.yaml"
        cfgfile.write_text(render_config(tiny_config(str(tmp_path / "run"))))
        assert cli.main(["train", "--config", str(cfgfile)]) == 0
        model = tmp_path / "run" / "model.rcmodel"
        assert model.exists()

        gen = tmp_path / "gen"
        assert cli.main(["generate", "--system", "l63", "--steps", "3000",
                         "--out", str(gen)]) == 0
        fc = tmp_path / "fc"
        assert cli.main(["forecast", "--model", str(model), "--data",
                         str(gen / "series.csv"), "--start", "500",
                         "--horizon", "120", "--out", str(fc)]) == 0
        assert (fc / "forecast.csv").exists()

        assert cli.main(["inspect", str(model)]) == 0
        text = capsys.readouterr().out
        assert "spectral radius" in text
        assert "ok" in text

        ev = tmp_path / "ev"
        assert cli.main(["evaluate", "--model", str(model), "--data",
                         str(gen / "series.csv"), "--system", "l63",
                         "--ics", "4", "--min-sep", "100", "--horizon", "150",
                         "--out", str(ev)]) == 0
        assert (ev / "evaluation.csv").exists()
        assert (ev / "summary.json").exists()

    def test_lyapunov_and_stability(self, tmp_path):
        ly = tmp_path / "ly"
        assert cli.main(["lyapunov", "--system", "l63", "--steps", "20000",
                         "--out", str(ly)]) == 0
        assert (ly / "les.csv").exists()
        st = tmp_path / "st"
        assert cli.main(["stability", "--size", "40", "--rho-num", "4",
                         "--input-num", "3", "--out", str(st)]) == 0
        assert (st / "stability_map.csv").exists()
        assert (st / "stability_map.png").exists()

    def test_optimize_subcommand(self, tmp_path):
        cfg = ExperimentConfig(
            system=GenerationConfig(name="l63", seed=1),
            model=ModelConfig(search=MacroSearchSpace(
                bounds={"spectral_radius": (0.3, 1.2)},
                fixed={"leak": 0.6, "input_strength": 0.084, "input_bias": 1.6,
                       "tikhonov": 1e-8, "density": 0.05, "size": 60, "seed": 1,
                       "readout": "linear"},
                n_init=3, n_total=6, batch=2, m_windows=2, window_len=30)),
            data=DataConfig(train_len=1200, spinup_steps=10, macro_windows=2,
                            window_len=30),
            evaluation=EvaluationConfig(horizon_tau=1.0, ic_count=3,
                                        min_sep_tau=0.2),
            output_dir=str(tmp_path / "opt"),
        )
        cfgfile = tmp_path / "opt.yaml"
        cfgfile.write_text(render_config(cfg))
        assert cli.main(["optimize", "--config", str(cfgfile),
                         "--out", str(tmp_path / "opt")]) == 0
        trace = (tmp_path / "opt" / "optimization_trace.csv").read_text()
        assert len(trace.strip().split("\n")) == 7  # header + 6 evals

    def test_reproduce_quick_and_unknown(self, tmp_path, capsys):
        out = tmp_path / "smap"
        assert cli.main(["reproduce", "stability_map", "--quick",
                         "--out", str(out)]) == 0
        assert (out / "stability_map.csv").exists()
        assert (out / "manifest.yaml").exists()

        rc = cli.main(["reproduce", "does_not_exist", "--out", str(tmp_path)])
        assert rc == 1
        err = capsys.readouterr().err
        record = json.loads(err.strip().split("\n")[-1])
        assert record["error"] == "ValueError"
        assert "localization_showdown" in record["message"]

    def test_presets_listing_and_show(self, capsys):
        assert cli.main(["presets"]) == 0
        names = capsys.readouterr().out.split()
        assert "fig_best_l63" in names
        assert cli.main(["presets", "--show", "fig_best_l63"]) == 0
        shown = capsys.readouterr().out
        cfg = parse_config(shown)
        assert cfg.system.name == "l63"
        assert cfg.model.params == BEST["l63"]

    def test_error_record_on_bad_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("system: {name: l63}\n")  # no model section
        rc = cli.main(["run", "--config", str(bad)])
        assert rc == 1
        record = json.loads(capsys.readouterr().err.strip().split("\n")[-1])
        assert record["error"] == "ConfigError"
        assert record["command"] == "run"

    def test_preset_registry_is_parseable(self):
        presets = experiment_presets()
        assert len(presets) > 100
        for name in ("fig_best_l63", "fig_input_bias_cl63_zero",
                     "fig_showdown_local", "fig_timestep_rossler_0.05"):
            assert name in presets
            cfg = presets[name]
            assert parse_config(render_config(cfg)) == cfg
