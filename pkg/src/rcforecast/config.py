"""Declarative experiment configs, YAML round-tripping, and run manifests.

A config fully determines a pipeline run: which system to generate, how the
data are prepared and split, the reservoir parameters (or the search space
used to find them), optional localization, and the evaluation settings.
Rendering and re-parsing a config reproduces it exactly, and every run
writes a manifest from which each emitted number can be recomputed.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict, fields as dc_fields
from pathlib import Path

import yaml

from .dynamics import builtin_names
from .reservoir import MacroParams
from .training import MacroSearchSpace

__all__ = [
    "ConfigError",
    "GenerationConfig",
    "DataConfig",
    "ModelConfig",
    "LocalizationConfig",
    "EvaluationConfig",
    "AnalysisConfig",
    "ExperimentConfig",
    "parse_config",
    "render_config",
    "load_config",
    "save_config",
]


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


@dataclass(frozen=True)
class GenerationConfig:
    name: str
    dt: float | None = None
    seed: int = 0

    def validate(self):
        if self.name not in builtin_names():
            raise ConfigError(
                f"system.name: unknown system {self.name!r}; "
                f"valid: {', '.join(builtin_names())}")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("system.dt: must be positive")


@dataclass(frozen=True)
class DataConfig:
    train_len: int = 100_000
    spinup_steps: int = 30
    scheme: str = "none"
    noise_percent: float = 0.0
    noise_seed: int = 1234
    subsample: int = 1
    macro_windows: int = 0
    window_len: int = 200
    write_full_csv: bool = False

    def validate(self):
        if self.train_len < 100:
            raise ConfigError("data.train_len: must be >= 100")
        if self.spinup_steps < 0:
            raise ConfigError("data.spinup_steps: must be >= 0")
        if self.scheme not in ("none", "per_variable", "joint"):
            raise ConfigError(f"data.scheme: unknown scheme {self.scheme!r}")
        if self.noise_percent < 0:
            raise ConfigError("data.noise_percent: must be >= 0")
        if self.subsample < 1:
            raise ConfigError("data.subsample: must be >= 1")
        if self.macro_windows < 0 or self.window_len < 1:
            raise ConfigError("data.macro_windows/window_len: bad window layout")


@dataclass(frozen=True)
class ModelConfig:
    """Either fixed macro parameters or a search specification."""

    params: MacroParams | None = None
    search: MacroSearchSpace | None = None
    search_seed: int = 0

    def validate(self):
        if (self.params is None) == (self.search is None):
            raise ConfigError("model: give exactly one of model.params / model.search")


@dataclass(frozen=True)
class LocalizationConfig:
    n_output: int = 2
    n_halo: int = 2

    def validate(self):
        if self.n_output < 1 or self.n_halo < 0:
            raise ConfigError("localization: n_output >= 1 and n_halo >= 0 required")


@dataclass(frozen=True)
class EvaluationConfig:
    epsilon: float = 0.3
    horizon_tau: float = 12.0
    ic_count: int = 200
    min_sep_tau: float = 1.0
    seed: int = 7

    def validate(self):
        if self.epsilon <= 0:
            raise ConfigError("evaluation.epsilon: must be positive")
        if self.ic_count < 1:
            raise ConfigError("evaluation.ic_count: must be >= 1")
        if self.horizon_tau <= 0:
            raise ConfigError("evaluation.horizon_tau: must be positive")


@dataclass(frozen=True)
class AnalysisConfig:
    autonomous_les: bool = False
    driven_cles: bool = False
    num_exponents: int = 5
    les_steps: int = 20_000

    def validate(self):
        if self.num_exponents < 1 or self.les_steps < 100:
            raise ConfigError("analysis: num_exponents >= 1 and les_steps >= 100")


@dataclass(frozen=True)
class ExperimentConfig:
    system: GenerationConfig
    model: ModelConfig
    data: DataConfig = field(default_factory=DataConfig)
    localization: LocalizationConfig | None = None
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output_dir: str = "runs/experiment"

    def validate(self):
        self.system.validate()
        self.data.validate()
        self.model.validate()
        self.evaluation.validate()
        self.analysis.validate()
        if self.localization is not None:
            self.localization.validate()


_REQUIRED = ("system", "model")
_SECTIONS = ("system", "data", "model", "localization", "evaluation",
             "analysis", "output_dir")


def _build_section(cls, mapping: dict, where: str):
    known = {f.name for f in dc_fields(cls)}
    unknown = set(mapping) - known
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    return cls(**mapping)


def parse_config(text: str) -> ExperimentConfig:
    """Parse a YAML config document into a validated ExperimentConfig."""
    raw = yaml.safe_load(text)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of sections")
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ConfigError(
            f"missing required section(s): {missing}; required sections are "
            f"{list(_REQUIRED)} (optional: {[s for s in _SECTIONS if s not in _REQUIRED]})")
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}")

    model_raw = dict(raw["model"])
    params = model_raw.pop("params", None)
    search = model_raw.pop("search", None)
    if params is not None:
        try:
            params = MacroParams(**params)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"model.params: {e}") from None
    if search is not None:
        try:
            bounds = {k: tuple(v) for k, v in search.pop("bounds", {}).items()}
            log_scale = tuple(search.pop("log_scale", ("input_strength", "tikhonov")))
            search = MacroSearchSpace(bounds=bounds, log_scale=log_scale, **search)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"model.search: {e}") from None
    model = _build_section(ModelConfig, {**model_raw, "params": params, "search": search},
                           "model")

    loc = raw.get("localization")
    cfg = ExperimentConfig(
        system=_build_section(GenerationConfig, raw["system"], "system"),
        data=_build_section(DataConfig, raw.get("data", {}), "data"),
        model=model,
        localization=_build_section(LocalizationConfig, loc, "localization")
        if loc is not None else None,
        evaluation=_build_section(EvaluationConfig, raw.get("evaluation", {}), "evaluation"),
        analysis=_build_section(AnalysisConfig, raw.get("analysis", {}), "analysis"),
        output_dir=raw.get("output_dir", "runs/experiment"),
    )
    cfg.validate()
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {
        "system": asdict(cfg.system),
        "data": asdict(cfg.data),
        "evaluation": asdict(cfg.evaluation),
        "analysis": asdict(cfg.analysis),
        "output_dir": cfg.output_dir,
    }
    model: dict = {"search_seed": cfg.model.search_seed}
    if cfg.model.params is not None:
        p = asdict(cfg.model.params)
        if isinstance(p["input_strength"], tuple):
            p["input_strength"] = list(p["input_strength"])
        model["params"] = p
    if cfg.model.search is not None:
        s = cfg.model.search
        model["search"] = {
            "bounds": {k: list(v) for k, v in s.bounds.items()},
            "fixed": dict(s.fixed),
            "log_scale": list(s.log_scale),
            "n_init": s.n_init,
            "n_total": s.n_total,
            "batch": s.batch,
            "m_windows": s.m_windows,
            "window_len": s.window_len,
        }
    out["model"] = model
    if cfg.localization is not None:
        out["localization"] = asdict(cfg.localization)
    return out


def render_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=True, default_flow_style=False)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config(text)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(render_config(cfg), encoding="utf-8")
