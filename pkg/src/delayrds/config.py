"""Experiment configuration: YAML blocks, defaults and validation."""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .dynamics import DelaySystem, ModelParams
from .errors import ConfigurationError
from .noise import NoiseShape
from .space import SpectralDomain

SCHEMA_VERSION = 1
SEED_ENV = "DELAYRDS_SEED"

DEFAULTS = {
    "model": {"mu": 1.0, "a": 0.25, "b": 0.5, "tau": 1.0},
    "discretization": {"n_modes": 8, "history_nodes": 32, "operator": "dirichlet_laplacian",
                       "eigenvalues": None},
    "noise": {"seed": 0, "shapes": [[[1, 0.3]], [[2, 0.1]]], "burn_in": None},
    "run": {
        "t_final": 10.0,
        "pullback": [10.0, 20.0, 40.0, 80.0, 160.0],
        "ensemble": 256,
        "absorb_scan": 30.0,
        "lyapunov": {"m": 6, "intervals": 200, "paths": 32, "n_base": 32, "warmup": 10},
        "box": {"k": 2, "eps": [0.1, 0.03, 0.01, 0.003, 0.001]},
        "workers": 1,
    },
    "output": {"dir": "."},
}


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigurationError(f"unknown config key {where}{key}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


@dataclass
class ExperimentConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, raw: dict | None, env: bool = True) -> "ExperimentConfig":
        data = _merge(DEFAULTS, raw or {})
        if env and os.environ.get(SEED_ENV):
            try:
                data["noise"]["seed"] = int(os.environ[SEED_ENV])
            except ValueError as exc:
                raise ConfigurationError(f"{SEED_ENV} must be an integer") from exc
        cfg = cls(data)
        cfg.check_types()
        return cfg

    @classmethod
    def load(cls, path: str | Path | None, env: bool = True) -> "ExperimentConfig":
        if path is None:
            return cls.from_dict({}, env)
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        if raw is not None and not isinstance(raw, dict):
            raise ConfigurationError("config must be a mapping of blocks")
        return cls.from_dict(raw, env)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return int(self.data["noise"]["seed"])

    def check_types(self):
        try:
            for k in ("mu", "a", "b", "tau"):
                self.data["model"][k] = float(self.data["model"][k])
            disc = self.data["discretization"]
            disc["n_modes"] = int(disc["n_modes"])
            disc["history_nodes"] = int(disc["history_nodes"])
            self.data["noise"]["seed"] = int(self.data["noise"]["seed"])
            run = self.data["run"]
            run["t_final"] = float(run["t_final"])
            run["pullback"] = [float(t) for t in run["pullback"]]
            run["ensemble"] = int(run["ensemble"])
            run["workers"] = int(run["workers"])
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed config value: {exc}") from exc
        if disc["operator"] not in ("dirichlet_laplacian", "explicit"):
            raise ConfigurationError(f"unknown operator {disc['operator']!r}")
        if run["pullback"] != sorted(run["pullback"]) or len(set(run["pullback"])) != len(run["pullback"]):
            raise ConfigurationError("pullback times must be strictly increasing")
        if run["ensemble"] < 1:
            raise ConfigurationError("ensemble must be at least 1")

    def domain(self) -> SpectralDomain:
        disc = self.data["discretization"]
        if disc["operator"] == "explicit":
            if disc["eigenvalues"] is None:
                raise ConfigurationError("explicit operator needs an eigenvalues list")
            return SpectralDomain.from_eigenvalues(disc["eigenvalues"])
        return SpectralDomain.dirichlet_laplacian(disc["n_modes"])

    def system(self, attractor: bool = False) -> DelaySystem:
        """Build and validate the discretised system; ``attractor`` adds the
        dissipativity conditions needed by absorption and dimension runs."""
        model = self.data["model"]
        params = ModelParams(model["mu"], model["a"], model["b"], model["tau"])
        dom = self.domain()
        params.validate(dom)
        if attractor:
            params.validate_attractor(dom)
        try:
            shapes = NoiseShape.from_spec(dom, self.data["noise"]["shapes"])
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad noise shapes: {exc}") from exc
        return DelaySystem(params, dom, self.data["discretization"]["history_nodes"], shapes,
                           self.data["noise"]["burn_in"])

    def echo(self) -> str:
        """Single-line, key-sorted YAML rendering for output headers."""
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=True, width=10**6).strip()
