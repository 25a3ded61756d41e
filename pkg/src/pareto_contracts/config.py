"""
JSON run configuration.

Example (the reference economy)::

    {
      "k": [[2, 1], [10, 5]],
      "r_p": 1.0,
      "run": {"paths": 100000, "steps": 100, "seed": 42}
    }

``k`` is row-major: ``[[k11, k12], [k21, k22]]`` with ``kji`` the cost of
agent i's effort on project j. Unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from .lq_model import LqParams
from .moop_core import GrowthConstants

DEFAULT_CERTIFY_LAMBDAS = (0.2, 1 / 3, 0.45, 0.6, 0.8)
DEFAULT_R_LIST = (0.1, 0.25, 0.5, 1.0, 50.0)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    paths: int = 100_000
    steps: int = 100
    seed: int = 42
    grid_resolution: float = 0.05
    lambda_tol: float = 1e-10
    certify_lambdas: tuple = DEFAULT_CERTIFY_LAMBDAS
    r_list: tuple = DEFAULT_R_LIST
    grid_size: int = 99
    principal_n_se: float = 3.0
    agent_n_se: float = 4.0
    sample: int = 1000

    def __post_init__(self):
        if self.paths < 2 or self.steps < 1:
            raise ConfigError("run.paths must be >= 2 and run.steps >= 1")
        if not self.grid_resolution > 0:
            raise ConfigError("run.grid_resolution must be > 0")
        if self.grid_size < 3:
            raise ConfigError("run.grid_size must be >= 3")
        if not all(0 < lam < 1 for lam in self.certify_lambdas):
            raise ConfigError("run.certify_lambdas must lie in (0, 1)")
        if not all(r > 0 for r in self.r_list):
            raise ConfigError("run.r_list entries must be > 0")
        object.__setattr__(self, "certify_lambdas", tuple(self.certify_lambdas))
        object.__setattr__(self, "r_list", tuple(self.r_list))


@dataclass(frozen=True)
class ModelConfig:
    params: LqParams
    growth: Optional[GrowthConstants] = None
    run: RunConfig = field(default_factory=RunConfig)

    def with_run(self, **changes) -> "ModelConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        if not changes:
            return self
        try:
            return replace(self, run=replace(self.run, **changes))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


_MODEL_KEYS = {"k", "r_p", "gamma", "horizon", "r0", "a_max"}
_REQUIRED = {"k", "r_p"}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def parse_config(data: dict) -> ModelConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(data) - _MODEL_KEYS - {"growth", "run"}
    if unknown:
        raise ConfigError(f"unknown key(s): {sorted(unknown)}")
    missing = _REQUIRED - set(data)
    if missing:
        raise ConfigError(f"missing required key(s): {sorted(missing)}")
    model = {key: data[key] for key in _MODEL_KEYS & set(data)}
    for key in ("r_p", "gamma", "horizon", "a_max"):
        if key in model and (isinstance(model[key], bool) or not isinstance(model[key], (int, float))):
            raise ConfigError(f"{key} must be a number")
    try:
        params = LqParams(**model)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from exc
    growth = _build(GrowthConstants, data["growth"], "growth") if "growth" in data else None
    run = _build(RunConfig, data.get("run", {}), "run")
    return ModelConfig(params, growth, run)


def load_config(path) -> ModelConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data)
