"""Experiment configuration: a YAML file with nested sections.

``DEFAULT_CONFIG`` is the shipped malware-spread experiment; the CLI's
``print-default-config`` emits it verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .envs import EnvModel, make_env
from .exact import FixedPointConfig
from .rl import RlConfig

DEFAULT_CONFIG = """\
# Malware-spread benchmark: two types (healthy/infected), two actions
# (do nothing/repair), infection pressure coupled to the infected fraction.
environment:
  name: malware
  params:
    k: 0.2
    repair_cost: 0.5
    infection_prob: 0.9
    discount: 0.9
    horizon: 60

grid:
  resolution: 50

seed: 1
output_dir: out

fixed_point:
  max_iters: 500
  tol: 1.0e-8
  damping: 1.0
  tie_tolerance: 1.0e-9
  multi_start: 0

rl:
  batch_size: 2000
  policy_iters: 50
  sarsa_alpha: 0.1
  pg_steps: 100
  pg_lr: 0.5
  q_init: 0.0
  tail_average: true
  flow_samples: 10000
  change_tol: 0.05

evaluate:
  initial_state: [1.0, 0.0]
  population: 10000
  episodes: 100000

# Optional thresholds; when present, `evaluate` and `compare` exit nonzero
# if violated.
acceptance:
  max_exploitability: 5.0e-3
  stage1_atlas_tv: 0.05
  stage1_value_diff: 0.05
"""


class ConfigError(ValueError):
    """Invalid configuration; names the offending field when known."""

    def __init__(self, message: str, fieldname: str | None = None,
                 line: int | None = None):
        self.fieldname = fieldname
        self.line = line
        where = f" (field {fieldname!r})" if fieldname else ""
        where += f" (line {line})" if line is not None else ""
        super().__init__(message + where)


@dataclass(frozen=True)
class EvaluateConfig:
    initial_state: tuple[float, ...] | None = None
    population: int = 10_000
    episodes: int = 100_000

    def initial_z(self, n_types: int) -> np.ndarray:
        if self.initial_state is None:
            z = np.zeros(n_types)
            z[0] = 1.0
            return z
        z = np.asarray(self.initial_state, dtype=np.float64)
        if z.shape != (n_types,):
            raise ConfigError(f"initial_state needs {n_types} entries",
                              "evaluate.initial_state")
        return z


@dataclass(frozen=True)
class ExperimentConfig:
    env_name: str
    env_params: dict
    resolution: int
    seed: int
    output_dir: str | None
    fixed_point: FixedPointConfig
    rl: RlConfig
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)
    acceptance: dict = field(default_factory=dict)

    def build_env(self) -> EnvModel:
        return make_env(self.env_name, self.env_params)


def _section(data: dict, name: str, required: bool = False) -> dict:
    sec = data.get(name, {})
    if required and not sec:
        raise ConfigError(f"missing required section {name!r}", name)
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping", name)
    return dict(sec)


def _build(cls, section: dict, section_name: str, **overrides):
    merged = {**section, **overrides}
    try:
        return cls(**merged)
    except TypeError as exc:
        unknown = set(merged) - set(cls.__dataclass_fields__)
        if unknown:
            bad = sorted(unknown)[0]
            raise ConfigError(f"unknown field {bad!r}",
                              f"{section_name}.{bad}") from exc
        raise ConfigError(str(exc), section_name) from exc
    except ValueError as exc:
        raise ConfigError(str(exc), section_name) from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    env = _section(data, "environment", required=True)
    name = env.get("name")
    if not isinstance(name, str):
        raise ConfigError("environment.name must be a string",
                          "environment.name")
    params = env.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("environment.params must be a mapping",
                          "environment.params")

    grid_sec = _section(data, "grid")
    resolution = grid_sec.get("resolution", 50)
    if not isinstance(resolution, int) or resolution < 1:
        raise ConfigError(f"grid.resolution must be a positive integer, "
                          f"got {resolution!r}", "grid.resolution")

    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}", "seed")

    out_dir = data.get("output_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("output_dir must be a string", "output_dir")

    fp = _build(FixedPointConfig, _section(data, "fixed_point"), "fixed_point")
    rl_sec = _section(data, "rl")
    rl_sec.setdefault("seed", seed)
    rl = _build(RlConfig, rl_sec, "rl")

    ev_sec = _section(data, "evaluate")
    if "initial_state" in ev_sec and ev_sec["initial_state"] is not None:
        ev_sec["initial_state"] = tuple(float(v)
                                        for v in ev_sec["initial_state"])
    ev = _build(EvaluateConfig, ev_sec, "evaluate")

    acceptance = _section(data, "acceptance")

    return ExperimentConfig(env_name=name, env_params=params,
                            resolution=resolution, seed=seed,
                            output_dir=out_dir, fixed_point=fp, rl=rl,
                            evaluate=ev, acceptance=acceptance)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        line = None
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            line = mark.line + 1
        raise ConfigError(f"cannot parse {path}: {exc}", line=line) from exc
    return config_from_dict(data or {})
