"""Scenario and experiment configuration, with a JSON file schema.

A config file is a JSON object with a ``"scenario"`` section and an
optional ``"experiment"`` section::

    {
      "scenario": {
        "kind": "risk",            // risk | ou | gaussian_deterministic_f | nonlinear
        "c": 2.0,                  // risk premium (alternative: "theta")
        "sigma": 1.0,
        "lambda_r": 0.5, "jump_r": 1.0,   // backward jumps of size -jump_r
        "lambda_g": 0.3, "jump_g": 1.0,   // forward jumps of size +jump_g
        "horizon": 101.0, "step": 0.001,
        "seed": 42
      },
      "experiment": {
        "kind": "unbiasedness",    // unbiasedness | variance_bound | consistency |
                                   // hypothesis_error | nonlinear_bias | kronecker
        "n_replicates": 10000,
        "levels": [100.0],         // stopping levels (H values), or
        "horizons": [100, 1000],   // observation horizons for consistency cells
        "form": "corrected",
        "delta": 1.0, "epsilon": 0.05,
        "n_jobs": 1
      }
    }

The seed used by the CLI is resolved in priority order: ``--seed`` flag,
scenario ``seed`` field, the ``OPT_REGRESS_SEED`` environment variable,
then 0.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

__all__ = [
    "ScenarioConfig",
    "ExperimentSpec",
    "ConfigError",
    "SCENARIO_KINDS",
    "EXPERIMENT_KINDS",
    "SEED_ENV_VAR",
    "load_config_file",
    "scenario_from_dict",
    "experiment_from_dict",
    "resolve_seed",
]

SCENARIO_KINDS = ("risk", "ou", "gaussian_deterministic_f", "nonlinear", "custom")
EXPERIMENT_KINDS = ("unbiasedness", "variance_bound", "consistency",
                    "hypothesis_error", "nonlinear_bias", "kronecker")
SEED_ENV_VAR = "OPT_REGRESS_SEED"


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Full generative description of one model instance.

    ``theta`` is the true drift coefficient.  For the risk scenario the
    premium rate ``c`` may be given instead; the two are linked through
    ``theta = c - jump_r*lambda_r + jump_g*lambda_g``.  Jump magnitudes
    are non-negative: backward jumps enter the observed process with size
    ``-jump_r``, forward jumps with size ``+jump_g``.
    """

    kind: str
    theta: float | None = None
    c: float | None = None
    horizon: float = 10.0
    step: float = 1e-3
    sigma: float = 0.0
    lambda_r: float = 0.0
    jump_r: float = 0.0
    lambda_g: float = 0.0
    jump_g: float = 0.0
    mu: float = 1.0
    x0: float = 0.0
    f_form: dict | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        if self.step <= 0.0 or self.horizon < self.step:
            raise ConfigError("need step > 0 and horizon >= step")
        for name in ("sigma", "lambda_r", "jump_r", "lambda_g", "jump_g"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"{name} must be non-negative")
        if self.kind == "risk":
            if (self.theta is None) == (self.c is None):
                raise ConfigError("risk scenario: give exactly one of theta or c")
        elif self.kind != "custom" and self.theta is None:
            raise ConfigError(f"{self.kind} scenario needs theta")
        if self.kind == "nonlinear" and self.theta is not None and self.theta < 0.0:
            raise ConfigError("nonlinear scenario needs theta >= 0")
        if self.kind == "gaussian_deterministic_f":
            if self.lambda_r > 0.0 or self.lambda_g > 0.0:
                raise ConfigError("gaussian_deterministic_f noise is jump-free")
            _validate_f_form(self.f_form)

    def resolved_seed(self) -> int:
        return 0 if self.seed is None else int(self.seed)

    def resolved_theta(self) -> float:
        """True drift coefficient, derived from ``c`` for the risk scenario."""
        if self.kind == "risk" and self.theta is None:
            return self.c - self.jump_r * self.lambda_r + self.jump_g * self.lambda_g
        return float(self.theta)

    def resolved_premium(self) -> float:
        """Risk premium rate ``c`` (derived from ``theta`` when needed)."""
        if self.c is not None:
            return float(self.c)
        return self.resolved_theta() + self.jump_r * self.lambda_r - self.jump_g * self.lambda_g

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: v for k, v in d.items() if v is not None}


_F_FORMS = ("const", "affine", "inv_affine")


def _validate_f_form(form: dict | None) -> None:
    if form is None:
        return
    name = form.get("form")
    if name not in _F_FORMS:
        raise ConfigError(f"f_form must be one of {_F_FORMS}, got {name!r}")
    for key in ("value",) if name == "const" else ("a", "b"):
        if key in form and not isinstance(form[key], (int, float)):
            raise ConfigError(f"f_form field {key!r} must be numeric")


@dataclass(frozen=True)
class ExperimentSpec:
    """One Monte Carlo experiment over a scenario."""

    scenario: ScenarioConfig
    kind: str
    n_replicates: int = 1000
    levels: tuple = ()
    horizons: tuple = ()
    form: str = "corrected"
    delta: float = 1.0
    epsilon: float = 0.05
    n_jobs: int = 1
    max_grid_points: int | None = None
    variance_slack: float = 1.1
    radius_sigmas: float = 4.0
    binomial_slack_sigmas: float = 3.0
    kronecker_tolerance: float = 0.05
    kronecker_pass_fraction: float = 0.95
    kronecker_tail_fraction: float = 0.9

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.n_replicates < 1:
            raise ConfigError("n_replicates must be positive")
        needs_var = self.kind in ("unbiasedness", "variance_bound", "nonlinear_bias")
        if needs_var and self.n_replicates < 2:
            raise ConfigError("variance statistics need n_replicates >= 2")
        if self.form not in ("corrected", "literal"):
            raise ConfigError(f"unknown estimator form {self.form!r}")
        object.__setattr__(self, "levels", tuple(float(h) for h in self.levels))
        object.__setattr__(self, "horizons", tuple(float(t) for t in self.horizons))
        if self.kind in ("unbiasedness", "variance_bound",
                         "nonlinear_bias") and not self.levels:
            raise ConfigError(f"{self.kind} experiment needs at least one level")
        if self.kind == "consistency" and not self.horizons:
            raise ConfigError("consistency experiment needs horizons")
        if self.kind in ("hypothesis_error",) and not (0.0 < self.epsilon < 1.0):
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.kind in ("hypothesis_error",) and self.delta <= 0.0:
            raise ConfigError("delta must be positive")
        if self.kind == "kronecker" and self.scenario.kind == "nonlinear":
            raise ConfigError("kronecker diagnostic is not defined for the "
                              "nonlinear scenario")

    def replace(self, **kw) -> "ExperimentSpec":
        return dataclasses.replace(self, **kw)


def scenario_from_dict(d: dict) -> ScenarioConfig:
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
    try:
        return ScenarioConfig(**d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def experiment_from_dict(d: dict, scenario: ScenarioConfig) -> ExperimentSpec:
    d = dict(d)
    d.pop("scenario", None)
    known = {f.name for f in dataclasses.fields(ExperimentSpec)} - {"scenario"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown experiment fields: {sorted(unknown)}")
    try:
        return ExperimentSpec(scenario=scenario, **d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path) -> tuple[ScenarioConfig, ExperimentSpec | None]:
    """Read a JSON config file; the experiment section is optional."""
    try:
        with open(path) as fp:
            raw = json.load(fp)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict) or "scenario" not in raw:
        raise ConfigError("config must be a JSON object with a 'scenario' section")
    scenario = scenario_from_dict(raw["scenario"])
    experiment = None
    if raw.get("experiment") is not None:
        experiment = experiment_from_dict(raw["experiment"], scenario)
    return scenario, experiment


def resolve_seed(cli_seed: int | None, config_seed: int | None = None) -> int:
    """Seed priority: CLI flag, config field, OPT_REGRESS_SEED, then 0."""
    if cli_seed is not None:
        return int(cli_seed)
    if config_seed is not None:
        return int(config_seed)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer") from exc
    return 0
