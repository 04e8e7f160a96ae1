"""Sequential two-hypothesis decision rule with guaranteed error bounds.

The null states that the observed process carries a drift whose
coefficient is separated from zero (``|theta| >= delta``); the
alternative states the process is pure noise.  The decision statistic is
the sequential least-squares estimate stopped at design level ``H``; with
``H >= 4 * delta^-2 * epsilon^-1 * E[xi]`` both error probabilities are
at most ``epsilon`` by a Chebyshev argument, so observed error rates are
typically far below that bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from sklearn.base import BaseEstimator

from .estimators import EstimationError, _as_design, sequential_ls

__all__ = [
    "ACCEPT_H0",
    "ACCEPT_H1",
    "TestConfig",
    "phi_statistic",
    "decide",
    "required_level",
    "DriftHypothesisTest",
]

ACCEPT_H0 = "accept_H0"
ACCEPT_H1 = "accept_H1"


def required_level(delta: float, epsilon: float, xi_mean: float) -> float:
    """Smallest design level guaranteeing error probabilities <= epsilon."""
    if delta <= 0.0 or epsilon <= 0.0 or xi_mean <= 0.0:
        raise EstimationError("delta, epsilon and xi_mean must be positive")
    return 4.0 * delta ** -2 * epsilon ** -1 * xi_mean


@dataclass(frozen=True)
class TestConfig:
    """Decision-rule parameters; ``level`` is auto-sized when omitted."""

    __test__ = False  # not a pytest collectable despite the name

    delta: float
    epsilon: float
    xi_mean: float
    level: float | None = None

    def __post_init__(self):
        required = required_level(self.delta, self.epsilon, self.xi_mean)
        if self.level is None:
            object.__setattr__(self, "level", required)
        elif self.level < required:
            raise EstimationError(
                f"level {self.level} below the guaranteed-error threshold "
                f"{required}")


def phi_statistic(X, f, a, level: float, form: str = "corrected") -> float:
    """The decision statistic: the stopped sequential LS functional of ``X``."""
    res = sequential_ls(X, f, a, level, form=form)
    if not res.crossed:
        raise EstimationError("design did not reach the level within the horizon")
    return res.theta_hat


def decide(phi: float, delta: float) -> str:
    """Threshold rule: drift accepted when ``|phi| >= delta/2`` (ties too)."""
    if delta <= 0.0:
        raise EstimationError("delta must be positive")
    if math.isnan(phi):
        raise EstimationError("decision statistic is unavailable")
    return ACCEPT_H0 if abs(phi) >= delta / 2.0 else ACCEPT_H1


class DriftHypothesisTest(BaseEstimator):
    """Fit-style wrapper around the sequential decision rule.

    After ``fit``: ``phi_`` (the statistic, i.e. the simultaneous drift
    estimate), ``decision_`` and the ``level_`` actually used.
    """

    def __init__(self, delta: float = 1.0, epsilon: float = 0.05,
                 xi_mean: float = 1.0, level: float | None = None,
                 form: str = "corrected"):
        self.delta = delta
        self.epsilon = epsilon
        self.xi_mean = xi_mean
        self.level = level
        self.form = form

    def fit(self, X, y=None):
        path, f, a = _as_design(X)
        cfg = TestConfig(self.delta, self.epsilon, self.xi_mean, self.level)
        self.level_ = cfg.level
        self.phi_ = phi_statistic(path, f, a, cfg.level, form=self.form)
        self.decision_ = decide(self.phi_, self.delta)
        return self
