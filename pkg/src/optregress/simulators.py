"""Seeded sample-path generation and scenario assembly.

Reproducibility contract: replicate ``i`` of a run with master seed ``s``
draws component ``j`` (0 = Wiener, 1 = backward-jump Poisson, 2 =
forward-jump Poisson) from ``numpy.random.default_rng(SeedSequence(s,
spawn_key=(i, j)))``.  No stream is shared, so paths are bit-identical
regardless of worker count or execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ScenarioConfig
from .integrals import (BilinearIntegrand, ConstantLeg, FunctionLeg,
                        PathLeg, optional_integral_path)
from .paths import (IncreasingPath, LadlagPath, add, line_path, sampled_path,
                    scale)

__all__ = [
    "component_rng",
    "simulate_wiener",
    "simulate_poisson_right",
    "simulate_poisson_left",
    "SimulatedModel",
    "build_scenario",
    "design_for",
    "f_form_leg",
    "f_form_diverges",
]

_STREAM_WIENER = 0
_STREAM_POISSON_R = 1
_STREAM_POISSON_G = 2


def component_rng(master_seed: int, replicate: int = 0, stream: int = 0):
    """Independent generator for one noise component of one replicate."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(replicate), int(stream)))
    return np.random.default_rng(ss)


def _grid(horizon: float, step: float) -> np.ndarray:
    n = max(1, int(math.ceil(horizon / step - 1e-12)))
    return np.linspace(0.0, horizon, n + 1)


def _wiener_values(times: np.ndarray, sigma: float, rng) -> np.ndarray:
    if sigma == 0.0 or times.size < 2:
        return np.zeros(times.size)
    dt = np.diff(times)
    inc = rng.normal(size=dt.size) * (sigma * np.sqrt(dt))
    return np.concatenate([[0.0], np.cumsum(inc)])


def _arrival_times(lam: float, horizon: float, rng) -> np.ndarray:
    """Arrival times of a rate-``lam`` Poisson stream on ``(0, horizon)``."""
    if lam <= 0.0:
        return np.empty(0)
    mean = lam * horizon
    block = int(mean + 6.0 * math.sqrt(mean) + 16.0)
    gaps = rng.exponential(scale=1.0 / lam, size=block)
    total = np.cumsum(gaps)
    while total[-1] < horizon:
        gaps = rng.exponential(scale=1.0 / lam, size=block)
        total = np.concatenate([total, total[-1] + np.cumsum(gaps)])
    return total[total < horizon]


def _counting_values(times: np.ndarray, arrivals: np.ndarray, size: float,
                     forward: bool):
    """Scaled counting levels of a jump stream, read on ``times``."""
    n_lt = np.searchsorted(arrivals, times, side="left")
    n_le = np.searchsorted(arrivals, times, side="right")
    pre = size * n_lt
    post = size * n_le
    if forward:
        return pre, pre.copy(), post
    return pre, post, post.copy()


def _counting_path(times, arrivals, size, forward, horizon) -> LadlagPath:
    left, value, right = _counting_values(times, arrivals, size, forward)
    cls = IncreasingPath if size >= 0.0 else LadlagPath
    return cls(times, left, value, right, horizon, rule="const")


def simulate_wiener(sigma: float, horizon: float, step: float,
                    seed: int | None = None, rng=None) -> LadlagPath:
    """Discretized Wiener path on a uniform grid (continuous; linear rule).

    Increments over each grid cell are independent ``N(0, sigma^2 * dt)``,
    so the value at any grid point is exact in distribution.
    """
    if sigma < 0.0:
        raise ConfigError("sigma must be non-negative")
    if rng is None:
        rng = component_rng(0 if seed is None else seed, 0, _STREAM_WIENER)
    times = _grid(horizon, step)
    w = _wiener_values(times, sigma, rng)
    return sampled_path(times, w, horizon=horizon, rule="linear")


def _jump_skeleton(arrivals: np.ndarray, horizon: float) -> np.ndarray:
    return np.union1d(np.asarray([0.0, horizon]), arrivals)


def simulate_poisson_right(lam: float, jump_size: float, horizon: float,
                           seed: int | None = None, rng=None) -> LadlagPath:
    """Right-continuous scaled Poisson path: each arrival jumps *into* its
    event (``delta = jump_size``, no forward jump)."""
    if lam < 0.0:
        raise ConfigError("rate must be non-negative")
    if rng is None:
        rng = component_rng(0 if seed is None else seed, 0, _STREAM_POISSON_R)
    arrivals = _arrival_times(lam, horizon, rng)
    return _counting_path(_jump_skeleton(arrivals, horizon), arrivals,
                          jump_size, forward=False, horizon=horizon)


def simulate_poisson_left(lam: float, jump_size: float, horizon: float,
                          seed: int | None = None, rng=None) -> LadlagPath:
    """Left-continuous Poisson modification: the value at an arrival is the
    pre-jump level and the right limit carries the jump
    (``delta_plus = jump_size``)."""
    if lam < 0.0:
        raise ConfigError("rate must be non-negative")
    if rng is None:
        rng = component_rng(0 if seed is None else seed, 0, _STREAM_POISSON_G)
    arrivals = _arrival_times(lam, horizon, rng)
    return _counting_path(_jump_skeleton(arrivals, horizon), arrivals,
                          jump_size, forward=True, horizon=horizon)


# -- deterministic integrand forms --------------------------------------


def f_form_leg(form: dict | None):
    """Integrand leg for a named deterministic drift-weight form."""
    if form is None:
        return ConstantLeg(1.0)
    name = form["form"]
    if name == "const":
        return ConstantLeg(float(form.get("value", 1.0)))
    a = float(form.get("a", 1.0))
    b = float(form.get("b", 1.0))
    if name == "affine":
        return FunctionLeg(lambda s: a + b * s)
    if name == "inv_affine":
        if a <= 0.0 or b < 0.0:
            raise ConfigError("inv_affine form needs a > 0 and b >= 0")
        return FunctionLeg(lambda s: 1.0 / (a + b * s))
    raise ConfigError(f"unknown f_form {name!r}")


def f_form_diverges(form: dict | None) -> bool:
    """Whether the squared weight integrates to infinity over ``[0, inf)``."""
    if form is None:
        return True
    name = form["form"]
    if name == "const":
        return float(form.get("value", 1.0)) != 0.0
    a = float(form.get("a", 1.0))
    b = float(form.get("b", 1.0))
    if name == "affine":
        return not (a == 0.0 and b == 0.0)
    if name == "inv_affine":
        return b == 0.0  # constant 1/a; otherwise integral = 1/(a*b) < inf
    raise ConfigError(f"unknown f_form {name!r}")


# -- scenario assembly ---------------------------------------------------


@dataclass(frozen=True)
class SimulatedModel:
    """One realized model instance: observed path plus its known pieces.

    ``X`` decomposes exactly (by construction, same summation order) as
    ``x0 + coef * drift + M`` at every event, where ``coef`` is the drift
    coefficient actually applied (``theta`` for linear scenarios, the
    mapped value for nonlinear ones).
    """

    config: ScenarioConfig
    theta: float
    coef: float
    X: LadlagPath
    M: LadlagPath
    drift: LadlagPath
    integrand: BilinearIntegrand
    integrator: IncreasingPath
    xi_bound: float
    bracket_rate: float
    design_diverges: bool
    components: dict = field(default_factory=dict, repr=False)

    @property
    def horizon(self) -> float:
        return self.X.horizon


def _ou_drift_kernel(times, m_right, x0, theta, mu):  # pragma: no cover - numba
    n = times.shape[0]
    out = np.empty(n)
    acc = 0.0
    out[0] = 0.0
    for k in range(n - 1):
        xr = (x0 + theta * acc) + m_right[k]
        acc = acc + (mu - xr) * (times[k + 1] - times[k])
        out[k + 1] = acc
    return out


try:  # compiled drift-feedback recursion; plain loop is bit-identical
    from numba import njit

    _ou_drift = njit(cache=True)(_ou_drift_kernel)
except Exception:  # pragma: no cover - numba is an optional accelerator
    _ou_drift = _ou_drift_kernel


def _noise_parts(config: ScenarioConfig, times: np.ndarray, rngs) -> dict:
    horizon = config.horizon
    parts = {}
    parts["wiener"] = sampled_path(
        times, _wiener_values(times, config.sigma, rngs["wiener"]),
        horizon=horizon, rule="linear")
    parts["poisson_r"] = _counting_path(
        times, rngs["arrivals_r"], -config.jump_r, forward=False, horizon=horizon)
    parts["poisson_g"] = _counting_path(
        times, rngs["arrivals_g"], config.jump_g, forward=True, horizon=horizon)
    comp_rate = config.jump_r * config.lambda_r - config.jump_g * config.lambda_g
    parts["compensator"] = sampled_path(times, comp_rate * times,
                                        horizon=horizon, rule="linear")
    return parts


def _identity_integrator(times: np.ndarray, horizon: float) -> IncreasingPath:
    return IncreasingPath(times, times, times, times, horizon,
                          rule="linear", slope=1.0)


def design_for(config: ScenarioConfig, X: LadlagPath):
    """Integrand and integrator of a scenario for an externally observed path.

    Used when estimating from a dumped path file: path-derived integrands
    (the mean-reversion weight) are rebuilt against the supplied ``X``.
    """
    horizon = X.horizon
    if config.kind in ("risk", "nonlinear"):
        return BilinearIntegrand.constant(1.0, 1.0), line_path(1.0, horizon)
    if config.kind == "gaussian_deterministic_f":
        return (BilinearIntegrand(f_form_leg(config.f_form), ConstantLeg(0.0)),
                _identity_integrator(X.times, horizon))
    if config.kind == "ou":
        integrand = BilinearIntegrand(
            PathLeg(X, transform=lambda v: config.mu - v, side="left",
                    segment_policy="hold_left"),
            ConstantLeg(0.0))
        return integrand, _identity_integrator(X.times, horizon)
    raise ConfigError(f"no canonical design for scenario kind {config.kind!r}")


def build_scenario(config: ScenarioConfig, replicate: int = 0,
                   master_seed: int | None = None) -> SimulatedModel:
    """Assemble observed process, noise, drift and design for one replicate."""
    if config.kind == "custom":
        raise ConfigError("custom scenarios are built directly from paths; "
                          "use the library API")
    seed = config.resolved_seed() if master_seed is None else int(master_seed)
    rng_w = component_rng(seed, replicate, _STREAM_WIENER)
    rng_r = component_rng(seed, replicate, _STREAM_POISSON_R)
    rng_g = component_rng(seed, replicate, _STREAM_POISSON_G)

    horizon = config.horizon
    grid = _grid(horizon, config.step)
    arrivals_r = _arrival_times(config.lambda_r, horizon, rng_r)
    arrivals_g = _arrival_times(config.lambda_g, horizon, rng_g)
    times = np.union1d(grid, np.concatenate([arrivals_r, arrivals_g]))
    rngs = {"wiener": rng_w, "arrivals_r": arrivals_r, "arrivals_g": arrivals_g}

    parts = _noise_parts(config, times, rngs)
    M = add(parts["wiener"], parts["poisson_r"], parts["poisson_g"],
            parts["compensator"])

    xi = config.sigma ** 2 + config.jump_r ** 2 * config.lambda_r \
        + config.jump_g ** 2 * config.lambda_g

    theta = config.resolved_theta()
    kind = config.kind

    if kind in ("risk", "nonlinear"):
        if kind == "nonlinear":
            if theta < 0.0:
                raise ConfigError("nonlinear scenario needs theta >= 0")
            coef = math.sqrt(theta)
        else:
            coef = theta
        drift = IncreasingPath(times, times, times, times, horizon,
                               rule="linear", slope=1.0)
        X = add(scale(drift, coef), M)
        integrand = BilinearIntegrand.constant(1.0, 1.0)
        integrator = line_path(1.0, horizon)
        diverges = True
    elif kind == "gaussian_deterministic_f":
        coef = theta
        integrand = BilinearIntegrand(f_form_leg(config.f_form), ConstantLeg(0.0))
        integrator = _identity_integrator(times, horizon)
        drift = optional_integral_path(integrand, integrator)
        X = add(scale(drift, coef), M)
        diverges = f_form_diverges(config.f_form)
        xi = config.sigma ** 2
    elif kind == "ou":
        coef = theta
        d_values = _ou_drift(times, M.right, config.x0, theta, config.mu)
        base = config.x0 + theta * d_values
        X = LadlagPath(times, base + M.left, base + M.value, base + M.right,
                       horizon, rule="linear")
        drift = sampled_path(times, d_values, horizon=horizon, rule="linear")
        integrand = BilinearIntegrand(
            PathLeg(X, transform=lambda v: config.mu - v, side="left",
                    segment_policy="hold_left"),
            ConstantLeg(0.0))
        integrator = _identity_integrator(times, horizon)
        diverges = True
    else:  # pragma: no cover - guarded by ScenarioConfig
        raise ConfigError(f"unsupported scenario kind {kind!r}")

    return SimulatedModel(
        config=config, theta=theta, coef=coef, X=X, M=M, drift=drift,
        integrand=integrand, integrator=integrator, xi_bound=xi,
        bracket_rate=xi, design_diverges=diverges, components=parts)
