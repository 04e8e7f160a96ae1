"""Pathwise two-leg stochastic integrals over ladlag paths.

The integral of a bilinear integrand ``f = (f_r, f_g)`` against an
integrator splits into two legs with half-open time conventions:

* the *predictable* leg charges ``f_r`` against continuous growth and
  backward jumps (``delta``) over ``(0, t]`` -- the jump at ``t`` counts,
  the one at 0 does not (and cannot exist);
* the *optional* leg charges ``f_g`` against forward jumps
  (``delta_plus``) over ``[0, t)`` -- the charge at 0 counts, the one at
  ``t`` does not.

Continuous-segment contributions use a single integrand evaluation per
segment.  Analytic integrands are evaluated at the segment midpoint
(second-order accurate); integrands read off a reference path follow that
path's rule (held value under ``"const"``, midpoint under ``"linear"``,
or an explicit hold-left policy for predictable Euler-style drifts).
This keeps the self-consistency identities exact: integrating ``f``
against a path that was itself built as ``f`` against some integrator
reproduces the squared-integrand trajectory bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .paths import IncreasingPath, LadlagPath, merge_times, refine

__all__ = [
    "ConstantLeg",
    "FunctionLeg",
    "PathLeg",
    "SquaredLeg",
    "BilinearIntegrand",
    "Integrator",
    "IntegralError",
    "optional_integral",
    "optional_integral_path",
    "integrate_against_path",
    "integral_trajectory",
    "F_process",
    "y_process",
    "y_process_inverse",
    "d_process",
    "kronecker_diagnostic",
    "KroneckerDiagnostic",
    "slln_condition_value",
]


class IntegralError(ValueError):
    """Raised when an integrand cannot be evaluated or inputs are inconsistent."""


# -- integrand legs ----------------------------------------------------


class ConstantLeg:
    """Integrand identically equal to ``value``."""

    def __init__(self, value: float):
        self.value = float(value)

    def at_times(self, t: np.ndarray) -> np.ndarray:
        return np.full(np.shape(t), self.value)

    def on_segments(self, start: np.ndarray, end: np.ndarray) -> np.ndarray:
        return np.full(np.shape(start), self.value)

    def __repr__(self):
        return f"ConstantLeg({self.value})"


class FunctionLeg:
    """Deterministic integrand ``t -> fn(t)``, midpoint-evaluated on segments."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray]):
        self.fn = fn

    def _eval(self, t: np.ndarray) -> np.ndarray:
        out = np.asarray(self.fn(np.asarray(t, dtype=float)), dtype=float)
        if out.shape != np.shape(t):
            out = np.broadcast_to(out, np.shape(t)).astype(float)
        if not np.all(np.isfinite(out)):
            bad = np.asarray(t)[~np.isfinite(out)][:1]
            raise IntegralError(f"integrand undefined at t = {bad[0]!r}")
        return out

    def at_times(self, t):
        return self._eval(t)

    def on_segments(self, start, end):
        return self._eval((np.asarray(start) + np.asarray(end)) / 2.0)


class PathLeg:
    """Integrand read off a reference path, optionally through ``transform``.

    ``side`` picks the reading at event times (``"left"`` for predictable
    integrands, ``"at"``/``"right"`` for optional ones).  On open segments
    the reading follows the path rule unless ``segment_policy`` forces
    ``"hold_left"`` (value carried just after the segment start -- the
    predictable Euler reading) or ``"midpoint"``.
    """

    def __init__(self, path: LadlagPath, transform: Callable | None = None,
                 side: str = "left", segment_policy: str = "auto"):
        if segment_policy not in ("auto", "hold_left", "midpoint"):
            raise IntegralError(f"unknown segment policy {segment_policy!r}")
        self.path = path
        self.transform = transform
        self.side = side
        self.segment_policy = segment_policy

    def _apply(self, v: np.ndarray) -> np.ndarray:
        out = v if self.transform is None else np.asarray(self.transform(v), dtype=float)
        if not np.all(np.isfinite(out)):
            raise IntegralError("path-derived integrand produced non-finite values")
        return out

    def at_times(self, t):
        return self._apply(self.path.value_at_many(t, side=self.side))

    def on_segments(self, start, end):
        policy = self.segment_policy
        if policy == "auto":
            policy = "hold_left" if self.path.rule == "const" else "midpoint"
        if policy == "hold_left":
            v = self.path.value_at_many(start, side="right")
        else:
            v = self.path.value_at_many((np.asarray(start) + np.asarray(end)) / 2.0, side="at")
        return self._apply(v)


class SquaredLeg:
    """Pointwise square of another leg (used for the design trajectory)."""

    def __init__(self, leg):
        self.leg = leg

    def at_times(self, t):
        v = self.leg.at_times(t)
        return v * v

    def on_segments(self, start, end):
        v = self.leg.on_segments(start, end)
        return v * v


def _as_leg(spec) -> object:
    if hasattr(spec, "at_times") and hasattr(spec, "on_segments"):
        return spec
    if isinstance(spec, (int, float)):
        return ConstantLeg(spec)
    if callable(spec):
        return FunctionLeg(spec)
    raise IntegralError(f"cannot interpret {spec!r} as an integrand leg")


@dataclass(frozen=True)
class BilinearIntegrand:
    """The pair ``(f_r, f_g)``: predictable and optional integrand legs.

    ``f_r`` must be computable from information strictly before each
    event (for path-derived legs: read the left limit); ``f_g`` may use
    the value at the event.
    """

    f_r: object
    f_g: object

    def __post_init__(self):
        object.__setattr__(self, "f_r", _as_leg(self.f_r))
        object.__setattr__(self, "f_g", _as_leg(self.f_g))

    @classmethod
    def constant(cls, r: float, g: float | None = None) -> "BilinearIntegrand":
        return cls(ConstantLeg(r), ConstantLeg(r if g is None else g))

    def squared(self) -> "BilinearIntegrand":
        return BilinearIntegrand(SquaredLeg(self.f_r), SquaredLeg(self.f_g))


@dataclass(frozen=True)
class Integrator:
    """Explicit decomposition of a non-decreasing integrator.

    ``a_r`` carries continuous growth and backward jumps (right-continuous
    component), ``a_g`` carries forward jumps only (left-continuous
    component).
    """

    a_r: IncreasingPath | None = None
    a_g: IncreasingPath | None = None

    def __post_init__(self):
        if self.a_r is None and self.a_g is None:
            raise IntegralError("integrator needs at least one component")
        if self.a_r is not None and np.any(self.a_r.delta_plus != 0.0):
            raise IntegralError("right-continuous component has forward jumps")
        if self.a_g is not None:
            if np.any(self.a_g.delta != 0.0):
                raise IntegralError("left-continuous component has backward jumps")
            if np.any(self.a_g.segment_increments != 0.0) or (
                    self.a_g.rule == "linear" and self.a_g.slope != 0.0):
                raise IntegralError("left-continuous component must be pure-jump")

    @property
    def horizon(self) -> float:
        p = self.a_r if self.a_r is not None else self.a_g
        return p.horizon

    def combined(self) -> IncreasingPath:
        """Single-path view ``a = a_r + a_g`` on the union skeleton."""
        from .paths import add
        if self.a_g is None:
            return self.a_r
        if self.a_r is None:
            return self.a_g
        return add(self.a_r, self.a_g)


def _as_charge_path(a) -> LadlagPath:
    if isinstance(a, Integrator):
        return a.combined()
    if isinstance(a, LadlagPath):
        return a
    raise IntegralError(f"cannot integrate against {type(a).__name__}")


# -- the integral core -------------------------------------------------


def _charge_arrays(f: BilinearIntegrand, src: LadlagPath):
    """Per-event charges of ``f`` against ``src`` on its own skeleton."""
    t = src.times
    d_charge = f.f_r.at_times(t) * src.delta
    p_charge = f.f_g.at_times(t) * src.delta_plus
    if src.n_events > 1:
        seg = src.segment_increments
        if np.any(seg != 0.0):
            s_charge = f.f_r.on_segments(t[:-1], t[1:]) * seg
        else:
            s_charge = np.zeros(src.n_events - 1)
    else:
        s_charge = np.zeros(0)
    return d_charge, p_charge, s_charge


def integral_trajectory(f: BilinearIntegrand, source: LadlagPath,
                        increasing: bool = False) -> LadlagPath:
    """Full trajectory ``t -> (f o source)_t`` as a path on source's skeleton.

    The result jumps by ``f_r * delta`` into each event and by
    ``f_g * delta_plus`` out of it.
    """
    d_charge, p_charge, s_charge = _charge_arrays(f, source)
    n = source.n_events
    cum_d = np.cumsum(d_charge)
    if n > 1:
        before = np.concatenate([[0.0], np.cumsum(p_charge[:-1] + s_charge)])
    else:
        before = np.zeros(1)
    value = cum_d + before
    left = value - d_charge
    right = value + p_charge
    cls = IncreasingPath if increasing else LadlagPath
    tail_slope = 0.0
    if source.rule == "linear" and source.slope != 0.0 and source.horizon > source.times[-1]:
        t_last = source.times[-1]
        tail_slope = float(f.f_r.on_segments(
            np.asarray([t_last]), np.asarray([source.horizon]))[0]) * source.slope
    return cls(source.times, left, value, right, source.horizon,
               rule="linear", slope=tail_slope)


def _point_integral(f: BilinearIntegrand, src: LadlagPath, t: float) -> float:
    """Value of the integral at time ``t`` (jump at ``t`` included on the
    predictable leg, forward charge at ``t`` excluded)."""
    t = float(t)
    if not 0.0 <= t <= src.horizon:
        raise IntegralError("integration endpoint outside [0, horizon]")
    traj = integral_trajectory(f, src)
    times = src.times
    k = int(np.searchsorted(times, t, side="left"))
    if k < src.n_events and times[k] == t:
        return float(traj.value[k])
    k -= 1
    base = float(traj.right[k])
    if src.rule != "linear":
        return base
    if k == src.n_events - 1:
        growth = src.slope * (t - times[k])
        if growth == 0.0:
            return base
        f_seg = float(f.f_r.on_segments(np.asarray([times[k]]), np.asarray([t]))[0])
        return base + f_seg * growth
    seg = float(src.segment_increments[k])
    if seg == 0.0:
        return base
    frac = (t - times[k]) / (times[k + 1] - times[k])
    f_seg = float(f.f_r.on_segments(times[k:k + 1], times[k + 1:k + 2])[0])
    return base + f_seg * (seg * frac)


def optional_integral(f: BilinearIntegrand, a, t: float) -> float:
    """The two-leg integral of ``f`` against a non-decreasing integrator."""
    return _point_integral(f, _as_charge_path(a), t)


def optional_integral_path(f: BilinearIntegrand, a,
                           increasing: bool = False) -> LadlagPath:
    return integral_trajectory(f, _as_charge_path(a), increasing=increasing)


def integrate_against_path(f: BilinearIntegrand, X: LadlagPath, t: float) -> float:
    """Integral of ``f`` against an arbitrary observed path ``X``.

    Continuous increments and backward jumps of ``X`` feed the predictable
    leg over ``(0, t]``; forward jumps feed the optional leg over ``[0, t)``.
    """
    return _point_integral(f, X, t)


def F_process(f: BilinearIntegrand, a) -> IncreasingPath:
    """Design trajectory: the squared integrand against the integrator."""
    src = _as_charge_path(a)
    if not isinstance(src, IncreasingPath):
        src = IncreasingPath(src.times, src.left, src.value, src.right,
                             src.horizon, rule=src.rule, slope=src.slope)
    return integral_trajectory(f.squared(), src, increasing=True)


# -- diagnostics -------------------------------------------------------


def y_process(N: LadlagPath, A: IncreasingPath) -> LadlagPath:
    """Damped trajectory of ``N``: integrate ``1/(1+A)`` against ``N``.

    The predictable leg reads ``A`` at each event, the optional leg reads
    its right limit.
    """
    if not isinstance(A, IncreasingPath):
        raise IntegralError("damping process must be an IncreasingPath")
    if A.value[0] < 0.0:
        raise IntegralError("damping process must start non-negative")
    N = refine(N, merge_times(N, A))
    damp = lambda v: 1.0 / (1.0 + v)
    f = BilinearIntegrand(PathLeg(A, damp, side="at"),
                          PathLeg(A, damp, side="right"))
    return integral_trajectory(f, N)


def y_process_inverse(Y: LadlagPath, A: IncreasingPath) -> LadlagPath:
    """Undo :func:`y_process`: integrate ``1+A`` back against ``Y``."""
    Y = refine(Y, merge_times(Y, A))
    grow = lambda v: 1.0 + v
    f = BilinearIntegrand(PathLeg(A, grow, side="at"),
                          PathLeg(A, grow, side="right"))
    return integral_trajectory(f, Y)


def d_process(Y: LadlagPath, bracket_c: IncreasingPath) -> IncreasingPath:
    """Convergence-controlling trajectory of ``Y``.

    Adds to the (analytically supplied) continuous quadratic bracket the
    damped squares ``j^2 / (1+|j|)`` of the backward jumps over ``(0, t]``
    and of the forward jumps over ``[0, t)``.
    """
    times = merge_times(Y, bracket_c)
    Y = refine(Y, times)
    bc = refine(bracket_c, times)
    phi = lambda j: j * j / (1.0 + np.abs(j))
    jd = phi(Y.delta)
    jp = phi(Y.delta_plus)
    cum_jd = np.cumsum(jd)
    before_jd = cum_jd - jd
    before_jp = np.concatenate([[0.0], np.cumsum(jp[:-1])])
    left = bc.left + before_jd + before_jp
    value = bc.value + cum_jd + before_jp
    right = bc.right + cum_jd + before_jp + jp
    return IncreasingPath(times, left, value, right, Y.horizon,
                          rule=bc.rule, slope=bc.slope)


@dataclass(frozen=True)
class KroneckerDiagnostic:
    """Normalized trajectory ``N_t / A_t`` sampled at event times."""

    times: np.ndarray
    ratio_left: np.ndarray
    ratio_value: np.ndarray
    ratio_right: np.ndarray
    horizon: float

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return [(float(t), float(r)) for t, r in zip(self.times, self.ratio_value)]

    def tail_max(self, start_fraction: float = 0.9) -> float:
        """Largest ``|N/A|`` over any side of any event in the tail window."""
        mask = self.times >= start_fraction * self.horizon
        if not mask.any():
            raise IntegralError("no events in the requested tail window")
        stacked = np.abs(np.stack([self.ratio_left[mask],
                                   self.ratio_value[mask],
                                   self.ratio_right[mask]]))
        return float(np.nanmax(stacked))


def kronecker_diagnostic(N: LadlagPath, A: IncreasingPath) -> KroneckerDiagnostic:
    """The ratio trajectory used to check that ``N`` grows slower than ``A``.

    Events where ``A`` has not yet become positive are dropped (the ratio
    is undefined there).
    """
    times = merge_times(N, A)
    N = refine(N, times)
    A = refine(A, times)
    mask = A.value > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        rl = np.where(A.left > 0.0, N.left / A.left, np.nan)
        rv = np.where(mask, N.value / A.value, np.nan)
        rr = np.where(A.right > 0.0, N.right / A.right, np.nan)
    keep = mask
    return KroneckerDiagnostic(times[keep], rl[keep], rv[keep], rr[keep],
                               horizon=N.horizon)


# -- analytic summability check ----------------------------------------


def slln_condition_value(config, q: float = 2.0) -> float:
    """Closed-form summability integral for the linear-design noise family.

    Only scenarios whose design grows like ``kappa * t`` with a constant
    integrand are supported; everything else raises.  Returns ``inf``
    when the jump part fails to be summable (``q == 1`` with active
    jumps).
    """
    from .config import ScenarioConfig

    if not isinstance(config, ScenarioConfig):
        raise IntegralError("expected a ScenarioConfig")
    if not 1.0 <= q <= 2.0:
        raise IntegralError("q must lie in [1, 2]")

    kind = config.kind
    if kind in ("risk", "nonlinear"):
        coef = 1.0
    elif kind == "gaussian_deterministic_f":
        form = config.f_form or {}
        if form.get("form") != "const":
            raise IntegralError(
                "analytic condition needs a constant integrand; "
                f"got f_form {form!r}")
        coef = float(form.get("value", 1.0))
    else:
        raise IntegralError(f"no closed-form condition for scenario kind {kind!r}")

    kappa = coef * coef
    if kappa == 0.0:
        raise IntegralError("degenerate design: integrand is identically zero")

    total = (coef * config.sigma) ** 2 / kappa
    jump_mass = []
    if config.lambda_r > 0.0 and config.jump_r != 0.0:
        jump_mass.append(abs(coef * config.jump_r) ** q * config.lambda_r)
    if config.lambda_g > 0.0 and config.jump_g != 0.0:
        jump_mass.append(abs(coef * config.jump_g) ** q * config.lambda_g)
    if jump_mass:
        if q == 1.0:
            return math.inf
        total += math.fsum(jump_mass) / (kappa * (q - 1.0))
    return total
