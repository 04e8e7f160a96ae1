"""Finite-horizon trajectories with left and right limits at every point.

A path is stored as an ordered list of *events*.  Each event at time ``t``
carries three values: the left limit ``x_minus``, the value ``x`` and the
right limit ``x_plus``.  A path may therefore jump *into* an event
(``delta = x - x_minus``) and *out of* it (``delta_plus = x_plus - x``),
which is exactly the bookkeeping needed for processes that are neither
right- nor left-continuous.

Between consecutive events the path follows a declared rule:

* ``"const"``  -- hold the previous right limit (pure-jump paths); the
  right limit of one event must equal the left limit of the next.
* ``"linear"`` -- interpolate linearly from the previous right limit to
  the next left limit (continuous or drift segments).  Past the last
  event a ``"linear"`` path continues with the declared ``slope``.

Paths are immutable after construction and all operations are pure
functions, so they can be shared freely across parallel workers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "LadlagPath",
    "IncreasingPath",
    "PathError",
    "add",
    "scale",
    "refine",
    "merge_times",
    "line_path",
    "constant_path",
    "sampled_path",
    "jump_path",
    "dump_path_csv",
    "load_path_csv",
]

RULES = ("const", "linear")
SIDES = ("left", "at", "right")


class PathError(ValueError):
    """Raised for malformed paths or out-of-domain path queries."""


def _as_readonly(a) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LadlagPath:
    """A trajectory with left and right limits at every event time.

    Parameters
    ----------
    times : array of strictly increasing event times, ``times[0] == 0``.
    left, value, right : arrays of ``x_minus``, ``x`` and ``x_plus``.
    horizon : final time ``T >= times[-1]``.
    rule : between-event evolution, ``"const"`` or ``"linear"``.
    slope : growth rate past the last event (``"linear"`` rule only).
    """

    times: np.ndarray
    left: np.ndarray
    value: np.ndarray
    right: np.ndarray
    horizon: float
    rule: str = "const"
    slope: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "times", _as_readonly(self.times))
        object.__setattr__(self, "left", _as_readonly(self.left))
        object.__setattr__(self, "value", _as_readonly(self.value))
        object.__setattr__(self, "right", _as_readonly(self.right))
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "slope", float(self.slope))
        self._validate()

    def _validate(self):
        n = self.times.shape[0]
        if n == 0:
            raise PathError("path needs at least one event")
        for name in ("left", "value", "right"):
            if getattr(self, name).shape != (n,):
                raise PathError(f"{name} array length mismatch")
        if self.rule not in RULES:
            raise PathError(f"unknown between-event rule {self.rule!r}")
        if self.times[0] != 0.0:
            raise PathError("first event must sit at t = 0")
        if n > 1 and not np.all(np.diff(self.times) > 0.0):
            raise PathError("event times must be strictly increasing")
        if not (math.isfinite(self.horizon) and self.horizon >= self.times[-1]):
            raise PathError("horizon must be finite and cover the last event")
        for name in ("left", "value", "right"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise PathError(f"non-finite entries in {name}")
        if self.left[0] != self.value[0]:
            raise PathError("no jump into t = 0: require x_minus == x there")
        if self.rule == "const" and n > 1:
            # holding the right limit must land exactly on the next left limit
            if not np.array_equal(self.right[:-1], self.left[1:]):
                raise PathError("const rule broken: right[k] != left[k+1]")

    # -- basic queries -------------------------------------------------

    @property
    def n_events(self) -> int:
        return self.times.shape[0]

    @cached_property
    def delta(self) -> np.ndarray:
        """Jump into each event, ``x - x_minus``."""
        d = self.value - self.left
        d.setflags(write=False)
        return d

    @cached_property
    def delta_plus(self) -> np.ndarray:
        """Jump out of each event, ``x_plus - x``."""
        d = self.right - self.value
        d.setflags(write=False)
        return d

    @cached_property
    def segment_increments(self) -> np.ndarray:
        """Between-event growth ``left[k+1] - right[k]`` (zero under const rule)."""
        d = self.left[1:] - self.right[:-1]
        d.setflags(write=False)
        return d

    def value_at(self, t: float, side: str = "at") -> float:
        """Evaluate the path at ``t`` on the requested side."""
        return float(self.value_at_many(np.asarray([t], dtype=float), side)[0])

    def value_at_many(self, t, side: str = "at") -> np.ndarray:
        if side not in SIDES:
            raise PathError(f"side must be one of {SIDES}")
        t = np.asarray(t, dtype=float)
        if t.size and (t.min() < 0.0 or t.max() > self.horizon):
            raise PathError("time outside [0, horizon]")
        idx = np.searchsorted(self.times, t, side="left")
        at_event = (idx < self.n_events) & (self.times[np.minimum(idx, self.n_events - 1)] == t)
        out = np.empty_like(t)
        if at_event.any():
            arr = {"left": self.left, "at": self.value, "right": self.right}[side]
            out[at_event] = arr[idx[at_event]]
        interior = ~at_event
        if interior.any():
            out[interior] = self._between(t[interior], idx[interior] - 1)
        return out

    def _between(self, t: np.ndarray, seg: np.ndarray) -> np.ndarray:
        """Rule value strictly between events; ``seg`` is the preceding event index."""
        base = self.right[seg]
        if self.rule == "const":
            return base.copy()
        out = np.empty_like(t)
        tail = seg == self.n_events - 1
        if tail.any():
            out[tail] = base[tail] + self.slope * (t[tail] - self.times[seg[tail]])
        mid = ~tail
        if mid.any():
            k = seg[mid]
            t0 = self.times[k]
            t1 = self.times[k + 1]
            frac = (t[mid] - t0) / (t1 - t0)
            out[mid] = base[mid] + (self.left[k + 1] - base[mid]) * frac
        return out

    def jumps(self) -> list[tuple[float, float, float]]:
        """All events with a nonzero jump, as ``(t, delta, delta_plus)``."""
        mask = (self.delta != 0.0) | (self.delta_plus != 0.0)
        return [
            (float(t), float(d), float(p))
            for t, d, p in zip(self.times[mask], self.delta[mask], self.delta_plus[mask])
        ]

    def refine(self, new_times) -> "LadlagPath":
        return refine(self, new_times)


@dataclass(frozen=True)
class IncreasingPath(LadlagPath):
    """A non-decreasing path: ``x_minus <= x <= x_plus`` and levels never drop."""

    def _validate(self):
        super()._validate()
        if np.any(self.delta < 0.0) or np.any(self.delta_plus < 0.0):
            raise PathError("increasing path has a negative jump")
        if np.any(self.segment_increments < 0.0):
            raise PathError("increasing path decreases between events")
        if self.rule == "linear" and self.slope < 0.0:
            raise PathError("increasing path has a negative tail slope")


# -- constructors ------------------------------------------------------


def line_path(rate: float, horizon: float, intercept: float = 0.0) -> LadlagPath:
    """The deterministic line ``intercept + rate * t`` on ``[0, horizon]``."""
    v0 = float(intercept)
    v1 = float(intercept + rate * horizon)
    cls = IncreasingPath if rate >= 0.0 else LadlagPath
    if horizon == 0.0:
        return cls([0.0], [v0], [v0], [v0], 0.0, rule="linear", slope=rate)
    return cls([0.0, horizon], [v0, v1], [v0, v1], [v0, v1], horizon,
               rule="linear", slope=rate)


def constant_path(level: float, horizon: float) -> IncreasingPath:
    v = float(level)
    return IncreasingPath([0.0], [v], [v], [v], horizon, rule="const")


def sampled_path(times, values, horizon: float | None = None,
                 rule: str = "linear", increasing: bool = False) -> LadlagPath:
    """A continuous path through ``(times, values)`` (no jumps at events)."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    horizon = float(times[-1]) if horizon is None else float(horizon)
    cls = IncreasingPath if increasing else LadlagPath
    return cls(times, values, values, values, horizon, rule=rule)


def jump_path(jump_times, jump_sizes, horizon: float, forward: bool = False,
              rule: str = "const", start: float = 0.0) -> LadlagPath:
    """A pure-jump staircase.

    ``forward=False`` charges each jump into its event (``delta``);
    ``forward=True`` charges it out of the event (``delta_plus``), i.e. the
    left-continuous variant.  An event is appended at the horizon so the
    final level is anchored.
    """
    jt = np.asarray(jump_times, dtype=float)
    js = np.asarray(jump_sizes, dtype=float)
    if jt.shape != js.shape:
        raise PathError("jump times/sizes length mismatch")
    if jt.size and (jt.min() <= 0.0 or jt.max() > horizon):
        raise PathError("jump times must lie in (0, horizon]")
    times = np.concatenate([[0.0], jt])
    levels = start + np.concatenate([[0.0], np.cumsum(js)])
    pre = np.concatenate([levels[:1], levels[:-1]])
    post = levels
    if forward:
        left = pre.copy()
        val = pre.copy()
        right = post
    else:
        left = pre
        val = post.copy()
        right = post.copy()
    if jt.size == 0 or jt[-1] < horizon:
        times = np.concatenate([times, [horizon]])
        left = np.concatenate([left, [post[-1]]])
        val = np.concatenate([val, [post[-1]]])
        right = np.concatenate([right, [post[-1]]])
    cls = IncreasingPath if np.all(js >= 0.0) and start >= 0.0 else LadlagPath
    return cls(times, left, val, right, horizon, rule=rule)


# -- skeleton algebra --------------------------------------------------


def merge_times(*paths: LadlagPath) -> np.ndarray:
    """Union of the event times of all paths (exact float equality dedupe)."""
    times = paths[0].times
    for p in paths[1:]:
        if p.times is not times and not np.array_equal(p.times, times):
            times = np.union1d(times, p.times)
    return times


def refine(path: LadlagPath, new_times) -> LadlagPath:
    """Re-express ``path`` on a superset of its event times.

    Inserted events carry the rule value with equal left/value/right, so
    evaluation is unchanged.
    """
    new_times = np.asarray(new_times, dtype=float)
    if new_times is path.times or np.array_equal(new_times, path.times):
        return path
    new_times = np.union1d(path.times, new_times)
    if new_times.size and new_times[-1] > path.horizon:
        raise PathError("refinement times beyond horizon")
    if np.array_equal(new_times, path.times):
        return path
    idx = np.searchsorted(path.times, new_times, side="left")
    at_event = (idx < path.n_events) & (path.times[np.minimum(idx, path.n_events - 1)] == new_times)
    left = np.empty_like(new_times)
    value = np.empty_like(new_times)
    right = np.empty_like(new_times)
    left[at_event] = path.left[idx[at_event]]
    value[at_event] = path.value[idx[at_event]]
    right[at_event] = path.right[idx[at_event]]
    ins = ~at_event
    if ins.any():
        v = path._between(new_times[ins], idx[ins] - 1)
        left[ins] = value[ins] = right[ins] = v
    return type(path)(new_times, left, value, right, path.horizon,
                      rule=path.rule, slope=path.slope)


def _joint_rule(paths: Sequence[LadlagPath]) -> str:
    return "linear" if any(p.rule == "linear" for p in paths) else "const"


def add(*paths: LadlagPath) -> LadlagPath:
    """Pointwise sum on the refined common skeleton.

    Summation order is fixed: ascending event time, operands left to
    right, so results are bit-reproducible.  The jump of the sum is the
    sum of the jumps.  Horizons must match exactly.
    """
    if not paths:
        raise PathError("add needs at least one path")
    horizon = paths[0].horizon
    for p in paths[1:]:
        if p.horizon != horizon:
            raise PathError("cannot add paths with different horizons")
    times = merge_times(*paths)
    refined = [refine(p, times) for p in paths]
    left = refined[0].left.copy()
    value = refined[0].value.copy()
    right = refined[0].right.copy()
    for p in refined[1:]:
        left = left + p.left
        value = value + p.value
        right = right + p.right
    rule = _joint_rule(paths)
    slope = math.fsum(p.slope for p in paths if p.rule == "linear") if rule == "linear" else 0.0
    cls = IncreasingPath if all(isinstance(p, IncreasingPath) for p in paths) else LadlagPath
    return cls(times, left, value, right, horizon, rule=rule, slope=slope)


def scale(path: LadlagPath, c: float) -> LadlagPath:
    """Pointwise scaling; demotes an increasing path when ``c < 0``."""
    c = float(c)
    cls = type(path)
    if isinstance(path, IncreasingPath) and c < 0.0:
        cls = LadlagPath
    return cls(path.times, path.left * c, path.value * c, path.right * c,
               path.horizon, rule=path.rule,
               slope=path.slope * c if path.rule == "linear" else 0.0)


# -- CSV interchange ---------------------------------------------------

_CSV_HEADER = ["t", "x_minus", "x", "x_plus", "rule"]


def dump_path_csv(path: LadlagPath, fp) -> None:
    """Write one row per event: ``t,x_minus,x,x_plus,rule`` ordered by t."""
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(_CSV_HEADER)
    for i in range(path.n_events):
        w.writerow([
            _fmt(path.times[i]), _fmt(path.left[i]), _fmt(path.value[i]),
            _fmt(path.right[i]), path.rule,
        ])


def load_path_csv(fp, horizon: float | None = None, slope: float = 0.0,
                  increasing: bool = False) -> LadlagPath:
    r = csv.reader(fp)
    header = next(r)
    if header != _CSV_HEADER:
        raise PathError(f"unexpected path CSV header: {header}")
    rows = [row for row in r if row]
    if not rows:
        raise PathError("empty path CSV")
    rules = {row[4] for row in rows}
    if len(rules) != 1:
        raise PathError("mixed between-event rules in path CSV")
    data = np.asarray([[float(x) for x in row[:4]] for row in rows])
    cls = IncreasingPath if increasing else LadlagPath
    return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3],
               horizon=data[-1, 0] if horizon is None else horizon,
               rule=rows[0][4], slope=slope)


def _fmt(x: float) -> str:
    """Shortest round-trippable decimal form."""
    return repr(float(x))
