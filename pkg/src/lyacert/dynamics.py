"""ODE integration and time-series utilities.

States are 1-d float64 arrays.  Two steppers are provided: an adaptive
Dormand-Prince 5(4) pair (the default) and a fixed-step classical RK4.
Accepted nodes keep the vector-field value alongside the state so that
trajectories can be resampled onto a uniform grid with cubic Hermite
interpolation without re-evaluating the field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EvaluationError, InvalidInputError

__all__ = [
    "BLOWUP_NORM",
    "SystemSpec",
    "IntegratorConfig",
    "Trajectory",
    "TimeSeries",
    "integrate",
    "evaluate_along",
    "numerical_derivative",
    "quadrature",
]

# State-norm guard: integration stops and the trajectory is flagged
# `truncated` once the Euclidean norm passes this.
BLOWUP_NORM = 1e12

METHOD_RK45 = "rk45"
METHOD_RK4 = "rk4"
_METHODS = (METHOD_RK45, METHOD_RK4)

# Dormand-Prince 5(4) tableau.  The first row of weights advances the
# solution (order 5); _DP_E holds the difference against the embedded
# order-4 weights and multiplies k1..k7 for the error estimate.
_DP_C = (1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0)
_DP_A = (
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
)
_DP_B = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0)
_DP_E = (
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

_MIN_STEP_FACTOR = 0.2
_MAX_STEP_FACTOR = 5.0
_SAFETY = 0.9


@dataclass(frozen=True)
class SystemSpec:
    """An autonomous vector field x' = f(x) on R^dimension."""

    dimension: int
    field: Callable[[np.ndarray], np.ndarray]
    name: str = "system"

    def __post_init__(self):
        if not isinstance(self.dimension, int) or self.dimension < 1:
            raise InvalidInputError(f"system dimension must be a positive integer, got {self.dimension!r}")


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration controls.

    dense_output_dt: spacing of the uniform output grid.  None selects
    the default t_end/2000; 0 disables resampling and returns the raw
    accepted steps.
    """

    method: str = METHOD_RK45
    t_end: float = 10.0
    dt_init: float = 1e-2
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_steps: int = 1_000_000
    dense_output_dt: float | None = None

    def __post_init__(self):
        if self.method not in _METHODS:
            raise InvalidInputError(f"method must be one of {_METHODS}, got {self.method!r}")
        if not (self.t_end > 0.0 and math.isfinite(self.t_end)):
            raise InvalidInputError(f"t_end must be positive and finite, got {self.t_end!r}")
        if not (self.dt_init > 0.0 and math.isfinite(self.dt_init)):
            raise InvalidInputError(f"dt_init must be positive and finite, got {self.dt_init!r}")
        if not (self.abs_tol > 0.0 and self.rel_tol > 0.0):
            raise InvalidInputError("abs_tol and rel_tol must be positive")
        if self.max_steps < 1:
            raise InvalidInputError(f"max_steps must be >= 1, got {self.max_steps!r}")
        if self.dense_output_dt is not None and self.dense_output_dt < 0.0:
            raise InvalidInputError("dense_output_dt must be >= 0 (or None for the default)")

    def resolved_dense_dt(self) -> float:
        if self.dense_output_dt is None:
            return self.t_end / 2000.0
        return float(self.dense_output_dt)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of an autonomous system, immutable after construction."""

    times: np.ndarray
    states: np.ndarray
    system_name: str = "system"
    truncated: bool = False

    def __post_init__(self):
        times = _readonly(np.atleast_1d(self.times))
        states = _readonly(np.atleast_2d(self.states))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if times.ndim != 1 or states.ndim != 2 or states.shape[0] != times.shape[0]:
            raise InvalidInputError("trajectory needs times (n,) and states (n, dim) of matching length")
        if times.shape[0] < 1:
            raise InvalidInputError("trajectory must contain at least one sample")
        if times[0] != 0.0:
            raise InvalidInputError(f"trajectory times must start at 0, got {times[0]!r}")
        if times.shape[0] > 1 and not np.all(np.diff(times) > 0.0):
            raise InvalidInputError("trajectory times must be strictly increasing")
        if not np.all(np.isfinite(states)):
            raise InvalidInputError("trajectory states must be finite; non-finite tails are never stored")

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class TimeSeries:
    """A scalar signal sampled on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = _readonly(np.atleast_1d(self.times))
        values = _readonly(np.atleast_1d(self.values))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.shape != values.shape or times.ndim != 1:
            raise InvalidInputError("time series needs equal-length 1-d times and values")
        if times.shape[0] > 1 and not np.all(np.diff(times) > 0.0):
            raise InvalidInputError("time series times must be strictly increasing")

    def __len__(self) -> int:
        return int(self.times.shape[0])


def _call_field(f, x, where: str) -> np.ndarray:
    try:
        out = np.asarray(f(x), dtype=float).reshape(-1)
    except Exception as exc:  # field raised: surface as evaluation failure
        raise EvaluationError(f"vector field raised {exc!r} {where}") from exc
    if out.shape != x.shape:
        raise InvalidInputError(f"vector field returned shape {out.shape} for state of shape {x.shape} {where}")
    return out


@dataclass
class _Nodes:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    derivs: list = field(default_factory=list)
    truncated: bool = False

    def append(self, t, y, f):
        self.times.append(t)
        self.states.append(y)
        self.derivs.append(f)


def _step_rk45(f, t, y, k1, h):
    """One Dormand-Prince attempt. Returns (y_new, k7, err_vec)."""
    k = [k1]
    for ci, row in zip(_DP_C, _DP_A):
        acc = row[0] * k[0]
        for a, kj in zip(row[1:], k[1:]):
            acc = acc + a * kj
        k.append(f(y + h * acc))
    # k now holds k1..k6
    incr = _DP_B[0] * k[0]
    for b, kj in zip(_DP_B[1:], k[1:]):
        if b != 0.0:
            incr = incr + b * kj
    y_new = y + h * incr
    k7 = f(y_new)
    k.append(k7)
    err = _DP_E[0] * k[0]
    for e, kj in zip(_DP_E[1:], k[1:]):
        if e != 0.0:
            err = err + e * kj
    return y_new, k7, h * err


def _integrate_rk45(field_fn, x0, f0, cfg: IntegratorConfig) -> _Nodes:
    nodes = _Nodes()
    t, y, fy = 0.0, x0, f0
    nodes.append(t, y, fy)
    h = min(cfg.dt_init, cfg.t_end)
    steps = 0

    def raw_field(x):
        try:
            return np.asarray(field_fn(x), dtype=float).reshape(-1)
        except Exception:
            # overflow inside user code behaves like a rejected step
            return np.full_like(x, np.nan)

    while t < cfg.t_end:
        if steps >= cfg.max_steps:
            nodes.truncated = True
            break
        steps += 1
        clamped = h >= cfg.t_end - t
        h_try = (cfg.t_end - t) if clamped else h
        y_new, k7, err = _step_rk45(raw_field, t, y, fy, h_try)
        ok = np.all(np.isfinite(y_new)) and np.all(np.isfinite(err))
        if ok:
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
        else:
            err_norm = math.inf
        if err_norm <= 1.0:
            t = cfg.t_end if clamped else t + h_try
            y, fy = y_new, k7
            if not np.all(np.isfinite(fy)):
                # state is fine but the field is not evaluable here; stop
                nodes.append(t, y, np.zeros_like(y))
                nodes.truncated = True
                break
            nodes.append(t, y, fy)
            if float(np.linalg.norm(y)) > BLOWUP_NORM:
                nodes.truncated = True
                break
            if err_norm == 0.0:
                h = h_try * _MAX_STEP_FACTOR
            else:
                h = h_try * min(_MAX_STEP_FACTOR, max(_MIN_STEP_FACTOR, _SAFETY * err_norm ** -0.2))
        else:
            if math.isfinite(err_norm):
                h = h_try * max(_MIN_STEP_FACTOR, _SAFETY * err_norm ** -0.2)
            else:
                h = h_try * _MIN_STEP_FACTOR
            if h < 1e-14 * max(1.0, t):
                nodes.truncated = True
                break
    return nodes


def _integrate_rk4(field_fn, x0, f0, cfg: IntegratorConfig) -> _Nodes:
    nodes = _Nodes()
    t, y, fy = 0.0, x0, f0
    nodes.append(t, y, fy)
    steps = 0

    def raw_field(x):
        try:
            return np.asarray(field_fn(x), dtype=float).reshape(-1)
        except Exception:
            return np.full_like(x, np.nan)

    while t < cfg.t_end:
        if steps >= cfg.max_steps:
            nodes.truncated = True
            break
        steps += 1
        clamped = cfg.dt_init >= cfg.t_end - t
        h = (cfg.t_end - t) if clamped else cfg.dt_init
        k1 = fy
        k2 = raw_field(y + 0.5 * h * k1)
        k3 = raw_field(y + 0.5 * h * k2)
        k4 = raw_field(y + h * k3)
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y_new)):
            nodes.truncated = True
            break
        t = cfg.t_end if clamped else t + h
        y = y_new
        fy = raw_field(y)
        if not np.all(np.isfinite(fy)):
            nodes.append(t, y, np.zeros_like(y))
            nodes.truncated = True
            break
        nodes.append(t, y, fy)
        if float(np.linalg.norm(y)) > BLOWUP_NORM:
            nodes.truncated = True
            break
    return nodes


def _hermite_resample(times, states, derivs, dense_dt):
    """Cubic Hermite interpolation of the accepted nodes onto a uniform grid.

    Uses the Newton form p(s) = y0 + s f0 + s^2 c2 + s^2 (s-h) c3 so that
    grid points landing exactly on a node reproduce the stored state
    bit-for-bit (every correction term carries a factor of s).
    """
    t_last = times[-1]
    n = int(math.floor(t_last / dense_dt + 1e-9))
    grid = np.arange(n + 1, dtype=float) * dense_dt
    if grid.shape[0] < 2:
        grid = np.array([0.0, t_last])
    idx = np.searchsorted(times, grid, side="right") - 1
    idx = np.clip(idx, 0, len(times) - 2)
    t0 = times[idx]
    h = (times[idx + 1] - times[idx])[:, None]
    s = (grid - t0)[:, None]
    y0 = states[idx]
    y1 = states[idx + 1]
    f0 = derivs[idx]
    f1 = derivs[idx + 1]
    d = (y1 - y0) / h
    c2 = (d - f0) / h
    c3 = (f1 - 2.0 * d + f0) / (h * h)
    out = y0 + s * f0 + (s * s) * c2 + (s * s * (s - h)) * c3
    # exact hits on the right endpoint of the last interval
    at_node = s[:, 0] == h[:, 0]
    if np.any(at_node):
        out[at_node] = y1[at_node]
    return grid, out


def integrate(system: SystemSpec, x0, config: IntegratorConfig) -> Trajectory:
    """Integrate x' = field(x) from x0 over [0, t_end].

    Raises InvalidInputError on dimension mismatch or when the field is
    not finite at x0.  Integration stops early (truncated=True) when the
    state norm passes BLOWUP_NORM, when max_steps is exhausted, or when
    no admissible step size remains.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != system.dimension:
        raise InvalidInputError(
            f"initial state has dimension {x0.shape[0]}, system {system.name!r} expects {system.dimension}"
        )
    if not np.all(np.isfinite(x0)):
        raise InvalidInputError("initial state must be finite")
    f0 = _call_field(system.field, x0, "at the initial state")
    if not np.all(np.isfinite(f0)):
        raise InvalidInputError(f"vector field of {system.name!r} is not finite at the initial state")

    if config.method == METHOD_RK45:
        nodes = _integrate_rk45(system.field, x0, f0, config)
    else:
        nodes = _integrate_rk4(system.field, x0, f0, config)

    times = np.asarray(nodes.times, dtype=float)
    states = np.asarray(nodes.states, dtype=float)
    derivs = np.asarray(nodes.derivs, dtype=float)

    dense_dt = config.resolved_dense_dt()
    if dense_dt > 0.0 and times.shape[0] >= 2:
        grid, resampled = _hermite_resample(times, states, derivs, dense_dt)
        return Trajectory(times=grid, states=resampled, system_name=system.name, truncated=nodes.truncated)
    return Trajectory(times=times, states=states, system_name=system.name, truncated=nodes.truncated)


def evaluate_along(traj: Trajectory, g: Callable[[np.ndarray], float]) -> TimeSeries:
    """Evaluate a scalar observable at every stored state."""
    values = np.empty(len(traj.times), dtype=float)
    for i, state in enumerate(traj.states):
        try:
            v = float(g(state))
        except Exception as exc:
            raise EvaluationError(
                f"observable raised {exc!r} at time index {i} (t={traj.times[i]:.6g})"
            ) from exc
        if not math.isfinite(v):
            raise EvaluationError(f"observable returned {v!r} at time index {i} (t={traj.times[i]:.6g})")
        values[i] = v
    return TimeSeries(times=traj.times, values=values)


def numerical_derivative(series: TimeSeries) -> TimeSeries:
    """Second-order finite-difference derivative on a possibly nonuniform grid.

    Central differences in the interior, second-order one-sided stencils at
    both endpoints.
    """
    if len(series) < 3:
        raise InvalidInputError(f"numerical_derivative needs at least 3 samples, got {len(series)}")
    deriv = np.gradient(series.values, series.times, edge_order=2)
    return TimeSeries(times=series.times, values=deriv)


def quadrature(series: TimeSeries) -> float:
    """Trapezoidal integral of the series over its grid.

    Interval contributions are accumulated with math.fsum so the result
    is the correctly rounded sum of the per-interval terms; splitting a
    grid at a shared node therefore splits the sum exactly whenever the
    partial sums are representable.
    """
    if len(series) < 2:
        raise InvalidInputError(f"quadrature needs at least 2 samples, got {len(series)}")
    t = series.times
    v = series.values
    terms = (t[1:] - t[:-1]) * (v[1:] + v[:-1]) * 0.5
    return math.fsum(terms.tolist())
