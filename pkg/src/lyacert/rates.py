"""Convergence quantification: distance to the critical set, L2 and
pointwise rate checks, exponential envelopes under quadratic growth, and
empirical stability classification.

The critical set E is where both observables vanish.  Everything here
consumes sampled trajectories; verdicts are empirical (finitely many
probes and samples), and are labeled as such in serialized output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .certificates import TAIL_FRACTION, tail_mean, tail_window
from .dynamics import (
    IntegratorConfig,
    SystemSpec,
    TimeSeries,
    Trajectory,
    integrate,
    quadrature,
)
from .errors import InvalidInputError

__all__ = [
    "CriticalSetSpec",
    "distance_series",
    "ConvergenceCheck",
    "check_convergence_to_E",
    "ErrorBoundParams",
    "L2BoundReport",
    "l2_distance_bound",
    "rate_constant_K",
    "WindowCheck",
    "RateReport",
    "subsequence_rate",
    "pointwise_rate",
    "QuadraticGrowthParams",
    "ExponentialRateReport",
    "exponential_rate",
    "ProbeConfig",
    "StabilityVerdict",
    "classify_stability",
]

_SET_KINDS = ("point", "affine_subspace", "product", "custom")


@dataclass(frozen=True)
class CriticalSetSpec:
    """A set E with a distance evaluator and an optional point sampler.

    equilibria_sampler maps an integer index to a state on E; it is pure
    (same index, same point) and is required for stability probing when
    E is not a single point.  project, when available, maps a state to a
    nearest point of E.
    """

    kind: str
    distance: Callable[[np.ndarray], float]
    equilibria_sampler: Callable[[int], np.ndarray] | None = None
    project: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in _SET_KINDS:
            raise InvalidInputError(f"critical set kind must be one of {_SET_KINDS}, got {self.kind!r}")
        if self.equilibria_sampler is not None:
            for i in range(3):
                z = np.asarray(self.equilibria_sampler(i), dtype=float).reshape(-1)
                d = float(self.distance(z))
                if not d <= 1e-9:
                    raise InvalidInputError(
                        f"equilibria_sampler({i}) is not on the set: distance = {d:.6g} > 1e-9"
                    )

    @classmethod
    def point(cls, p) -> "CriticalSetSpec":
        p = np.asarray(p, dtype=float).reshape(-1).copy()
        p.flags.writeable = False
        return cls(
            kind="point",
            distance=lambda x: float(np.linalg.norm(np.asarray(x, dtype=float).reshape(-1) - p)),
            equilibria_sampler=lambda i: p,
            project=lambda x: p,
        )

    @classmethod
    def affine_subspace(cls, base, directions) -> "CriticalSetSpec":
        """The set base + span(directions); distance via orthogonal projection."""
        base = np.asarray(base, dtype=float).reshape(-1)
        dirs = np.atleast_2d(np.asarray(directions, dtype=float))
        if dirs.shape[1] != base.shape[0]:
            raise InvalidInputError(
                f"directions of dimension {dirs.shape[1]} do not match basepoint of dimension {base.shape[0]}"
            )
        # orthonormalize; rank-deficient inputs collapse to the actual span
        q, r = np.linalg.qr(dirs.T)
        keep = np.abs(np.diag(r)) > 1e-12
        basis = q[:, keep]
        if basis.shape[1] == 0:
            return cls.point(base)
        base.flags.writeable = False
        basis.flags.writeable = False
        k = basis.shape[1]

        def proj(x):
            v = np.asarray(x, dtype=float).reshape(-1) - base
            return base + basis @ (basis.T @ v)

        def dist(x):
            v = np.asarray(x, dtype=float).reshape(-1) - base
            return float(np.linalg.norm(v - basis @ (basis.T @ v)))

        def sampler(i):
            # walk 0, +1, -1, +2, -2, ... units along the basis columns
            step = (i + 1) // 2 * (1 if i % 2 == 1 else -1)
            col = basis[:, (i // (2 * k)) % k] if k > 0 else 0.0
            return base + float(step) * col

        return cls(kind="affine_subspace", distance=dist, equilibria_sampler=sampler, project=proj)

    @classmethod
    def product(cls, factors) -> "CriticalSetSpec":
        """Cartesian product of factor sets over consecutive state blocks.

        factors: sequence of (CriticalSetSpec, block_dimension).
        """
        factors = tuple((spec, int(dim)) for spec, dim in factors)
        if not factors:
            raise InvalidInputError("product needs at least one factor")
        offsets = []
        off = 0
        for _, dim in factors:
            if dim < 1:
                raise InvalidInputError("factor block dimension must be >= 1")
            offsets.append(off)
            off += dim

        def dist(x):
            x = np.asarray(x, dtype=float).reshape(-1)
            total = 0.0
            for (spec, dim), start in zip(factors, offsets):
                d = float(spec.distance(x[start : start + dim]))
                total += d * d
            return math.sqrt(total)

        samplers = [spec.equilibria_sampler for spec, _ in factors]
        if all(s is not None for s in samplers):

            def sampler(i):
                parts = [np.asarray(s(i), dtype=float).reshape(-1) for s in samplers]
                return np.concatenate(parts)

        else:
            sampler = None
        return cls(kind="product", distance=dist, equilibria_sampler=sampler)

    @classmethod
    def custom(cls, distance, equilibria_sampler=None, project=None) -> "CriticalSetSpec":
        return cls(kind="custom", distance=distance, equilibria_sampler=equilibria_sampler, project=project)


def distance_series(traj: Trajectory, E: CriticalSetSpec) -> TimeSeries:
    """dist(x(t), E) at every stored sample."""
    values = np.empty(len(traj.times), dtype=float)
    for i, state in enumerate(traj.states):
        d = float(E.distance(state))
        if not math.isfinite(d) or d < 0.0:
            raise InvalidInputError(f"distance evaluator returned {d!r} at time index {i}")
        values[i] = d
    return TimeSeries(times=traj.times, values=values)


@dataclass(frozen=True)
class ConvergenceCheck:
    passed: bool
    terminal_mean: float
    terminal_max: float
    threshold: float
    window_samples: int

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "terminal_mean": self.terminal_mean,
            "terminal_max": self.terminal_max,
            "threshold": self.threshold,
            "window_samples": self.window_samples,
        }


def check_convergence_to_E(dist: TimeSeries, threshold: float) -> ConvergenceCheck:
    """Terminal-window test of dist -> 0: mean over the final 5% vs threshold."""
    mask = tail_window(dist.times)
    n = int(np.count_nonzero(mask))
    if n < 20:
        raise InvalidInputError(f"convergence check needs >= 20 samples in the final window, got {n}")
    vals = dist.values[mask]
    mean = float(np.mean(vals))
    return ConvergenceCheck(
        passed=mean <= threshold,
        terminal_mean=mean,
        terminal_max=float(np.max(vals)),
        threshold=float(threshold),
        window_samples=n,
    )


@dataclass(frozen=True)
class ErrorBoundParams:
    """Constant(s) of the lower bound N1 + N2 >= c * dist(x, E)^2 near E.

    c may be given directly or as c1 + c2 from per-observable bounds.
    neighborhood_radius bounds where the inequality is claimed.
    """

    c: float
    neighborhood_radius: float
    c1: float | None = None
    c2: float | None = None

    def __post_init__(self):
        if not (self.c > 0.0 and math.isfinite(self.c)):
            raise InvalidInputError(f"error-bound constant c must be positive, got {self.c!r}")
        if not (self.neighborhood_radius > 0.0):
            raise InvalidInputError(f"neighborhood_radius must be positive, got {self.neighborhood_radius!r}")
        if (self.c1 is None) != (self.c2 is None):
            raise InvalidInputError("c1 and c2 must be given together")
        if self.c1 is not None:
            if not (self.c1 > 0.0 and self.c2 > 0.0):
                raise InvalidInputError("c1 and c2 must be positive")
            if not math.isclose(self.c, self.c1 + self.c2, rel_tol=1e-12, abs_tol=1e-12):
                raise InvalidInputError(f"c must equal c1 + c2, got c={self.c!r}, c1+c2={self.c1 + self.c2!r}")


@dataclass(frozen=True)
class L2BoundReport:
    """Check of quadrature(dist^2) <= (W(0) - lim W)/(gamma*c)."""

    dist_sq_integral: float
    budget: float
    passed: bool
    worst_error_bound_ratio: float | None
    error_bound_ok: bool | None
    W_initial: float
    W_limit_estimate: float
    gamma: float
    c: float

    def to_json_dict(self) -> dict:
        return {
            "dist_sq_integral": self.dist_sq_integral,
            "budget": self.budget,
            "passed": self.passed,
            "worst_error_bound_ratio": self.worst_error_bound_ratio,
            "error_bound_ok": self.error_bound_ok,
            "W_initial": self.W_initial,
            "W_limit_estimate": self.W_limit_estimate,
            "gamma": self.gamma,
            "c": self.c,
        }


def l2_distance_bound(
    dist: TimeSeries,
    W_series: TimeSeries,
    gamma: float,
    eb: ErrorBoundParams,
    dissipation: TimeSeries | None = None,
) -> L2BoundReport:
    """Compare the integral of dist^2 with its dissipation budget.

    When the N1+N2 series is supplied the aggregate error bound
    N1+N2 >= c*dist^2 is also checked empirically at samples inside the
    declared neighborhood, reporting the worst ratio (N1+N2)/(c*dist^2).
    """
    if dist.times.shape != W_series.times.shape or not np.array_equal(dist.times, W_series.times):
        raise InvalidInputError("dist and W series must share the same time grid")
    if not (gamma > 0.0):
        raise InvalidInputError(f"gamma must be positive, got {gamma!r}")
    dist_sq = TimeSeries(times=dist.times, values=dist.values**2)
    integral = quadrature(dist_sq)
    w0 = float(W_series.values[0])
    w_inf = tail_mean(W_series)
    budget = (w0 - w_inf) / (gamma * eb.c)
    passed = integral <= budget * (1.0 + 1e-6) + 1e-9

    worst_ratio = None
    bound_ok = None
    if dissipation is not None:
        if not np.array_equal(dissipation.times, dist.times):
            raise InvalidInputError("dissipation series must share the distance grid")
        inside = (dist.values <= eb.neighborhood_radius) & (dist.values**2 > 1e-30)
        if np.any(inside):
            ratios = dissipation.values[inside] / (eb.c * dist.values[inside] ** 2)
            worst_ratio = float(np.min(ratios))
            bound_ok = worst_ratio >= 1.0 - 1e-9
    return L2BoundReport(
        dist_sq_integral=integral,
        budget=budget,
        passed=passed,
        worst_error_bound_ratio=worst_ratio,
        error_bound_ok=bound_ok,
        W_initial=w0,
        W_limit_estimate=w_inf,
        gamma=float(gamma),
        c=eb.c,
    )


def rate_constant_K(W_series: TimeSeries, gamma: float, c: float, W_infinity: float | None = None) -> float:
    """K = sqrt((W(0) - lim W)/(gamma*c)), with lim W estimated from the tail."""
    if not (gamma > 0.0 and c > 0.0):
        raise InvalidInputError("gamma and c must be positive")
    w_inf = tail_mean(W_series) if W_infinity is None else float(W_infinity)
    gap = float(W_series.values[0]) - w_inf
    if gap < 0.0:
        gap = 0.0
    return math.sqrt(gap / (gamma * c))


@dataclass(frozen=True)
class WindowCheck:
    T: float
    min_dist: float
    bound: float
    passed: bool
    samples: int

    def to_json_dict(self) -> dict:
        return {"T": self.T, "min_dist": self.min_dist, "bound": self.bound, "passed": self.passed, "samples": self.samples}


@dataclass(frozen=True)
class RateReport:
    """Window (subsequence) and pointwise rate checks against K/sqrt(t).

    Either part may be absent; merge() combines a window-only and a
    pointwise-only report for the same distance series.
    """

    K: float | None = None
    window_checks: tuple = ()
    window_notes: tuple = ()
    windows_passed: bool | None = None
    pointwise_fit: tuple | None = None  # (C_fit, exponent_fit)
    pointwise_pass: bool | None = None
    monotone_tail: bool | None = None
    pointwise_notes: tuple = ()

    def merge(self, other: "RateReport") -> "RateReport":
        return RateReport(
            K=self.K if self.K is not None else other.K,
            window_checks=self.window_checks or other.window_checks,
            window_notes=self.window_notes or other.window_notes,
            windows_passed=self.windows_passed if self.windows_passed is not None else other.windows_passed,
            pointwise_fit=self.pointwise_fit if self.pointwise_fit is not None else other.pointwise_fit,
            pointwise_pass=self.pointwise_pass if self.pointwise_pass is not None else other.pointwise_pass,
            monotone_tail=self.monotone_tail if self.monotone_tail is not None else other.monotone_tail,
            pointwise_notes=self.pointwise_notes or other.pointwise_notes,
        )

    def to_json_dict(self) -> dict:
        fit = None
        if self.pointwise_fit is not None:
            c_fit, p_fit = self.pointwise_fit
            fit = {"C_fit": c_fit, "exponent_fit": p_fit if math.isfinite(p_fit) else "inf"}
        return {
            "K": self.K,
            "window_checks": [w.to_json_dict() for w in self.window_checks],
            "window_notes": list(self.window_notes),
            "windows_passed": self.windows_passed,
            "pointwise_fit": fit,
            "pointwise_pass": self.pointwise_pass,
            "monotone_tail": self.monotone_tail,
            "pointwise_notes": list(self.pointwise_notes),
        }


def subsequence_rate(dist: TimeSeries, K: float, T_grid=None) -> RateReport:
    """For each window [T, 2T], check min dist <= K/sqrt(T).

    Default grid: T in {H/64, H/32, H/16, H/8, H/4, H/2} for horizon H.
    Windows with no samples are skipped with a note.
    """
    if not (K >= 0.0 and math.isfinite(K)):
        raise InvalidInputError(f"K must be finite and >= 0, got {K!r}")
    horizon = float(dist.times[-1])
    if T_grid is None:
        T_grid = [horizon / 64.0, horizon / 32.0, horizon / 16.0, horizon / 8.0, horizon / 4.0, horizon / 2.0]
    checks = []
    notes = []
    for T in T_grid:
        if not (T > 0.0 and 2.0 * T <= horizon * (1.0 + 1e-12)):
            raise InvalidInputError(f"window start T={T!r} must satisfy 0 < 2T <= horizon ({horizon})")
        mask = (dist.times >= T) & (dist.times <= 2.0 * T)
        n = int(np.count_nonzero(mask))
        if n == 0:
            notes.append(f"window [{T:.6g}, {2 * T:.6g}] contains no samples; skipped")
            continue
        min_dist = float(np.min(dist.values[mask]))
        bound = K / math.sqrt(T)
        checks.append(WindowCheck(T=float(T), min_dist=min_dist, bound=bound, passed=min_dist <= bound, samples=n))
    return RateReport(
        K=float(K),
        window_checks=tuple(checks),
        window_notes=tuple(notes),
        windows_passed=all(c.passed for c in checks),
    )


def pointwise_rate(dist: TimeSeries, resolution_floor: float = 0.0) -> RateReport:
    """Tail test of dist <= C/sqrt(t).

    On the final three quarters of the horizon: (a) the series must be
    nonincreasing up to 1e-9 slack, and (b) a log-log least-squares fit
    must give exponent >= 0.45, or the fitted envelope C_fit/sqrt(t)
    must dominate the tail pointwise.

    Samples at or below resolution_floor carry no rate information: once
    the trajectory is within integrator accuracy of the critical set,
    the distance signal is discretization noise, so those samples are
    treated as already converged and excluded from the fit.  A tail that
    sits entirely below the floor passes vacuously (with a note).
    """
    if not (resolution_floor >= 0.0):
        raise InvalidInputError(f"resolution_floor must be >= 0, got {resolution_floor!r}")
    horizon = float(dist.times[-1])
    mask = dist.times >= horizon / 4.0
    n = int(np.count_nonzero(mask))
    if n < 50:
        raise InvalidInputError(f"pointwise rate needs >= 50 samples in [H/4, H], got {n}")
    t = dist.times[mask]
    d = dist.values[mask]
    monotone = bool(np.all(np.diff(d) <= 1e-9))
    valid = d > max(1e-14, resolution_floor)
    if not np.any(valid):
        note = (
            f"every tail sample is below the resolution floor {resolution_floor:.3g}; "
            "the trajectory sits on the critical set to numerical precision"
        )
        return RateReport(
            pointwise_fit=None, pointwise_pass=monotone, monotone_tail=monotone, pointwise_notes=(note,)
        )
    if int(np.count_nonzero(valid)) < 2:
        # a single resolvable sample cannot be fit; any polynomial rate holds
        return RateReport(pointwise_fit=(0.0, math.inf), pointwise_pass=monotone, monotone_tail=monotone)
    logs_t = np.log(t[valid])
    logs_d = np.log(d[valid])
    slope, intercept = np.polyfit(logs_t, logs_d, 1)
    p_fit = -float(slope)
    c_fit = float(math.exp(intercept))
    envelope_ok = bool(np.all(d[valid] <= (c_fit / np.sqrt(t[valid])) * (1.0 + 1e-9)))
    passed = monotone and (p_fit >= 0.45 or envelope_ok)
    return RateReport(pointwise_fit=(c_fit, p_fit), pointwise_pass=passed, monotone_tail=monotone)


@dataclass(frozen=True)
class QuadraticGrowthParams:
    """Constants of W(x) - W_inf >= m * dist(x, E)^2 valid for dist <= r.

    W_infinity = None uses the standard tail estimator of lim W.
    """

    m: float
    r: float
    W_infinity: float | None = None

    def __post_init__(self):
        if not (self.m > 0.0 and math.isfinite(self.m)):
            raise InvalidInputError(f"quadratic growth constant m must be positive, got {self.m!r}")
        if not (self.r > 0.0):
            raise InvalidInputError(f"validity radius r must be positive, got {self.r!r}")


@dataclass(frozen=True)
class ExponentialRateReport:
    applicable: bool
    t0: float | None
    envelope_ok: bool | None
    worst_envelope_ratio: float | None
    hypothesis_ok: bool | None
    worst_hypothesis_margin: float | None
    predicted_rate: float
    fitted_W_decay_rate: float | None
    W_infinity: float
    resolution_floor: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.applicable and self.envelope_ok and self.hypothesis_ok)

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "applicable": self.applicable,
            "t0": self.t0,
            "envelope_ok": self.envelope_ok,
            "worst_envelope_ratio": self.worst_envelope_ratio,
            "hypothesis_ok": self.hypothesis_ok,
            "worst_hypothesis_margin": self.worst_hypothesis_margin,
            "predicted_rate": self.predicted_rate,
            "fitted_W_decay_rate": self.fitted_W_decay_rate,
            "W_infinity": self.W_infinity,
            "resolution_floor": self.resolution_floor,
        }


def exponential_rate(
    dist: TimeSeries,
    W_series: TimeSeries,
    qg: QuadraticGrowthParams,
    gamma: float,
    c: float,
    resolution_floor: float = 0.0,
) -> ExponentialRateReport:
    """Exponential envelope check under quadratic growth of W near E.

    From the first time t0 after which dist stays <= qg.r, verifies
    dist(t) <= sqrt((W(t0) - W_inf)/m) * exp(-(gamma*c/(2m))(t - t0))
    with multiplicative slack 1+1e-3, and the growth hypothesis
    W - W_inf >= m * dist^2 on the same tail.  not-applicable (the
    trajectory never settles inside radius r) is a valid outcome.

    The envelope is only enforced at samples with dist above
    resolution_floor: once the state is within integrator accuracy of
    E, the measured distance is a noise plateau that no shrinking
    envelope can dominate, and those samples count as converged.
    """
    if not np.array_equal(dist.times, W_series.times):
        raise InvalidInputError("dist and W series must share the same time grid")
    if not (gamma > 0.0 and c > 0.0):
        raise InvalidInputError("gamma and c must be positive")
    if not (resolution_floor >= 0.0):
        raise InvalidInputError(f"resolution_floor must be >= 0, got {resolution_floor!r}")
    w_inf = tail_mean(W_series) if qg.W_infinity is None else float(qg.W_infinity)
    rate = gamma * c / (2.0 * qg.m)

    # suffix maximum of dist locates the first entry time into {dist <= r}
    suffix_max = np.maximum.accumulate(dist.values[::-1])[::-1]
    inside = suffix_max <= qg.r
    if not np.any(inside):
        return ExponentialRateReport(
            applicable=False,
            t0=None,
            envelope_ok=None,
            worst_envelope_ratio=None,
            hypothesis_ok=None,
            worst_hypothesis_margin=None,
            predicted_rate=rate,
            fitted_W_decay_rate=None,
            W_infinity=w_inf,
            resolution_floor=float(resolution_floor),
        )
    i0 = int(np.argmax(inside))
    t0 = float(dist.times[i0])
    t = dist.times[i0:]
    d = dist.values[i0:]
    w_gap = W_series.values[i0:] - w_inf

    amplitude_sq = max(float(w_gap[0]), 0.0) / qg.m
    envelope = math.sqrt(amplitude_sq) * np.exp(-rate * (t - t0))
    resolved = d > resolution_floor
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(envelope > 0.0, d / envelope, np.where(d > 0.0, np.inf, 0.0))
    ratios = np.where(resolved, ratios, 0.0)
    worst_ratio = float(np.max(ratios)) if ratios.size else 0.0
    envelope_ok = worst_ratio <= 1.0 + 1e-3

    margins = w_gap - qg.m * d**2
    worst_margin = float(np.min(margins))
    hypothesis_ok = worst_margin >= -1e-9 * (1.0 + abs(float(w_gap[0])))

    fitted = None
    pos = w_gap > 1e-15
    if int(np.count_nonzero(pos)) >= 2:
        slope, _ = np.polyfit(t[pos], np.log(w_gap[pos]), 1)
        fitted = -float(slope)

    return ExponentialRateReport(
        applicable=True,
        t0=t0,
        envelope_ok=bool(envelope_ok),
        worst_envelope_ratio=worst_ratio,
        hypothesis_ok=bool(hypothesis_ok),
        worst_hypothesis_margin=worst_margin,
        predicted_rate=rate,
        fitted_W_decay_rate=fitted,
        W_infinity=w_inf,
        resolution_floor=float(resolution_floor),
    )


@dataclass(frozen=True)
class ProbeConfig:
    """Controls for the empirical stability probe."""

    n_equilibria: int = 8
    radii: tuple = (1e-2, 1e-3)
    directions_per_radius: int = 4
    excursion_factor: float = 10.0
    seed: int = 0xC0FFEE
    convergence_threshold: float = 1e-4

    def __post_init__(self):
        if self.n_equilibria < 1 or self.directions_per_radius < 1:
            raise InvalidInputError("probe counts must be >= 1")
        if not all(r > 0.0 for r in self.radii) or not self.radii:
            raise InvalidInputError("probe radii must be positive and nonempty")
        if not (self.excursion_factor > 0.0 and self.convergence_threshold > 0.0):
            raise InvalidInputError("excursion_factor and convergence_threshold must be positive")


@dataclass(frozen=True)
class StabilityRow:
    equilibrium_index: int
    radius: float
    direction_index: int
    max_excursion: float
    ratio: float
    stable: bool

    def to_json_dict(self) -> dict:
        return {
            "equilibrium_index": self.equilibrium_index,
            "radius": self.radius,
            "direction_index": self.direction_index,
            "max_excursion": self.max_excursion,
            "ratio": self.ratio,
            "stable": self.stable,
        }


@dataclass(frozen=True)
class ConvergenceRow:
    equilibrium_index: int
    radius: float
    direction_index: int
    terminal_dist_to_E: float
    limit_drift: float
    converged: bool

    def to_json_dict(self) -> dict:
        return {
            "equilibrium_index": self.equilibrium_index,
            "radius": self.radius,
            "direction_index": self.direction_index,
            "terminal_dist_to_E": self.terminal_dist_to_E,
            "limit_drift": self.limit_drift,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class StabilityVerdict:
    """Empirical classification from perturbation probes around E.

    AS: E is a single point, all probes stay close and converge to it.
    SS: the caller declared E an equilibrium set and every probe settles
    at a single point of it.  PAS: probes are stable and approach E but
    single-point limits are all the evidence offers for general E.
    """

    verdict: str
    lyapunov_stability_table: tuple
    convergence_table: tuple
    stable: bool
    converged: bool
    seed: int
    excursion_factor: float
    convergence_threshold: float

    def to_json_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "empirical": True,
            "stable": self.stable,
            "converged": self.converged,
            "seed": self.seed,
            "excursion_factor": self.excursion_factor,
            "convergence_threshold": self.convergence_threshold,
            "lyapunov_stability_table": [r.to_json_dict() for r in self.lyapunov_stability_table],
            "convergence_table": [r.to_json_dict() for r in self.convergence_table],
        }


def _state_diameter(states: np.ndarray) -> float:
    if states.shape[0] < 2:
        return 0.0
    # exact max pairwise distance; windows are small (tail samples only)
    diffs = states[:, None, :] - states[None, :, :]
    return float(np.sqrt(np.max(np.sum(diffs * diffs, axis=2))))


def classify_stability(
    system: SystemSpec,
    E: CriticalSetSpec,
    probe: ProbeConfig,
    integ: IntegratorConfig,
    E_is_equilibrium_set: bool = False,
) -> StabilityVerdict:
    """Probe Lyapunov stability and convergence around sampled points of E.

    For each sampled z on E and each radius r, trajectories start at
    z + r*u for a shared set of random unit directions u.  A probe is
    stable when its excursion from z never exceeds excursion_factor*r,
    and converged when its terminal states cluster (diameter of the
    final 5% window below threshold) near E.  The direction set is drawn
    once from the seeded generator and reused for every (z, r), so the
    verdict does not depend on the order points are probed in.
    """
    if probe is None:
        probe = ProbeConfig()
    if E.kind == "point":
        points = [np.asarray(E.equilibria_sampler(0), dtype=float).reshape(-1)]
    else:
        if E.equilibria_sampler is None:
            raise InvalidInputError("stability probing of a non-point set needs an equilibria_sampler")
        points = []
        seen = set()
        for i in range(probe.n_equilibria):
            z = np.asarray(E.equilibria_sampler(i), dtype=float).reshape(-1)
            key = z.tobytes()
            if key not in seen:  # samplers may repeat on small sets
                seen.add(key)
                points.append(z)

    rng = np.random.default_rng(probe.seed)
    dirs = rng.standard_normal((probe.directions_per_radius, system.dimension))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    dirs = dirs / norms

    stab_rows = []
    conv_rows = []
    for zi, z in enumerate(points):
        if z.shape[0] != system.dimension:
            raise InvalidInputError(
                f"sampled equilibrium has dimension {z.shape[0]}, system expects {system.dimension}"
            )
        for r in probe.radii:
            for di in range(probe.directions_per_radius):
                traj = integrate(system, z + r * dirs[di], integ)
                excursion = float(np.max(np.linalg.norm(traj.states - z, axis=1)))
                ratio = excursion / r
                stab_rows.append(
                    StabilityRow(
                        equilibrium_index=zi,
                        radius=float(r),
                        direction_index=di,
                        max_excursion=excursion,
                        ratio=ratio,
                        stable=ratio <= probe.excursion_factor,
                    )
                )
                mask = tail_window(traj.times, TAIL_FRACTION)
                tail_states = traj.states[mask]
                drift = _state_diameter(tail_states)
                dist_vals = np.array([float(E.distance(s)) for s in tail_states])
                term = float(np.mean(dist_vals)) if dist_vals.size else math.inf
                converged = (
                    (not traj.truncated)
                    and drift <= probe.convergence_threshold
                    and term <= probe.convergence_threshold
                )
                conv_rows.append(
                    ConvergenceRow(
                        equilibrium_index=zi,
                        radius=float(r),
                        direction_index=di,
                        terminal_dist_to_E=term,
                        limit_drift=drift,
                        converged=converged,
                    )
                )

    stable = all(r.stable for r in stab_rows)
    converged = all(r.converged for r in conv_rows)
    if stable and converged:
        if E.kind == "point":
            verdict = "AS"
        elif E_is_equilibrium_set:
            verdict = "SS"
        else:
            verdict = "PAS"
    else:
        verdict = "inconclusive"
    return StabilityVerdict(
        verdict=verdict,
        lyapunov_stability_table=tuple(stab_rows),
        convergence_table=tuple(conv_rows),
        stable=stable,
        converged=converged,
        seed=probe.seed,
        excursion_factor=probe.excursion_factor,
        convergence_threshold=probe.convergence_threshold,
    )
