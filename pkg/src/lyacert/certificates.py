"""Composite decay certificates and their trajectory-based verification.

The object under study is a pair of scalar functions V1, V2 with
nonnegative observables N1, N2 and a comparison function h, h(0) = 0,
believed to satisfy

    d/dt V1 <= -N1,      d/dt V2 <= -N2 + h(N1)

along trajectories.  For any slope bound L >= sup_{r>0} h(r)/r and any
delta in (0, 1/L), the combination W = V1 + delta*V2 then satisfies
d/dt W <= -gamma*(N1 + N2) with gamma = min(1 - delta*L, delta).  The
functions here build such certificates and check the decay inequality,
the induced integral bound, and terminal vanishing of the observables
on sampled trajectories.

Single-function problems are expressed with V2 = N2 = h = 0; any
delta in (0, 1] then yields gamma = min(1, delta) and W = V1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import TimeSeries, Trajectory, evaluate_along, numerical_derivative, quadrature
from .errors import HypothesisViolationError, InvalidInputError, NoCertificateError

__all__ = [
    "LyapunovPair",
    "SlopeBound",
    "slope_bound_global",
    "slope_bound_local",
    "optimal_delta",
    "make_certificate",
    "CompositeCertificate",
    "DecayReport",
    "verify_strict_decay",
    "IntegralReport",
    "integral_estimate",
    "VanishingReport",
    "observable_vanishing",
    "tail_window",
    "tail_mean",
]

# Signals that are nonnegative by hypothesis are allowed to dip this far
# below zero before the data is treated as contradicting the hypothesis.
_NEGATIVITY_TOL = 1e-12

# Width of the terminal window (fraction of the horizon) used for limit
# estimation and vanishing checks.
TAIL_FRACTION = 0.05


def _zero(_x) -> float:
    return 0.0


@dataclass(frozen=True)
class LyapunovPair:
    """Scalar functions (V1, V2, N1, N2, h) evaluated on system states.

    analytic_Wdot, when provided, maps a state to the exact derivative of
    W = V1 + delta*V2 along the flow; it must already include the delta
    weighting used at verification time (pairs built for a specific
    certificate) or be exact for the delta the caller will use.
    raw_observables are extra named scalars reported alongside N1, N2.
    """

    V1: Callable[[np.ndarray], float]
    V2: Callable[[np.ndarray], float]
    N1: Callable[[np.ndarray], float]
    N2: Callable[[np.ndarray], float]
    h: Callable[[float], float]
    analytic_Wdot: Callable[[np.ndarray], float] | None = None
    raw_observables: tuple | None = None

    def __post_init__(self):
        h0 = float(self.h(0.0))
        if not abs(h0) <= 1e-12:
            raise InvalidInputError(f"comparison function must satisfy h(0) = 0, got h(0) = {h0!r}")

    @classmethod
    def single(
        cls,
        V: Callable[[np.ndarray], float],
        N: Callable[[np.ndarray], float],
        analytic_Wdot: Callable[[np.ndarray], float] | None = None,
        raw_observables: tuple | None = None,
    ) -> "LyapunovPair":
        """Single-function problem: V2 = N2 = h = 0."""
        return cls(
            V1=V,
            V2=_zero,
            N1=N,
            N2=_zero,
            h=lambda r: 0.0,
            analytic_Wdot=analytic_Wdot,
            raw_observables=raw_observables,
        )

    @property
    def is_single(self) -> bool:
        return self.V2 is _zero and self.N2 is _zero


_SLOPE_KINDS = ("global_L", "local_B_omega", "bounded_range_L_R")


@dataclass(frozen=True)
class SlopeBound:
    """An estimate of sup h(r)/r over a sampled range of r.

    kind records how the range was chosen: the full global grid, a range
    capped by the largest N1 value seen on a trajectory, or an explicit
    user-supplied cap R.  value = inf marks a function whose slope grows
    without bound on the sampled grid (no global certificate exists).
    """

    kind: str
    value: float
    sample_grid: np.ndarray
    range_R: float | None = None

    def __post_init__(self):
        if self.kind not in _SLOPE_KINDS:
            raise InvalidInputError(f"slope bound kind must be one of {_SLOPE_KINDS}, got {self.kind!r}")
        if not (self.value >= 0.0):
            raise InvalidInputError(f"slope bound value must be >= 0, got {self.value!r}")
        grid = np.ascontiguousarray(self.sample_grid, dtype=float)
        grid.flags.writeable = False
        object.__setattr__(self, "sample_grid", grid)

    @classmethod
    def declared(cls, value: float, kind: str = "global_L", h: Callable[[float], float] | None = None) -> "SlopeBound":
        """Wrap an externally known slope constant, spot-checking it against h."""
        if not (value >= 0.0 and math.isfinite(value)):
            raise InvalidInputError(f"declared slope bound must be finite and >= 0, got {value!r}")
        grid = np.logspace(-6, 2, 17)
        if h is not None:
            for r in grid:
                hr = float(h(r))
                if hr < -_NEGATIVITY_TOL:
                    raise HypothesisViolationError(f"h({r:.3g}) = {hr:.6g} < 0")
                if hr > value * r * (1.0 + 1e-9) + 1e-15:
                    raise InvalidInputError(
                        f"declared slope bound {value} is contradicted: h({r:.3g})/r = {hr / r:.6g}"
                    )
        return cls(kind=kind, value=float(value), sample_grid=grid)


def _sampled_slopes(h: Callable[[float], float], grid: np.ndarray) -> np.ndarray:
    slopes = np.empty_like(grid)
    for i, r in enumerate(grid):
        hr = float(h(r))
        if not math.isfinite(hr):
            raise HypothesisViolationError(f"h({r:.6g}) is not finite")
        if hr < -_NEGATIVITY_TOL:
            raise HypothesisViolationError(f"h must be nonnegative, got h({r:.6g}) = {hr:.6g}")
        slopes[i] = max(hr, 0.0) / r
    return slopes


def slope_bound_global(h: Callable[[float], float], grid: np.ndarray | None = None) -> SlopeBound:
    """Estimate sup h(r)/r over a wide logarithmic grid.

    If the largest slopes concentrate in the first or last sampled decade
    the supremum is treated as unattained on any bounded range and the
    bound is reported as inf.
    """
    if grid is None:
        grid = np.logspace(-8.0, 4.0, 400)
    else:
        grid = np.asarray(grid, dtype=float).reshape(-1)
        if grid.shape[0] < 2 or not np.all(grid > 0.0) or not np.all(np.diff(grid) > 0.0):
            raise InvalidInputError("slope grid must be positive and strictly increasing")
    slopes = _sampled_slopes(h, grid)
    peak = float(np.max(slopes))
    if peak == 0.0:
        return SlopeBound(kind="global_L", value=0.0, sample_grid=grid)
    # divergence heuristic: the max living strictly in an edge decade and
    # dominating the interior by >1% suggests sup h(r)/r = inf
    lo_edge = grid <= grid[0] * 10.0
    hi_edge = grid >= grid[-1] / 10.0
    interior = ~(lo_edge | hi_edge)
    if np.any(interior):
        interior_peak = float(np.max(slopes[interior]))
        if interior_peak > 0.0:
            lo_peak = float(np.max(slopes[lo_edge])) if np.any(lo_edge) else 0.0
            hi_peak = float(np.max(slopes[hi_edge])) if np.any(hi_edge) else 0.0
            if lo_peak > 1.01 * interior_peak or hi_peak > 1.01 * interior_peak:
                return SlopeBound(kind="global_L", value=math.inf, sample_grid=grid)
        else:
            return SlopeBound(kind="global_L", value=math.inf, sample_grid=grid)
    return SlopeBound(kind="global_L", value=peak, sample_grid=grid)


def slope_bound_local(
    h: Callable[[float], float],
    R: float | None = None,
    trajectory: Trajectory | None = None,
    pair: LyapunovPair | None = None,
) -> SlopeBound:
    """Estimate sup h(r)/r on (0, R].

    R may be given directly (kind bounded_range_L_R) or inferred as the
    largest N1 value along a trajectory (kind local_B_omega).  A low-end
    blow-up still reports inf; growth toward R is genuine local behavior
    and is kept.
    """
    if R is None:
        if trajectory is None or pair is None:
            raise InvalidInputError("either R or (trajectory, pair) must be given")
        n1 = evaluate_along(trajectory, pair.N1)
        R = float(np.max(n1.values))
        kind = "local_B_omega"
    else:
        if not (R >= 0.0 and math.isfinite(R)):
            raise InvalidInputError(f"range cap R must be finite and >= 0, got {R!r}")
        kind = "bounded_range_L_R"
    if R == 0.0:
        return SlopeBound(kind=kind, value=0.0, sample_grid=np.empty(0), range_R=0.0)
    grid = np.logspace(math.log10(R) - 8.0, math.log10(R), 400)
    slopes = _sampled_slopes(h, grid)
    peak = float(np.max(slopes))
    if peak > 0.0:
        lo_edge = grid <= grid[0] * 10.0
        interior = ~lo_edge
        if np.any(interior):
            interior_peak = float(np.max(slopes[interior]))
            lo_peak = float(np.max(slopes[lo_edge])) if np.any(lo_edge) else 0.0
            if interior_peak == 0.0 or lo_peak > 1.01 * interior_peak:
                return SlopeBound(kind=kind, value=math.inf, sample_grid=grid, range_R=R)
    return SlopeBound(kind=kind, value=peak, sample_grid=grid, range_R=R)


@dataclass(frozen=True)
class CompositeCertificate:
    """A validated (delta, gamma) pair for W = V1 + delta*V2.

    build() derives gamma from delta and the slope bound, so
    gamma == min(1 - delta*L, delta) holds exactly for certificates made
    that way; optimal_delta sets gamma = delta instead, the value both
    branches share at the maximizer.
    """

    delta: float
    gamma: float
    slope: SlopeBound

    @classmethod
    def build(cls, slope: SlopeBound, delta: float) -> "CompositeCertificate":
        L = slope.value
        gamma = min(1.0 - delta * L, delta)
        return cls(delta=delta, gamma=gamma, slope=slope)

    def to_json_dict(self) -> dict:
        return {
            "delta": self.delta,
            "gamma": self.gamma,
            "slope_kind": self.slope.kind,
            "slope_value": self.slope.value if math.isfinite(self.slope.value) else "inf",
            "slope_range_R": self.slope.range_R,
        }


def make_certificate(slope: SlopeBound, delta: float) -> CompositeCertificate:
    """Validate delta against the slope bound and derive gamma."""
    L = slope.value
    if not math.isfinite(L):
        raise NoCertificateError(
            "slope bound is infinite: no admissible delta exists; "
            "try a local bound over the range the trajectory actually visits"
        )
    if L < 0.0:
        raise InvalidInputError(f"slope bound must be >= 0, got {L!r}")
    upper = 1.0 / L if L > 0.0 else 1.0
    if not (0.0 < delta < upper) and not (L == 0.0 and delta == 1.0):
        raise InvalidInputError(
            f"delta must lie in the open interval (0, {upper}) for slope bound {L}, got {delta!r}"
        )
    return CompositeCertificate.build(slope, delta)


def optimal_delta(slope: SlopeBound) -> CompositeCertificate:
    """The choice delta = 1/(1+L), which maximizes min(1 - delta*L, delta)."""
    L = slope.value
    if not math.isfinite(L):
        raise NoCertificateError(
            "slope bound is infinite: no admissible delta exists; "
            "try a local bound over the range the trajectory actually visits"
        )
    delta = 1.0 / (1.0 + L)
    # both branches of min(1 - delta*L, delta) agree at the maximizer, so
    # gamma is set to delta directly; evaluating the min can land one ulp
    # below it (L = 10 does)
    return CompositeCertificate(delta=delta, gamma=delta, slope=slope)


def _check_nonnegative(series: TimeSeries, label: str) -> TimeSeries:
    worst = float(np.min(series.values))
    if worst < -_NEGATIVITY_TOL:
        i = int(np.argmin(series.values))
        raise HypothesisViolationError(
            f"{label} must be nonnegative along the trajectory, got {worst:.6g} at t={series.times[i]:.6g}"
        )
    if worst < 0.0:
        return TimeSeries(times=series.times, values=np.maximum(series.values, 0.0))
    return series


def tail_window(times: np.ndarray, fraction: float = TAIL_FRACTION) -> np.ndarray:
    """Boolean mask of samples in the final `fraction` of the time span."""
    t_end = times[-1]
    cutoff = t_end - fraction * (t_end - times[0])
    return times >= cutoff


def tail_mean(series: TimeSeries, fraction: float = TAIL_FRACTION) -> float:
    mask = tail_window(series.times, fraction)
    return float(np.mean(series.values[mask]))


@dataclass(frozen=True)
class DecayReport:
    """Outcome of checking d/dt W <= -gamma*(N1+N2) along one trajectory.

    When the pair declares an analytic derivative, crosscheck_max_gap
    records how far it sits from the finite-difference derivative; a gap
    beyond crosscheck_tolerance marks the declared derivative as
    contradicted by the data and fails the report even with an empty
    violation set.
    """

    certificate: CompositeCertificate
    W: TimeSeries
    Wdot: TimeSeries
    N1: TimeSeries
    N2: TimeSeries
    residual: TimeSeries
    max_violation: float
    violation_times: np.ndarray
    tolerance: float
    truncated: bool
    wdot_source: str
    crosscheck_max_gap: float | None
    crosscheck_tolerance: float | None

    @property
    def crosscheck_ok(self) -> bool | None:
        if self.crosscheck_max_gap is None:
            return None
        return self.crosscheck_max_gap <= self.crosscheck_tolerance

    @property
    def passed(self) -> bool:
        return self.violation_times.shape[0] == 0 and self.crosscheck_ok is not False

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "certificate": self.certificate.to_json_dict(),
            "max_violation": self.max_violation,
            "violation_count": int(self.violation_times.shape[0]),
            "violation_times": [float(t) for t in self.violation_times],
            "tolerance": self.tolerance,
            "truncated": self.truncated,
            "wdot_source": self.wdot_source,
            "crosscheck_max_gap": self.crosscheck_max_gap,
            "crosscheck_tolerance": self.crosscheck_tolerance,
            "crosscheck_ok": self.crosscheck_ok,
        }


def verify_strict_decay(
    traj: Trajectory,
    pair: LyapunovPair,
    cert: CompositeCertificate,
    tol: float | None = None,
) -> DecayReport:
    """Check the decay inequality pointwise along a sampled trajectory.

    The residual d/dt W + gamma*(N1+N2) must stay <= tol.  A declared
    analytic derivative is used for the residual and the finite
    difference cross-validates it; disagreement is recorded, never
    raised, and fails the report (a wrong derivative claim is itself a
    negative verification outcome).  The first and last two grid points
    are excluded from the violation set (one-sided difference stencils),
    but max_violation still reports the worst residual over all samples.
    """
    if len(traj.times) < 5:
        raise InvalidInputError(f"decay verification needs at least 5 samples, got {len(traj.times)}")
    delta = cert.delta
    v1 = evaluate_along(traj, pair.V1)
    if pair.is_single:
        w = v1
    else:
        v2 = evaluate_along(traj, pair.V2)
        w = TimeSeries(times=traj.times, values=v1.values + delta * v2.values)
    n1 = _check_nonnegative(evaluate_along(traj, pair.N1), "N1")
    if pair.is_single:
        n2 = TimeSeries(times=traj.times, values=np.zeros_like(traj.times))
    else:
        n2 = _check_nonnegative(evaluate_along(traj, pair.N2), "N2")

    numeric = numerical_derivative(w)
    crosscheck_gap = None
    crosscheck_tol = None
    if pair.analytic_Wdot is not None:
        wdot = evaluate_along(traj, pair.analytic_Wdot)
        source = "analytic"
        # boundary stencils are one-sided; compare on the interior only
        interior = slice(2, -2) if len(traj.times) > 4 else slice(None)
        gaps = np.abs(wdot.values[interior] - numeric.values[interior])
        crosscheck_gap = float(np.max(gaps)) if gaps.size else 0.0
        scale = float(np.max(np.abs(wdot.values))) if wdot.values.size else 0.0
        crosscheck_tol = 5e-3 * (1.0 + scale)
    else:
        wdot = numeric
        source = "numerical"

    if tol is None:
        tol = 1e-6 * (1.0 + float(np.max(np.abs(w.values))))
    residual_vals = wdot.values + cert.gamma * (n1.values + n2.values)
    residual = TimeSeries(times=traj.times, values=residual_vals)
    max_violation = float(np.max(residual_vals))
    check = residual_vals > tol
    check[:2] = False
    check[-2:] = False
    violation_times = traj.times[check].copy()

    return DecayReport(
        certificate=cert,
        W=w,
        Wdot=wdot,
        N1=n1,
        N2=n2,
        residual=residual,
        max_violation=max_violation,
        violation_times=violation_times,
        tolerance=float(tol),
        truncated=traj.truncated,
        wdot_source=source,
        crosscheck_max_gap=crosscheck_gap,
        crosscheck_tolerance=crosscheck_tol,
    )


@dataclass(frozen=True)
class IntegralReport:
    """Trapezoidal check of integral(N1+N2) <= (W(0) - W(T)) / gamma."""

    dissipation_integral: float
    budget: float
    satisfied: bool
    W_initial: float
    W_final: float
    W_limit_estimate: float
    gamma: float

    def to_json_dict(self) -> dict:
        return {
            "dissipation_integral": self.dissipation_integral,
            "budget": self.budget,
            "satisfied": self.satisfied,
            "W_initial": self.W_initial,
            "W_final": self.W_final,
            "W_limit_estimate": self.W_limit_estimate,
            "gamma": self.gamma,
        }


def integral_estimate(report: DecayReport) -> IntegralReport:
    """Integrate the dissipation and compare it with the decay of W."""
    total = TimeSeries(times=report.N1.times, values=report.N1.values + report.N2.values)
    integral = quadrature(total)
    gamma = report.certificate.gamma
    if gamma <= 0.0:
        raise InvalidInputError(f"certificate has nonpositive gamma = {gamma!r}")
    w0 = float(report.W.values[0])
    wT = float(report.W.values[-1])
    budget = (w0 - wT) / gamma
    satisfied = integral <= budget * (1.0 + 1e-6) + 1e-9
    return IntegralReport(
        dissipation_integral=integral,
        budget=budget,
        satisfied=satisfied,
        W_initial=w0,
        W_final=wT,
        W_limit_estimate=tail_mean(report.W),
        gamma=gamma,
    )


@dataclass(frozen=True)
class VanishingReport:
    """Terminal-window means of the observables against a threshold.

    extra_terminal_means carries any raw observables reported alongside
    N1, N2 (case studies fold several signals into one N); every listed
    mean must clear the threshold for vanished to hold, and a truncated
    trajectory never vanishes (it says nothing about limits).
    """

    threshold: float
    window_start: float
    window_samples: int
    terminal_N1: float
    terminal_N2: float
    extra_terminal_means: dict
    uc_surrogate_bound: float
    vanished: bool
    truncated: bool

    def to_json_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "window_start": self.window_start,
            "window_samples": self.window_samples,
            "terminal_N1": self.terminal_N1,
            "terminal_N2": self.terminal_N2,
            "extra_terminal_means": dict(self.extra_terminal_means),
            "uc_surrogate_bound": self.uc_surrogate_bound,
            "vanished": self.vanished,
            "truncated": self.truncated,
        }


def observable_vanishing(
    report: DecayReport,
    threshold: float = 1e-8,
    extra_series: dict | None = None,
) -> VanishingReport:
    """Check that the observables die out over the final window.

    The mean of each observable over the last 5% of the horizon must not
    exceed the threshold, and the trajectory must have reached its full
    horizon.  The sup of |d/dt N_i| over the window is reported as a
    surrogate for the uniform continuity the limit argument needs.
    """
    mask = tail_window(report.N1.times)
    n_window = int(np.count_nonzero(mask))
    if n_window < 20:
        raise InvalidInputError(
            f"vanishing check needs >= 20 samples in the terminal window, got {n_window}; "
            "use a finer output grid or a longer horizon"
        )
    series = {"N1": report.N1, "N2": report.N2}
    if extra_series:
        for name in extra_series:
            if name in ("N1", "N2"):
                raise InvalidInputError(f"extra series name {name!r} collides with a built-in observable")
        series.update(extra_series)
    means = {}
    deriv_sup = 0.0
    for name, s in series.items():
        means[name] = float(np.mean(s.values[mask]))
        ds = numerical_derivative(s)
        deriv_sup = max(deriv_sup, float(np.max(np.abs(ds.values[mask]))))
    window_start = float(report.N1.times[mask][0])
    vanished = (not report.truncated) and all(m <= threshold for m in means.values())
    extras = {k: v for k, v in means.items() if k not in ("N1", "N2")}
    return VanishingReport(
        threshold=float(threshold),
        window_start=window_start,
        window_samples=n_window,
        terminal_N1=means["N1"],
        terminal_N2=means["N2"],
        extra_terminal_means=extras,
        uc_surrogate_bound=deriv_sup,
        vanished=vanished,
        truncated=report.truncated,
    )
