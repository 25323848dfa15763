"""Critical-set distances, convergence rates, and stability probing."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from lyacert import (
    CriticalSetSpec,
    ErrorBoundParams,
    IntegratorConfig,
    InvalidInputError,
    ProbeConfig,
    QuadraticGrowthParams,
    SystemSpec,
    TimeSeries,
    check_convergence_to_E,
    classify_stability,
    distance_series,
    exponential_rate,
    integrate,
    l2_distance_bound,
    pointwise_rate,
    rate_constant_K,
    subsequence_rate,
)

_CFG30 = IntegratorConfig(t_end=30.0)
_PROBE = ProbeConfig(n_equilibria=3, radii=(1e-2, 1e-3), directions_per_radius=3, seed=7)


def _grid(t_end=100.0, dt=0.05, t0=0.0):
    return np.arange(t0, t_end + dt / 2.0, dt)


# ---------------------------------------------------------- critical sets


def test_point_set_distance():
    E = CriticalSetSpec.point([0.0, 0.0])
    assert E.distance(np.array([1.0, 1.0])) == pytest.approx(math.sqrt(2.0))
    assert np.array_equal(E.equilibria_sampler(5), np.zeros(2))
    assert np.array_equal(E.project(np.array([3.0, 4.0])), np.zeros(2))


def test_affine_line_distance():
    E = CriticalSetSpec.affine_subspace(np.zeros(2), np.array([[1.0, 1.0]]))
    assert E.distance(np.array([1.0, 0.0])) == pytest.approx(1.0 / math.sqrt(2.0))
    assert E.distance(np.array([2.0, 2.0])) == pytest.approx(0.0, abs=1e-12)
    # sampler output lies on the set by construction
    for i in range(6):
        assert E.distance(E.equilibria_sampler(i)) <= 1e-12


def test_affine_rank_deficiency_collapses():
    E = CriticalSetSpec.affine_subspace(np.zeros(2), np.array([[1.0, 0.0], [2.0, 0.0]]))
    assert E.distance(np.array([5.0, 1.0])) == pytest.approx(1.0)
    zero_dirs = CriticalSetSpec.affine_subspace(np.array([1.0, 2.0]), np.zeros((1, 2)))
    assert zero_dirs.kind == "point"
    assert zero_dirs.distance(np.array([1.0, 3.0])) == pytest.approx(1.0)


def test_affine_dimension_mismatch():
    with pytest.raises(InvalidInputError, match="do not match basepoint"):
        CriticalSetSpec.affine_subspace(np.zeros(2), np.array([[1.0]]))


@settings(deadline=None, max_examples=30)
@given(
    st.floats(min_value=-2.0, max_value=2.0),
    st.floats(min_value=-2.0, max_value=2.0),
    st.floats(min_value=0.1, max_value=2.0 * math.pi),
)
def test_affine_distance_matches_brute_force(x1, x2, angle):
    u = np.array([math.cos(angle), math.sin(angle)])
    base = np.array([0.3, -0.2])
    E = CriticalSetSpec.affine_subspace(base, u[None, :])
    x = np.array([x1, x2])
    assume(E.distance(x) >= 0.2)
    s = np.linspace(-6.0, 6.0, 20001)
    pts = base[None, :] + s[:, None] * u[None, :]
    brute = float(np.min(np.linalg.norm(pts - x[None, :], axis=1)))
    assert abs(E.distance(x) - brute) < 1e-6


def test_product_set_distance():
    E = CriticalSetSpec.product(
        [
            (CriticalSetSpec.point([0.5]), 1),
            (CriticalSetSpec.point([0.0]), 1),
            (CriticalSetSpec.point([-1.0]), 1),
        ]
    )
    x = np.array([1.0, 0.5, -0.5])
    assert E.distance(x) == pytest.approx(math.sqrt(0.75))
    assert np.array_equal(E.equilibria_sampler(0), np.array([0.5, 0.0, -1.0]))


def test_product_without_samplers_has_none():
    free = CriticalSetSpec.custom(distance=lambda x: abs(float(x[0])))
    E = CriticalSetSpec.product([(free, 1), (CriticalSetSpec.point([0.0]), 1)])
    assert E.equilibria_sampler is None


def test_bad_sampler_is_rejected():
    with pytest.raises(InvalidInputError, match="is not on the set"):
        CriticalSetSpec.custom(
            distance=lambda x: float(np.linalg.norm(x)),
            equilibria_sampler=lambda i: np.array([1.0]),
        )


def test_distance_series_and_validation():
    traj = integrate(SystemSpec(dimension=1, field=lambda x: -x), np.array([1.0]), IntegratorConfig(t_end=5.0))
    series = distance_series(traj, CriticalSetSpec.point([0.0]))
    assert np.max(np.abs(series.values - np.exp(-traj.times))) < 1e-6
    bad = CriticalSetSpec.custom(distance=lambda x: -1.0)
    with pytest.raises(InvalidInputError, match="at time index"):
        distance_series(traj, bad)


def test_convergence_check():
    t = _grid()
    ok = check_convergence_to_E(TimeSeries(times=t, values=np.exp(-t)), threshold=1e-8)
    assert ok.passed
    assert ok.window_samples >= 20
    slow = check_convergence_to_E(TimeSeries(times=t, values=1.0 / (1.0 + t)), threshold=1e-8)
    assert not slow.passed
    with pytest.raises(InvalidInputError, match=">= 20 samples"):
        check_convergence_to_E(TimeSeries(times=np.linspace(0.0, 1.0, 30), values=np.zeros(30)), 1e-8)


# ------------------------------------------------------------- L2 budget


def _l2_inputs():
    t = _grid(20.0, 0.01)
    dist = TimeSeries(times=t, values=np.exp(-t))
    W = TimeSeries(times=t, values=np.exp(-2.0 * t))
    dissipation = TimeSeries(times=t, values=2.0 * np.exp(-2.0 * t))
    return dist, W, dissipation


def test_l2_bound_passes_with_valid_constant():
    dist, W, diss = _l2_inputs()
    rep = l2_distance_bound(dist, W, gamma=1.0, eb=ErrorBoundParams(c=1.0, neighborhood_radius=10.0), dissipation=diss)
    assert rep.passed
    assert rep.dist_sq_integral == pytest.approx(0.5, abs=1e-4)
    assert rep.error_bound_ok is True
    assert rep.worst_error_bound_ratio == pytest.approx(2.0, rel=1e-9)


def test_l2_bound_fails_with_inflated_constant():
    # c = 10 overstates the error bound: the budget shrinks below the
    # true integral and the sampled ratio drops below 1
    dist, W, diss = _l2_inputs()
    rep = l2_distance_bound(dist, W, gamma=1.0, eb=ErrorBoundParams(c=10.0, neighborhood_radius=10.0), dissipation=diss)
    assert not rep.passed
    assert rep.error_bound_ok is False
    assert rep.worst_error_bound_ratio == pytest.approx(0.2, rel=1e-9)


def test_l2_bound_without_dissipation_series():
    dist, W, _ = _l2_inputs()
    rep = l2_distance_bound(dist, W, gamma=1.0, eb=ErrorBoundParams(c=1.0, neighborhood_radius=10.0))
    assert rep.passed
    assert rep.error_bound_ok is None
    assert rep.worst_error_bound_ratio is None


def test_l2_bound_grid_and_gamma_validation():
    dist, W, diss = _l2_inputs()
    other = TimeSeries(times=dist.times + 1.0, values=W.values)
    with pytest.raises(InvalidInputError, match="same time grid"):
        l2_distance_bound(dist, other, gamma=1.0, eb=ErrorBoundParams(c=1.0, neighborhood_radius=1.0))
    with pytest.raises(InvalidInputError, match="gamma must be positive"):
        l2_distance_bound(dist, W, gamma=0.0, eb=ErrorBoundParams(c=1.0, neighborhood_radius=1.0))
    short = TimeSeries(times=dist.times[:-1], values=diss.values[:-1])
    with pytest.raises(InvalidInputError, match="share the distance grid"):
        l2_distance_bound(dist, W, gamma=1.0, eb=ErrorBoundParams(c=1.0, neighborhood_radius=1.0), dissipation=short)


def test_error_bound_params_validation():
    with pytest.raises(InvalidInputError, match="positive"):
        ErrorBoundParams(c=0.0, neighborhood_radius=1.0)
    with pytest.raises(InvalidInputError, match="neighborhood_radius"):
        ErrorBoundParams(c=1.0, neighborhood_radius=0.0)
    with pytest.raises(InvalidInputError, match="given together"):
        ErrorBoundParams(c=1.0, neighborhood_radius=1.0, c1=0.5)
    with pytest.raises(InvalidInputError, match="c must equal c1 \\+ c2"):
        ErrorBoundParams(c=1.0, neighborhood_radius=1.0, c1=0.5, c2=0.6)
    ok = ErrorBoundParams(c=1.1, neighborhood_radius=1.0, c1=0.5, c2=0.6)
    assert ok.c == 1.1


def test_rate_constant():
    t = _grid(20.0, 0.01)
    assert rate_constant_K(TimeSeries(times=t, values=np.full_like(t, 4.0)), 1.0, 1.0) == 0.0
    decays = TimeSeries(times=t, values=4.0 * np.exp(-t))
    assert rate_constant_K(decays, 1.0, 1.0) == pytest.approx(2.0, rel=1e-4)
    assert rate_constant_K(decays, 1.0, 1.0, W_infinity=2.0) == pytest.approx(math.sqrt(2.0))
    grows = TimeSeries(times=t, values=np.linspace(0.0, 1.0, len(t)))
    assert rate_constant_K(grows, 1.0, 1.0) == 0.0
    with pytest.raises(InvalidInputError, match="positive"):
        rate_constant_K(decays, 0.0, 1.0)


# ------------------------------------------------------------ rate checks


def test_subsequence_rate_on_exponential():
    t = _grid()
    rep = subsequence_rate(TimeSeries(times=t, values=np.exp(-t)), K=1.0)
    assert rep.windows_passed
    assert len(rep.window_checks) == 6
    bounds = [w.bound for w in rep.window_checks]
    assert bounds == sorted(bounds, reverse=True)


def test_subsequence_rate_on_zero_distance():
    t = _grid()
    rep = subsequence_rate(TimeSeries(times=t, values=np.zeros_like(t)), K=0.0)
    assert rep.windows_passed


def test_subsequence_rate_validation():
    t = _grid()
    series = TimeSeries(times=t, values=np.exp(-t))
    with pytest.raises(InvalidInputError, match="K must be finite"):
        subsequence_rate(series, K=-1.0)
    with pytest.raises(InvalidInputError, match="2T <= horizon"):
        subsequence_rate(series, K=1.0, T_grid=[60.0])


def test_subsequence_rate_skips_empty_windows():
    t = np.array([0.0, 10.0, 20.0, 40.0, 80.0, 100.0])
    rep = subsequence_rate(TimeSeries(times=t, values=np.exp(-0.01 * t)), K=5.0, T_grid=[2.0, 25.0])
    assert len(rep.window_notes) == 1
    assert "no samples" in rep.window_notes[0]
    assert len(rep.window_checks) == 1


def test_pointwise_rate_on_inverse_sqrt():
    t = np.linspace(1.0, 100.0, 2000)
    rep = pointwise_rate(TimeSeries(times=t, values=1.0 / np.sqrt(t)))
    assert rep.pointwise_pass
    assert rep.monotone_tail
    assert rep.pointwise_fit[1] == pytest.approx(0.5, abs=0.01)


def test_pointwise_rate_on_exponential():
    t = _grid(40.0, 0.02)
    rep = pointwise_rate(TimeSeries(times=t, values=np.exp(-t)))
    assert rep.pointwise_pass
    assert rep.pointwise_fit[1] > 0.45


def test_oscillation_passes_windows_but_fails_pointwise():
    # |sin t|/t returns to zero infinitely often, so window minima beat
    # K/sqrt(T) easily while the pointwise tail is far from monotone
    t = _grid(dt=0.05, t0=1.0)
    series = TimeSeries(times=t, values=np.abs(np.sin(t)) / t)
    assert subsequence_rate(series, K=1.0).windows_passed
    rep = pointwise_rate(series)
    assert rep.monotone_tail is False
    assert rep.pointwise_pass is False


def test_pointwise_rate_sample_requirement():
    t = np.linspace(0.0, 10.0, 60)
    with pytest.raises(InvalidInputError, match=">= 50 samples"):
        pointwise_rate(TimeSeries(times=t, values=np.exp(-t)))
    with pytest.raises(InvalidInputError, match="resolution_floor"):
        pointwise_rate(TimeSeries(times=_grid(), values=np.exp(-_grid())), resolution_floor=-1.0)


def test_pointwise_rate_noise_plateau_needs_floor():
    # once the distance signal hits integrator resolution it flatlines;
    # without a floor the flat fit fails, with it the tail is vacuous
    t = _grid()
    d = np.maximum(np.exp(-t), 1e-10)
    rep = pointwise_rate(TimeSeries(times=t, values=d))
    assert not rep.pointwise_pass
    floored = pointwise_rate(TimeSeries(times=t, values=d), resolution_floor=1e-7)
    assert floored.pointwise_pass
    assert floored.pointwise_fit is None
    assert any("resolution floor" in note for note in floored.pointwise_notes)


def test_pointwise_rate_fits_resolvable_prefix():
    t = _grid(40.0, 0.02)
    d = np.maximum(np.exp(-t), 1e-10)
    rep = pointwise_rate(TimeSeries(times=t, values=d), resolution_floor=1e-7)
    assert rep.pointwise_pass
    assert rep.pointwise_fit[1] > 0.45


def test_pointwise_rate_single_resolvable_sample():
    t = np.linspace(0.0, 100.0, 201)
    d = np.full_like(t, 1e-12)
    d[np.searchsorted(t, 25.0)] = 1e-3
    rep = pointwise_rate(TimeSeries(times=t, values=d), resolution_floor=1e-7)
    assert rep.pointwise_fit == (0.0, math.inf)
    assert rep.pointwise_pass


def test_quadratic_growth_params_validation():
    with pytest.raises(InvalidInputError, match="must be positive"):
        QuadraticGrowthParams(m=0.0, r=1.0)
    with pytest.raises(InvalidInputError, match="validity radius"):
        QuadraticGrowthParams(m=1.0, r=0.0)


# ----------------------------------------------------- exponential regime


def _exp_inputs(t_end=20.0, plateau=None):
    t = _grid(t_end, 0.01)
    d = np.exp(-t)
    if plateau is not None:
        d = np.maximum(d, plateau)
    return TimeSeries(times=t, values=d), TimeSeries(times=t, values=np.exp(-2.0 * t))


def test_exponential_rate_tight_on_exponential():
    dist, W = _exp_inputs()
    rep = exponential_rate(dist, W, QuadraticGrowthParams(m=1.0, r=10.0), gamma=1.0, c=1.0)
    assert rep.passed
    assert rep.t0 == 0.0
    assert rep.predicted_rate == pytest.approx(0.5)
    # W = dist^2 makes the envelope exact at t0
    assert rep.worst_envelope_ratio == pytest.approx(1.0, abs=1e-6)
    assert rep.fitted_W_decay_rate == pytest.approx(2.0, abs=0.01)


def test_exponential_rate_rejects_inflated_growth_constant():
    dist, W = _exp_inputs()
    rep = exponential_rate(dist, W, QuadraticGrowthParams(m=10.0, r=10.0), gamma=1.0, c=1.0)
    assert rep.hypothesis_ok is False
    assert rep.worst_hypothesis_margin == pytest.approx(-9.0, rel=1e-6)
    assert not rep.passed


def test_exponential_rate_not_applicable_outside_radius():
    dist, W = _exp_inputs()
    rep = exponential_rate(dist, W, QuadraticGrowthParams(m=1.0, r=1e-30), gamma=1.0, c=1.0)
    assert rep.applicable is False
    assert not rep.passed
    assert rep.t0 is None


def test_exponential_rate_noise_plateau_needs_floor():
    dist, W = _exp_inputs(t_end=50.0, plateau=1e-8)
    qg = QuadraticGrowthParams(m=1.0, r=10.0)
    bare = exponential_rate(dist, W, qg, gamma=1.0, c=1.0)
    assert bare.envelope_ok is False
    floored = exponential_rate(dist, W, qg, gamma=1.0, c=1.0, resolution_floor=1e-7)
    assert floored.passed


def test_exponential_rate_validation():
    dist, W = _exp_inputs()
    other = TimeSeries(times=W.times + 1.0, values=W.values)
    qg = QuadraticGrowthParams(m=1.0, r=1.0)
    with pytest.raises(InvalidInputError, match="same time grid"):
        exponential_rate(dist, other, qg, gamma=1.0, c=1.0)
    with pytest.raises(InvalidInputError, match="gamma and c"):
        exponential_rate(dist, W, qg, gamma=-1.0, c=1.0)
    with pytest.raises(InvalidInputError, match="resolution_floor"):
        exponential_rate(dist, W, qg, gamma=1.0, c=1.0, resolution_floor=-2.0)


# ---------------------------------------------------------- classification


def test_classify_contracting_point_as_AS():
    system = SystemSpec(dimension=1, field=lambda x: -x, name="contract")
    verdict = classify_stability(system, CriticalSetSpec.point([0.0]), _PROBE, _CFG30)
    assert verdict.verdict == "AS"
    assert verdict.stable and verdict.converged
    assert len(verdict.lyapunov_stability_table) == 6  # 2 radii x 3 directions


def test_classify_expanding_point_inconclusive():
    system = SystemSpec(dimension=1, field=lambda x: x, name="expand")
    verdict = classify_stability(system, CriticalSetSpec.point([0.0]), _PROBE, _CFG30)
    assert verdict.verdict == "inconclusive"
    assert any(not row.stable for row in verdict.lyapunov_stability_table)


def test_classify_line_attractor():
    # x2 contracts onto the line x2 = 0 of equilibria; each probe settles
    # at a single point of the set
    system = SystemSpec(dimension=2, field=lambda x: np.array([0.0, -x[1]]), name="proj")
    line = CriticalSetSpec.affine_subspace(np.zeros(2), np.array([[1.0, 0.0]]))
    assert classify_stability(system, line, _PROBE, _CFG30, E_is_equilibrium_set=True).verdict == "SS"
    # without the equilibrium-set declaration the evidence only supports
    # the weaker pointed-attraction verdict
    assert classify_stability(system, line, _PROBE, _CFG30).verdict == "PAS"


def test_classify_is_sampler_order_invariant():
    system = SystemSpec(dimension=2, field=lambda x: np.array([0.0, -x[1]]), name="proj")
    pts = [np.array([-1.0, 0.0]), np.array([0.0, 0.0]), np.array([1.0, 0.0])]

    def mkset(order):
        return CriticalSetSpec.custom(
            distance=lambda x: abs(float(x[1])),
            equilibria_sampler=lambda i: pts[order[i % 3]],
        )

    a = classify_stability(system, mkset([0, 1, 2]), _PROBE, _CFG30, E_is_equilibrium_set=True)
    b = classify_stability(system, mkset([2, 0, 1]), _PROBE, _CFG30, E_is_equilibrium_set=True)
    assert a.verdict == b.verdict == "SS"


def test_classify_drift_along_set_is_inconclusive():
    # converges to the set but slides along it, so probes neither stay
    # near their start point nor settle
    system = SystemSpec(dimension=2, field=lambda x: np.array([1.0, -x[1]]), name="drift")
    line = CriticalSetSpec.affine_subspace(np.zeros(2), np.array([[1.0, 0.0]]))
    verdict = classify_stability(system, line, _PROBE, _CFG30, E_is_equilibrium_set=True)
    assert verdict.verdict == "inconclusive"


def test_classify_requires_sampler_for_sets():
    system = SystemSpec(dimension=2, field=lambda x: -x, name="c")
    bare = CriticalSetSpec.custom(distance=lambda x: abs(float(x[1])))
    with pytest.raises(InvalidInputError, match="needs an equilibria_sampler"):
        classify_stability(system, bare, _PROBE, _CFG30)


def test_classify_rejects_mismatched_sampler_dimension():
    system = SystemSpec(dimension=2, field=lambda x: -x, name="c")
    bad = CriticalSetSpec.custom(distance=lambda x: 0.0, equilibria_sampler=lambda i: np.zeros(3))
    with pytest.raises(InvalidInputError, match="sampled equilibrium has dimension 3"):
        classify_stability(system, bad, _PROBE, _CFG30)


def test_probe_config_validation():
    with pytest.raises(InvalidInputError):
        ProbeConfig(n_equilibria=0)
    with pytest.raises(InvalidInputError):
        ProbeConfig(radii=())
    with pytest.raises(InvalidInputError):
        ProbeConfig(radii=(0.0,))
    with pytest.raises(InvalidInputError):
        ProbeConfig(excursion_factor=0.0)
