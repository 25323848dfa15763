"""Acceptance checklist: twelve numbered end-to-end criteria.

Each test prints one "[C#] PASS/FAIL - ..." line before asserting, so a
full run leaves a readable scorecard in the captured output.  Expensive
trajectories are built once and shared through module-level caches.
"""

import functools
import json
import math
import pathlib
import time

import numpy as np
import pytest

import lyacert
from lyacert.case_studies import (
    DINParams,
    builtin_objectives,
    builtin_pd_instance,
    din_critical_set,
    din_energy,
    din_system,
    pd_energy,
    pd_perturbed_energy,
    pd_system,
)
from lyacert.certificates import (
    LyapunovPair,
    SlopeBound,
    integral_estimate,
    make_certificate,
    observable_vanishing,
    optimal_delta,
    verify_strict_decay,
)
from lyacert.dynamics import (
    IntegratorConfig,
    SystemSpec,
    TimeSeries,
    evaluate_along,
    integrate,
)
from lyacert.rates import (
    CriticalSetSpec,
    ErrorBoundParams,
    ProbeConfig,
    QuadraticGrowthParams,
    classify_stability,
    distance_series,
    exponential_rate,
    l2_distance_bound,
    pointwise_rate,
    rate_constant_K,
    subsequence_rate,
)
from lyacert.scenario import run_scenario

_SCENARIOS = pathlib.Path(lyacert.__file__).parent / "scenarios"


def _line(num, ok, detail):
    print(f"[C{num}] {'PASS' if ok else 'FAIL'} - {detail}")


# ---------------------------------------------------------- shared builds


@functools.lru_cache(maxsize=None)
def _quad_setup():
    obj = builtin_objectives()["quad_iso"]
    p = DINParams(alpha=1.0, beta=1.0)
    return din_system(obj, p), din_energy(obj, p), din_critical_set(obj)


@functools.lru_cache(maxsize=None)
def _unit_cert():
    return make_certificate(SlopeBound.declared(0.0), 1.0)


@functools.lru_cache(maxsize=None)
def _quad_decay(t_end, dense_dt):
    system, pair, _ = _quad_setup()
    traj = integrate(system, np.array([1.0, 0.0, 0.0, 1.0]),
                     IntegratorConfig(t_end=t_end, dense_output_dt=dense_dt))
    return verify_strict_decay(traj, pair, _unit_cert()), traj


@functools.lru_cache(maxsize=None)
def _rosenbrock_decay50():
    obj = builtin_objectives()["rosenbrock2"]
    p = DINParams(alpha=1.0, beta=1.0)
    traj = integrate(din_system(obj, p), np.array([0.5, 0.25, 0.0, 0.0]),
                     IntegratorConfig(t_end=50.0, dense_output_dt=5e-3))
    return verify_strict_decay(traj, din_energy(obj, p), _unit_cert())


@functools.lru_cache(maxsize=None)
def _coupled_reports():
    """Ten unit-ball starts of the cascade x1' = -x1, x2' = x1 - x2."""
    system = SystemSpec(dimension=2, field=lambda x: np.array([-x[0], x[0] - x[1]]),
                        name="coupled_cascade")
    cert = optimal_delta(SlopeBound.declared(0.5))
    d = cert.delta
    pair = LyapunovPair(
        V1=lambda x: 0.5 * x[0] ** 2,
        V2=lambda x: 0.5 * x[1] ** 2,
        N1=lambda x: x[0] ** 2,
        N2=lambda x: 0.5 * x[1] ** 2,
        h=lambda r: 0.5 * r,
        analytic_Wdot=lambda x: -x[0] ** 2 + d * (x[0] * x[1] - x[1] ** 2),
    )
    rng = np.random.default_rng(2024)
    cfg = IntegratorConfig(t_end=20.0)
    reports = []
    for _ in range(10):
        u = rng.normal(size=2)
        u /= np.linalg.norm(u)
        x0 = u * math.sqrt(rng.uniform())
        reports.append(verify_strict_decay(integrate(system, x0, cfg), pair, cert))
    return reports


@functools.lru_cache(maxsize=None)
def _pd_run():
    obj, p = builtin_pd_instance()
    traj = integrate(pd_system(obj, p), np.array([1.0, 0.0, 0.0]),
                     IntegratorConfig(t_end=200.0))
    return obj, p, traj


@pytest.fixture(scope="module")
def rosenbrock_scenario_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("rosen")
    a = run_scenario(_SCENARIOS / "din_rosenbrock.toml", output_dir=base / "a")
    b = run_scenario(_SCENARIOS / "din_rosenbrock.toml", output_dir=base / "b")
    return a, b


# -------------------------------------------------------------- criteria


def test_c1_optimal_constant_formula():
    start = time.perf_counter()
    worst_slack = 0.0
    for L in (0.0, 0.5, 1.0, 2.0, 3.0, 10.0):
        cert = optimal_delta(SlopeBound.declared(L))
        assert cert.delta == 1.0 / (1.0 + L)
        assert cert.gamma == 1.0 / (1.0 + L)
        upper = 1.0 / L if L > 0.0 else 1.0
        grid = (np.arange(1, 1001) / 1001.0) * upper
        gammas = np.minimum(1.0 - grid * L, grid)
        worst_slack = max(worst_slack, float(np.max(gammas)) - cert.gamma)
        assert cert.gamma >= float(np.max(gammas)) - 1e-12
    elapsed = time.perf_counter() - start
    _line(1, True, f"delta*=gamma*=1/(1+L) exact for 6 slopes, grid-optimal "
                   f"(worst slack {worst_slack:.2e}) in {elapsed:.3f}s")
    assert elapsed < 1.0


def test_c2_strict_decay_coupled_system():
    start = time.perf_counter()
    reports = _coupled_reports()
    elapsed = time.perf_counter() - start
    n_viol = sum(r.violation_times.shape[0] for r in reports)
    ok = n_viol == 0 and all(r.passed and r.crosscheck_ok for r in reports)
    _line(2, ok, f"10 unit-ball starts, horizon 20: {n_viol} violations, "
                 f"max residual {max(r.max_violation for r in reports):.2e}, {elapsed:.2f}s")
    assert ok
    assert elapsed < 5.0


def test_c3_din_energy_identity():
    start = time.perf_counter()
    quad, _ = _quad_decay(50.0, 1e-3)
    rosen = _rosenbrock_decay50()
    elapsed = time.perf_counter() - start
    ok = True
    details = []
    for name, rep in (("quad_iso", quad), ("rosenbrock2", rosen)):
        ok = ok and rep.crosscheck_ok and rep.passed
        details.append(f"{name} gap {rep.crosscheck_max_gap:.2e} <= {rep.crosscheck_tolerance:.2e}")
    _line(3, ok, "; ".join(details) + f"; {elapsed:.2f}s")
    assert quad.crosscheck_ok and quad.passed
    assert rosen.crosscheck_ok and rosen.passed
    assert elapsed < 10.0


def test_c4_integral_budget():
    reports = list(_coupled_reports()) + [_quad_decay(50.0, 1e-3)[0], _rosenbrock_decay50()]
    ints = [integral_estimate(r) for r in reports]
    ok = all(i.satisfied for i in ints)
    worst = max(i.dissipation_integral - i.budget for i in ints)
    _line(4, ok, f"{len(ints)} zero-violation runs, dissipation within budget "
                 f"(worst integral-budget gap {worst:+.2e})")
    for i in ints:
        assert i.satisfied


def test_c5_vanishing_observables():
    rep, traj = _quad_decay(100.0, 1e-3)
    _, pair, _ = _quad_setup()
    extras = {name: evaluate_along(traj, fn) for name, fn in pair.raw_observables}
    van = observable_vanishing(rep, threshold=1e-8, extra_series=extras)
    means = van.extra_terminal_means
    ok = van.vanished and all(m <= 1e-8 for m in means.values())
    _line(5, ok, "terminal means " + ", ".join(f"{k}={v:.2e}" for k, v in means.items())
                 + " <= 1e-08 at horizon 100")
    assert van.vanished
    for v in means.values():
        assert v <= 1e-8


def test_c6_convergence_to_critical_set(rosenbrock_scenario_runs):
    _, traj = _quad_decay(100.0, 1e-3)
    _, _, E = _quad_setup()
    d_quad = float(distance_series(traj, E).values[-1])
    rosen = rosenbrock_scenario_runs[0].data["trajectories"][0]["checks"]["distance"]
    ok = d_quad <= 1e-5 and rosen["passed"] and rosen["terminal_max"] <= 1e-3
    _line(6, ok, f"quad_iso dist {d_quad:.2e} <= 1e-05 at horizon 100; "
                 f"rosenbrock2 terminal max {rosen['terminal_max']:.2e} <= 1e-03 at horizon 500")
    assert d_quad <= 1e-5
    assert rosen["passed"] and rosen["terminal_max"] <= 1e-3


def test_c7_quantitative_rates():
    start = time.perf_counter()
    rep, traj = _quad_decay(100.0, 1e-3)
    system, _, E = _quad_setup()
    dist = distance_series(traj, E)
    # N1 = ||v||^2 + ||grad||^2 equals dist^2 exactly for this objective,
    # so the error bound holds with c = 1
    eb = ErrorBoundParams(c=1.0, neighborhood_radius=1e12)
    diss = TimeSeries(times=rep.N1.times, values=rep.N1.values + rep.N2.values)
    l2 = l2_distance_bound(dist, rep.W, rep.certificate.gamma, eb, dissipation=diss)

    K = rate_constant_K(rep.W, rep.certificate.gamma, 1.0)
    windows = subsequence_rate(dist, K)

    # shorter horizon: past t ~ 19 the distance sits below integrator
    # accuracy and carries no rate signal
    traj28 = integrate(system, np.array([1.0, 0.0, 0.0, 1.0]), IntegratorConfig(t_end=28.0))
    pw = pointwise_rate(distance_series(traj28, E), resolution_floor=1e-7)
    elapsed = time.perf_counter() - start

    ok = (l2.passed and l2.error_bound_ok
          and len(windows.window_checks) == 6 and windows.windows_passed
          and pw.pointwise_pass and pw.pointwise_fit is not None
          and pw.pointwise_fit[1] >= 0.45)
    _line(7, ok, f"L2 integral {l2.dist_sq_integral:.4f} <= budget {l2.budget:.4f}; "
                 f"6/6 windows under K/sqrt(T) with K={K:.3f}; "
                 f"tail fit exponent {pw.pointwise_fit[1]:.2f} >= 0.45; {elapsed:.2f}s")
    assert l2.passed and l2.error_bound_ok
    assert len(windows.window_checks) == 6 and windows.windows_passed
    assert pw.pointwise_pass and pw.pointwise_fit[1] >= 0.45
    assert elapsed < 10.0


def test_c8_exponential_rate_under_quadratic_growth():
    rep, traj = _quad_decay(100.0, 1e-3)
    _, _, E = _quad_setup()
    dist = distance_series(traj, E)
    # per coordinate pair, W is the quadratic form [[1.5, 0.5], [0.5, 0.5]]
    # in (x_i, v_i); its smallest eigenvalue gives the growth constant
    m = float(np.linalg.eigvalsh(np.array([[1.5, 0.5], [0.5, 0.5]]))[0])
    assert m == pytest.approx((2.0 - math.sqrt(2.0)) / 2.0, rel=1e-12)
    cert = make_certificate(SlopeBound.declared(0.0), m)
    out = exponential_rate(dist, rep.W, QuadraticGrowthParams(m=m, r=1e12),
                           cert.gamma, 1.0, resolution_floor=1e-7)
    ok = out.passed and out.worst_envelope_ratio <= 1.0 + 1e-3
    _line(8, ok, f"envelope rate {out.predicted_rate:.3f}, worst dist/envelope ratio "
                 f"{out.worst_envelope_ratio:.3f} <= 1.001, growth hypothesis ok={out.hypothesis_ok}")
    assert out.applicable and out.envelope_ok and out.hypothesis_ok
    assert out.worst_envelope_ratio <= 1.0 + 1e-3


def test_c9_semistability_on_the_argmin_line():
    start = time.perf_counter()
    obj = builtin_objectives()["least_squares_line"]
    p = DINParams(alpha=1.0, beta=1.0)
    system = din_system(obj, p)
    E = din_critical_set(obj)
    cfg = IntegratorConfig(t_end=60.0)
    starts = (np.array([1.5, 0.0, 0.0, 0.0]), np.array([0.0, -0.5, 0.0, 0.0]),
              np.array([1.0, 1.0, 0.2, 0.2]), np.array([0.5, 0.5, 0.3, -0.3]))
    trajs = [integrate(system, x0, cfg) for x0 in starts]

    drifts = [float(np.linalg.norm(system.field(t.states[-1]))) for t in trajs]
    dists = [float(E.distance(t.states[-1])) for t in trajs]
    finals = [t.states[-1] for t in trajs]
    distinct = sum(1 for i, a in enumerate(finals)
                   if all(np.linalg.norm(a - b) > 1e-3 for b in finals[:i]))

    # distance to each fixed minimizer must settle, not just distance to
    # the set: that is what separates semistability from plain attraction
    zs = E.equilibria_sampler(5)
    osc = 0.0
    for t in trajs:
        tail = t.times >= t.times[-1] - 0.25 * (t.times[-1] - t.times[0])
        for z in zs:
            dz = np.linalg.norm(t.states - z, axis=1)
            osc = max(osc, float(dz[tail].max() - dz[tail].min()))

    probe = ProbeConfig(n_equilibria=8, radii=(1e-2, 1e-3), directions_per_radius=4)
    verdict = classify_stability(system, E, probe, cfg, E_is_equilibrium_set=True)
    elapsed = time.perf_counter() - start

    ok = (max(drifts) <= 1e-5 and max(dists) <= 1e-5 and distinct >= 2
          and osc <= 1e-4 and verdict.verdict == "SS")
    _line(9, ok, f"drift <= {max(drifts):.1e}, argmin-line dist <= {max(dists):.1e}, "
                 f"{distinct} distinct limits, minimizer-distance oscillation {osc:.1e}, "
                 f"verdict {verdict.verdict}; {elapsed:.1f}s")
    assert max(drifts) <= 1e-5
    assert max(dists) <= 1e-5
    assert distinct >= 2
    assert osc <= 1e-4
    assert verdict.verdict == "SS"
    assert elapsed < 30.0


def test_c10_primal_dual_kkt_convergence():
    obj, p, traj = _pd_run()
    feas = evaluate_along(traj, lambda z: float(np.linalg.norm(p.A @ z[:2] - p.b)))
    stat = evaluate_along(traj, lambda z: float(np.linalg.norm(
        np.asarray(obj.gradient(z[:2])) + p.A.T @ z[2:])))
    saddle = np.concatenate([p.x_star, p.lambda_star])
    saddle_gap = float(np.linalg.norm(traj.states[-1] - saddle))

    decay = verify_strict_decay(traj, pd_energy(obj, p), _unit_cert())

    base = pd_perturbed_energy(obj, p, reference=traj)
    eps = 0.5 * base.estimates.eps_max_estimate
    obj_e, p_e = builtin_pd_instance(epsilon=eps)
    pert = pd_perturbed_energy(obj_e, p_e, reference=traj)
    assert pert.ok and pert.pair is not None
    outside = np.linalg.norm(traj.states - saddle, axis=1) > 1e-6
    wdot_eps = np.array([pert.pair.analytic_Wdot(z) for z in traj.states[outside]])
    n_pos = int(np.count_nonzero(wdot_eps > 0.0))

    ok_residuals = float(feas.values[-1]) <= 1e-6 and float(stat.values[-1]) <= 1e-6
    ok_saddle = saddle_gap <= 1e-4
    ok_identity = bool(decay.crosscheck_ok)
    ok_perturbed = n_pos == 0
    ok = ok_residuals and ok_saddle and ok_identity and ok_perturbed
    _line(10, ok,
          f"KKT residuals ({float(feas.values[-1]):.1e}, {float(stat.values[-1]):.1e}) vs 1e-06, "
          f"saddle gap {saddle_gap:.1e} vs 1e-04; declared identity Wdot = -N1-N2 crosscheck gap "
          f"{decay.crosscheck_max_gap:.3f} vs tol {decay.crosscheck_tolerance:.3f} "
          f"(ok={ok_identity}); Wdot_eps at eps={eps:.4f} positive at "
          f"{n_pos}/{int(np.count_nonzero(outside))} grid points off the saddle "
          f"(max {float(np.max(wdot_eps)):+.3f})")
    assert ok_residuals
    assert ok_saddle
    assert ok_identity, (
        f"declared derivative disagrees with the measured one by {decay.crosscheck_max_gap:.3f}"
    )
    assert ok_perturbed, f"Wdot_eps > 0 at {n_pos} points outside the 1e-6 ball"


def test_c11_unstable_system_is_not_certified():
    system = SystemSpec(dimension=1, field=lambda x: x.copy(), name="doubling")
    pair = LyapunovPair.single(V=lambda x: 0.5 * x[0] ** 2, N=lambda x: x[0] ** 2,
                               analytic_Wdot=lambda x: x[0] ** 2)
    cert = optimal_delta(SlopeBound.declared(0.0))
    traj = integrate(system, np.array([1.0]), IntegratorConfig(t_end=5.0))
    rep = verify_strict_decay(traj, pair, cert)
    vt = rep.violation_times
    windows = [bool(np.any((vt >= k) & (vt < k + 1.0))) for k in range(5)]

    verdict = classify_stability(system, CriticalSetSpec.point(np.zeros(1)),
                                 ProbeConfig(radii=(1e-2, 1e-3)), IntegratorConfig(t_end=5.0))
    n_unstable = sum(1 for row in verdict.lyapunov_stability_table if not row.stable)
    ok = (not rep.passed and all(windows) and verdict.verdict == "inconclusive"
          and n_unstable > 0)
    _line(11, ok, f"{vt.shape[0]} decay violations covering all 5 unit windows, "
                  f"verdict {verdict.verdict} with {n_unstable} unstable probe rows")
    assert not rep.passed
    assert all(windows)
    assert verdict.verdict == "inconclusive"
    assert n_unstable > 0


def test_c12_reproducibility(rosenbrock_scenario_runs, tmp_path):
    pairs = [tuple(r.data for r in rosenbrock_scenario_runs)]
    names = ["coupled_linear", "din_least_squares", "din_quad", "pd_quad", "unstable_linear"]
    for name in names:
        a = run_scenario(_SCENARIOS / f"{name}.toml", output_dir=tmp_path / f"{name}_a")
        b = run_scenario(_SCENARIOS / f"{name}.toml", output_dir=tmp_path / f"{name}_b")
        pairs.append((a.data, b.data))
    mismatches = []
    for name, (da, db) in zip(["din_rosenbrock"] + names, pairs):
        da, db = dict(da), dict(db)
        da.pop("wall_time")
        db.pop("wall_time")
        if json.dumps(da, sort_keys=True) != json.dumps(db, sort_keys=True):
            mismatches.append(name)
    ok = not mismatches
    _line(12, ok, "all 6 bundled scenarios byte-identical across reruns modulo wall_time"
          if ok else f"reports differ for: {', '.join(mismatches)}")
    assert not mismatches
