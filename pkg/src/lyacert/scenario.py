"""Declarative scenario files: schema validation, the verification
pipeline, and report emission.

A scenario is a single TOML file with tables [system],
[initial_conditions], [integrator], [pair], [checks], [params],
[output].  See README for the full schema.  validate_scenario performs
every static check without integrating anything; run_scenario runs the
pipeline per initial condition (concurrently, capped by LYACERT_THREADS)
and writes report.json plus per-trajectory CSV files with a stable
layout: identical inputs and seed give byte-identical report.json except
for the wall_time field.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .case_studies import (
    DINParams,
    builtin_objectives,
    builtin_pd_instance,
    din_critical_set,
    din_energy,
    din_perturbed_energy,
    din_system,
    pd_critical_set,
    pd_energy,
    pd_system,
)
from .certificates import (
    CompositeCertificate,
    LyapunovPair,
    SlopeBound,
    integral_estimate,
    make_certificate,
    observable_vanishing,
    optimal_delta,
    slope_bound_global,
    verify_strict_decay,
)
from .dynamics import IntegratorConfig, SystemSpec, TimeSeries, evaluate_along, integrate
from .errors import InvalidInputError
from .rates import (
    CriticalSetSpec,
    ErrorBoundParams,
    ProbeConfig,
    QuadraticGrowthParams,
    check_convergence_to_E,
    classify_stability,
    distance_series,
    exponential_rate,
    l2_distance_bound,
    pointwise_rate,
    rate_constant_K,
    subsequence_rate,
)

__all__ = [
    "TOOL_VERSION",
    "CHECK_NAMES",
    "BUILTIN_SYSTEMS",
    "Scenario",
    "RunReport",
    "validate_scenario",
    "run_scenario",
]

TOOL_VERSION = "0.1.0"

CHECK_NAMES = (
    "decay",
    "integral",
    "vanishing",
    "distance",
    "l2",
    "subsequence",
    "pointwise",
    "exponential",
    "classify",
)

BUILTIN_SYSTEMS = {
    "din:quad_iso": "inertial flow on 0.5*||x||^2 (isolated minimizer)",
    "din:least_squares_line": "inertial flow on 0.5*(x1+x2-1)^2 (a line of minimizers)",
    "din:rosenbrock2": "inertial flow on the 2d Rosenbrock function (nonconvex)",
    "din:strongly_convex_aniso": "inertial flow on 0.5*(x1^2 + 10*x2^2)",
    "pd:quad_iso_eqcon": "primal-dual flow for min 0.5*||x||^2 s.t. x1+x2 = 1",
}

_TOP_LEVEL_TABLES = ("system", "initial_conditions", "integrator", "pair", "checks", "params", "output")

DEFAULT_SEED = 0xC0FFEE


@dataclass
class Scenario:
    """A fully materialized scenario, ready to run."""

    name: str
    raw: dict
    system: SystemSpec
    pair: LyapunovPair
    certificate: CompositeCertificate
    critical_set: CriticalSetSpec
    x0s: list
    integrator: IntegratorConfig
    checks: dict
    decay_tol: float | None
    vanishing_threshold: float
    distance_threshold: float
    distance_floor: float
    error_bound: ErrorBoundParams | None
    quadratic_growth: QuadraticGrowthParams | None
    probe: ProbeConfig
    expected_verdict: str | None
    e_is_equilibrium_set: bool
    output_dir: str
    seed: int


@dataclass
class RunReport:
    """Outcome of run_scenario: the report dict as written, plus paths."""

    overall_pass: bool
    data: dict
    output_dir: Path
    report_path: Path


def _float_of(tab, key, diags, where, default=None):
    if key not in tab:
        return default
    v = tab[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        diags.append(f"{where}.{key}: expected a number, got {v!r}")
        return default
    v = float(v)
    if not math.isfinite(v):
        diags.append(f"{where}.{key}: must be finite, got {v!r}")
        return default
    return v


def _int_of(tab, key, diags, where, default=None):
    if key not in tab:
        return default
    v = tab[key]
    if isinstance(v, bool) or not isinstance(v, int):
        diags.append(f"{where}.{key}: expected an integer, got {v!r}")
        return default
    return int(v)


def _table_of(raw, key, diags):
    v = raw.get(key)
    if v is None:
        return {}
    if not isinstance(v, dict):
        diags.append(f"[{key}] must be a table")
        return {}
    return v


def _symmetric_form(tab, key, dim, diags, required):
    """Parse a quadratic-form matrix for V(x) = x^T Q x."""
    if key not in tab:
        if required:
            diags.append(f"[pair].{key}: required for inline linear pairs")
        return None
    try:
        q = np.asarray(tab[key], dtype=float)
    except (TypeError, ValueError):
        diags.append(f"[pair].{key}: expected a nested list of numbers")
        return None
    if q.shape != (dim, dim):
        diags.append(f"[pair].{key}: expected a {dim}x{dim} matrix, got shape {q.shape}")
        return None
    if not np.all(np.isfinite(q)):
        diags.append(f"[pair].{key}: entries must be finite")
        return None
    return 0.5 * (q + q.T)


def _check_psd(q, key, diags):
    if q is None:
        return
    lo = float(np.min(np.linalg.eigvalsh(q)))
    if lo < -1e-12:
        diags.append(f"[pair].{key}: form must be positive semidefinite (smallest eigenvalue {lo:.3g})")


def _quad_fn(q):
    return lambda x: float(x @ q @ x)


def _parse_critical_set(sys_tab, dim, diags):
    cs = sys_tab.get("critical_set")
    if cs is None:
        return CriticalSetSpec.point(np.zeros(dim))
    if not isinstance(cs, dict):
        diags.append("[system.critical_set] must be a table")
        return None
    kind = cs.get("kind", "point")
    try:
        if kind == "point":
            p = np.asarray(cs.get("point", np.zeros(dim)), dtype=float).reshape(-1)
            if p.shape[0] != dim:
                diags.append(f"[system.critical_set].point: expected length {dim}, got {p.shape[0]}")
                return None
            return CriticalSetSpec.point(p)
        if kind == "affine_subspace":
            if "base" not in cs or "directions" not in cs:
                diags.append("[system.critical_set]: affine_subspace needs base and directions")
                return None
            return CriticalSetSpec.affine_subspace(cs["base"], cs["directions"])
    except (InvalidInputError, TypeError, ValueError) as exc:
        diags.append(f"[system.critical_set]: {exc}")
        return None
    diags.append(f"[system.critical_set].kind: unknown kind {kind!r}")
    return None


def _analyze(raw, name, seed_override=None, dense_dt_override=None):
    """Validate the parsed TOML and, when clean, build the Scenario.

    Returns (scenario_or_None, diagnostics).  Diagnostics name the
    offending field; an empty list means the scenario is runnable.
    """
    diags: list[str] = []
    if not isinstance(raw, dict):
        return None, ["scenario root must be a table"]
    for key in raw:
        if key not in _TOP_LEVEL_TABLES:
            diags.append(f"unknown top-level table [{key}]; expected one of {_TOP_LEVEL_TABLES}")

    out_tab = _table_of(raw, "output", diags)
    seed = _int_of(out_tab, "seed", diags, "[output]", DEFAULT_SEED)
    if seed_override is not None:
        seed = int(seed_override)
    output_dir = str(out_tab.get("dir", f"{name}_out"))

    # ---- system ----
    sys_tab = raw.get("system")
    if not isinstance(sys_tab, dict):
        diags.append("[system] table is required")
        return None, diags

    system = None
    critical_set = None
    builtin_family = None
    obj = None
    sys_params = None
    dim = None
    lin_matrix = None

    if "builtin" in sys_tab:
        bid = sys_tab["builtin"]
        if bid not in BUILTIN_SYSTEMS:
            diags.append(f"[system].builtin: unknown id {bid!r}; known ids: {sorted(BUILTIN_SYSTEMS)}")
            return None, diags
        builtin_family, short = bid.split(":", 1)
        if builtin_family == "din":
            alpha = _float_of(sys_tab, "alpha", diags, "[system]", 1.0)
            beta = _float_of(sys_tab, "beta", diags, "[system]", 1.0)
            epsilon = _float_of(sys_tab, "epsilon", diags, "[system]", 0.0)
            try:
                obj = builtin_objectives()[short]
                sys_params = DINParams(alpha=alpha, beta=beta, epsilon=epsilon)
                system = din_system(obj, sys_params)
                critical_set = din_critical_set(obj)
            except InvalidInputError as exc:
                diags.append(f"[system]: {exc}")
                return None, diags
        else:
            epsilon = _float_of(sys_tab, "epsilon", diags, "[system]", 0.0)
            try:
                obj, sys_params = builtin_pd_instance(epsilon=epsilon)
                system = pd_system(obj, sys_params)
                critical_set = pd_critical_set(sys_params)
            except InvalidInputError as exc:
                diags.append(f"[system]: {exc}")
                return None, diags
        dim = system.dimension
    elif sys_tab.get("kind") == "linear":
        try:
            lin_matrix = np.asarray(sys_tab["matrix"], dtype=float)
        except KeyError:
            diags.append("[system].matrix: required for kind = \"linear\"")
            return None, diags
        except (TypeError, ValueError):
            diags.append("[system].matrix: expected a nested list of numbers")
            return None, diags
        if lin_matrix.ndim != 2 or lin_matrix.shape[0] != lin_matrix.shape[1]:
            diags.append(f"[system].matrix: must be square, got shape {lin_matrix.shape}")
            return None, diags
        if not np.all(np.isfinite(lin_matrix)):
            diags.append("[system].matrix: entries must be finite")
            return None, diags
        dim = lin_matrix.shape[0]
        mat = lin_matrix
        system = SystemSpec(dimension=dim, field=lambda x: mat @ x, name=str(sys_tab.get("name", "linear")))
        critical_set = _parse_critical_set(sys_tab, dim, diags)
    else:
        diags.append('[system]: needs either builtin = "<id>" or kind = "linear"')
        return None, diags

    # ---- initial conditions ----
    ic_tab = _table_of(raw, "initial_conditions", diags)
    states_raw = ic_tab.get("states")
    x0s = []
    if not states_raw:
        diags.append("[initial_conditions].states: at least one initial state is required")
    else:
        for i, row in enumerate(states_raw):
            try:
                x0 = np.asarray(row, dtype=float).reshape(-1)
            except (TypeError, ValueError):
                diags.append(f"[initial_conditions].states[{i}]: expected a list of numbers")
                continue
            if x0.shape[0] != dim:
                diags.append(f"[initial_conditions].states[{i}]: expected length {dim}, got {x0.shape[0]}")
            elif not np.all(np.isfinite(x0)):
                diags.append(f"[initial_conditions].states[{i}]: entries must be finite")
            else:
                x0s.append(x0)

    # ---- integrator ----
    int_tab = _table_of(raw, "integrator", diags)
    t_end = _float_of(int_tab, "t_end", diags, "[integrator]")
    if t_end is None:
        diags.append("[integrator].t_end: required")
    method = str(int_tab.get("method", "rk45"))
    dense = _float_of(int_tab, "dense_output_dt", diags, "[integrator]")
    if dense_dt_override is not None:
        dense = float(dense_dt_override)
    integ = None
    if t_end is not None:
        try:
            integ = IntegratorConfig(
                method=method,
                t_end=t_end,
                dt_init=_float_of(int_tab, "dt_init", diags, "[integrator]", 1e-2),
                abs_tol=_float_of(int_tab, "abs_tol", diags, "[integrator]", 1e-9),
                rel_tol=_float_of(int_tab, "rel_tol", diags, "[integrator]", 1e-9),
                max_steps=_int_of(int_tab, "max_steps", diags, "[integrator]", 1_000_000),
                dense_output_dt=dense,
            )
        except InvalidInputError as exc:
            diags.append(f"[integrator]: {exc}")

    # ---- pair + certificate ----
    pair_tab = _table_of(raw, "pair", diags)
    delta_policy = str(pair_tab.get("delta_policy", "optimal"))
    if delta_policy not in ("optimal", "explicit"):
        diags.append(f'[pair].delta_policy: must be "optimal" or "explicit", got {delta_policy!r}')
    pair = None
    slope = None
    lin_forms = None
    if builtin_family is not None:
        energy = str(pair_tab.get("energy", "standard"))
        if energy not in ("standard", "perturbed"):
            diags.append(f'[pair].energy: must be "standard" or "perturbed", got {energy!r}')
        elif builtin_family == "din":
            if energy == "standard":
                pair = din_energy(obj, sys_params)
            elif sys_params.epsilon <= 0.0:
                diags.append("[system].epsilon: the perturbed energy needs epsilon > 0")
            else:
                try:
                    first = x0s[0] if x0s else None
                    pair = din_perturbed_energy(obj, sys_params, x0=first).pair
                except InvalidInputError as exc:
                    diags.append(f"[pair]: {exc}")
        else:
            if energy == "standard":
                pair = pd_energy(obj, sys_params)
            else:
                diags.append(
                    "[pair].energy: the perturbed primal-dual energy needs sublevel constants "
                    "estimated from data; build it through the library instead (scenarios accept "
                    'energy = "standard" for pd systems)'
                )
        if pair is not None:
            slope = slope_bound_global(pair.h)
    else:
        q1 = _symmetric_form(pair_tab, "v1", dim, diags, required=True)
        n1 = _symmetric_form(pair_tab, "n1", dim, diags, required=True)
        q2 = _symmetric_form(pair_tab, "v2", dim, diags, required=False)
        n2 = _symmetric_form(pair_tab, "n2", dim, diags, required=False)
        if (q2 is None) != (n2 is None):
            diags.append("[pair]: v2 and n2 must be given together")
            q2 = n2 = None
        for q, key in ((q1, "v1"), (n1, "n1"), (q2, "v2"), (n2, "n2")):
            _check_psd(q, key, diags)
        h_slope = _float_of(pair_tab, "h_slope", diags, "[pair]", 0.0)
        if h_slope is not None and h_slope < 0.0:
            diags.append(f"[pair].h_slope: must be >= 0, got {h_slope}")
        elif q2 is not None and h_slope is not None:
            c = h_slope
            slope = SlopeBound.declared(c, "global_L", h=lambda r: c * r)
        elif q2 is None:
            slope = slope_bound_global(lambda r: 0.0)
        if q1 is not None and n1 is not None:
            lin_forms = (q1, n1, q2, n2, h_slope or 0.0)

    cert = None
    if slope is not None and delta_policy in ("optimal", "explicit"):
        if delta_policy == "optimal":
            cert = optimal_delta(slope)
        else:
            delta = _float_of(pair_tab, "delta", diags, "[pair]")
            if delta is None:
                diags.append('[pair].delta: required when delta_policy = "explicit"')
            else:
                try:
                    cert = make_certificate(slope, delta)
                except InvalidInputError as exc:
                    diags.append(f"[pair].delta: {exc}")

    # an inline pair's declared derivative depends on the resolved delta
    if lin_forms is not None and cert is not None and lin_matrix is not None:
        q1, n1, q2, n2, h_slope = lin_forms
        p_form = q1 if q2 is None else q1 + cert.delta * q2
        s_form = lin_matrix.T @ p_form + p_form @ lin_matrix
        analytic = _quad_fn(s_form)
        if q2 is None:
            pair = LyapunovPair.single(V=_quad_fn(q1), N=_quad_fn(n1), analytic_Wdot=analytic)
        else:
            c = h_slope
            pair = LyapunovPair(
                V1=_quad_fn(q1),
                V2=_quad_fn(q2),
                N1=_quad_fn(n1),
                N2=_quad_fn(n2),
                h=lambda r: c * r,
                analytic_Wdot=analytic,
            )

    # ---- checks ----
    checks_tab = _table_of(raw, "checks", diags)
    for key in checks_tab:
        if key not in CHECK_NAMES:
            diags.append(f"[checks].{key}: unknown check; known checks: {CHECK_NAMES}")
    checks = {}
    for cname in CHECK_NAMES:
        v = checks_tab.get(cname, False)
        if not isinstance(v, bool):
            diags.append(f"[checks].{cname}: expected a boolean, got {v!r}")
            v = False
        checks[cname] = v

    # ---- params ----
    params_tab = _table_of(raw, "params", diags)
    decay_tol = _float_of(params_tab, "decay_tol", diags, "[params]")
    if decay_tol is not None and decay_tol <= 0.0:
        diags.append(f"[params].decay_tol: must be positive, got {decay_tol}")
    vanishing_threshold = _float_of(params_tab, "vanishing_threshold", diags, "[params]", 1e-8)
    distance_threshold = _float_of(params_tab, "distance_threshold", diags, "[params]", 1e-4)
    for label, v in (("vanishing_threshold", vanishing_threshold), ("distance_threshold", distance_threshold)):
        if v is not None and v <= 0.0:
            diags.append(f"[params].{label}: must be positive, got {v}")
    # below ~100x the integrator tolerance the distance to E is noise,
    # not signal; rate checks ignore samples under this floor
    default_floor = 0.0
    if integ is not None:
        default_floor = 100.0 * max(integ.abs_tol, integ.rel_tol)
    distance_floor = _float_of(params_tab, "distance_floor", diags, "[params]", default_floor)
    if distance_floor is not None and distance_floor < 0.0:
        diags.append(f"[params].distance_floor: must be >= 0, got {distance_floor}")

    error_bound = None
    if isinstance(params_tab.get("error_bound"), dict):
        eb_tab = params_tab["error_bound"]
        try:
            error_bound = ErrorBoundParams(
                c=_float_of(eb_tab, "c", diags, "[params.error_bound]", 0.0),
                neighborhood_radius=_float_of(eb_tab, "neighborhood_radius", diags, "[params.error_bound]", 0.0),
                c1=_float_of(eb_tab, "c1", diags, "[params.error_bound]"),
                c2=_float_of(eb_tab, "c2", diags, "[params.error_bound]"),
            )
        except InvalidInputError as exc:
            diags.append(f"[params.error_bound]: {exc}")

    quadratic_growth = None
    if isinstance(params_tab.get("quadratic_growth"), dict):
        qg_tab = params_tab["quadratic_growth"]
        try:
            quadratic_growth = QuadraticGrowthParams(
                m=_float_of(qg_tab, "m", diags, "[params.quadratic_growth]", 0.0),
                r=_float_of(qg_tab, "r", diags, "[params.quadratic_growth]", 0.0),
                W_infinity=_float_of(qg_tab, "W_infinity", diags, "[params.quadratic_growth]"),
            )
        except InvalidInputError as exc:
            diags.append(f"[params.quadratic_growth]: {exc}")

    probe_tab = params_tab.get("probe") if isinstance(params_tab.get("probe"), dict) else {}
    expected_verdict = probe_tab.get("expected_verdict")
    if expected_verdict is not None and expected_verdict not in ("AS", "SS", "PAS"):
        diags.append(f'[params.probe].expected_verdict: must be "AS", "SS" or "PAS", got {expected_verdict!r}')
        expected_verdict = None
    e_is_equilibrium_set = bool(probe_tab.get("is_equilibrium_set", False))
    probe = None
    try:
        radii = probe_tab.get("radii", [1e-2, 1e-3])
        probe = ProbeConfig(
            n_equilibria=_int_of(probe_tab, "n_equilibria", diags, "[params.probe]", 8),
            radii=tuple(float(r) for r in radii),
            directions_per_radius=_int_of(probe_tab, "directions_per_radius", diags, "[params.probe]", 4),
            excursion_factor=_float_of(probe_tab, "excursion_factor", diags, "[params.probe]", 10.0),
            seed=seed,
            convergence_threshold=_float_of(probe_tab, "convergence_threshold", diags, "[params.probe]", 1e-4),
        )
    except (InvalidInputError, TypeError, ValueError) as exc:
        diags.append(f"[params.probe]: {exc}")

    # cross-field requirements of the enabled checks
    for cname in ("l2", "subsequence", "exponential"):
        if checks[cname] and error_bound is None:
            diags.append(f"[checks].{cname}: enabled but the [params.error_bound] block is missing")
    if checks["exponential"] and quadratic_growth is None:
        diags.append("[checks].exponential: enabled but the [params.quadratic_growth] block is missing")
    if checks["classify"] and probe is None:
        diags.append("[checks].classify: enabled but the [params.probe] block is invalid")

    if diags:
        return None, diags
    return (
        Scenario(
            name=name,
            raw=raw,
            system=system,
            pair=pair,
            certificate=cert,
            critical_set=critical_set,
            x0s=x0s,
            integrator=integ,
            checks=checks,
            decay_tol=decay_tol,
            vanishing_threshold=vanishing_threshold,
            distance_threshold=distance_threshold,
            distance_floor=distance_floor,
            error_bound=error_bound,
            quadratic_growth=quadratic_growth,
            probe=probe,
            expected_verdict=expected_verdict,
            e_is_equilibrium_set=e_is_equilibrium_set,
            output_dir=output_dir,
            seed=seed,
        ),
        [],
    )


def _parse_toml(path):
    text = Path(path).read_bytes()
    return tomllib.loads(text.decode("utf-8"))


def validate_scenario(path) -> list:
    """Static validation only; returns a list of diagnostics (empty = valid)."""
    try:
        raw = _parse_toml(path)
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        return [f"TOML parse error: {exc}"]
    _, diags = _analyze(raw, Path(path).stem)
    return diags


def _thread_cap() -> int:
    env = os.environ.get("LYACERT_THREADS", "").strip()
    if not env:
        return 4
    try:
        n = int(env)
    except ValueError:
        raise InvalidInputError(f"LYACERT_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise InvalidInputError(f"LYACERT_THREADS must be >= 1, got {n}")
    return n


def _run_one(sc: Scenario, k: int):
    """Integrate one initial condition and run every enabled check on it."""
    x0 = sc.x0s[k]
    traj = integrate(sc.system, x0, sc.integrator)
    decay = verify_strict_decay(traj, sc.pair, sc.certificate, tol=sc.decay_tol)
    dist = distance_series(traj, sc.critical_set)

    checks_out = {"decay": {"enabled": sc.checks["decay"], **decay.to_json_dict()}}
    flags = {}
    if sc.checks["decay"]:
        flags["decay"] = decay.passed
    if sc.checks["integral"]:
        rep = integral_estimate(decay)
        checks_out["integral"] = rep.to_json_dict()
        flags["integral"] = rep.satisfied
    if sc.checks["vanishing"]:
        extras = None
        if sc.pair.raw_observables:
            extras = {nm: evaluate_along(traj, fn) for nm, fn in sc.pair.raw_observables}
        rep = observable_vanishing(decay, sc.vanishing_threshold, extra_series=extras)
        checks_out["vanishing"] = rep.to_json_dict()
        flags["vanishing"] = rep.vanished
    if sc.checks["distance"]:
        rep = check_convergence_to_E(dist, sc.distance_threshold)
        checks_out["distance"] = rep.to_json_dict()
        flags["distance"] = rep.passed
    if sc.checks["l2"]:
        diss = TimeSeries(times=decay.N1.times, values=decay.N1.values + decay.N2.values)
        rep = l2_distance_bound(dist, decay.W, sc.certificate.gamma, sc.error_bound, dissipation=diss)
        checks_out["l2"] = rep.to_json_dict()
        flags["l2"] = rep.passed and rep.error_bound_ok is not False
    rate_report = None
    if sc.checks["subsequence"]:
        K = rate_constant_K(decay.W, sc.certificate.gamma, sc.error_bound.c)
        rate_report = subsequence_rate(dist, K)
        flags["subsequence"] = bool(rate_report.windows_passed)
    if sc.checks["pointwise"]:
        pw = pointwise_rate(dist, resolution_floor=sc.distance_floor)
        rate_report = pw if rate_report is None else rate_report.merge(pw)
        flags["pointwise"] = bool(pw.pointwise_pass)
    if rate_report is not None:
        checks_out["rate"] = rate_report.to_json_dict()
    if sc.checks["exponential"]:
        rep = exponential_rate(
            dist, decay.W, sc.quadratic_growth, sc.certificate.gamma, sc.error_bound.c,
            resolution_floor=sc.distance_floor,
        )
        checks_out["exponential"] = rep.to_json_dict()
        flags["exponential"] = rep.passed

    entry = {
        "index": k,
        "x0": [float(v) for v in x0],
        "truncated": traj.truncated,
        "samples": int(len(traj.times)),
        "horizon": traj.horizon,
        "checks": checks_out,
        "pass_flags": flags,
        "passed": all(flags.values()) if flags else True,
    }
    return entry, traj, decay, dist


def _sanitize(obj):
    """Make a report tree strict-JSON safe and deterministic."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    return obj


def _write_csv(path: Path, header, columns):
    cols = [np.asarray(c, dtype=float) for c in columns]
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for i in range(cols[0].shape[0]):
            f.write(",".join(f"{c[i]:.17g}" for c in cols) + "\n")


def run_scenario(path, output_dir=None, seed=None, dense_dt=None) -> RunReport:
    """Run every enabled check of a scenario file and write its artifacts.

    Writes report.json, trajectory_<k>.csv (t plus state components) and
    decay_<k>.csv (t, W, Wdot, N1, N2, residual, dist) into the output
    directory.  Raises InvalidInputError for schema problems before any
    integration starts.
    """
    t_begin = time.perf_counter()
    try:
        raw = _parse_toml(path)
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"TOML parse error in {path}: {exc}") from exc
    sc, diags = _analyze(raw, Path(path).stem, seed_override=seed, dense_dt_override=dense_dt)
    if diags:
        raise InvalidInputError(f"invalid scenario {path}: " + "; ".join(diags))

    out_dir = Path(output_dir) if output_dir is not None else Path(sc.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    workers = max(1, min(len(sc.x0s), _thread_cap()))
    if workers == 1:
        results = [_run_one(sc, k) for k in range(len(sc.x0s))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, sc, k) for k in range(len(sc.x0s))]
            results = [f.result() for f in futures]
    results.sort(key=lambda r: r[0]["index"])

    classification = None
    classify_pass = None
    if sc.checks["classify"]:
        verdict = classify_stability(
            sc.system, sc.critical_set, sc.probe, sc.integrator, E_is_equilibrium_set=sc.e_is_equilibrium_set
        )
        if sc.expected_verdict is not None:
            classify_pass = verdict.verdict == sc.expected_verdict
        else:
            classify_pass = verdict.verdict != "inconclusive"
        classification = {
            "report": verdict.to_json_dict(),
            "expected_verdict": sc.expected_verdict,
            "passed": classify_pass,
        }

    overall = all(entry["passed"] for entry, _, _, _ in results)
    if classify_pass is not None:
        overall = overall and classify_pass

    data = {
        "tool_version": TOOL_VERSION,
        "scenario_name": sc.name,
        "scenario": sc.raw,
        "seed": sc.seed,
        "checks_enabled": sc.checks,
        "certificate": sc.certificate.to_json_dict(),
        "system_name": sc.system.name,
        "trajectories": [entry for entry, _, _, _ in results],
        "classification": classification,
        "overall_pass": overall,
        "wall_time": time.perf_counter() - t_begin,
    }
    data = _sanitize(data)

    for entry, traj, decay, dist in results:
        k = entry["index"]
        _write_csv(
            out_dir / f"trajectory_{k}.csv",
            ["t"] + [f"x{i}" for i in range(traj.dimension)],
            [traj.times] + [traj.states[:, i] for i in range(traj.dimension)],
        )
        _write_csv(
            out_dir / f"decay_{k}.csv",
            ["t", "W", "Wdot", "N1", "N2", "residual", "dist"],
            [traj.times, decay.W.values, decay.Wdot.values, decay.N1.values, decay.N2.values,
             decay.residual.values, dist.values],
        )
    report_path = out_dir / "report.json"
    with open(report_path, "w") as f:
        json.dump(data, f, sort_keys=True, indent=2, allow_nan=False)
        f.write("\n")

    return RunReport(overall_pass=bool(overall), data=data, output_dir=out_dir, report_path=report_path)
