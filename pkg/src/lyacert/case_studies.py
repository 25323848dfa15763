"""Built-in case studies: an inertial gradient-like flow with Hessian
damping, and the Arrow-Hurwicz-Uzawa primal-dual flow for linearly
constrained convex problems.

Each case study is delivered as a SystemSpec plus a LyapunovPair plus a
CriticalSetSpec.  Both admit a perturbed energy whose strict-decay
coefficients are computed here: exactly for the inertial system, and by
sublevel-set sampling for the primal-dual flow (those constants have no
constructive definition, so they are estimates and are labeled as such
in every report).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .certificates import LyapunovPair
from .dynamics import SystemSpec, Trajectory
from .errors import EvaluationError, InvalidInputError
from .rates import CriticalSetSpec

__all__ = [
    "ObjectiveSpec",
    "builtin_objectives",
    "DINParams",
    "din_system",
    "din_energy",
    "DINPerturbedResult",
    "din_perturbed_energy",
    "din_critical_set",
    "PrimalDualParams",
    "pd_system",
    "pd_energy",
    "pd_critical_set",
    "PDConstantEstimates",
    "PDPerturbedResult",
    "pd_perturbed_energy",
    "builtin_pd_instance",
]

_PROBE_COUNT = 100
_FD_STEP = 1e-5


def _as_vec(x, dim, what):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != dim:
        raise InvalidInputError(f"{what} has dimension {x.shape[0]}, expected {dim}")
    return x


@dataclass(frozen=True)
class ObjectiveSpec:
    """A C2 objective with first- and second-order oracles.

    The Hessian is only ever consumed as a Hessian-vector product so the
    full matrix is never formed.  gradient_lipschitz_estimate is the
    Lipschitz constant of the gradient (distinct from the slope bound of
    a comparison function).  Construction validates both oracles against
    central finite differences at random points of the unit ball.
    """

    name: str
    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian_vector_product: Callable[[np.ndarray, np.ndarray], np.ndarray]
    convex: bool
    gradient_lipschitz_estimate: float | None = None
    argmin_spec: CriticalSetSpec | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError(f"objective dimension must be >= 1, got {self.dim!r}")
        if self.gradient_lipschitz_estimate is not None and not (self.gradient_lipschitz_estimate > 0.0):
            raise InvalidInputError("gradient_lipschitz_estimate must be positive when given")
        self._validate_derivatives()

    def _validate_derivatives(self):
        rng = np.random.default_rng(0x5EED)
        h = _FD_STEP
        for _ in range(_PROBE_COUNT):
            x = rng.standard_normal(self.dim)
            r = np.linalg.norm(x)
            if r > 1.0:
                x = x / r * rng.uniform(0.0, 1.0)
            g = np.asarray(self.gradient(x), dtype=float).reshape(-1)
            fd = np.empty(self.dim)
            for i in range(self.dim):
                e = np.zeros(self.dim)
                e[i] = h
                fd[i] = (float(self.value(x + e)) - float(self.value(x - e))) / (2.0 * h)
            if np.linalg.norm(fd - g) > 1e-5 * (1.0 + np.linalg.norm(g)):
                raise InvalidInputError(
                    f"objective {self.name!r}: gradient disagrees with finite differences at {x.tolist()}"
                )
            u = rng.standard_normal(self.dim)
            u /= max(np.linalg.norm(u), 1e-12)
            hv = np.asarray(self.hessian_vector_product(x, u), dtype=float).reshape(-1)
            fd_hv = (
                np.asarray(self.gradient(x + h * u), dtype=float) - np.asarray(self.gradient(x - h * u), dtype=float)
            ) / (2.0 * h)
            if np.linalg.norm(fd_hv - hv) > 1e-4 * (1.0 + np.linalg.norm(hv)):
                raise InvalidInputError(
                    f"objective {self.name!r}: Hessian-vector product disagrees with finite differences"
                )


def builtin_objectives() -> dict:
    """The catalog of bundled objectives, keyed by id."""
    inv_sqrt2 = 1.0 / math.sqrt(2.0)

    quad_iso = ObjectiveSpec(
        name="quad_iso",
        dim=2,
        value=lambda x: 0.5 * float(x @ x),
        gradient=lambda x: np.array(x, dtype=float),
        hessian_vector_product=lambda x, u: np.array(u, dtype=float),
        convex=True,
        gradient_lipschitz_estimate=1.0,
        argmin_spec=CriticalSetSpec.point([0.0, 0.0]),
    )

    # 0.5*(x1 + x2 - 1)^2: the minimizers form the line x1 + x2 = 1
    a = np.array([1.0, 1.0])
    least_squares_line = ObjectiveSpec(
        name="least_squares_line",
        dim=2,
        value=lambda x: 0.5 * (float(a @ x) - 1.0) ** 2,
        gradient=lambda x: (float(a @ x) - 1.0) * a,
        hessian_vector_product=lambda x, u: float(a @ u) * a,
        convex=True,
        gradient_lipschitz_estimate=2.0,
        argmin_spec=CriticalSetSpec.affine_subspace([0.5, 0.5], [[inv_sqrt2, -inv_sqrt2]]),
    )

    def rosen_value(x):
        return (1.0 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2

    def rosen_grad(x):
        d = x[1] - x[0] ** 2
        return np.array([-2.0 * (1.0 - x[0]) - 400.0 * x[0] * d, 200.0 * d])

    def rosen_hvp(x, u):
        h11 = 2.0 - 400.0 * x[1] + 1200.0 * x[0] ** 2
        h12 = -400.0 * x[0]
        return np.array([h11 * u[0] + h12 * u[1], h12 * u[0] + 200.0 * u[1]])

    rosenbrock2 = ObjectiveSpec(
        name="rosenbrock2",
        dim=2,
        value=rosen_value,
        gradient=rosen_grad,
        hessian_vector_product=rosen_hvp,
        convex=False,
        gradient_lipschitz_estimate=None,
        # (1,1) is the only critical point, so it is the whole critical set
        argmin_spec=CriticalSetSpec.point([1.0, 1.0]),
    )

    d = np.array([1.0, 10.0])
    strongly_convex_aniso = ObjectiveSpec(
        name="strongly_convex_aniso",
        dim=2,
        value=lambda x: 0.5 * float(d @ (x * x)),
        gradient=lambda x: d * x,
        hessian_vector_product=lambda x, u: d * u,
        convex=True,
        gradient_lipschitz_estimate=10.0,
        argmin_spec=CriticalSetSpec.point([0.0, 0.0]),
    )

    return {
        "quad_iso": quad_iso,
        "least_squares_line": least_squares_line,
        "rosenbrock2": rosenbrock2,
        "strongly_convex_aniso": strongly_convex_aniso,
    }


@dataclass(frozen=True)
class DINParams:
    """Damping parameters of the inertial flow, plus the optional
    perturbation strength epsilon and its anchor minimizer.

    epsilon > 0 requires epsilon < min(2*alpha/3, 2/beta), which keeps
    the perturbed decay coefficient c_eps positive.
    """

    alpha: float
    beta: float
    epsilon: float = 0.0
    anchor_z: np.ndarray | None = None

    def __post_init__(self):
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise InvalidInputError(f"alpha must be positive, got {self.alpha!r}")
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise InvalidInputError(f"beta must be positive, got {self.beta!r}")
        if not (self.epsilon >= 0.0):
            raise InvalidInputError(f"epsilon must be >= 0, got {self.epsilon!r}")
        if self.epsilon > 0.0:
            cap = self.epsilon_cap(self.alpha, self.beta)
            if not self.epsilon < cap:
                raise InvalidInputError(
                    f"epsilon must satisfy 0 < epsilon < min{{2*alpha/3, 2/beta}} = {cap}, "
                    f"got {self.epsilon!r}"
                )
        if self.anchor_z is not None:
            z = np.asarray(self.anchor_z, dtype=float).reshape(-1).copy()
            z.flags.writeable = False
            object.__setattr__(self, "anchor_z", z)

    @staticmethod
    def epsilon_cap(alpha: float, beta: float) -> float:
        return min(2.0 * alpha / 3.0, 2.0 / beta)


def din_system(obj: ObjectiveSpec, p: DINParams) -> SystemSpec:
    """Phase-space form of the inertial flow on y = (x, v):

        x' = v
        v' = -alpha*v - grad(x) - beta*H(x)v
    """
    n = obj.dim
    alpha, beta = p.alpha, p.beta
    grad = obj.gradient
    hvp = obj.hessian_vector_product

    def field(y):
        x = y[:n]
        v = y[n:]
        out = np.empty(2 * n)
        out[:n] = v
        out[n:] = -alpha * v - np.asarray(grad(x), dtype=float) - beta * np.asarray(hvp(x, v), dtype=float)
        return out

    return SystemSpec(dimension=2 * n, field=field, name=f"din:{obj.name}")


def _din_dissipation(obj: ObjectiveSpec, p: DINParams):
    n = obj.dim
    alpha, beta = p.alpha, p.beta

    def n1(y):
        g = np.asarray(obj.gradient(y[:n]), dtype=float)
        v = y[n:]
        return alpha * float(v @ v) + beta * float(g @ g)

    return n1


def din_energy(obj: ObjectiveSpec, p: DINParams) -> LyapunovPair:
    """The energy W(x,v) = (alpha*beta+1)*Phi(x) + 0.5*||v + beta*grad(x)||^2.

    Along the flow, dW/dt = -alpha*||v||^2 - beta*||grad||^2 exactly, so
    the pair is single-function with the combined dissipation as its one
    observable.  The two raw squared norms are exposed separately for
    vanishing reports.
    """
    n = obj.dim
    alpha, beta = p.alpha, p.beta
    coef = alpha * beta + 1.0

    def W(y):
        x = y[:n]
        v = y[n:]
        g = np.asarray(obj.gradient(x), dtype=float)
        s = v + beta * g
        return coef * float(obj.value(x)) + 0.5 * float(s @ s)

    n1 = _din_dissipation(obj, p)

    def v_norm_sq(y):
        v = y[n:]
        return float(v @ v)

    def grad_norm_sq(y):
        g = np.asarray(obj.gradient(y[:n]), dtype=float)
        return float(g @ g)

    return LyapunovPair.single(
        V=W,
        N=n1,
        analytic_Wdot=lambda y: -n1(y),
        raw_observables=(("v_norm_sq", v_norm_sq), ("grad_norm_sq", grad_norm_sq)),
    )


def din_critical_set(obj: ObjectiveSpec) -> CriticalSetSpec:
    """The rest set {(x, v): grad(x) = 0, v = 0} in phase space."""
    if obj.argmin_spec is None:
        raise InvalidInputError(f"objective {obj.name!r} declares no critical-set description")
    n = obj.dim
    if obj.argmin_spec.kind == "point":
        x_part = np.asarray(obj.argmin_spec.equilibria_sampler(0), dtype=float).reshape(-1)
        return CriticalSetSpec.point(np.concatenate([x_part, np.zeros(n)]))
    return CriticalSetSpec.product(((obj.argmin_spec, n), (CriticalSetSpec.point(np.zeros(n)), n)))


@dataclass(frozen=True)
class DINPerturbedResult:
    """Perturbed energy W_eps with its exact decay coefficient c_eps.

    The bundled pair encodes the guarantee dW_eps/dt <= -c_eps*(||v||^2
    + ||grad||^2): its observable is the scaled sum, to be certified
    with delta = 1 (gamma = 1).  analytic_Wdot is the exact derivative
    of W_eps along the flow, not the bound.
    """

    pair: LyapunovPair
    W_epsilon: Callable[[np.ndarray], float]
    c_epsilon: float
    epsilon: float
    anchor: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "c_epsilon": self.c_epsilon,
            "epsilon": self.epsilon,
            "anchor": [float(z) for z in self.anchor],
        }


def din_perturbed_energy(obj: ObjectiveSpec, p: DINParams, x0=None) -> DINPerturbedResult:
    """W_eps(x,v) = W + eps*(alpha/2*||x-z||^2 + <v + beta*grad, x - z>).

    Requires a convex objective (the derivation drops eps*<grad, x-z>
    which convexity makes nonnegative) and an anchor z in the argmin
    set; z defaults to the projection of x0 onto it, or its sampled
    basepoint.  The decay coefficient is

        c_eps = min(alpha - 3*eps/2, beta - beta^2*eps/2)

    which the epsilon range keeps positive.
    """
    if not obj.convex:
        raise InvalidInputError(
            f"objective {obj.name!r} is not declared convex; the perturbed energy needs <grad(x), x-z> >= 0"
        )
    n = obj.dim
    alpha, beta, eps = p.alpha, p.beta, p.epsilon

    if p.anchor_z is not None:
        z = _as_vec(p.anchor_z, n, "anchor_z")
    elif obj.argmin_spec is not None:
        if x0 is not None and obj.argmin_spec.project is not None:
            z = np.asarray(obj.argmin_spec.project(np.asarray(x0, dtype=float).reshape(-1)[:n]), dtype=float)
        elif obj.argmin_spec.equilibria_sampler is not None:
            z = np.asarray(obj.argmin_spec.equilibria_sampler(0), dtype=float).reshape(-1)
        else:
            raise InvalidInputError("anchor_z not given and the argmin set offers no points")
    else:
        raise InvalidInputError(f"anchor_z not given and objective {obj.name!r} has no argmin description")
    gz = np.linalg.norm(np.asarray(obj.gradient(z), dtype=float))
    if gz > 1e-8:
        raise InvalidInputError(f"anchor is not a minimizer: ||grad(z)|| = {gz:.3g} > 1e-8")

    c_eps = min(alpha - 1.5 * eps, beta - 0.5 * beta * beta * eps)
    coef = alpha * beta + 1.0

    def W_eps(y):
        x = y[:n]
        v = y[n:]
        g = np.asarray(obj.gradient(x), dtype=float)
        s = v + beta * g
        base = coef * float(obj.value(x)) + 0.5 * float(s @ s)
        dx = x - z
        return base + eps * (0.5 * alpha * float(dx @ dx) + float(s @ dx))

    def wdot_eps(y):
        # d/dt of the perturbation: eps*(||v||^2 + beta*<grad, v> - <grad, x-z>)
        x = y[:n]
        v = y[n:]
        g = np.asarray(obj.gradient(x), dtype=float)
        base = -alpha * float(v @ v) - beta * float(g @ g)
        return base + eps * (float(v @ v) + beta * float(g @ v) - float(g @ (x - z)))

    def n_scaled(y):
        x = y[:n]
        v = y[n:]
        g = np.asarray(obj.gradient(x), dtype=float)
        return c_eps * (float(v @ v) + float(g @ g))

    def v_norm_sq(y):
        v = y[n:]
        return float(v @ v)

    def grad_norm_sq(y):
        g = np.asarray(obj.gradient(y[:n]), dtype=float)
        return float(g @ g)

    pair = LyapunovPair.single(
        V=W_eps,
        N=n_scaled,
        analytic_Wdot=wdot_eps,
        raw_observables=(("v_norm_sq", v_norm_sq), ("grad_norm_sq", grad_norm_sq)),
    )
    return DINPerturbedResult(pair=pair, W_epsilon=W_eps, c_epsilon=c_eps, epsilon=eps, anchor=z)


@dataclass(frozen=True)
class PrimalDualParams:
    """Constraint data Ax = b with a designated saddle point.

    For non-unique dual solutions the minimum-norm lambda_star must be
    supplied; the energy depends on the choice.  young_etas are the free
    parameters of the Young inequalities in the perturbed analysis; the
    defaults keep a1, a2 positive for every epsilon <= 1.
    """

    A: np.ndarray
    b: np.ndarray
    x_star: np.ndarray
    lambda_star: np.ndarray
    epsilon: float = 0.0
    young_etas: tuple = (0.25, 0.25, 0.25)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        xs = np.asarray(self.x_star, dtype=float).reshape(-1)
        ls = np.asarray(self.lambda_star, dtype=float).reshape(-1)
        if A.shape != (b.shape[0], xs.shape[0]):
            raise InvalidInputError(
                f"A of shape {A.shape} does not match b of length {b.shape[0]} and x_star of length {xs.shape[0]}"
            )
        if ls.shape[0] != b.shape[0]:
            raise InvalidInputError(f"lambda_star has length {ls.shape[0]}, expected {b.shape[0]}")
        for arr in (A, b, xs, ls):
            arr.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "x_star", xs)
        object.__setattr__(self, "lambda_star", ls)
        if not (self.epsilon >= 0.0):
            raise InvalidInputError(f"epsilon must be >= 0, got {self.epsilon!r}")
        etas = tuple(float(e) for e in self.young_etas)
        if len(etas) != 3 or not all(e > 0.0 for e in etas):
            raise InvalidInputError(f"young_etas must be three positive reals, got {self.young_etas!r}")
        object.__setattr__(self, "young_etas", etas)
        if self.epsilon > 0.0 and (self.a1 <= 0.0 or self.a2 <= 0.0):
            raise InvalidInputError(
                f"epsilon = {self.epsilon} with etas {etas} gives a1 = {self.a1}, a2 = {self.a2}; both must be positive"
            )

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def a1(self) -> float:
        return 1.0 + self.epsilon - 2.0 * self.epsilon * self.young_etas[0]

    @property
    def a2(self) -> float:
        return 1.0 + self.epsilon - 2.0 * self.epsilon * (self.young_etas[1] + self.young_etas[2])


def _check_saddle(obj: ObjectiveSpec, p: PrimalDualParams):
    if obj.dim != p.n:
        raise InvalidInputError(f"objective dimension {obj.dim} does not match A with {p.n} columns")
    stat = np.linalg.norm(np.asarray(obj.gradient(p.x_star), dtype=float) + p.A.T @ p.lambda_star)
    feas = np.linalg.norm(p.A @ p.x_star - p.b)
    if stat > 1e-8:
        raise InvalidInputError(f"(x_star, lambda_star) is not stationary: residual {stat:.3g} > 1e-8")
    if feas > 1e-10:
        raise InvalidInputError(f"x_star is not feasible: ||A x_star - b|| = {feas:.3g} > 1e-10")


def pd_system(obj: ObjectiveSpec, p: PrimalDualParams) -> SystemSpec:
    """The saddle flow x' = -grad(x) - A^T lambda, lambda' = Ax - b."""
    _check_saddle(obj, p)
    n, m = p.n, p.m
    A, b = p.A, p.b
    grad = obj.gradient

    def field(z):
        x = z[:n]
        lam = z[n:]
        out = np.empty(n + m)
        out[:n] = -np.asarray(grad(x), dtype=float) - A.T @ lam
        out[n:] = A @ x - b
        return out

    return SystemSpec(dimension=n + m, field=field, name=f"pd:{obj.name}")


def pd_energy(obj: ObjectiveSpec, p: PrimalDualParams) -> LyapunovPair:
    """W(x,lambda) = Phi(x) - Phi(x_star) + 0.5*||Ax-b||^2 + 0.5*||lambda - lambda_star||^2.

    Observables: N1 = ||Ax-b||^2, N2 = ||grad + A^T lambda||^2, with the
    declared derivative -N1 - N2.  The declaration is taken at face
    value here; verify_strict_decay cross-checks it against the data and
    reports any disagreement.
    """
    _check_saddle(obj, p)
    n = p.n
    A, b, ls = p.A, p.b, p.lambda_star
    phi_star = float(obj.value(p.x_star))

    def W(z):
        x = z[:n]
        lam = z[n:]
        rho = A @ x - b
        dl = lam - ls
        return float(obj.value(x)) - phi_star + 0.5 * float(rho @ rho) + 0.5 * float(dl @ dl)

    def n1(z):
        rho = A @ z[:n] - b
        return float(rho @ rho)

    def n2(z):
        g = np.asarray(obj.gradient(z[:n]), dtype=float) + A.T @ z[n:]
        return float(g @ g)

    return LyapunovPair(
        V1=W,
        V2=lambda z: 0.0,
        N1=n1,
        N2=n2,
        h=lambda r: 0.0,
        analytic_Wdot=lambda z: -n1(z) - n2(z),
    )


def pd_critical_set(p: PrimalDualParams) -> CriticalSetSpec:
    """The KKT point as a critical set.

    Assumes the saddle is unique (true for the bundled instance); for
    degenerate problems supply a custom set instead.
    """
    return CriticalSetSpec.point(np.concatenate([p.x_star, p.lambda_star]))


@dataclass(frozen=True)
class PDConstantEstimates:
    """Sampled sublevel-set constants feeding the perturbed-decay bound.

    All values downstream of C_x and kappa are empirical estimates, not
    proved bounds.
    """

    C_x: float
    kappa: float
    c0: float
    a1: float
    a2: float
    c1: float
    c2: float
    eps_max_estimate: float
    n_accepted: int
    W0: float

    def to_json_dict(self) -> dict:
        return {
            "estimated": True,
            "C_x": self.C_x,
            "kappa": self.kappa,
            "c0": self.c0,
            "a1": self.a1,
            "a2": self.a2,
            "c1": self.c1,
            "c2": self.c2,
            "eps_max_estimate": self.eps_max_estimate if math.isfinite(self.eps_max_estimate) else "inf",
            "n_accepted": self.n_accepted,
            "W0": self.W0,
        }


@dataclass(frozen=True)
class PDPerturbedResult:
    """Outcome of the perturbed primal-dual construction.

    ok means the smallness condition eps*c0*kappa <= min(a1, a2)/2 held
    and a verification pair was built; otherwise the caller should retry
    with epsilon below eps_max_estimate.
    """

    ok: bool
    epsilon: float
    W_epsilon: Callable[[np.ndarray], float]
    estimates: PDConstantEstimates
    pair: LyapunovPair | None
    message: str

    def to_json_dict(self) -> dict:
        return {
            "ok": self.ok,
            "epsilon": self.epsilon,
            "estimates": self.estimates.to_json_dict(),
            "message": self.message,
        }


def pd_perturbed_energy(
    obj: ObjectiveSpec,
    p: PrimalDualParams,
    W0: float | None = None,
    reference: Trajectory | None = None,
    n_samples: int = 10_000,
    seed: int = 0xC0FFEE,
    box_radius: float | None = None,
) -> PDPerturbedResult:
    """W_eps = W + eps*(<x - x_star, grad + A^T lambda> - <lambda - lambda_star, Ax - b>).

    The decay coefficients c1, c2 need sublevel-set constants C_x and
    kappa that have no closed form; they are estimated by rejection
    sampling at least n_samples states of {W <= W0} inside a bounding
    box.  W0 comes from the caller or from the peak of W along a
    reference trajectory.  The emitted pair claims

        dW_eps/dt <= -(c1*N1 + c2*N2)

    encoded with the scaled observables and delta = 1; analytic_Wdot is
    the exact derivative of W_eps, so verification judges the claim
    rather than restating it.
    """
    if obj.gradient_lipschitz_estimate is None:
        raise InvalidInputError(f"objective {obj.name!r} has no gradient_lipschitz_estimate; required here")
    _check_saddle(obj, p)
    n, m = p.n, p.m
    A, b, xs, ls = p.A, p.b, p.x_star, p.lambda_star
    eps = p.epsilon
    eta1, eta2, eta3 = p.young_etas
    lip = obj.gradient_lipschitz_estimate
    phi_star = float(obj.value(xs))

    if W0 is None:
        if reference is None:
            raise InvalidInputError("either W0 or a reference trajectory is required for constant estimation")
        pair_w = pd_energy(obj, p).V1
        W0 = max(float(pair_w(state)) for state in reference.states)
    if not (W0 > 0.0 and math.isfinite(W0)):
        raise InvalidInputError(f"W0 must be positive and finite, got {W0!r}")

    def W(z):
        x = z[:n]
        lam = z[n:]
        rho = A @ x - b
        dl = lam - ls
        return float(obj.value(x)) - phi_star + 0.5 * float(rho @ rho) + 0.5 * float(dl @ dl)

    # rejection-sample the sublevel set {W <= W0}; the lambda radius is
    # implied by the 0.5*||lambda - lambda_star||^2 <= W0 term, the x
    # radius is heuristic and overridable
    r_lam = 1.05 * math.sqrt(2.0 * W0)
    r_x = box_radius if box_radius is not None else 2.0 * max(1.0, math.sqrt(2.0 * (W0 + abs(phi_star))))
    rng = np.random.default_rng(seed)
    accepted = []
    draws = 0
    max_draws = 500 * n_samples
    while len(accepted) < n_samples and draws < max_draws:
        batch = 8192
        xs_batch = xs + rng.uniform(-r_x, r_x, size=(batch, n))
        ls_batch = ls + rng.uniform(-r_lam, r_lam, size=(batch, m))
        draws += batch
        for i in range(batch):
            z = np.concatenate([xs_batch[i], ls_batch[i]])
            if W(z) <= W0:
                accepted.append(z)
                if len(accepted) >= n_samples:
                    break
    if len(accepted) < n_samples:
        raise EvaluationError(
            f"sublevel-set sampling accepted only {len(accepted)} of the required {n_samples} states; "
            "supply a tighter box_radius"
        )

    floor_w = 1e-9 * max(W0, 1.0)
    c_x = 0.0
    kappa = 0.0
    used = 0
    for z in accepted:
        x = z[:n]
        lam = z[n:]
        rho = A @ x - b
        g = np.asarray(obj.gradient(x), dtype=float) + A.T @ lam
        diss = float(rho @ rho) + float(g @ g)
        w_val = W(z)
        # states at (or numerically on) the KKT set carry no ratio information
        if w_val <= floor_w or diss < 1e-15:
            continue
        used += 1
        dx = x - xs
        c_x = max(c_x, float(dx @ dx) / diss)
        kappa = max(kappa, w_val / diss)

    a_norm = float(np.linalg.norm(A, 2))
    c0 = (a_norm**2 / (8.0 * eta1) + lip**2 / (8.0 * eta3)) * c_x + a_norm**2 / (4.0 * eta2)
    a1, a2 = p.a1, p.a2

    eps_caps = []
    for s in (1.0 - 2.0 * eta1, 1.0 - 2.0 * (eta2 + eta3)):
        denom = c0 * kappa - 0.5 * s
        eps_caps.append(math.inf if denom <= 0.0 else 0.5 / denom)
    eps_max = min(eps_caps)

    correction = eps * c0 * kappa
    ok = correction <= 0.5 * min(a1, a2)
    c1 = a1 - correction
    c2 = a2 - correction
    estimates = PDConstantEstimates(
        C_x=c_x,
        kappa=kappa,
        c0=c0,
        a1=a1,
        a2=a2,
        c1=c1,
        c2=c2,
        eps_max_estimate=eps_max,
        n_accepted=used,
        W0=W0,
    )

    def W_eps(z):
        x = z[:n]
        lam = z[n:]
        rho = A @ x - b
        g = np.asarray(obj.gradient(x), dtype=float) + A.T @ lam
        skew = float((x - xs) @ g) - float((lam - ls) @ rho)
        return W(z) + eps * skew

    def wdot_eps(z):
        # exact derivative of W_eps along the flow (x' = -g, lambda' = rho)
        x = z[:n]
        lam = z[n:]
        rho = A @ x - b
        grad_phi = np.asarray(obj.gradient(x), dtype=float)
        g = grad_phi + A.T @ lam
        base = -float((grad_phi + A.T @ rho) @ g) + float((lam - ls) @ rho)
        if eps == 0.0:
            return base
        diss = float(rho @ rho) + float(g @ g)
        hg = np.asarray(obj.hessian_vector_product(x, g), dtype=float)
        skew_dot = -diss + float((x - xs) @ (A.T @ rho)) + float((lam - ls) @ (A @ g)) - float((x - xs) @ hg)
        return base + eps * skew_dot

    if not ok:
        return PDPerturbedResult(
            ok=False,
            epsilon=eps,
            W_epsilon=W_eps,
            estimates=estimates,
            pair=None,
            message=(
                f"smallness condition fails: eps*c0*kappa = {correction:.6g} > min(a1, a2)/2 = "
                f"{0.5 * min(a1, a2):.6g}; retry with epsilon below {eps_max:.6g}"
            ),
        )

    def n1_scaled(z):
        rho = A @ z[:n] - b
        return c1 * float(rho @ rho)

    def n2_scaled(z):
        g = np.asarray(obj.gradient(z[:n]), dtype=float) + A.T @ z[n:]
        return c2 * float(g @ g)

    pair = LyapunovPair(
        V1=W_eps,
        V2=lambda z: 0.0,
        N1=n1_scaled,
        N2=n2_scaled,
        h=lambda r: 0.0,
        analytic_Wdot=wdot_eps,
    )
    return PDPerturbedResult(
        ok=True,
        epsilon=eps,
        W_epsilon=W_eps,
        estimates=estimates,
        pair=pair,
        message="smallness condition holds; coefficients are sampling-based estimates",
    )


def builtin_pd_instance(epsilon: float = 0.0, young_etas: tuple = (0.25, 0.25, 0.25)):
    """The bundled equality-constrained quadratic: minimize 0.5*||x||^2
    subject to x1 + x2 = 1, whose unique saddle is ((0.5, 0.5), -0.5)."""
    obj = builtin_objectives()["quad_iso"]
    params = PrimalDualParams(
        A=[[1.0, 1.0]],
        b=[1.0],
        x_star=[0.5, 0.5],
        lambda_star=[-0.5],
        epsilon=epsilon,
        young_etas=young_etas,
    )
    return obj, params
