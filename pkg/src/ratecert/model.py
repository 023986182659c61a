"""Function classes, algorithm families, and trajectory simulation.

An iterative first-order method is represented in state-space form

    state_{k+1} = A state_k + B grad f(y_k),   y_k = C state_k,
    x_k = E state_k,

where A, B, C, E carry a Kronecker structure M = Mbar (x) I_d.  Only the
reduced (d-independent) matrices Mbar are ever materialized; a state is
stored as an (n, d) array whose rows are the d-dimensional blocks, so one
simulation step is two small matrix products regardless of the problem
dimension d.

Families keep their reduced matrices as polynomials in the named tuning
parameters; numeric matrices are evaluations of those polynomials, so the
numeric and symbolic views agree exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .linalg import SymMatrix
from .poly import Polynomial

_P = Polynomial


class UnknownFamily(ValueError):
    """Requested builtin family name is not recognized."""


class DivergenceError(RuntimeError):
    """A simulated trajectory exceeded the instability norm bound."""


class DimensionError(ValueError):
    pass


DIVERGENCE_NORM = 1e12


@dataclass(frozen=True)
class FunctionClass:
    """Strongly convex smooth function class with moduli 0 < m_f <= L_f."""

    m_f: float
    L_f: float

    def __post_init__(self):
        if not (0 < self.m_f <= self.L_f):
            raise ValueError(f"need 0 < m_f <= L_f, got ({self.m_f}, {self.L_f})")

    @property
    def kappa(self) -> float:
        return self.L_f / self.m_f

    def condition_number(self) -> float:
        return self.kappa

    def normalized(self) -> "FunctionClass":
        """The class rescaled to unit strong convexity, (1, kappa)."""
        return FunctionClass(1.0, self.kappa)


def qf_matrix(fc: FunctionClass) -> SymMatrix:
    """The indefinite 2x2 quadratic-constraint matrix of the class (reduced)."""
    m, L = fc.m_f, fc.L_f
    return SymMatrix([[-2.0 * m * L, m + L], [m + L, -2.0]])


def _poly_table(rows: Sequence[Sequence]) -> tuple[tuple[Polynomial, ...], ...]:
    return tuple(tuple(Polynomial.coerce(e) for e in row) for row in rows)


@dataclass(frozen=True)
class AlgorithmFamily:
    """Parameterized family of first-order methods in reduced state space.

    The four matrix tables hold Polynomial entries in ``param_names``; they
    are the single source of truth for both the symbolic and the numeric
    view of the family.
    """

    name: str
    param_names: tuple[str, ...]
    A: tuple[tuple[Polynomial, ...], ...]
    B: tuple[tuple[Polynomial, ...], ...]
    C: tuple[tuple[Polynomial, ...], ...]
    E: tuple[tuple[Polynomial, ...], ...]

    @property
    def n_state(self) -> int:
        return len(self.A)

    def theta_dict(self, theta) -> dict[str, float]:
        if isinstance(theta, Mapping):
            missing = [p for p in self.param_names if p not in theta]
            if missing:
                raise ValueError(f"missing parameters {missing}")
            return {p: float(theta[p]) for p in self.param_names}
        theta = tuple(np.atleast_1d(np.asarray(theta, dtype=float)))
        if len(theta) != len(self.param_names):
            raise ValueError(
                f"{self.name} expects {len(self.param_names)} parameters "
                f"{self.param_names}, got {len(theta)}"
            )
        return dict(zip(self.param_names, (float(t) for t in theta)))

    def matrices(self, theta) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Reduced (A, B, C, E) evaluated at a parameter assignment."""
        point = self.theta_dict(theta)

        def ev(table):
            return np.array([[p.evaluate(point) for p in row] for row in table])

        return ev(self.A), ev(self.B), ev(self.C), ev(self.E)

    def symbolic(self):
        return self.A, self.B, self.C, self.E

    def to_json(self) -> str:
        def table(t):
            return [[p.to_text() for p in row] for row in t]

        return json.dumps(
            {
                "name": self.name,
                "params": list(self.param_names),
                "matrices": {
                    "A": table(self.A),
                    "B": table(self.B),
                    "C": table(self.C),
                    "E": table(self.E),
                },
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "AlgorithmFamily":
        data = json.loads(text)

        def table(rows):
            return _poly_table([[Polynomial.from_text(e) for e in row] for row in rows])

        m = data["matrices"]
        return cls(
            name=data["name"],
            param_names=tuple(data["params"]),
            A=table(m["A"]),
            B=table(m["B"]),
            C=table(m["C"]),
            E=table(m["E"]),
        )


def builtin_family(kind: str) -> AlgorithmFamily:
    """One of the shipped families: gradient, heavy_ball, nesterov,
    general_three_param.

    ``general_three_param`` is the two-sequence recursion

        x_{k+1} = x_k + beta (x_k - x_{k-1}) - h grad f(y_k)
        y_k     = x_k + gamma (x_k - x_{k-1})

    with state (x_{k-1}, x_k).  ``nesterov`` pins gamma = beta.
    ``heavy_ball`` applies its momentum weight in the state update and
    evaluates the gradient at y_k = x_k; the conventional tables for it
    name that momentum weight gamma (with beta = 0) even though it plays
    the state-update role, so this family exposes parameters (h, gamma)
    with gamma multiplying (x_k - x_{k-1}) in the update.
    """
    h = _P.variable("h")
    beta = _P.variable("beta")
    gamma = _P.variable("gamma")
    one = _P.constant(1.0)
    zero = _P.constant(0.0)

    if kind == "gradient":
        return AlgorithmFamily(
            name="gradient",
            param_names=("h",),
            A=_poly_table([[one]]),
            B=_poly_table([[-h]]),
            C=_poly_table([[one]]),
            E=_poly_table([[one]]),
        )
    if kind == "general_three_param":
        return AlgorithmFamily(
            name="general_three_param",
            param_names=("h", "beta", "gamma"),
            A=_poly_table([[zero, one], [-beta, beta + 1.0]]),
            B=_poly_table([[zero], [-h]]),
            C=_poly_table([[-gamma, gamma + 1.0]]),
            E=_poly_table([[zero, one]]),
        )
    if kind == "nesterov":
        return AlgorithmFamily(
            name="nesterov",
            param_names=("h", "beta"),
            A=_poly_table([[zero, one], [-beta, beta + 1.0]]),
            B=_poly_table([[zero], [-h]]),
            C=_poly_table([[-beta, beta + 1.0]]),
            E=_poly_table([[zero, one]]),
        )
    if kind == "heavy_ball":
        return AlgorithmFamily(
            name="heavy_ball",
            param_names=("h", "gamma"),
            A=_poly_table([[zero, one], [-gamma, gamma + 1.0]]),
            B=_poly_table([[zero], [-h]]),
            C=_poly_table([[zero, one]]),
            E=_poly_table([[zero, one]]),
        )
    raise UnknownFamily(f"unknown family kind {kind!r}")


def default_param_box(
    family: AlgorithmFamily, fc: FunctionClass, slack: float = 0.0
) -> dict[str, tuple[float, float]]:
    """Default compact tuning box: h in [0, 2/L_f]*(1+slack), weights in [0,1]."""
    box: dict[str, tuple[float, float]] = {}
    for p in family.param_names:
        if p == "h":
            box[p] = (0.0, 2.0 / fc.L_f * (1.0 + slack))
        else:
            box[p] = (0.0, 1.0)
    return box


# ---------------------------------------------------------------------------
# synthetic problem instances


class QuadraticProblem:
    """Random quadratic with Hessian spectrum inside [m_f, L_f] (endpoints hit)."""

    def __init__(self, fc: FunctionClass, dim: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        eigs = np.empty(dim)
        eigs[0] = fc.m_f
        eigs[-1] = fc.L_f
        if dim > 2:
            eigs[1:-1] = rng.uniform(fc.m_f, fc.L_f, size=dim - 2)
        if dim == 1:
            eigs[0] = fc.L_f
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        self.fc = fc
        self.dim = dim
        self.hessian = q @ np.diag(eigs) @ q.T
        self.hessian = 0.5 * (self.hessian + self.hessian.T)
        self.x_star = rng.standard_normal(dim)
        self.f_star = 0.0

    def f(self, x: np.ndarray) -> float:
        d = np.asarray(x) - self.x_star
        return 0.5 * float(d @ self.hessian @ d)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.hessian @ (np.asarray(x) - self.x_star)


class ScaledQuadratic1D:
    """f(x) = c/2 x^2 in one dimension; handy for closed-form checks."""

    def __init__(self, curvature: float):
        self.dim = 1
        self.curvature = float(curvature)
        self.x_star = np.zeros(1)
        self.f_star = 0.0

    def f(self, x) -> float:
        return 0.5 * self.curvature * float(np.asarray(x) ** 2)

    def grad(self, x) -> np.ndarray:
        return self.curvature * np.asarray(x, dtype=float).reshape(1)


class LogSumExpProblem:
    """log-sum-exp plus (m_f/2)||x||^2, a certified non-quadratic class member.

    The log-sum-exp Hessian is bounded by lmax(A^T A); the row matrix is
    rescaled so that m_f + lmax(A^T A) equals L_f exactly, which certifies
    membership in the class.  The minimizer is found by Newton's method.
    """

    def __init__(self, fc: FunctionClass, dim: int, seed: int = 0, terms: int | None = None):
        rng = np.random.default_rng(seed)
        k = terms or 2 * dim + 2
        a = rng.standard_normal((k, dim))
        lam = float(np.linalg.eigvalsh(a.T @ a)[-1])
        if fc.L_f > fc.m_f:
            a *= np.sqrt((fc.L_f - fc.m_f) / lam)
        else:
            a *= 0.0
        self.fc = fc
        self.dim = dim
        self.A = a
        self.b = rng.standard_normal(k)
        self.x_star = self._newton(np.zeros(dim))
        self.f_star = self._value(self.x_star)

    def _softmax(self, x):
        z = self.A @ x + self.b
        z = z - z.max()
        p = np.exp(z)
        return p / p.sum()

    def _value(self, x) -> float:
        z = self.A @ x + self.b
        zmax = z.max()
        lse = zmax + np.log(np.exp(z - zmax).sum())
        return float(lse + 0.5 * self.fc.m_f * (x @ x))

    def f(self, x) -> float:
        return self._value(np.asarray(x, dtype=float))

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.A.T @ self._softmax(x) + self.fc.m_f * x

    def _hessian(self, x) -> np.ndarray:
        p = self._softmax(x)
        ap = self.A * p[:, None]
        h = self.A.T @ ap - np.outer(self.A.T @ p, self.A.T @ p)
        return h + self.fc.m_f * np.eye(self.dim)

    def _newton(self, x0) -> np.ndarray:
        x = x0.copy()
        for _ in range(80):
            g = self.grad(x)
            if np.linalg.norm(g) < 1e-14 * max(1.0, self.fc.L_f):
                break
            x = x - np.linalg.solve(self._hessian(x), g)
        return x


def random_problem(fc: FunctionClass, dim: int, seed: int, kind: str = "quadratic"):
    if kind == "quadratic":
        return QuadraticProblem(fc, dim, seed=seed)
    if kind == "logsumexp":
        return LogSumExpProblem(fc, dim, seed=seed)
    raise ValueError(f"unknown problem kind {kind!r}")


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class Trajectory:
    """States and outputs of a simulated run; lengths all equal K+1."""

    states: np.ndarray  # (K+1, n, d)
    outputs_y: np.ndarray  # (K+1, d)
    outputs_x: np.ndarray  # (K+1, d)
    objective_gaps: np.ndarray  # (K+1,)

    def __post_init__(self):
        k = len(self.states)
        if not (len(self.outputs_y) == len(self.outputs_x) == len(self.objective_gaps) == k):
            raise DimensionError("trajectory sequences have mismatched lengths")
        if self.objective_gaps.min(initial=0.0) < -1e-12:
            raise ValueError("objective gaps fell below the optimum")

    def __len__(self) -> int:
        return len(self.states)


def simulate(family: AlgorithmFamily, theta, problem, xi0, steps: int) -> Trajectory:
    """Run the family for ``steps`` iterations on a problem instance.

    ``xi0`` is the initial state, shaped (n, d) or flat of length n*d.
    Raises DivergenceError when any state norm exceeds 1e12 (the tuning is
    unstable; this is a property of the run, not a failure of the code).
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    a, b, c, e = family.matrices(theta)
    n = family.n_state
    d = problem.dim
    xi = np.asarray(xi0, dtype=float).reshape(n, d)

    states = np.empty((steps + 1, n, d))
    ys = np.empty((steps + 1, d))
    xs = np.empty((steps + 1, d))
    gaps = np.empty(steps + 1)
    for k in range(steps + 1):
        states[k] = xi
        y = (c @ xi)[0]
        x = (e @ xi)[0]
        ys[k] = y
        xs[k] = x
        gaps[k] = problem.f(x) - problem.f_star
        if k == steps:
            break
        g = problem.grad(y).reshape(1, d)
        xi = a @ xi + b @ g
        if np.linalg.norm(xi) > DIVERGENCE_NORM:
            raise DivergenceError(f"state norm exceeded {DIVERGENCE_NORM:.0e} at step {k + 1}")
    gaps = np.where((gaps < 0) & (gaps > -1e-12), 0.0, gaps)
    return Trajectory(states=states, outputs_y=ys, outputs_x=xs, objective_gaps=gaps)


def fixed_point_state(family: AlgorithmFamily, x_star: np.ndarray) -> np.ndarray:
    """The stationary state (x*, ..., x*) of every shipped family."""
    x_star = np.asarray(x_star, dtype=float)
    return np.tile(x_star, (family.n_state, 1))


def lyapunov_values(traj: Trajectory, p_reduced, fixed_point: np.ndarray) -> np.ndarray:
    """V_k = objective gap + (state error)^T (P (x) I_d) (state error).

    ``p_reduced`` is the reduced Lyapunov weight; the Kronecker form is
    evaluated as trace(D^T P D) on the (n, d)-shaped state error D.
    """
    p = np.asarray(p_reduced, dtype=float)
    n = traj.states.shape[1]
    if p.shape != (n, n):
        raise DimensionError(f"P has shape {p.shape}, expected ({n}, {n})")
    ref = np.asarray(fixed_point, dtype=float).reshape(traj.states.shape[1:])
    out = np.empty(len(traj))
    for k in range(len(traj)):
        diff = traj.states[k] - ref
        out[k] = traj.objective_gaps[k] + float(np.sum(diff * (p @ diff)))
    return out
