"""Assembly of the Lyapunov decrease matrix and certificate checking.

For a family with reduced matrices (A, B, C, E) and a function class
(m_f, L_f), exponential decrease of

    V_k = f(x_k) - f(x*) + (state error)^T (P (x) I_d) (state error)

at rate rho is implied by M(theta, rho, lambda, P) <= 0, where

    M = M0 + rho^2 M1 + (1 - rho^2) M2 + lambda M3,
    M0 = [A B]^T P [A B] - rho^2 [[P, 0], [0, 0]],
    M1 = N1 + N2,   M2 = N1 + N3,   M3 = [C 0; 0 1]^T Q_f [C 0; 0 1],

with N1, N2, N3 the three-factor products built from the smoothness and
strong-convexity inequalities (middle factors L_f/2, +-1/2, -m_f/2) and
Q_f the indefinite class matrix.  M3 is kept in its Q_f-scaled form - the
normalized variant (divided by 2(m_f+L_f)) only rescales the multiplier
lambda and certifies exactly the same rates.

Everything here is assembled in reduced dimension (n+1 where n is the
reduced state size); the full d-dimensional inequality is the Kronecker
expansion and never needs to be formed.  The numeric path is plain numpy
(it sits inside the bisection loop); the symbolic path mirrors it with
Polynomial entries and the two agree to machine precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import poly as pl
from .linalg import DimensionError, SymMatrix, eigenvalues
from .model import (
    AlgorithmFamily,
    FunctionClass,
    fixed_point_state,
    lyapunov_values,
    qf_matrix,
    random_problem,
    simulate,
)
from .poly import Polynomial, PolyMatrix


class UnsupportedFamily(ValueError):
    """The family does not expose the requested indeterminates."""


@dataclass(frozen=True)
class CertificateProblem:
    family: AlgorithmFamily
    fc: FunctionClass

    @property
    def n_state(self) -> int:
        return self.family.n_state


@dataclass(frozen=True)
class Certificate:
    """A rate certificate (rho, P, lambda) with its feasibility margin.

    ``margin`` is minus the maximum eigenvalue of the assembled M; a
    nonnegative margin means the decrease inequality holds at this point.
    """

    rho: float
    P_reduced: SymMatrix
    lam: float
    margin: float

    def __post_init__(self):
        if not (-1e-12 <= self.rho <= 1.0 + 1e-12):
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if self.lam < -1e-12:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")

    def to_json(self, prob: CertificateProblem | None = None, theta=None) -> str:
        p = self.P_reduced.entries
        n = self.P_reduced.dim
        upper = [p[i][j] for i in range(n) for j in range(i, n)]
        data = {
            "rho": self.rho,
            "lambda": self.lam,
            "P_upper": upper,
            "margin": self.margin,
        }
        if prob is not None:
            data["family"] = prob.family.name
            data["m_f"] = prob.fc.m_f
            data["L_f"] = prob.fc.L_f
            if theta is not None:
                data["theta"] = prob.family.theta_dict(theta)
        return json.dumps(data, indent=2)


def _pvar(i: int, j: int) -> str:
    return f"p_{min(i, j) + 1}{max(i, j) + 1}"


def p_entry_names(n: int) -> list[str]:
    return [_pvar(i, j) for i in range(n) for j in range(i, n)]


# ---------------------------------------------------------------------------
# numeric assembly


def numeric_components(prob: CertificateProblem, theta):
    """(AB, M1, M2, M3) at a parameter point, as dense arrays.

    M(theta, rho2, lam, P) = AB^T P AB - rho2 embed(P)
                             + rho2 M1 + (1 - rho2) M2 + lam M3.
    """
    a, b, c, e = prob.family.matrices(theta)
    m, L = prob.fc.m_f, prob.fc.L_f
    n = prob.n_state

    ab = np.hstack([a, b])
    f1 = np.zeros((2, n + 1))
    f1[0, :n] = (e @ a - c)[0]
    f1[0, n] = (e @ b)[0, 0]
    f1[1, n] = 1.0
    f2 = np.zeros((2, n + 1))
    f2[0, :n] = (c - e)[0]
    f2[1, n] = 1.0
    f3 = np.zeros((2, n + 1))
    f3[0, :n] = c[0]
    f3[1, n] = 1.0

    mid_smooth = np.array([[L / 2.0, 0.5], [0.5, 0.0]])
    mid_strong = np.array([[-m / 2.0, 0.5], [0.5, 0.0]])
    qf = qf_matrix(prob.fc).entries

    n1 = f1.T @ mid_smooth @ f1
    n2 = f2.T @ mid_strong @ f2
    n3 = f3.T @ mid_strong @ f3
    m3 = f3.T @ qf @ f3
    return ab, n1 + n2, n1 + n3, m3


def assemble(components, rho2: float, lam: float, p: np.ndarray) -> np.ndarray:
    ab, m1, m2, m3 = components
    n = p.shape[0]
    m = ab.T @ p @ ab
    m[:n, :n] -= rho2 * p
    m += rho2 * m1 + (1.0 - rho2) * m2 + lam * m3
    return 0.5 * (m + m.T)


def build_numeric(
    prob: CertificateProblem, theta, rho2: float, lam: float, P
) -> SymMatrix:
    """Evaluate M at numeric (theta, rho^2, lambda, P) in reduced dimension."""
    if not (-1e-12 <= rho2 <= 1.0 + 1e-12):
        raise ValueError(f"rho2 must lie in [0, 1], got {rho2}")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    n = prob.n_state
    p = np.asarray(P, dtype=float)
    if p.shape != (n, n):
        raise DimensionError(f"P has shape {p.shape}, expected ({n}, {n})")
    return SymMatrix(assemble(numeric_components(prob, theta), rho2, lam, p))


def affine_parts(prob: CertificateProblem, theta, rho2: float, components=None):
    """Decompose M = M_const + sum_{i<=j} P_ij G_ij + lambda G_lam.

    M is affine in (P, lambda) for fixed (theta, rho2); G_ij is the
    coefficient of the symmetric basis element at (i, j).
    """
    comp = components if components is not None else numeric_components(prob, theta)
    ab, m1, m2, m3 = comp
    n = prob.n_state
    m_const = rho2 * m1 + (1.0 - rho2) * m2
    g_p = {}
    for i in range(n):
        for j in range(i, n):
            basis = np.zeros((n, n))
            basis[i, j] = basis[j, i] = 1.0
            g = ab.T @ basis @ ab
            g[:n, :n] -= rho2 * basis
            g_p[(i, j)] = 0.5 * (g + g.T)
    return 0.5 * (m_const + m_const.T), g_p, m3


# ---------------------------------------------------------------------------
# symbolic assembly


def _three_factor(factor, mid):
    ft = pl.mat_transpose(factor)
    return pl.mat_mul(pl.mat_mul(ft, mid), factor)


def _component_tables(a, b, c, e, fc: FunctionClass):
    """M1, M2, M3 as list-of-lists with Polynomial entries."""
    m, L = fc.m_f, fc.L_f
    n = len(a)
    one = Polynomial.constant(1.0)
    zero = Polynomial.constant(0.0)

    ea = pl.mat_mul(e, a)
    eb = pl.mat_mul(e, b)
    f1 = [
        [ea[0][j] - Polynomial.coerce(c[0][j]) for j in range(n)] + [eb[0][0]],
        [zero] * n + [one],
    ]
    f2 = [
        [Polynomial.coerce(c[0][j]) - Polynomial.coerce(e[0][j]) for j in range(n)] + [zero],
        [zero] * n + [one],
    ]
    f3 = [list(c[0]) + [zero], [zero] * n + [one]]

    mid_smooth = [[Polynomial.constant(L / 2.0), Polynomial.constant(0.5)],
                  [Polynomial.constant(0.5), zero]]
    mid_strong = [[Polynomial.constant(-m / 2.0), Polynomial.constant(0.5)],
                  [Polynomial.constant(0.5), zero]]
    qf = qf_matrix(fc).entries
    mid_qf = [[Polynomial.constant(qf[0, 0]), Polynomial.constant(qf[0, 1])],
              [Polynomial.constant(qf[1, 0]), Polynomial.constant(qf[1, 1])]]

    n1 = _three_factor(f1, mid_smooth)
    n2 = _three_factor(f2, mid_strong)
    n3 = _three_factor(f3, mid_strong)
    m3 = _three_factor(f3, mid_qf)
    q = n + 1
    m1 = [[n1[i][j] + n2[i][j] for j in range(q)] for i in range(q)]
    m2 = [[n1[i][j] + n3[i][j] for j in range(q)] for i in range(q)]
    return m1, m2, m3


def build_symbolic(
    prob: CertificateProblem,
    unknowns: Sequence[str],
    theta: Mapping[str, float] | None = None,
    rho2: float | None = None,
    lam: float | None = None,
    P=None,
) -> PolyMatrix:
    """M with Polynomial entries over the requested indeterminates.

    ``unknowns`` may contain family parameter names, ``rho2``, ``lambda``,
    and the P-entry names ``p_11``, ``p_12``, ...; whatever is not an
    indeterminate must be supplied as a numeric value.  Evaluating the
    result at a point reproduces :func:`build_numeric` to 1e-12.
    """
    fam = prob.family
    n = prob.n_state
    pnames = p_entry_names(n)
    valid = set(fam.param_names) | {"rho2", "lambda"} | set(pnames)
    for u in unknowns:
        if u not in valid:
            raise UnsupportedFamily(
                f"{fam.name} has no indeterminate {u!r}; valid: {sorted(valid)}"
            )
    unknowns = set(unknowns)

    def value_or_var(name: str, value):
        if name in unknowns:
            return Polynomial.variable(name)
        if value is None:
            raise ValueError(f"{name} is not an indeterminate; a value is required")
        return Polynomial.constant(float(value))

    theta = dict(theta or {})
    a, b, c, e = (list(map(list, t)) for t in fam.symbolic())
    for pname in fam.param_names:
        if pname in unknowns:
            continue
        if pname not in theta:
            raise ValueError(f"parameter {pname!r} needs a value")
        for tbl in (a, b, c, e):
            for row in tbl:
                for j, entry in enumerate(row):
                    row[j] = entry.substitute(pname, float(theta[pname]))

    rho2p = value_or_var("rho2", rho2)
    lamp = value_or_var("lambda", lam)
    if P is not None:
        parr = np.asarray(P, dtype=float)
        p_table = [[Polynomial.constant(parr[i, j]) for j in range(n)] for i in range(n)]
    else:
        p_table = [[Polynomial.variable(_pvar(i, j)) for j in range(n)] for i in range(n)]
        if not unknowns.issuperset(pnames):
            raise ValueError("either pass P values or declare all p_ij as unknowns")

    ab = [list(ra) + list(rb) for ra, rb in zip(a, b)]
    m0 = pl.mat_mul(pl.mat_mul(pl.mat_transpose(ab), p_table), ab)
    for i in range(n):
        for j in range(n):
            m0[i][j] = m0[i][j] - rho2p * p_table[i][j]

    m1, m2, m3 = _component_tables(a, b, c, e, prob.fc)
    q = n + 1
    one = Polynomial.constant(1.0)
    entries = [
        [
            m0[i][j] + rho2p * m1[i][j] + (one - rho2p) * m2[i][j] + lamp * m3[i][j]
            for j in range(q)
        ]
        for i in range(q)
    ]
    return PolyMatrix(entries)


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class VerifyReport:
    passed: bool
    numeric_max_eig: float
    worst_decrease_violation: float
    worst_bound_violation: float
    trials: int

    def summary(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"{status}: max_eig(M)={self.numeric_max_eig:.3e}, "
            f"worst decrease violation={self.worst_decrease_violation:.3e}, "
            f"worst bound violation={self.worst_bound_violation:.3e} "
            f"({self.trials} trials)"
        )


def verify_certificate(
    prob: CertificateProblem,
    theta,
    cert: Certificate,
    trials: int = 20,
    steps: int = 200,
    dim: int = 6,
    seed: int = 1234,
) -> VerifyReport:
    """Check a certificate numerically and against simulated trajectories.

    Numeric check: M evaluated at the certificate must satisfy -M >= -1e-8.
    Empirical check: on random class members (quadratics and log-sum-exp
    instances) the Lyapunov sequence must satisfy
    V_{k+1} <= rho^2 V_k + 1e-8 max(1, V_k) and the objective gap must stay
    below rho^{2k} V_0 (1 + 1e-6).  Failures are reported in-band, not
    raised: a certificate that fails is a result, not an error.  Note the
    objective gaps themselves need not decrease monotonically (momentum
    methods overshoot); only the Lyapunov values must.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rho2 = cert.rho**2
    m = build_numeric(prob, theta, rho2, cert.lam, cert.P_reduced)
    max_eig = float(eigenvalues(m)[-1])
    ok = max_eig <= 1e-8

    p = cert.P_reduced.entries
    worst_dec = 0.0
    worst_bound = 0.0
    for t in range(trials):
        kind = "quadratic" if t % 2 == 0 else "logsumexp"
        d = dim if kind == "quadratic" else max(2, dim // 2)
        problem = random_problem(prob.fc, d, seed=seed + t, kind=kind)
        rng = np.random.default_rng(seed + 10_000 + t)
        xi0 = problem.x_star + rng.standard_normal((prob.n_state, d))
        traj = simulate(prob.family, theta, problem, xi0, steps)
        v = lyapunov_values(traj, p, fixed_point_state(prob.family, problem.x_star))
        dec = v[1:] - rho2 * v[:-1] - 1e-8 * np.maximum(1.0, v[:-1])
        worst_dec = max(worst_dec, float(dec.max(initial=0.0)))
        bound = rho2 ** np.arange(len(traj)) * v[0] * (1.0 + 1e-6)
        worst_bound = max(worst_bound, float((traj.objective_gaps - bound).max(initial=0.0)))
    ok = ok and worst_dec <= 0.0 and worst_bound <= 0.0
    return VerifyReport(
        passed=ok,
        numeric_max_eig=max_eig,
        worst_decrease_violation=worst_dec,
        worst_bound_violation=worst_bound,
        trials=trials,
    )
