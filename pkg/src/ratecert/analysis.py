"""Rate certification for a fixed tuning: bisection over rho^2.

For fixed algorithm parameters the decrease inequality M <= 0 is affine in
(lambda, P), so feasibility at a given rho^2 is one small SDP and the
smallest certifiable rho^2 is found by bisection on [0, 1] (the feasible
set in rho^2 is an interval reaching up to 1).  Each bisection step solves

    minimize   lambda + tr(P)
    subject to -M(theta, rho^2, lambda, P) >= strict * I,
               P >= 0, lambda >= 0,

whose bounded objective keeps the iterates small; the tiny strictness
offset keeps decisions stable between neighbouring bisection steps.
Matrix-scale normalization is applied row-wise so condition numbers up to
10^3 stay well inside the solver's comfort zone.

Rates depend on the function class only through its condition number, so
the search runs on the normalized class (1, kappa) with the stepsize
mapped by h -> h * m_f (valid whenever the gradient enters through B
linearly in h, which holds for every shipped family); this makes the
certified rate exactly scale invariant.  The certificate itself is
re-solved once in original units at the final rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .certificate import (
    Certificate,
    CertificateProblem,
    affine_parts,
    assemble,
    numeric_components,
)
from .linalg import SymMatrix, eigenvalues
from .model import FunctionClass


class NeverFeasible(RuntimeError):
    """No rate up to rho = 1 is certifiable for this tuning."""


class SolverFailure(RuntimeError):
    """An SDP subproblem failed; carries the offending rho^2."""

    def __init__(self, rho2: float, status):
        super().__init__(f"SDP feasibility failed at rho2={rho2} ({status})")
        self.rho2 = rho2
        self.status = status


@dataclass(frozen=True)
class AnalysisResult:
    rho_star: float
    certificate: Certificate
    bisection_trace: tuple  # (rho2, feasible, margin) triples
    iterations: int
    verify_report: object | None = field(default=None, compare=False)

    def to_dict(self, prob: CertificateProblem | None = None, theta=None) -> dict:
        p = self.certificate.P_reduced.entries
        n = self.certificate.P_reduced.dim
        data = {
            "rho": self.rho_star,
            "rho_squared": self.rho_star**2,
            "lambda": self.certificate.lam,
            "P_upper": [p[i][j] for i in range(n) for j in range(i, n)],
            "margin": self.certificate.margin,
            "iterations": self.iterations,
            "bisection_trace": [
                {"rho2": r, "feasible": f, "margin": m}
                for (r, f, m) in self.bisection_trace
            ],
        }
        if prob is not None:
            data["family"] = prob.family.name
            data["m_f"] = prob.fc.m_f
            data["L_f"] = prob.fc.L_f
            if theta is not None:
                data["theta"] = prob.family.theta_dict(theta)
        if self.verify_report is not None:
            data["verification"] = {
                "passed": self.verify_report.passed,
                "numeric_max_eig": self.verify_report.numeric_max_eig,
                "worst_decrease_violation": self.verify_report.worst_decrease_violation,
                "worst_bound_violation": self.verify_report.worst_bound_violation,
            }
        return data


DEFAULT_STRICT = 1e-9
MARGIN_TOL = 1e-9


def _theta_admissible(prob: CertificateProblem, theta) -> dict:
    td = prob.family.theta_dict(theta)
    for name, val in td.items():
        if val < 0:
            raise ValueError(f"parameter {name} must be nonnegative, got {val}")
    return td


def _feasibility_sdp(m_const, g_p, g_lam, n: int, strict: float):
    """min lambda + tr(P) s.t. Z = -M - strict*I >= 0, blocks (P, lambda, Z)."""
    q = m_const.shape[0]
    scale = max(
        1.0,
        float(np.abs(m_const).max()),
        float(np.abs(g_lam).max()),
        max(float(np.abs(g).max()) for g in g_p.values()),
    )
    inv = 1.0 / scale
    bld = sdp.SdpBuilder([n, 1, q], n_con=q * (q + 1) // 2)
    con = 0
    for a in range(q):
        for b in range(a, q):
            bld.add_entry(con, 2, a, b, 1.0 if a == b else 0.5)
            for (i, j), g in g_p.items():
                coef = g[a, b] * inv
                if coef:
                    bld.add_entry(con, 0, i, j, coef if i == j else coef / 2.0)
            if g_lam[a, b]:
                bld.add_entry(con, 1, 0, 0, g_lam[a, b] * inv)
            bld.set_rhs(con, -m_const[a, b] * inv - (strict if a == b else 0.0))
            con += 1
    for i in range(n):
        bld.add_objective(0, i, i, 1.0)
    bld.add_objective(1, 0, 0, 1.0)
    return bld.build()


def _solve_feasibility(prob, theta, rho2, components, strict=DEFAULT_STRICT):
    """Returns (feasible, lam, P, margin, status); margin is recomputed from
    the assembled matrix, not trusted from the solver."""
    m_const, g_p, g_lam = affine_parts(prob, theta, rho2, components)
    problem = _feasibility_sdp(m_const, g_p, g_lam, prob.n_state, strict)
    sol = sdp.solve(problem)
    if sol.status in (sdp.Status.NUMERICAL_FAILURE, sdp.Status.ITER_LIMIT):
        sol = sdp.solve(
            problem, sdp.SolveOptions(tol_feas=1e-6, tol_gap=1e-6, tol_inf=1e-6)
        )
    if sol.status == sdp.Status.OPTIMAL:
        p_mat = 0.5 * (sol.X[0] + sol.X[0].T)
        lam = max(0.0, float(sol.X[1][0, 0]))
        m = assemble(components, rho2, lam, p_mat)
        margin = -float(eigenvalues(SymMatrix(m, sym_tol=1e-6))[-1])
        return True, lam, p_mat, margin, sol.status
    if sol.status == sdp.Status.INFEASIBLE:
        return False, None, None, -np.inf, sol.status
    return False, None, None, -np.inf, sol.status


def _normalized(prob: CertificateProblem, theta):
    """Rescale to the class (1, kappa) via h -> h*m_f when that transform is
    structurally valid; otherwise return the inputs unchanged."""
    fc = prob.fc
    if fc.m_f == 1.0:
        return prob, prob.family.theta_dict(theta)
    fam = prob.family
    if "h" not in fam.param_names:
        return prob, fam.theta_dict(theta)
    a, b, c, e = fam.symbolic()
    for tbl in (a, c, e):
        if any(p.degree_in("h") > 0 for row in tbl for p in row):
            return prob, fam.theta_dict(theta)
    for row in b:
        for p in row:
            if p.degree_in("h") > 0 and p.coefficient({}) != 0.0:
                return prob, fam.theta_dict(theta)
            if p.degree_in("h") > 1:
                return prob, fam.theta_dict(theta)
    td = fam.theta_dict(theta)
    td["h"] = td["h"] * fc.m_f
    return CertificateProblem(fam, fc.normalized()), td


def feasibility_at(
    prob: CertificateProblem,
    theta,
    rho2: float,
    strict: float = DEFAULT_STRICT,
    margin_tol: float = MARGIN_TOL,
):
    """One SDP feasibility query of the decrease inequality at fixed rho^2.

    Returns (feasible, certificate-or-None).  Solver breakdowns that
    survive a retry are raised as SolverFailure.
    """
    if not (0.0 <= rho2 <= 1.0):
        raise ValueError(f"rho2 must lie in [0, 1], got {rho2}")
    _theta_admissible(prob, theta)
    comp = numeric_components(prob, theta)
    ok, lam, p_mat, margin, status = _solve_feasibility(prob, theta, rho2, comp, strict)
    if not ok and status not in (sdp.Status.INFEASIBLE, sdp.Status.OPTIMAL):
        raise SolverFailure(rho2, status)
    if not ok or margin < -margin_tol:
        return False, None
    cert = Certificate(
        rho=float(np.sqrt(rho2)),
        P_reduced=SymMatrix(p_mat, sym_tol=1e-6),
        lam=lam,
        margin=margin,
    )
    return True, cert


def certify_rate(
    prob: CertificateProblem,
    theta,
    eps: float = 1e-4,
    strict: float = DEFAULT_STRICT,
) -> AnalysisResult:
    """Smallest certifiable rho via bisection on rho^2 in [0, 1].

    Raises NeverFeasible when even rho = 1 admits no certificate.  The
    returned rho_star is feasible; rho_star^2 - eps is infeasible (or the
    bracket has collapsed onto 0).  A failed SDP at one midpoint counts as
    infeasible for that midpoint (conservative: it can only increase the
    reported rate, never produce an unsound certificate).
    """
    if not (0.0 < eps <= 1.0):
        raise ValueError("eps must lie in (0, 1]")
    _theta_admissible(prob, theta)
    nprob, ntheta = _normalized(prob, theta)
    comp = numeric_components(nprob, ntheta)

    trace = []
    ok, lam, p_mat, margin, status = _solve_feasibility(nprob, ntheta, 1.0, comp, strict)
    trace.append((1.0, bool(ok and margin >= -MARGIN_TOL), margin))
    iterations = 1
    if not ok or margin < -MARGIN_TOL:
        raise NeverFeasible(
            f"decrease inequality infeasible even at rho=1 (status {status})"
        )

    lo, hi = 0.0, 1.0
    while hi - lo > eps:
        mid = 0.5 * (lo + hi)
        ok, lam_m, p_m, margin_m, _ = _solve_feasibility(nprob, ntheta, mid, comp, strict)
        feas = bool(ok and margin_m >= -MARGIN_TOL)
        trace.append((mid, feas, margin_m))
        iterations += 1
        if feas:
            hi = mid
        else:
            lo = mid

    # final certificate in original units; nudge up by eps if the exact
    # endpoint is too close to the boundary for a clean solve
    comp_orig = numeric_components(prob, theta)
    cert = None
    rho2_final = hi
    for bump in range(3):
        rho2_try = min(1.0, hi + bump * eps)
        ok, lam_f, p_f, margin_f, _ = _solve_feasibility(
            prob, theta, rho2_try, comp_orig, strict
        )
        if ok and margin_f >= -MARGIN_TOL:
            rho2_final = rho2_try
            cert = Certificate(
                rho=float(np.sqrt(rho2_try)),
                P_reduced=SymMatrix(p_f, sym_tol=1e-6),
                lam=lam_f,
                margin=margin_f,
            )
            break
    if cert is None:
        raise SolverFailure(hi, "no clean certificate near the bisection endpoint")
    return AnalysisResult(
        rho_star=float(np.sqrt(rho2_final)),
        certificate=cert,
        bisection_trace=tuple(trace),
        iterations=iterations,
    )
