"""Sum-of-squares certificates and relaxations, compiled to SDPs.

A polynomial p of degree 2d is a sum of squares iff p = [x]^T Q [x] for a
PSD Gram matrix Q over the monomial basis [x] of degree <= d; the
coefficient-matching equations are affine in Q, so membership is one SDP.
Polynomial matrices are handled by the scalar lift z^T M(x) z over the
bilinear basis {z_i * (monomials in x)}.

Constrained lower bounds use the multiplier decomposition

    p - gamma = s_0 + sum_i s_i g_i,      s_i sums of squares,

with deg(s_i) = 2*order - deg(g_i) rounded down to even.  The program
maximizes gamma and is always a true lower bound for min p over
{g_i >= 0} regardless of the order.  The SDP's dual vector is the moment
sequence of the relaxation: the slack of the s_0 block is the moment
matrix, and its first-order entries propose a candidate minimizer, which
callers must re-certify (nothing here claims the candidate is optimal).

Target and constraint polynomials are rescaled to unit max coefficient
before compilation (the bound is unscaled on return); this matters in
practice, where scalarized matrix constraints carry coefficients spanning
several orders of magnitude.  Monomial bases are dense: the variable
counts here (<= 7) make Newton-polytope pruning pointless.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import sdp
from .linalg import SymMatrix, eigen_decomposition, eigenvalues
from .poly import Polynomial, PolyMatrix, SizeError

CHECK_BASIS_LIMIT = 200
COMPILE_BASIS_LIMIT = 600
RECONSTRUCTION_TOL = 1e-7
RANK_RATIO = 10.0


class Unbounded(RuntimeError):
    """No shifted copy of the polynomial admits an SOS certificate."""


class RelaxationInfeasible(RuntimeError):
    """The multiplier decomposition is infeasible at the requested order."""


class NoCandidate(RuntimeError):
    """The moment matrix is too far from rank one to extract a point."""


def monomials_up_to(nvars: int, degree: int) -> list[tuple[int, ...]]:
    """Exponent tuples with total degree <= degree, graded-lex, constant first."""
    out = []
    for total in range(degree + 1):
        level = []
        for combo in itertools.combinations_with_replacement(range(nvars), total):
            exp = [0] * nvars
            for idx in combo:
                exp[idx] += 1
            level.append(tuple(exp))
        level.sort(reverse=True)
        out.extend(level)
    return out


@dataclass(frozen=True)
class MonomialBasis:
    """Ordered monomial list; ``up_to`` builds the full graded-lex basis
    (constant first, size C(n+d, d)); other orderings come from lifts."""

    vars: tuple[str, ...]
    degree: int
    monomials: tuple[tuple[int, ...], ...]

    @classmethod
    def up_to(cls, vars: Sequence[str], degree: int) -> "MonomialBasis":
        vs = tuple(vars)
        monos = monomials_up_to(len(vs), degree)
        basis = cls(vars=vs, degree=degree, monomials=tuple(monos))
        assert len(basis) == math.comb(len(vs) + degree, degree)
        assert sum(basis.monomials[0]) == 0
        return basis

    def __len__(self) -> int:
        return len(self.monomials)

    def __post_init__(self):
        if len(set(self.monomials)) != len(self.monomials):
            raise ValueError("duplicate monomials in basis")


@dataclass(frozen=True)
class SosCertificate:
    """PSD Gram matrix over a monomial basis, with reconstruction residual."""

    gram: SymMatrix
    basis: MonomialBasis
    residual: float
    polynomial: Polynomial = field(repr=False)

    def reconstruct(self) -> Polynomial:
        terms: dict[tuple[int, ...], float] = {}
        monos = self.basis.monomials
        q = self.gram.entries
        for a in range(len(monos)):
            for b in range(len(monos)):
                key = tuple(x + y for x, y in zip(monos[a], monos[b]))
                terms[key] = terms.get(key, 0.0) + q[a, b]
        return Polynomial(self.basis.vars, terms)

    def to_dict(self) -> dict:
        return {
            "basis_vars": list(self.basis.vars),
            "basis_degree": self.basis.degree,
            "gram": self.gram.entries.tolist(),
            "residual": self.residual,
        }


@dataclass(frozen=True)
class NotSos:
    """Rejection with the separating evidence from the SDP."""

    margin: float
    separating_moments: dict | None = None

    sos = False


@dataclass(frozen=True)
class NotSosm:
    margin: float

    sos = False


def _reconstruction_residual(target: Polynomial, cert_poly: Polynomial) -> float:
    return (target - cert_poly).max_coeff()


def _gram_membership(p: Polynomial, vars: Sequence[str], basis_monos: Sequence[tuple]):
    """Margin-maximal Gram search: max t s.t. Q >= t I and [x]^T Q [x] = p.

    Returns (margin, gram or None, dual moment dict).  p must be expressed
    over ``vars``; p is assumed coefficient-scaled by the caller.
    """
    vs = tuple(vars)
    p = p.restrict_vars(vs)
    n_b = len(basis_monos)
    products: dict[tuple[int, ...], list[tuple[int, int]]] = {}
    for a in range(n_b):
        for b in range(a, n_b):
            key = tuple(x + y for x, y in zip(basis_monos[a], basis_monos[b]))
            products.setdefault(key, []).append((a, b))
    unmatched = [e for e in p.terms if e not in products]
    if unmatched:
        return -np.inf, None, None

    alphas = sorted(products, key=lambda e: (sum(e), e))
    index = {e: i for i, e in enumerate(alphas)}
    bld = sdp.SdpBuilder([n_b], n_con=len(alphas))
    for alpha, pairs in products.items():
        con = index[alpha]
        for a, b in pairs:
            bld.add_entry(con, 0, a, b, 1.0)
        bld.set_rhs(con, p.terms.get(alpha, 0.0))
    result = sdp.feasibility_margin(bld.build())
    if result.status != sdp.Status.OPTIMAL:
        return -np.inf, None, None
    moments = None
    if result.solution.y is not None:
        moments = {alpha: -float(v) for alpha, v in zip(alphas, result.solution.y)}
    return result.margin, result.witness[0], moments


def check_sos(p: Polynomial, degree: int | None = None):
    """SOS membership of a scalar polynomial.

    ``degree`` is the even bound 2d on the candidate decomposition (default
    the polynomial's own degree, rounded up to even).  Returns an
    SosCertificate, or NotSos carrying the margin (the best achievable
    minimum Gram eigenvalue, negative) and the separating moment vector.
    """
    if degree is None:
        degree = p.degree() + (p.degree() % 2)
    if degree % 2 != 0:
        raise ValueError("degree bound must be even")
    if p.degree() > degree:
        raise ValueError("polynomial degree exceeds the requested bound")
    vs = tuple(v for v in p.vars if p.degree_in(v) > 0)
    half = degree // 2
    if math.comb(len(vs) + half, half) > CHECK_BASIS_LIMIT:
        raise SizeError("monomial basis exceeds the supported size")
    scale = max(1.0, p.max_coeff())
    basis = MonomialBasis.up_to(vs, half)
    margin, gram, moments = _gram_membership(p.scale(1.0 / scale), vs, basis.monomials)
    if gram is None or margin < -1e-9:
        return NotSos(margin=margin, separating_moments=moments)
    gram_m = SymMatrix(np.asarray(gram) * scale, sym_tol=1e-6)
    cert = SosCertificate(gram=gram_m, basis=basis, residual=0.0, polynomial=p)
    residual = _reconstruction_residual(p.scale(1.0 / scale), cert.reconstruct().scale(1.0 / scale))
    return SosCertificate(gram=gram_m, basis=basis, residual=residual, polynomial=p)


def check_sos_matrix(m: PolyMatrix):
    """SOS-matrix test via the scalar lift z^T M(x) z on the bilinear basis.

    Returns the scalar certificate over {z_i * (x-monomials)} or NotSosm.
    """
    dim = m.dim
    xvars = m.variables()
    deg = m.max_degree()
    if deg % 2 != 0:
        raise ValueError("entry degrees must be even")
    half = deg // 2
    zvars = tuple(f"_z{i}" for i in range(dim))
    vs = xvars + zvars
    lifted = Polynomial.constant(0.0)
    for i in range(dim):
        for j in range(dim):
            zz = Polynomial.variable(zvars[i]) * Polynomial.variable(zvars[j])
            lifted = lifted + zz * m.entries[i][j]
    lifted = lifted.restrict_vars(vs)
    nx = len(xvars)
    xmonos = monomials_up_to(nx, half)
    basis_monos = []
    for zi in range(dim):
        for xm in xmonos:
            basis_monos.append(tuple(xm) + tuple(1 if k == zi else 0 for k in range(dim)))
    if len(basis_monos) > CHECK_BASIS_LIMIT:
        raise SizeError("lifted monomial basis exceeds the supported size")
    scale = max(1.0, lifted.max_coeff())
    margin, gram, _ = _gram_membership(lifted.scale(1.0 / scale), vs, basis_monos)
    if gram is None or margin < -1e-9:
        return NotSosm(margin=margin)
    basis = MonomialBasis(vars=vs, degree=half + 1, monomials=tuple(basis_monos))
    gram_m = SymMatrix(np.asarray(gram) * scale, sym_tol=1e-6)
    cert = SosCertificate(gram=gram_m, basis=basis, residual=0.0, polynomial=lifted)
    residual = _reconstruction_residual(
        lifted.scale(1.0 / scale), cert.reconstruct().scale(1.0 / scale)
    )
    return SosCertificate(gram=gram_m, basis=basis, residual=residual, polynomial=lifted)


@dataclass(frozen=True)
class LowerBoundResult:
    """Certified lower bound with its multipliers and moment data."""

    gamma: float
    multipliers: tuple  # s_0 first, then one per constraint
    order: int
    residual: float
    vars: tuple[str, ...]
    moment_matrix: np.ndarray = field(repr=False)
    moment_basis: tuple = field(repr=False)
    objective_scale: float = 1.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "gamma": self.gamma,
                "order": self.order,
                "vars": list(self.vars),
                "residual": self.residual,
                "multipliers": [m.to_dict() for m in self.multipliers],
                "moment_matrix": self.moment_matrix.tolist(),
            },
            indent=2,
        )


def _even_floor(k: int) -> int:
    return k - (k % 2)


def lower_bound_constrained(
    p: Polynomial,
    gs: Sequence[Polynomial],
    order: int,
    opts: sdp.SolveOptions | None = None,
) -> LowerBoundResult:
    """max gamma with p - gamma = s_0 + sum s_i g_i, all multipliers SOS.

    The bound is monotone in ``order``.  Raises RelaxationInfeasible when
    the decomposition does not exist at this order (escalation is the
    caller's call), Unbounded when no gamma works at all.
    """
    names: dict[str, None] = {}
    for poly in [p, *gs]:
        for v in poly.vars:
            if poly.degree_in(v) > 0:
                names[v] = None
    vs = tuple(names)
    p = p.restrict_vars(vs)
    gs = [g.restrict_vars(vs) for g in gs]
    max_deg = max([p.degree()] + [g.degree() for g in gs])
    if 2 * order < max_deg:
        raise ValueError(f"order {order} too small for degree {max_deg}")

    p_scale = max(1.0, p.max_coeff())
    p_s = p.scale(1.0 / p_scale)
    g_scales = [max(1.0, g.max_coeff()) for g in gs]
    g_s = [g.scale(1.0 / s) for g, s in zip(gs, g_scales)]

    half_degs = [order] + [(_even_floor(2 * order - g.degree())) // 2 for g in g_s]
    bases = [MonomialBasis.up_to(vs, d) for d in half_degs]
    if any(len(b) > COMPILE_BASIS_LIMIT for b in bases):
        raise SizeError("multiplier basis exceeds the supported size")

    alphas = monomials_up_to(len(vs), 2 * order)
    index = {e: i for i, e in enumerate(alphas)}
    m_con = len(alphas)
    bld = sdp.SdpBuilder([len(b) for b in bases], n_con=m_con, n_free=1)
    g_polys = [Polynomial(vs, {tuple([0] * len(vs)): 1.0})] + list(g_s)
    for blk, (g, basis) in enumerate(zip(g_polys, bases)):
        monos = basis.monomials
        for a in range(len(monos)):
            for b in range(a, len(monos)):
                ab = tuple(x + y for x, y in zip(monos[a], monos[b]))
                for gexp, gc in g.terms.items():
                    alpha = tuple(x + y for x, y in zip(ab, gexp))
                    bld.add_entry(index[alpha], blk, a, b, gc)
    zero = tuple([0] * len(vs))
    bld.add_free(index[zero], 0, 1.0)
    bld.set_free_objective(0, -1.0)  # maximize gamma
    for alpha, i in index.items():
        bld.set_rhs(i, p_s.terms.get(alpha, 0.0))

    sol = sdp.solve(bld.build(), opts)
    if sol.status == sdp.Status.INFEASIBLE:
        raise RelaxationInfeasible(f"no multiplier decomposition at order {order}")
    if sol.status == sdp.Status.UNBOUNDED:
        raise Unbounded("the relaxation admits arbitrarily large lower bounds")
    if sol.status != sdp.Status.OPTIMAL:
        raise RelaxationInfeasible(f"relaxation solve failed ({sol.status.value})")

    gamma = float(sol.free_values[0]) * p_scale
    multipliers = []
    recon = Polynomial.constant(float(sol.free_values[0]))
    for blk, (basis, g, gscale) in enumerate(zip(bases, g_polys, [1.0] + g_scales)):
        gram = SymMatrix(0.5 * (sol.X[blk] + sol.X[blk].T), sym_tol=1e-6)
        cert = SosCertificate(gram=gram, basis=basis, residual=0.0, polynomial=Polynomial.constant(0.0))
        s_poly = cert.reconstruct()
        cert = SosCertificate(gram=gram, basis=basis, residual=0.0, polynomial=s_poly)
        multipliers.append(cert)
        recon = recon + s_poly * g
    residual = _reconstruction_residual(p_s, recon)
    moment_matrix = 0.5 * (sol.S[0] + sol.S[0].T)
    return LowerBoundResult(
        gamma=gamma,
        multipliers=tuple(multipliers),
        order=order,
        residual=residual,
        vars=vs,
        moment_matrix=moment_matrix,
        moment_basis=bases[0].monomials,
        objective_scale=p_scale,
    )


def lower_bound_unconstrained(p: Polynomial) -> LowerBoundResult:
    """max gamma with p - gamma a sum of squares (one SDP, no constraints)."""
    if p.degree() % 2 != 0:
        raise ValueError("an odd-degree polynomial is unbounded below")
    order = max(1, p.degree() // 2)
    try:
        return lower_bound_constrained(p, [], order)
    except RelaxationInfeasible as exc:
        raise Unbounded("no SOS decomposition of any shifted copy") from exc


def moment_candidate(result: LowerBoundResult) -> dict[str, float]:
    """Read a candidate minimizer from the first-order moments.

    Uses the order-1 truncation of the moment matrix; raises NoCandidate
    when its top-two eigenvalue ratio is below 10 (no approximate atom).
    The caller owns verification of the returned point.
    """
    n = len(result.vars)
    m1 = result.moment_matrix[: n + 1, : n + 1]
    m0 = m1[0, 0]
    if m0 <= 1e-12:
        raise NoCandidate("vanishing zeroth moment")
    m1 = m1 / m0
    w = eigenvalues(SymMatrix(0.5 * (m1 + m1.T), sym_tol=1.0))
    top, second = w[-1], abs(w[-2]) if len(w) > 1 else 0.0
    if second > 0 and top / second < RANK_RATIO:
        raise NoCandidate(
            f"moment matrix is far from rank one (eig ratio {top / max(second, 1e-300):.2f})"
        )
    # first-order moments sit in row 0, columns are degree-1 monomials in
    # graded-lex order: variable i appears at column 1 + i
    order1 = {}
    for col in range(1, n + 1):
        mono = result.moment_basis[col]
        var = result.vars[mono.index(1)]
        order1[var] = float(m1[0, col])
    return order1
