"""Small dense semidefinite programming.

Standard primal form over block-diagonal PSD cones, with optional free
scalar variables:

    minimize    sum_b <C_b, X_b>  +  c_f . u
    subject to  sum_b <A_ib, X_b> + F_i . u = b_i,   i = 1..m
                X_b >= 0 (PSD per block),  u free.

The solver is a primal-dual path-following method on the homogeneous
self-dual embedding, with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step.  The embedding makes primal infeasibility and
unboundedness first-class outcomes (Farkas-type certificates are read off
the iterates) instead of iteration-limit guesses.  Free variables are
handled directly in the Newton system (they carry no cone constraint);
the textbook alternative of splitting them into differences of 1x1 PSD
blocks leaves the optimal face unbounded and drives the embedding's tau
to zero on exactly the margin problems this package solves most, so the
direct formulation is used instead.

Everything is deterministic: the cold start is the identity scaled by the
data norms, and no step of the algorithm draws random numbers, so equal
inputs produce bit-equal outputs.

Problems here are tiny by SDP standards (total PSD dimension up to a few
hundred), so the Schur complement is formed densely and factored by
Cholesky each iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp


class Status(Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITER_LIMIT = "IterLimit"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolveOptions:
    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    tol_inf: float = 1e-8
    max_iter: int = 200
    step_scale: float = 0.98
    dense_schur_limit: int = 2_000_000
    verbose: bool = False


class SdpProblem:
    """Problem data; constraint matrices are stored per block as sparse
    (m x n_b^2) matrices whose rows are the vectorized symmetric A_ib."""

    def __init__(
        self,
        block_dims: Sequence[int],
        b: np.ndarray,
        A_blocks: Sequence,
        C_blocks: Sequence | None = None,
        free_coeffs=None,
        free_obj=None,
    ):
        self.block_dims = tuple(int(n) for n in block_dims)
        if any(n < 1 for n in self.block_dims):
            raise ValueError("block dimensions must be positive")
        self.b = np.asarray(b, dtype=float).reshape(-1)
        self.m = len(self.b)
        if len(A_blocks) != len(self.block_dims):
            raise ValueError("one constraint matrix set per block required")
        self.A_blocks = []
        for n, a in zip(self.block_dims, A_blocks):
            a = sp.csr_matrix(a, shape=(self.m, n * n), dtype=float)
            self.A_blocks.append(a)
        if C_blocks is None:
            C_blocks = [None] * len(self.block_dims)
        self.C_blocks = []
        for n, c in zip(self.block_dims, C_blocks):
            if c is None:
                c = np.zeros((n, n))
            c = np.asarray(c, dtype=float)
            if c.shape != (n, n):
                raise ValueError("objective block shape mismatch")
            self.C_blocks.append(0.5 * (c + c.T))
        if free_coeffs is None:
            self.free_coeffs = np.zeros((self.m, 0))
        else:
            arr = np.asarray(free_coeffs, dtype=float)
            if arr.ndim == 1:
                arr = arr.reshape(self.m, -1) if arr.size else arr.reshape(self.m, 0)
            if arr.shape[0] != self.m:
                raise ValueError("free coefficient rows must match constraint count")
            self.free_coeffs = arr
        self.n_free = self.free_coeffs.shape[1]
        if free_obj is None:
            self.free_obj = np.zeros(self.n_free)
        else:
            self.free_obj = np.asarray(free_obj, dtype=float).reshape(self.n_free)

    @property
    def total_dim(self) -> int:
        return sum(self.block_dims)

    def has_objective(self) -> bool:
        return any(np.any(c) for c in self.C_blocks) or bool(np.any(self.free_obj))

    def constraint_values(self, X: Sequence[np.ndarray], u=None) -> np.ndarray:
        out = np.zeros(self.m)
        for a, x in zip(self.A_blocks, X):
            out += a @ np.asarray(x).ravel()
        if u is not None and self.n_free:
            out += self.free_coeffs @ np.asarray(u)
        return out

    def objective(self, X: Sequence[np.ndarray], u=None) -> float:
        val = sum(float(np.sum(c * x)) for c, x in zip(self.C_blocks, X))
        if u is not None and self.n_free:
            val += float(self.free_obj @ np.asarray(u))
        return val


class SdpBuilder:
    """Incremental COO assembly of an SdpProblem."""

    def __init__(self, block_dims: Sequence[int], n_con: int, n_free: int = 0):
        self.block_dims = tuple(int(n) for n in block_dims)
        self.n_con = n_con
        self.n_free = n_free
        self._coo = [([], [], []) for _ in self.block_dims]  # rows(con), cols(flat), vals
        self._b = np.zeros(n_con)
        self._obj = [np.zeros((n, n)) for n in self.block_dims]
        self._free = ([], [], [])
        self._free_obj = np.zeros(n_free)

    def add_entry(self, con: int, block: int, i: int, j: int, val: float):
        """Adds val to A_con[block][i, j] (and [j, i] for off-diagonals)."""
        n = self.block_dims[block]
        rows, cols, vals = self._coo[block]
        rows.append(con)
        cols.append(i * n + j)
        vals.append(val)
        if i != j:
            rows.append(con)
            cols.append(j * n + i)
            vals.append(val)

    def add_objective(self, block: int, i: int, j: int, val: float):
        self._obj[block][i, j] += val
        if i != j:
            self._obj[block][j, i] += val

    def add_free(self, con: int, k: int, val: float):
        self._free[0].append(con)
        self._free[1].append(k)
        self._free[2].append(val)

    def set_free_objective(self, k: int, val: float):
        self._free_obj[k] = val

    def set_rhs(self, con: int, val: float):
        self._b[con] = val

    def build(self) -> SdpProblem:
        A_blocks = []
        for n, (rows, cols, vals) in zip(self.block_dims, self._coo):
            A_blocks.append(
                sp.coo_matrix((vals, (rows, cols)), shape=(self.n_con, n * n)).tocsr()
            )
        free = None
        if self.n_free:
            rows, cols, vals = self._free
            free = sp.coo_matrix(
                (vals, (rows, cols)), shape=(self.n_con, self.n_free)
            ).toarray()
        return SdpProblem(
            self.block_dims,
            self._b,
            A_blocks,
            C_blocks=self._obj,
            free_coeffs=free,
            free_obj=self._free_obj if self.n_free else None,
        )


@dataclass
class SdpSolution:
    status: Status
    X: list | None = None
    y: np.ndarray | None = None
    S: list | None = None
    free_values: np.ndarray | None = None
    objective_value: float | None = None
    kkt_residuals: tuple | None = None  # (primal, dual, gap), relative
    iterations: int = 0
    certificate: dict | None = field(default=None)


# ---------------------------------------------------------------------------
# solver internals


class _Cone:
    """Cone data plus free-variable coefficients in solver layout."""

    def __init__(self, p: SdpProblem):
        self.dims = list(p.block_dims)
        self.A = [a for a in p.A_blocks]
        self.C = [c for c in p.C_blocks]
        self.b = p.b
        self.m = p.m
        self.nu = sum(self.dims)
        self.F = p.free_coeffs
        self.cf = p.free_obj
        self.n_free = p.n_free

    def opA(self, X) -> np.ndarray:
        out = np.zeros(self.m)
        for a, x in zip(self.A, X):
            out += a @ x.ravel()
        return out

    def opAt(self, y) -> list:
        out = []
        for a, n in zip(self.A, self.dims):
            v = (a.T @ y).reshape(n, n)
            out.append(0.5 * (v + v.T))
        return out

    def inner_C(self, X) -> float:
        return sum(float(np.sum(c * x)) for c, x in zip(self.C, X))


def _max_abs(blocks) -> float:
    return max((float(np.abs(b).max()) for b in blocks if b.size), default=0.0)


def _chol(a: np.ndarray) -> np.ndarray:
    return sla.cholesky(a, lower=True, check_finite=False)


class _Scaling:
    """Per-block Nesterov-Todd scaling: W = G G^T with W S W = X; in the
    scaled space the primal and dual points coincide with diag(sig)."""

    def __init__(self, X, S):
        self.G = []
        self.Ginv = []
        self.W = []
        self.Lx = []
        self.Ls = []
        self.sig = []
        for x, s in zip(X, S):
            lx = _chol(x)
            ls = _chol(s)
            u, sig, vt = np.linalg.svd(ls.T @ lx)
            sig = np.maximum(sig, 1e-300)
            g = lx @ vt.T / np.sqrt(sig)
            lxinv = sla.solve_triangular(lx, np.eye(len(x)), lower=True, check_finite=False)
            ginv = (np.sqrt(sig)[:, None] * vt) @ lxinv
            self.G.append(g)
            self.Ginv.append(ginv)
            self.W.append(g @ g.T)
            self.Lx.append(lx)
            self.Ls.append(ls)
            self.sig.append(sig)


def _schur(cone: _Cone, scal: _Scaling, dense_limit: int) -> np.ndarray:
    m = cone.m
    M = np.zeros((m, m))
    for bi, (a, n) in enumerate(zip(cone.A, cone.dims)):
        if a.nnz == 0:
            continue
        g = scal.G[bi]
        if m * n * n <= dense_limit:
            ad = np.asarray(a.todense()).reshape(m, n, n)
            k = np.matmul(np.matmul(g.T, ad), g).reshape(m, n * n)
            M += k @ k.T
        else:
            w = scal.W[bi]
            indptr, indices, data = a.indptr, a.indices, a.data
            active = np.flatnonzero(np.diff(indptr))
            chunk = max(1, int(2e6 // (n * n)))
            for start in range(0, len(active), chunk):
                ids = active[start : start + chunk]
                tbuf = np.empty((len(ids), n * n))
                for t, i in enumerate(ids):
                    lo, hi = indptr[i], indptr[i + 1]
                    cols = indices[lo:hi]
                    vals = data[lo:hi]
                    r, c = cols // n, cols % n
                    tbuf[t] = ((w[:, r] * vals) @ w[c, :]).ravel()
                M[:, ids] += a @ tbuf.T
    return 0.5 * (M + M.T)


def _block_step_length(l_chol: np.ndarray, d: np.ndarray) -> float:
    """Largest alpha with X + alpha d staying PSD, via L^{-1} d L^{-T}."""
    y = sla.solve_triangular(l_chol, d, lower=True, check_finite=False)
    z = sla.solve_triangular(l_chol, y.T, lower=True, check_finite=False).T
    lam_min = float(np.linalg.eigvalsh(0.5 * (z + z.T))[0])
    if lam_min >= -1e-14:
        return np.inf
    return -1.0 / lam_min


def solve(p: SdpProblem, opts: SolveOptions | None = None) -> SdpSolution:
    """Solve the SDP; all mathematically meaningful outcomes come back as
    statuses, never exceptions."""
    opts = opts or SolveOptions()
    cone = _Cone(p)
    m = cone.m
    nf = cone.n_free

    bnorm = float(np.abs(cone.b).max()) if m else 0.0
    cnorm = max(_max_abs(cone.C), float(np.abs(cone.cf).max()) if nf else 0.0)
    eta = np.sqrt(max(1.0, bnorm, cnorm))
    X = [eta * np.eye(n) for n in cone.dims]
    S = [eta * np.eye(n) for n in cone.dims]
    y = np.zeros(m)
    u = np.zeros(nf)
    tau, kappa = 1.0, 1.0

    def finalize_optimal(it):
        Xs = [x / tau for x in X]
        Ss = [s / tau for s in S]
        ys = y / tau
        free = u / tau if nf else None
        pobj = p.objective(Xs, free)
        pres = float(np.abs(p.constraint_values(Xs, free) - p.b).max(initial=0.0))
        pres /= 1.0 + bnorm
        dres = 0.0
        for a, c, s in zip(cone.A, cone.C, Ss):
            r = (a.T @ ys).reshape(s.shape) + s - c
            dres = max(dres, float(np.abs(r).max(initial=0.0)))
        if nf:
            dres = max(dres, float(np.abs(cone.F.T @ ys - cone.cf).max(initial=0.0)))
        dres /= 1.0 + cnorm
        dobj = float(cone.b @ ys)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return SdpSolution(
            status=Status.OPTIMAL,
            X=Xs,
            y=ys,
            S=Ss,
            free_values=free,
            objective_value=pobj,
            kkt_residuals=(pres, dres, gap),
            iterations=it,
        )

    mu0 = (sum(float(np.sum(x * s)) for x, s in zip(X, S)) + tau * kappa) / (cone.nu + 1)

    for it in range(opts.max_iter):
        AX = cone.opA(X) + (cone.F @ u if nf else 0.0)
        Aty = cone.opAt(y)
        rp = tau * cone.b - AX
        rf = tau * cone.cf - (cone.F.T @ y) if nf else np.zeros(0)
        rd = [tau * c - aty - s for c, aty, s in zip(cone.C, Aty, S)]
        cx = cone.inner_C(X) + (float(cone.cf @ u) if nf else 0.0)
        by = float(cone.b @ y) if m else 0.0
        rg = by - cx - kappa
        mu = (sum(float(np.sum(x * s)) for x, s in zip(X, S)) + tau * kappa) / (cone.nu + 1)

        # -- optimality test on the tau-normalized point
        if tau > 1e-12:
            pres = float(np.abs(rp).max(initial=0.0)) / tau / (1.0 + bnorm)
            dres = max(_max_abs(rd), float(np.abs(rf).max(initial=0.0)))
            dres = dres / tau / (1.0 + cnorm)
            pobj, dobj = cx / tau, by / tau
            gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
            if pres <= opts.tol_feas and dres <= opts.tol_feas and gap <= opts.tol_gap:
                return finalize_optimal(it)

        # -- infeasibility certificates (Farkas rays of the embedding)
        ray_d = _max_abs([tau * c - r for c, r in zip(cone.C, rd)])  # |A*(y)+S|
        if nf:
            ray_d = max(ray_d, float(np.abs(cone.F.T @ y).max(initial=0.0)))
        if by > 0 and ray_d <= opts.tol_inf * by * max(1.0, cnorm):
            yn = y / by
            return SdpSolution(
                status=Status.INFEASIBLE,
                y=yn,
                iterations=it,
                certificate={
                    "farkas_y": yn,
                    "residual": ray_d / by,
                    "note": "A*(y) <= 0 with b.y = 1 rules out primal feasibility",
                },
            )
        ray_p = float(np.abs(tau * cone.b - rp).max(initial=0.0))  # |A(X)+Fu|
        if -cx > 0 and ray_p <= opts.tol_inf * (-cx) * max(1.0, bnorm):
            Xn = [x / (-cx) for x in X]
            return SdpSolution(
                status=Status.UNBOUNDED,
                X=Xn,
                free_values=u / (-cx) if nf else None,
                iterations=it,
                certificate={
                    "ray_residual": ray_p / (-cx),
                    "note": "X >= 0 with A(X)+Fu = 0 and objective -1 is an improving ray",
                },
            )
        if mu < 1e-16 * mu0 and tau < 1e-10:
            return SdpSolution(status=Status.NUMERICAL_FAILURE, iterations=it)

        # -- Nesterov-Todd scaling and Schur complement
        try:
            scal = _Scaling(X, S)
            M = _schur(cone, scal, opts.dense_schur_limit)
            diag_shift = 0.0
            for attempt in range(4):
                try:
                    cho = sla.cho_factor(
                        M + diag_shift * np.eye(m) if diag_shift else M,
                        lower=True,
                        check_finite=False,
                    )
                    break
                except np.linalg.LinAlgError:
                    trace = max(np.trace(M) / max(m, 1), 1.0)
                    diag_shift = trace * (1e-14 * 10.0 ** (2 * attempt + 2))
            else:
                return SdpSolution(status=Status.NUMERICAL_FAILURE, iterations=it)
        except np.linalg.LinAlgError:
            return SdpSolution(status=Status.NUMERICAL_FAILURE, iterations=it)

        def solve_schur(r):
            if m == 0:
                return np.zeros(0)
            return sla.cho_solve(cho, r, check_finite=False)

        WCW = [w @ c @ w if np.any(c) else None for w, c in zip(scal.W, cone.C)]
        wvec = np.zeros(m)
        s_cc = 0.0
        for a, c, t in zip(cone.A, cone.C, WCW):
            if t is not None:
                wvec += a @ t.ravel()
                s_cc += float(np.sum(c * t))
        v0 = solve_schur(wvec + cone.b)
        if nf:
            MF = np.column_stack([solve_schur(cone.F[:, k]) for k in range(nf)])
            G2 = cone.F.T @ MF
            try:
                G2inv = np.linalg.inv(G2)
            except np.linalg.LinAlgError:
                G2inv = np.linalg.pinv(G2)
            du1 = G2inv @ (cone.F.T @ v0 - cone.cf)
            y1 = v0 - MF @ du1
        else:
            MF = np.zeros((m, 0))
            G2inv = np.zeros((0, 0))
            du1 = np.zeros(0)
            y1 = v0

        def direction(Rc, rc_tau):
            H = [g @ r @ g.T for g, r in zip(scal.G, Rc)]
            T = [w @ r @ w for w, r in zip(scal.W, rd)]
            r1 = rp - cone.opA(H) + cone.opA(T)
            r2 = rg - cone.inner_C(H) + cone.inner_C(T) - rc_tau / tau
            u0vec = solve_schur(r1)
            if nf:
                du0 = G2inv @ (cone.F.T @ u0vec - rf)
                y0 = u0vec - MF @ du0
            else:
                du0 = np.zeros(0)
                y0 = u0vec
            denom = float((wvec - cone.b) @ y1) - s_cc - kappa / tau
            if nf:
                denom += float(cone.cf @ du1)
            num = r2 - float((wvec - cone.b) @ y0)
            if nf:
                num -= float(cone.cf @ du0)
            dtau = 0.0 if abs(denom) < 1e-300 else num / denom
            dy = y0 + y1 * dtau
            du = du0 + du1 * dtau
            Atdy = cone.opAt(dy)
            dS = [r - atd + c * dtau for r, atd, c in zip(rd, Atdy, cone.C)]
            dX = [h - w @ ds @ w for h, w, ds in zip(H, scal.W, dS)]
            dkappa = (rc_tau - kappa * dtau) / tau
            return dX, dy, du, dS, dtau, dkappa

        def boundary(dX, dS, dtau, dkappa):
            alpha = np.inf
            for lx, ls, dx, ds in zip(scal.Lx, scal.Ls, dX, dS):
                alpha = min(alpha, _block_step_length(lx, dx))
                alpha = min(alpha, _block_step_length(ls, ds))
            if dtau < 0:
                alpha = min(alpha, -tau / dtau)
            if dkappa < 0:
                alpha = min(alpha, -kappa / dkappa)
            return alpha

        # predictor (affine scaling direction)
        Rc_aff = [-np.diag(sig) for sig in scal.sig]
        aff = direction(Rc_aff, -tau * kappa)
        a_aff = min(1.0, boundary(aff[0], aff[3], aff[4], aff[5]))
        mu_aff = (
            sum(
                float(np.sum((x + a_aff * dx) * (s + a_aff * ds)))
                for x, s, dx, ds in zip(X, S, aff[0], aff[3])
            )
            + (tau + a_aff * aff[4]) * (kappa + a_aff * aff[5])
        ) / (cone.nu + 1)
        sigma = min(max((max(mu_aff, 0.0) / mu) ** 3, 1e-8), 1.0 - 1e-8)

        # corrector (combined direction with second-order term)
        Rc = []
        for gi, g, sig, dxa, dsa in zip(scal.Ginv, scal.G, scal.sig, aff[0], aff[3]):
            dxh = gi @ dxa @ gi.T
            dsh = g.T @ dsa @ g
            cross = 0.5 * (dxh @ dsh + dsh @ dxh)
            rhs = sigma * mu * np.eye(len(sig)) - np.diag(sig**2) - cross
            Rc.append(2.0 * rhs / np.add.outer(sig, sig))
        rc_tau = sigma * mu - tau * kappa - aff[4] * aff[5]
        dX, dy, du, dS, dtau, dkappa = direction(Rc, rc_tau)

        alpha = min(1.0, opts.step_scale * boundary(dX, dS, dtau, dkappa))
        if alpha <= 1e-12:
            return SdpSolution(status=Status.NUMERICAL_FAILURE, iterations=it)

        X = [0.5 * ((x + alpha * dx) + (x + alpha * dx).T) for x, dx in zip(X, dX)]
        S = [0.5 * ((s + alpha * ds) + (s + alpha * ds).T) for s, ds in zip(S, dS)]
        y = y + alpha * dy
        u = u + alpha * du
        tau += alpha * dtau
        kappa += alpha * dkappa
        if opts.verbose:
            print(
                f"  it={it:3d} mu={mu:9.2e} tau={tau:8.2e} kappa={kappa:8.2e} alpha={alpha:6.3f}"
            )

    return SdpSolution(status=Status.ITER_LIMIT, iterations=opts.max_iter)


# ---------------------------------------------------------------------------
# strict feasibility margin


@dataclass
class MarginResult:
    margin: float
    witness: list | None
    status: Status
    solution: SdpSolution


def feasibility_margin(p: SdpProblem, opts: SolveOptions | None = None) -> MarginResult:
    """max t such that the equality constraints hold and X >= t I.

    The problem must carry no objective.  margin > 0 iff the constraints
    are strictly feasible; an unbounded margin is reported as +inf.
    """
    if p.has_objective():
        raise ValueError("feasibility_margin expects a problem without objective")
    if p.m == 0:
        # any X = t I satisfies the (empty) constraints, for every t
        dummy = SdpSolution(status=Status.UNBOUNDED, iterations=0)
        return MarginResult(margin=np.inf, witness=None, status=Status.UNBOUNDED, solution=dummy)
    # substitute X = X' + t I, X' >= 0, t free
    traces = np.zeros((p.m, 1))
    for a, n in zip(p.A_blocks, p.block_dims):
        diag_cols = np.arange(n) * (n + 1)
        traces[:, 0] += np.asarray(a[:, diag_cols].sum(axis=1)).ravel()
    free = np.hstack([p.free_coeffs, traces]) if p.n_free else traces
    free_obj = np.concatenate([p.free_obj, [-1.0]]) if p.n_free else np.array([-1.0])
    shifted = SdpProblem(
        p.block_dims,
        p.b,
        [a.copy() for a in p.A_blocks],
        C_blocks=None,
        free_coeffs=free,
        free_obj=free_obj,
    )
    sol = solve(shifted, opts)
    if sol.status == Status.OPTIMAL:
        t = float(sol.free_values[-1])
        witness = [x + t * np.eye(n) for x, n in zip(sol.X, p.block_dims)]
        return MarginResult(margin=t, witness=witness, status=sol.status, solution=sol)
    if sol.status == Status.UNBOUNDED:
        return MarginResult(margin=np.inf, witness=None, status=sol.status, solution=sol)
    if sol.status == Status.INFEASIBLE:
        return MarginResult(margin=-np.inf, witness=None, status=sol.status, solution=sol)
    return MarginResult(margin=np.nan, witness=None, status=sol.status, solution=sol)


# ---------------------------------------------------------------------------
# SDPA sparse format import/export


def write_sdpa(p: SdpProblem, path: str):
    """Export in SDPA sparse format (.dat-s).  The file's objective block
    F0 is -C so that the format's maximization matches our minimization.
    Free variables are not representable; reject them."""
    if p.n_free:
        raise ValueError("SDPA sparse format holds no free variables; split first")
    lines = []
    lines.append(f"{p.m} = mDIM")
    lines.append(f"{len(p.block_dims)} = nBLOCK")
    lines.append(" ".join(str(n) for n in p.block_dims) + " = bLOCKsTRUCT")
    lines.append(" ".join(repr(float(v)) for v in p.b))
    for blk, (c, n) in enumerate(zip(p.C_blocks, p.block_dims), start=1):
        for i in range(n):
            for j in range(i, n):
                v = -c[i, j]
                if v != 0.0:
                    lines.append(f"0 {blk} {i + 1} {j + 1} {repr(float(v))}")
    for k in range(p.m):
        for blk, (a, n) in enumerate(zip(p.A_blocks, p.block_dims), start=1):
            row = a.getrow(k).tocoo()
            seen = {}
            for col, v in zip(row.col, row.data):
                i, j = divmod(int(col), n)
                if i > j:
                    continue
                seen[(i, j)] = v
            for (i, j), v in sorted(seen.items()):
                lines.append(f"{k + 1} {blk} {i + 1} {j + 1} {repr(float(v))}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sdpa(path: str) -> SdpProblem:
    """Parse the SDPA sparse format written by :func:`write_sdpa` (also
    accepts comment lines and negative/diagonal block sizes)."""
    tokens: list[str] = []
    header: list[str] = []
    entry_lines: list[tuple[int, int, int, int, float]] = []
    with open(path) as fh:
        raw = [
            ln
            for ln in fh
            if ln.strip() and not ln.lstrip().startswith(("*", '"'))
        ]
    m = int(raw[0].split("=")[0].split()[0])
    nblock = int(raw[1].split("=")[0].split()[0])
    struct_txt = raw[2].split("=")[0].replace(",", " ").replace("(", " ").replace(")", " ")
    struct = [int(t) for t in struct_txt.split()]
    if len(struct) != nblock:
        raise ValueError("block structure length does not match nBLOCK")
    dims = [abs(s) for s in struct]
    diag_only = [s < 0 for s in struct]
    b = np.array([float(t) for t in raw[3].replace(",", " ").split()])
    if len(b) != m:
        raise ValueError("objective vector length does not match mDIM")
    for ln in raw[4:]:
        k, blk, i, j, v = ln.split()
        entry_lines.append((int(k), int(blk), int(i), int(j), float(v)))

    C = [np.zeros((n, n)) for n in dims]
    coo = [([], [], []) for _ in dims]
    for k, blk, i, j, v in entry_lines:
        bi = blk - 1
        n = dims[bi]
        i0, j0 = i - 1, j - 1
        if diag_only[bi] and i0 != j0:
            raise ValueError("off-diagonal entry in a diagonal block")
        if k == 0:
            C[bi][i0, j0] += -v
            if i0 != j0:
                C[bi][j0, i0] += -v
        else:
            rows, cols, vals = coo[bi]
            rows.append(k - 1)
            cols.append(i0 * n + j0)
            vals.append(v)
            if i0 != j0:
                rows.append(k - 1)
                cols.append(j0 * n + i0)
                vals.append(v)
    A_blocks = [
        sp.coo_matrix((vals, (rows, cols)), shape=(m, n * n)).tocsr()
        for n, (rows, cols, vals) in zip(dims, coo)
    ]
    return SdpProblem(dims, b, A_blocks, C_blocks=C)
