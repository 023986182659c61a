"""Dense symmetric linear algebra kernel.

Every matrix this package touches is small (2x2 up to a few hundred rows)
and symmetric: Lyapunov weights, quadratic-constraint matrices, Gram
matrices, interior-point scalings.  Eigenvalue work is delegated to
LAPACK's symmetric drivers (tridiagonal reduction + implicit QR), which is
the robust choice at these sizes.  Positive-semidefiniteness is decided
through the spectrum rather than a Cholesky attempt so that callers get a
margin (the minimum eigenvalue), which the bisection logic needs.

All tolerances are explicit arguments; the documented default is 1e-9.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np


class StructureError(ValueError):
    """A matrix does not carry the structure an operation requires."""


class DimensionError(ValueError):
    """Operands have inconsistent shapes."""


class EigenIterationError(RuntimeError):
    """The symmetric eigenvalue iteration failed to converge."""


class SymMatrix:
    """Dense real symmetric matrix; the upper triangle is authoritative.

    Construction validates squareness and symmetry (within ``sym_tol``)
    and then mirrors the upper triangle so the stored array is exactly
    symmetric.  Instances are immutable and safe to share across threads.
    """

    __slots__ = ("dim", "entries")

    def __init__(self, entries: Iterable, sym_tol: float = 1e-9):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {a.shape}")
        n = a.shape[0]
        if n < 1:
            raise DimensionError("matrix dimension must be at least 1")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        scale = max(1.0, float(np.abs(a).max()))
        if float(np.abs(a - a.T).max()) > sym_tol * scale:
            raise StructureError("matrix is not symmetric within tolerance")
        sym = np.triu(a) + np.triu(a, 1).T
        sym.setflags(write=False)
        object.__setattr__(self, "dim", n)
        object.__setattr__(self, "entries", sym)

    def __setattr__(self, name, value):  # immutable after construction
        raise AttributeError("SymMatrix is immutable")

    @classmethod
    def identity(cls, n: int) -> "SymMatrix":
        return cls(np.eye(n))

    @classmethod
    def zeros(cls, n: int) -> "SymMatrix":
        return cls(np.zeros((n, n)))

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self.entries.astype(dtype)
        return self.entries

    def __getitem__(self, idx):
        return self.entries[idx]

    def trace(self) -> float:
        return float(np.trace(self.entries))

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.entries, "fro"))

    def __repr__(self) -> str:
        return f"SymMatrix(dim={self.dim})"


def as_symmetric(m, sym_tol: float = 1e-9) -> np.ndarray:
    """Return the validated dense array behind ``m`` (SymMatrix or array)."""
    if isinstance(m, SymMatrix):
        return m.entries
    return SymMatrix(m, sym_tol=sym_tol).entries


def eigenvalues(m) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, sorted ascending."""
    a = as_symmetric(m)
    try:
        return np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenIterationError(str(exc)) from exc


def eigen_decomposition(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors Q, M = Q diag(w) Q^T."""
    a = as_symmetric(m)
    try:
        w, q = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenIterationError(str(exc)) from exc
    return w, q


def min_eigenvalue(m) -> float:
    return float(eigenvalues(m)[0])


def is_psd(m, tol: float = 1e-9) -> bool:
    """True iff the minimum eigenvalue is at least ``-tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return min_eigenvalue(m) >= -tol


def kron_expand(reduced, d: int) -> SymMatrix:
    """The Kronecker expansion reduced (x) I_d."""
    r = as_symmetric(reduced)
    if d < 1:
        raise DimensionError("d must be a positive integer")
    return SymMatrix(np.kron(r, np.eye(d)))


def kron_reduce(full, d: int) -> SymMatrix:
    """Invert the expansion R (x) I_d, recovering R.

    Raises StructureError unless ``full`` equals R (x) I_d exactly (any
    deviation above 1e-12 relative to the matrix scale).
    """
    a = as_symmetric(full)
    n = a.shape[0]
    if d < 1:
        raise DimensionError("d must be a positive integer")
    if n % d != 0:
        raise StructureError(f"dimension {n} is not divisible by block size {d}")
    nr = n // d
    blocks = a.reshape(nr, d, nr, d)
    # candidate R read off the (0,0) position of each d x d block
    r = blocks[:, 0, :, 0].copy()
    recon = np.kron(r, np.eye(d))
    tol = 1e-12 * max(1.0, float(np.abs(a).max()))
    dev = float(np.abs(a - recon).max())
    if dev > tol:
        raise StructureError(
            f"matrix is not a Kronecker product with I_{d} (deviation {dev:.3e})"
        )
    return SymMatrix(r)
