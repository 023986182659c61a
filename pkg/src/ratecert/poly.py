"""Sparse multivariate polynomials over named indeterminates.

A polynomial is a map from exponent vectors to nonzero float coefficients,
together with an ordered tuple of variable names.  Arithmetic unions the
variable sets of its operands, so expressions over different parameter
subsets compose without ceremony.  After every arithmetic operation,
coefficients below 1e-14 (relative to the largest coefficient) are dropped
to stop round-off terms from accumulating.

Total degree is capped at 16, far above anything the rate-design problems
produce; exceeding it raises SizeError instead of silently building huge
objects.  Coefficients are floats throughout: the matrices being scalarized
are numeric to begin with, so exact rational arithmetic would buy nothing.
"""

from __future__ import annotations

import itertools
import re
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

MAX_TOTAL_DEGREE = 16
COEFF_CLEANUP = 1e-14

Scalar = Union[int, float]


class SizeError(ValueError):
    """Operation exceeds the supported size or degree envelope."""


def _grlex_key(exponents: tuple[int, ...]) -> tuple:
    # graded lexicographic: total degree first, then lexicographic
    return (sum(exponents), tuple(-e for e in exponents))


class Polynomial:
    """Immutable sparse polynomial with named variables."""

    __slots__ = ("vars", "terms")

    def __init__(self, vars: Sequence[str], terms: Mapping[tuple[int, ...], float]):
        vs = tuple(vars)
        if len(set(vs)) != len(vs):
            raise ValueError("duplicate variable names")
        cleaned: dict[tuple[int, ...], float] = {}
        maxc = max((abs(c) for c in terms.values()), default=0.0)
        drop = COEFF_CLEANUP * max(1.0, maxc)
        for exp, coeff in terms.items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != len(vs):
                raise ValueError("exponent vector length does not match variables")
            if any(e < 0 for e in exp):
                raise ValueError("negative exponent")
            if sum(exp) > MAX_TOTAL_DEGREE:
                raise SizeError(f"total degree exceeds cap {MAX_TOTAL_DEGREE}")
            c = float(coeff)
            if abs(c) > drop:
                cleaned[exp] = cleaned.get(exp, 0.0) + c
        cleaned = {e: c for e, c in cleaned.items() if c != 0.0}
        object.__setattr__(self, "vars", vs)
        object.__setattr__(self, "terms", cleaned)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # -- constructors ----------------------------------------------------

    @classmethod
    def constant(cls, c: Scalar) -> "Polynomial":
        if c == 0:
            return cls((), {})
        return cls((), {(): float(c)})

    @classmethod
    def variable(cls, name: str) -> "Polynomial":
        return cls((name,), {(1,): 1.0})

    @staticmethod
    def coerce(value: Union["Polynomial", Scalar]) -> "Polynomial":
        if isinstance(value, Polynomial):
            return value
        return Polynomial.constant(value)

    # -- structure -------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; zero polynomial has degree 0 by convention."""
        return max((sum(e) for e in self.terms), default=0)

    def degree_in(self, name: str) -> int:
        if name not in self.vars:
            return 0
        i = self.vars.index(name)
        return max((e[i] for e in self.terms), default=0)

    def coefficient(self, monomial: Mapping[str, int]) -> float:
        exp = tuple(int(monomial.get(v, 0)) for v in self.vars)
        extra = set(monomial) - set(self.vars)
        if extra and any(monomial[v] != 0 for v in extra):
            return 0.0
        return self.terms.get(exp, 0.0)

    def max_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def restrict_vars(self, names: Sequence[str]) -> "Polynomial":
        """Re-express over exactly ``names``; unused variables must not occur."""
        names = tuple(names)
        pos = {v: i for i, v in enumerate(names)}
        terms: dict[tuple[int, ...], float] = {}
        for exp, c in self.terms.items():
            new = [0] * len(names)
            for v, e in zip(self.vars, exp):
                if e == 0:
                    continue
                if v not in pos:
                    raise ValueError(f"polynomial uses variable {v!r} outside {names}")
                new[pos[v]] = e
            key = tuple(new)
            terms[key] = terms.get(key, 0.0) + c
        return Polynomial(names, terms)

    # -- arithmetic ------------------------------------------------------

    def _aligned(self, other: "Polynomial") -> tuple[tuple[str, ...], dict, dict]:
        if self.vars == other.vars:
            return self.vars, dict(self.terms), dict(other.terms)
        joint = tuple(dict.fromkeys(self.vars + other.vars))
        return (
            joint,
            self.restrict_vars(joint).terms,
            other.restrict_vars(joint).terms,
        )

    def __add__(self, other) -> "Polynomial":
        other = Polynomial.coerce(other)
        joint, a, b = self._aligned(other)
        for exp, c in b.items():
            a[exp] = a.get(exp, 0.0) + c
        return Polynomial(joint, a)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "Polynomial":
        return self + (-Polynomial.coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return Polynomial.coerce(other) - self

    def __mul__(self, other) -> "Polynomial":
        other = Polynomial.coerce(other)
        joint, a, b = self._aligned(other)
        prod: dict[tuple[int, ...], float] = {}
        for ea, ca in a.items():
            for eb, cb in b.items():
                key = tuple(x + y for x, y in zip(ea, eb))
                prod[key] = prod.get(key, 0.0) + ca * cb
        return Polynomial(joint, prod)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Polynomial":
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a nonnegative integer")
        out = Polynomial.constant(1.0)
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def scale(self, c: Scalar) -> "Polynomial":
        return Polynomial(self.vars, {e: float(c) * v for e, v in self.terms.items()})

    def substitute(self, name: str, value: Union["Polynomial", Scalar]) -> "Polynomial":
        """Replace an indeterminate by a polynomial (or number) and expand."""
        if name not in self.vars:
            return self
        value = Polynomial.coerce(value)
        i = self.vars.index(name)
        rest = self.vars[:i] + self.vars[i + 1 :]
        out = Polynomial(rest, {})
        powers: dict[int, Polynomial] = {0: Polynomial.constant(1.0)}
        for exp, c in self.terms.items():
            k = exp[i]
            if k not in powers:
                powers[k] = value**k
            base = Polynomial(rest, {exp[:i] + exp[i + 1 :]: c})
            out = out + base * powers[k]
        return out

    def evaluate(self, point: Mapping[str, float]) -> float:
        """Evaluate at a full assignment of the polynomial's variables."""
        missing = [v for v in self.vars if v not in point and self.degree_in(v) > 0]
        if missing:
            raise ValueError(f"missing values for {missing}")
        vals = np.array([float(point.get(v, 0.0)) for v in self.vars])
        total = 0.0
        for exp, c in self.terms.items():
            m = c
            for v, e in zip(vals, exp):
                if e:
                    m *= v**e
            total += m
        return float(total)

    # -- ordering / io ---------------------------------------------------

    def sorted_terms(self) -> list[tuple[tuple[int, ...], float]]:
        """Terms in graded-lexicographic order (highest degree first)."""
        return sorted(self.terms.items(), key=lambda kv: _grlex_key(kv[0]), reverse=True)

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for exp, c in self.sorted_terms():
            factors = [repr(c)]
            for v, e in zip(self.vars, exp):
                if e == 1:
                    factors.append(v)
                elif e > 1:
                    factors.append(f"{v}^{e}")
            parts.append("*".join(factors))
        return " + ".join(parts)

    @classmethod
    def from_text(cls, text: str) -> "Polynomial":
        text = text.strip()
        if text == "0":
            return cls((), {})
        out = cls((), {})
        for chunk in text.split(" + "):
            factors = chunk.split("*")
            coeff = float(factors[0])
            term = cls.constant(coeff)
            for f in factors[1:]:
                m = re.fullmatch(r"([A-Za-z_][A-Za-z_0-9]*)(?:\^(\d+))?", f.strip())
                if not m:
                    raise ValueError(f"cannot parse factor {f!r}")
                term = term * cls.variable(m.group(1)) ** int(m.group(2) or 1)
            out = out + term
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, (Polynomial, int, float)):
            return NotImplemented
        diff = self - other
        return not diff.terms

    def __hash__(self):
        return hash((self.vars, tuple(sorted(self.terms.items()))))

    def __repr__(self) -> str:
        return f"Polynomial({self.to_text()})"


def allclose(p: Polynomial, q: Polynomial, tol: float = 1e-12) -> bool:
    d = p - q
    scale = max(1.0, p.max_coeff(), Polynomial.coerce(q).max_coeff())
    return d.max_coeff() <= tol * scale


def mat_mul(a: Sequence[Sequence], b: Sequence[Sequence]) -> list[list[Polynomial]]:
    """Product of rectangular matrices with Polynomial/number entries."""
    rows, inner = len(a), len(a[0])
    if len(b) != inner:
        raise ValueError("inner dimensions do not match")
    cols = len(b[0])
    out = []
    for i in range(rows):
        row = []
        for j in range(cols):
            acc = Polynomial.constant(0.0)
            for k in range(inner):
                acc = acc + Polynomial.coerce(a[i][k]) * Polynomial.coerce(b[k][j])
            row.append(acc)
        out.append(row)
    return out


def mat_transpose(a: Sequence[Sequence]) -> list[list]:
    return [list(col) for col in zip(*a)]


class PolyMatrix:
    """Symmetric square matrix with Polynomial entries."""

    __slots__ = ("dim", "entries")

    def __init__(self, entries: Sequence[Sequence], sym_tol: float = 1e-10):
        rows = [[Polynomial.coerce(e) for e in row] for row in entries]
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise ValueError("entries must form a square matrix")
        if n < 1:
            raise ValueError("dimension must be at least 1")
        for i in range(n):
            for j in range(i + 1, n):
                if not allclose(rows[i][j], rows[j][i], tol=sym_tol):
                    raise ValueError(f"entries ({i},{j}) and ({j},{i}) differ")
                rows[j][i] = rows[i][j]
        object.__setattr__(self, "dim", n)
        object.__setattr__(self, "entries", tuple(tuple(r) for r in rows))

    def __setattr__(self, name, value):
        raise AttributeError("PolyMatrix is immutable")

    def __getitem__(self, idx) -> Polynomial:
        i, j = idx
        return self.entries[i][j]

    def variables(self) -> tuple[str, ...]:
        names: dict[str, None] = {}
        for row in self.entries:
            for p in row:
                for v in p.vars:
                    if p.degree_in(v) > 0:
                        names[v] = None
        return tuple(names)

    def evaluate(self, point: Mapping[str, float]) -> np.ndarray:
        a = np.array([[p.evaluate(point) for p in row] for row in self.entries])
        return 0.5 * (a + a.T)

    def substitute(self, name: str, value) -> "PolyMatrix":
        return PolyMatrix(
            [[p.substitute(name, value) for p in row] for row in self.entries]
        )

    def scale(self, c: Scalar) -> "PolyMatrix":
        return PolyMatrix([[p.scale(c) for p in row] for row in self.entries])

    def __add__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        return PolyMatrix(
            [
                [self.entries[i][j] + other.entries[i][j] for j in range(self.dim)]
                for i in range(self.dim)
            ]
        )

    def max_degree(self) -> int:
        return max(p.degree() for row in self.entries for p in row)

    def __repr__(self) -> str:
        return f"PolyMatrix(dim={self.dim}, vars={self.variables()})"


def determinant(entries: Sequence[Sequence]) -> Polynomial:
    """Determinant by cofactor expansion; intended for dimension <= 6."""
    n = len(entries)
    if n == 1:
        return Polynomial.coerce(entries[0][0])
    sign = 1.0
    acc = Polynomial.constant(0.0)
    for j in range(n):
        minor = [
            [entries[i][k] for k in range(n) if k != j] for i in range(1, n)
        ]
        acc = acc + Polynomial.coerce(entries[0][j]).scale(sign) * determinant(minor)
        sign = -sign
    return acc


def principal_minors(m: PolyMatrix, which: str = "all") -> list[Polynomial]:
    """Principal minors of a symmetric polynomial matrix.

    ``all`` returns every principal minor (2^dim - 1 of them, index sets in
    size-then-lexicographic order); ``leading`` returns the dim leading
    ones.  Nonnegativity of *all* principal minors characterizes positive
    semidefiniteness (leading minors alone only give definiteness).
    """
    if m.dim > 6:
        raise SizeError("principal minors supported up to dimension 6")
    if which == "leading":
        subsets = [tuple(range(k + 1)) for k in range(m.dim)]
    elif which == "all":
        subsets = [
            s
            for k in range(1, m.dim + 1)
            for s in itertools.combinations(range(m.dim), k)
        ]
    else:
        raise ValueError("which must be 'all' or 'leading'")
    out = []
    for s in subsets:
        sub = [[m.entries[i][j] for j in s] for i in s]
        out.append(determinant(sub))
    return out


def trace_det_scalarize(m: PolyMatrix) -> tuple[Polynomial, Polynomial]:
    """Exact trace and determinant polynomials of a 2x2 polynomial matrix."""
    if m.dim != 2:
        raise SizeError("trace/determinant scalarization requires a 2x2 matrix")
    tr = m.entries[0][0] + m.entries[1][1]
    det = m.entries[0][0] * m.entries[1][1] - m.entries[0][1] * m.entries[1][0]
    return tr, det
