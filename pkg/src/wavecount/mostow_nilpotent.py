"""Nilpotent Lie algebras, the filtration w_j = u_H + u^j and the map (X, h) -> exp(X) h.

All arithmetic is over the rationals.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction

from ._exact import coordinates, fvec, in_span, intersect_spaces, orth_complement, rank, row_basis, sum_spaces


class NotNilpotent(ValueError):
    pass


def _zero(n):
    return [[Fraction(0)] * n for _ in range(n)]


def _mm(a, b):
    n = len(a)
    return [[sum((a[i][k] * b[k][j] for k in range(n) if a[i][k]), Fraction(0)) for j in range(n)]
            for i in range(n)]


def _add(a, b, s=1):
    return [[x + s * y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def _scale(a, c):
    return [[c * x for x in row] for row in a]


def _eye(n):
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def _is_zero(a):
    return all(x == 0 for row in a for x in row)


def mat_exp(X):
    """exp of a nilpotent matrix: the series stops by itself."""
    n = len(X)
    out, term = _eye(n), _eye(n)
    for k in range(1, n + 1):
        term = _scale(_mm(term, X), Fraction(1, k))
        if _is_zero(term):
            break
        out = _add(out, term)
    return out


def mat_log(g):
    """log of a unipotent matrix."""
    n = len(g)
    N = _add(g, _eye(n), -1)
    out, power = _zero(n), _eye(n)
    for k in range(1, n + 1):
        power = _mm(power, N)
        if _is_zero(power):
            break
        out = _add(out, _scale(power, Fraction((-1) ** (k + 1), k)))
    return out


@dataclass
class NilpotentLieAlgebra:
    """Structure constants c[i][j][k] with [e_i, e_j] = sum_k c[i][j][k] e_k."""

    dim: int
    brackets: list
    matrices: list | None = None

    def __post_init__(self):
        d = self.dim
        self.brackets = [[fvec(self.brackets[i][j]) for j in range(d)] for i in range(d)]
        if self.matrices is not None:
            self.matrices = [[fvec(row) for row in m] for m in self.matrices]
            if len(self.matrices) != d:
                raise ValueError("one matrix per basis vector")
        self._check()

    def _check(self):
        d = self.dim
        c = self.brackets
        for i in range(d):
            for j in range(d):
                if any(c[i][j][k] != -c[j][i][k] for k in range(d)):
                    raise ValueError("brackets are not antisymmetric")
        for i in range(d):
            for j in range(d):
                for k in range(d):
                    lhs = [sum((c[j][k][m] * c[i][m][s] + c[k][i][m] * c[j][m][s] + c[i][j][m] * c[k][m][s]
                                for m in range(d)), Fraction(0)) for s in range(d)]
                    if any(lhs):
                        raise ValueError("Jacobi identity fails")

    @classmethod
    def from_structure(cls, dim: int, nonzero: dict, matrices=None) -> "NilpotentLieAlgebra":
        """``nonzero`` maps (i, j) to the coordinate vector of [e_i, e_j]."""
        c = [[[Fraction(0)] * dim for _ in range(dim)] for _ in range(dim)]
        for (i, j), v in nonzero.items():
            c[i][j] = fvec(v)
            c[j][i] = [-x for x in fvec(v)]
        return cls(dim, c, matrices)

    @classmethod
    def from_matrices(cls, matrices) -> "NilpotentLieAlgebra":
        """Structure constants read off a strictly upper triangular realization."""
        mats = [[fvec(row) for row in m] for m in matrices]
        for m in mats:
            if any(m[i][j] for i in range(len(m)) for j in range(i + 1)):
                raise ValueError("realization must be strictly upper triangular")
        flat = [[x for row in m for x in row] for m in mats]
        d = len(mats)
        if rank(flat) != d:
            raise ValueError("realization matrices are linearly dependent")
        c = [[None] * d for _ in range(d)]
        for i in range(d):
            for j in range(d):
                br = _add(_mm(mats[i], mats[j]), _mm(mats[j], mats[i]), -1)
                v = coordinates([x for row in br for x in row], flat)
                if v is None:
                    raise ValueError("span of the matrices is not closed under brackets")
                c[i][j] = v
        return cls(d, c, mats)

    @classmethod
    def from_json(cls, text: str) -> "NilpotentLieAlgebra":
        doc = json.loads(text)
        if "matrices" in doc and "brackets" not in doc:
            return cls.from_matrices([[[Fraction(x) for x in row] for row in m] for m in doc["matrices"]])
        nz = {(int(i), int(j)): [Fraction(x) for x in v] for i, j, v in doc["brackets"]}
        mats = doc.get("matrices")
        if mats is not None:
            mats = [[[Fraction(x) for x in row] for row in m] for m in mats]
        return cls.from_structure(int(doc["dim"]), nz, mats)

    def bracket(self, x, y):
        d = self.dim
        c = self.brackets
        out = [Fraction(0)] * d
        for i in range(d):
            if not x[i]:
                continue
            for j in range(d):
                if not y[j]:
                    continue
                f = x[i] * y[j]
                for k in range(d):
                    if c[i][j][k]:
                        out[k] += f * c[i][j][k]
        return out

    def bracket_space(self, a, b):
        return row_basis([self.bracket(x, y) for x in a for y in b])

    def is_subalgebra(self, basis) -> bool:
        basis = row_basis(basis)
        return all(in_span(self.bracket(x, y), basis) for x in basis for y in basis)

    def to_matrix(self, x):
        if self.matrices is None:
            raise ValueError("no matrix realization")
        n = len(self.matrices[0])
        out = _zero(n)
        for xi, m in zip(x, self.matrices):
            if xi:
                out = _add(out, _scale(m, xi))
        return out

    def from_matrix(self, g):
        flat = [[x for row in m for x in row] for m in self.matrices]
        v = coordinates([x for row in g for x in row], flat)
        if v is None:
            raise ValueError("matrix is not in the realization")
        return v


def _unit_basis(d):
    return [[Fraction(int(i == j)) for j in range(d)] for i in range(d)]


def lower_central_series(u: NilpotentLieAlgebra):
    """(chain, n): chain[j] = u^j with u^0 = u, ending with the zero space; u^n = 0."""
    chain = [_unit_basis(u.dim)]
    while chain[-1]:
        nxt = u.bracket_space(chain[0], chain[-1])
        if len(nxt) == len(chain[-1]):
            raise NotNilpotent("lower central series is stationary above zero")
        chain.append(nxt)
    return chain, len(chain) - 1


@dataclass
class FiltrationData:
    u_H: list
    w: list
    V: list
    series: list
    V_total: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.series) - 1


def build_filtration(u: NilpotentLieAlgebra, u_H) -> FiltrationData:
    """w_j = u_H + u^j and complements V_j with w_j = V_j + w_{j+1}.

    V_j is the orthogonal complement of w_{j+1} cap u^j inside u^j, so it is
    orthogonal to w_{j+1} in coordinates whenever that intersection allows and
    always lies in u^j.
    """
    d = u.dim
    u_H = row_basis([fvec(v) for v in u_H])
    if not u.is_subalgebra(u_H):
        raise ValueError("u_H is not a subalgebra")
    series, n = lower_central_series(u)
    w = [sum_spaces(u_H, series[j]) for j in range(n + 1)]
    for j in range(n):
        if not all(in_span(v, w[j]) for v in w[j + 1]):
            raise AssertionError("filtration is not decreasing")
        for x in w[j]:
            for y in w[j]:
                if not in_span(u.bracket(x, y), w[j + 1]):
                    raise AssertionError(f"w_{j + 1} is not co-abelian in w_{j}")
    V = []
    for j in range(n):
        inner = intersect_spaces(w[j + 1], series[j], d)
        Vj = orth_complement(inner, series[j], d)
        if len(Vj) + len(w[j + 1]) != len(w[j]) or rank(Vj + w[j + 1]) != len(w[j]):
            raise AssertionError(f"V_{j} is not a complement")
        V.append(Vj)
    total = [v for Vj in V for v in Vj]
    if len(total) + len(u_H) != d or rank(total + u_H) != d:
        raise AssertionError("u_H + V is not a direct sum equal to u")
    return FiltrationData(u_H, w, V, series, total)


class _Splitter:
    """Coordinates in the basis V_0, ..., V_{n-1}, u_H."""

    def __init__(self, filt: FiltrationData):
        self.blocks = filt.V + [filt.u_H]
        self.basis = [v for b in self.blocks for v in b]

    def split(self, x):
        c = coordinates(x, self.basis)
        out, o = [], 0
        for b in self.blocks:
            part = [Fraction(0)] * len(x)
            for i, v in enumerate(b):
                ci = c[o + i]
                if ci:
                    part = [p + ci * y for p, y in zip(part, v)]
            out.append(part)
            o += len(b)
        return out


def exp_coordinates(u: NilpotentLieAlgebra, filt: FiltrationData, g):
    """Peel g = exp(X_0) ... exp(X_{n-1}) h with X_j in V_j and h in U_H."""
    sp = _Splitter(filt)
    parts = []
    for j in range(filt.n):
        Xj = sp.split(u.from_matrix(mat_log(g)))[j]
        parts.append(Xj)
        g = _mm(mat_exp(u.to_matrix([-x for x in Xj])), g)
    return parts, g


def decompose(u: NilpotentLieAlgebra, filt: FiltrationData, g):
    """(X, h) with X in V, h in U_H and g = exp(X) h.

    The map X -> peeled coordinates of exp(X) is unipotent triangular along the
    filtration, so the correction X <- X + (target - Phi(X)) settles after at most
    n rounds.
    """
    target, _ = exp_coordinates(u, filt, g)
    X = [sum(c) for c in zip(*target)] if target else [Fraction(0)] * u.dim
    for _ in range(filt.n + 1):
        got, _ = exp_coordinates(u, filt, mat_exp(u.to_matrix(X)))
        diff = [[a - b for a, b in zip(t, s)] for t, s in zip(target, got)]
        if not any(x for part in diff for x in part):
            break
        for part in diff:
            X = [x + y for x, y in zip(X, part)]
    else:
        raise ArithmeticError("decomposition did not settle")
    h = _mm(mat_exp(u.to_matrix([-x for x in X])), g)
    if not in_span(u.from_matrix(mat_log(h)), filt.u_H) and filt.u_H is not None:
        raise ArithmeticError("remaining factor is not in U_H")
    return X, h


def _random_in(span, rng, d):
    out = [Fraction(0)] * d
    for v in span:
        c = Fraction(rng.randint(-6, 6), rng.randint(1, 5))
        out = [a + c * b for a, b in zip(out, v)]
    return out


def exp_decomposition_check(u: NilpotentLieAlgebra, u_H, samples: int = 100, seed: int = 0,
                            filt: FiltrationData | None = None) -> bool:
    """Random (X, h), g = exp(X) h, recover (X', h') and compare exactly."""
    if u.matrices is None:
        raise ValueError("a matrix realization is required")
    filt = filt or build_filtration(u, u_H)
    rng = random.Random(seed)
    for i in range(samples):
        X = _random_in(filt.V_total, rng, u.dim) if i else [Fraction(0)] * u.dim
        Y = _random_in(filt.u_H, rng, u.dim)
        h = mat_exp(u.to_matrix(Y))
        g = _mm(mat_exp(u.to_matrix(X)), h)
        if mat_exp(mat_log(g)) != g:
            return False
        X2, h2 = decompose(u, filt, g)
        if X2 != X or h2 != h:
            return False
    return True


def _E(n, i, j):
    m = _zero(n)
    m[i][j] = Fraction(1)
    return m


def heisenberg() -> NilpotentLieAlgebra:
    """X = E12, Y = E23, Z = E13, so [X, Y] = Z."""
    return NilpotentLieAlgebra.from_matrices([_E(3, 0, 1), _E(3, 1, 2), _E(3, 0, 2)])


def filiform4() -> NilpotentLieAlgebra:
    """X1 = E12 + E23, X2 = E34, X3 = E24, X4 = E14: [X1, X2] = X3, [X1, X3] = X4."""
    return NilpotentLieAlgebra.from_matrices([_add(_E(4, 0, 1), _E(4, 1, 2)), _E(4, 2, 3), _E(4, 1, 3),
                                              _E(4, 0, 3)])


def abelian(d: int) -> NilpotentLieAlgebra:
    """R^d realized by E_{1,j+1} in (d+1) x (d+1) matrices (these multiply to zero)."""
    mats = []
    for j in range(d):
        m = [[0] * (d + 1) for _ in range(d + 1)]
        m[0][j + 1] = 1
        mats.append(m)
    return NilpotentLieAlgebra.from_matrices(mats)
