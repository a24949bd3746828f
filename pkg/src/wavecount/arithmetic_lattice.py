"""The cubic field Q(theta), theta^3 = -theta^2 + 2 theta + 1, and the group SO(Q) for
Q = 2 x0^2 - 3 x1^2 - x2^2 over its integers.

Real embeddings are listed in descending order of the root theta is sent to:
approximately 1.2470, -0.4450, -1.8019.  With that order sigma (theta -> theta^2 - 2)
cycles the roots, so the j-th embedding of x equals the first embedding of sigma^j(x).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from . import _exact
from ._budget import budget

# f(x) = x^3 + x^2 - 2x - 1, coefficients low to high
F_COEFFS = (-1, -2, 1, 1)
S_DIAG = (2, -3, -1)
ROOT_GUESSES = (1.2469796037, -0.4450418679, -1.8019377358)


def _poly_mod_f(p: list[Fraction]) -> list[Fraction]:
    """Reduce a low-to-high coefficient list modulo f."""
    p = list(p)
    while len(p) > 3:
        top = p.pop()
        # x^k = x^{k-3} * (-x^2 + 2x + 1)
        k = len(p) - 3
        p[k + 2] -= top
        p[k + 1] += 2 * top
        p[k] += top
    while len(p) < 3:
        p.append(Fraction(0))
    return p


def _poly_mul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return out


@dataclass(frozen=True)
class CubicFieldElement:
    """a + b theta + c theta^2 with rational a, b, c."""

    coords: tuple

    def __post_init__(self):
        c = tuple(_exact.frac(x) for x in self.coords)
        if len(c) != 3:
            raise ValueError("need three coordinates")
        object.__setattr__(self, "coords", c)

    @classmethod
    def of(cls, x) -> "CubicFieldElement":
        if isinstance(x, CubicFieldElement):
            return x
        return cls((x, 0, 0))

    @classmethod
    def theta(cls) -> "CubicFieldElement":
        return cls((0, 1, 0))

    def __add__(self, other):
        o = CubicFieldElement.of(other)
        return CubicFieldElement(tuple(a + b for a, b in zip(self.coords, o.coords)))

    __radd__ = __add__

    def __neg__(self):
        return CubicFieldElement(tuple(-a for a in self.coords))

    def __sub__(self, other):
        return self + (-CubicFieldElement.of(other))

    def __rsub__(self, other):
        return CubicFieldElement.of(other) - self

    def __mul__(self, other):
        o = CubicFieldElement.of(other)
        return CubicFieldElement(tuple(_poly_mod_f(_poly_mul(self.coords, o.coords))))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * CubicFieldElement.of(other).inverse()

    def __pow__(self, k: int):
        out = CubicFieldElement.of(1)
        base = self if k >= 0 else self.inverse()
        for _ in range(abs(k)):
            out = out * base
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = CubicFieldElement.of(other)
        if not isinstance(other, CubicFieldElement):
            return NotImplemented
        return self.coords == other.coords

    def __hash__(self):
        return hash(self.coords)

    def is_zero(self) -> bool:
        return not any(self.coords)

    def is_rational(self) -> bool:
        return self.coords[1] == 0 and self.coords[2] == 0

    def mult_matrix(self) -> list[list[Fraction]]:
        """Matrix of y -> self * y in the basis 1, theta, theta^2 (columns are images)."""
        cols = [(self * CubicFieldElement(e)).coords for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))]
        return [[cols[j][i] for j in range(3)] for i in range(3)]

    def inverse(self) -> "CubicFieldElement":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero")
        sol = _exact.coordinates([Fraction(1), Fraction(0), Fraction(0)], _exact.transpose(self.mult_matrix()))
        return CubicFieldElement(tuple(sol))

    def trace(self) -> Fraction:
        m = self.mult_matrix()
        return m[0][0] + m[1][1] + m[2][2]

    def norm(self) -> Fraction:
        return _exact.det(self.mult_matrix())

    def __repr__(self):
        a, b, c = self.coords
        return f"CubicFieldElement({a}, {b}, {c})"


def field_add(x, y):
    return CubicFieldElement.of(x) + y


def field_mul(x, y):
    return CubicFieldElement.of(x) * y


def field_inverse(x):
    return CubicFieldElement.of(x).inverse()


def _eval_f_at(x: CubicFieldElement) -> CubicFieldElement:
    return x * x * x + x * x - 2 * x - 1


SIGMA_IMAGE = CubicFieldElement((-2, 0, 1))  # theta^2 - 2


def verify_sigma() -> bool:
    """theta^2 - 2 is a root of f in Q(theta), different from theta and of order 3."""
    if not _eval_f_at(SIGMA_IMAGE).is_zero():
        return False
    t = CubicFieldElement.theta()
    s1 = _apply_sigma(t)
    s2 = _apply_sigma(s1)
    return s1 != t and s2 != t and _apply_sigma(s2) == t


def _apply_sigma(x: CubicFieldElement) -> CubicFieldElement:
    a, b, c = x.coords
    return a + b * SIGMA_IMAGE + c * SIGMA_IMAGE * SIGMA_IMAGE


_SIGMA_OK: bool | None = None


def galois_sigma(x) -> CubicFieldElement:
    """Field automorphism theta -> theta^2 - 2 (checked to be a Galois generator first)."""
    global _SIGMA_OK
    if _SIGMA_OK is None:
        _SIGMA_OK = verify_sigma()
    if not _SIGMA_OK:
        raise RuntimeError("theta^2 - 2 does not define a Galois generator")
    return _apply_sigma(CubicFieldElement.of(x))


def discriminant() -> int:
    """Discriminant of f; equals the field discriminant 49, so Z[theta] is maximal."""
    b, c, d = 1, -2, -1  # x^3 + b x^2 + c x + d
    return b * b * c * c - 4 * c ** 3 - 4 * b ** 3 * d - 27 * d * d + 18 * b * c * d


def _roots_interval(prec: int):
    """Roots of f enclosed by interval Newton iteration at ``prec`` bits."""
    out = []
    with mpmath.workprec(prec + 20):
        iv = mpmath.iv
        iv.prec = prec + 20
        for g in ROOT_GUESSES:
            X = iv.mpf([g - 1e-6, g + 1e-6])
            for _ in range(200):
                m = iv.mpf(X.mid)
                fm = m ** 3 + m ** 2 - 2 * m - 1
                dX = 3 * X ** 2 + 2 * X - 2
                N = m - fm / dX
                lo = max(N.a, X.a)
                hi = min(N.b, X.b)
                if lo > hi:
                    raise ArithmeticError("interval Newton lost the root")
                X = iv.mpf([lo, hi])
                if X.delta < mpmath.mpf(2) ** (-prec - 4):
                    break
            out.append(mpmath.mpf(X.mid))
    return out


_ROOT_CACHE: dict = {}


def field_roots(precision: int = 128):
    if precision not in _ROOT_CACHE:
        _ROOT_CACHE[precision] = _roots_interval(precision)
    return _ROOT_CACHE[precision]


def real_embeddings(x, precision: int = 128):
    """The three real embeddings of x, descending root order, as mpmath numbers."""
    if precision < 64:
        raise ValueError("precision must be at least 64 bits")
    x = CubicFieldElement.of(x)
    roots = field_roots(precision)
    with mpmath.workprec(precision):
        a, b, c = (mpmath.mpf(v.numerator) / v.denominator for v in x.coords)
        return tuple(a + b * r + c * r * r for r in roots)


# ---------------------------------------------------------------------------
# The form group

def _as_field_matrix(g):
    return [[CubicFieldElement.of(v) for v in row] for row in g]


def _mat_mul(a, b):
    n, m, k = len(a), len(b[0]), len(b)
    return [[sum((a[i][t] * b[t][j] for t in range(k)), CubicFieldElement.of(0)) for j in range(m)] for i in range(n)]


def _det3(g):
    return (g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
            - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
            + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]))


def form_matrix():
    return [[CubicFieldElement.of(S_DIAG[i] if i == j else 0) for j in range(3)] for i in range(3)]


def is_in_group(g) -> bool:
    """g^T S g = S and det g = 1, exactly."""
    if len(g) != 3 or any(len(r) != 3 for r in g):
        raise ValueError("3x3 matrix expected")
    g = _as_field_matrix(g)
    gt = [list(r) for r in zip(*g)]
    return _mat_mul(_mat_mul(gt, form_matrix()), g) == form_matrix() and _det3(g) == CubicFieldElement.of(1)


def _box_vectors(h: int, value: int):
    """Integer vectors in [-h,h]^3 with Q(v) = value."""
    r = np.arange(-h, h + 1)
    v = np.array(list(itertools.product(r, r, r)), dtype=np.int64)
    q = 2 * v[:, 0] ** 2 - 3 * v[:, 1] ** 2 - v[:, 2] ** 2
    return v[q == value]


def enumerate_gamma0(height: int, limit: int | None = None) -> list[tuple]:
    """Integer matrices with entries in [-height, height] in SO(Q).

    Columns c0, c1, c2 must satisfy Q(c0)=2, Q(c1)=-3, Q(c2)=-1 and be pairwise
    orthogonal for the form; the determinant is checked last.
    """
    if height < 1:
        raise ValueError("height must be positive")
    cap = budget(10**6) if limit is None else limit
    if (2 * height + 1) ** 3 > cap:
        raise ValueError(f"height {height} exceeds enumeration budget")
    S = np.diag(S_DIAG)
    c0 = _box_vectors(height, 2)
    c1 = _box_vectors(height, -3)
    c2 = _box_vectors(height, -1)
    out = []
    for a in c0:
        Sa = S @ a
        b_ok = c1[c1 @ Sa == 0]
        c_ok = c2[c2 @ Sa == 0]
        for b in b_ok:
            Sb = S @ b
            for c in c_ok[c_ok @ Sb == 0]:
                g = np.stack([a, b, c], axis=1)
                if round(np.linalg.det(g)) == 1:
                    mat = tuple(tuple(int(x) for x in row) for row in g)
                    if _int_det(mat) == 1:
                        out.append(mat)
    return sorted(out)


def _int_det(m) -> int:
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def int_inverse(m) -> tuple:
    """Inverse of an integer matrix in SO(Q): S^{-1} g^T S."""
    s = S_DIAG
    return tuple(tuple(Fraction(s[j] * m[j][i], s[i]) for j in range(3)) for i in range(3))


# ---------------------------------------------------------------------------
# Elements over the field and their triple embeddings

def bilinear(x, y):
    return sum((S_DIAG[i] * CubicFieldElement.of(x[i]) * y[i] for i in range(3)), CubicFieldElement.of(0))


def reflection(v) -> list[list[CubicFieldElement]]:
    """x -> x - 2 B(x,v)/Q(v) v; integral when Q(v) is a unit or twice a unit."""
    v = [CubicFieldElement.of(t) for t in v]
    qv = bilinear(v, v)
    k = CubicFieldElement.of(2) / qv
    cols = []
    for e in range(3):
        x = [CubicFieldElement.of(int(i == e)) for i in range(3)]
        bxv = bilinear(x, v)
        cols.append([x[i] - k * bxv * v[i] for i in range(3)])
    return [[cols[j][i] for j in range(3)] for i in range(3)]


def integral_reflection_vectors(height: int = 1, limit: int = 20):
    """Vectors over Z[theta] with small coordinates whose reflection is integral and irrational."""
    rng = range(-height, height + 1)
    out = []
    coords = list(itertools.product(rng, repeat=3))
    for v0, v1, v2 in itertools.product(coords, repeat=3):
        v = [CubicFieldElement(v0), CubicFieldElement(v1), CubicFieldElement(v2)]
        if all(x.is_rational() for x in v):
            continue
        q = bilinear(v, v)
        if q.is_zero():
            continue
        nq = q.norm()
        if nq in (1, -1) or (q / 2).norm() in (1, -1):
            out.append(v)
            if len(out) >= limit:
                break
    return out


@dataclass(frozen=True)
class TripleLatticePoint:
    components: tuple  # three 3x3 numpy float arrays
    precision: int


def _embed_matrix(g, j: int, precision: int):
    return [[real_embeddings(x, precision)[j] for x in row] for row in g]


def triple_embed(g, precision: int = 128, tol: float = 1e-9) -> TripleLatticePoint:
    """(g, g^sigma, g^sigma^2) under the first real embedding."""
    g = _as_field_matrix(g)
    if not is_in_group(g):
        raise ValueError("matrix is not in the form group")
    comps = []
    cur = g
    for j in range(3):
        emb = _embed_matrix(cur, 0, precision)
        direct = _embed_matrix(g, j, precision)
        with mpmath.workprec(precision):
            gap = max(abs(a - b) for ra, rb in zip(emb, direct) for a, b in zip(ra, rb))
        if gap > mpmath.mpf(2) ** (-precision + 16):
            raise ArithmeticError("embedding order inconsistent with sigma")
        m = mpmath.matrix(emb)
        S = mpmath.diag(list(S_DIAG))
        resid = m.T * S * m - S
        if max(abs(x) for x in resid) > tol:
            raise ArithmeticError("embedded component does not preserve the form")
        comps.append(np.array([[float(x) for x in row] for row in emb]))
        cur = [[galois_sigma(x) for x in row] for row in cur]
    return TripleLatticePoint(tuple(comps), precision)


def frobenius(m) -> float:
    if isinstance(m, TripleLatticePoint):
        raise TypeError("use component norms for triples")
    return float(np.linalg.norm(np.array(m, dtype=float)))


def _float_entry(x) -> float:
    if isinstance(x, CubicFieldElement):
        return float(real_embeddings(x, 64)[0])
    return float(Fraction(x))


def count_norm_ball(points, radii) -> dict:
    """Counts of points in Frobenius balls; a triple must have every component inside.

    Besides the counts, returns N_R / R^k with k = 1 for single matrices and k = 3
    for triples (the Haar volume of a Frobenius ball in SO(2,1) grows linearly),
    and the largest relative change between consecutive ratios.
    """
    radii = sorted(float(r) for r in radii)
    sizes = []
    k = 1
    for p in points:
        if isinstance(p, TripleLatticePoint):
            k = 3
            sizes.append(max(float(np.linalg.norm(c)) for c in p.components))
        else:
            sizes.append(float(np.linalg.norm(np.array([[_float_entry(x) for x in r] for r in p]))))
    sizes = np.sort(np.array(sizes))
    counts = [int(np.searchsorted(sizes, R, side="left")) for R in radii]
    ratios = [c / R ** k for c, R in zip(counts, radii)]
    trend = [abs(b - a) / abs(a) for a, b in zip(ratios, ratios[1:]) if a]
    return {"R": radii, "counts": counts, "ratios": ratios,
            "max_relative_step": max(trend) if trend else 0.0}
