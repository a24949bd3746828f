"""Exact polyhedral geometry of spherical spaces.

Covectors and vectors on ``a`` are both written in the same coordinates and
paired by the standard dot product; ``a_Z`` is the orthogonal complement of
``a_H``.  Everything is done over :class:`fractions.Fraction`.
"""
from __future__ import annotations

import json
import math
import random
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from importlib import resources
from itertools import combinations

from ._exact import (coordinates, dot, fvec, in_span, inverse, matmul, nullspace, orth_complement,
                     primitive, rank, row_basis, transpose)


class ConeError(ValueError):
    pass


def _key(v):
    return tuple(v)


def _is_zero(v):
    return all(x == 0 for x in v)


# ---------------------------------------------------------------------------
# double description


def cone_generators(ineqs, dim: int):
    """Generators of {x : a.x <= 0 for every a in ineqs}.

    Returns ``(lines, rays)``: a basis of the lineality space and the extreme
    rays of the pointed part, both as primitive integral vectors in canonical
    order.
    """
    ineqs = [fvec(a) for a in ineqs if not _is_zero(a)]
    lines = [[Fraction(int(i == j)) for j in range(dim)] for i in range(dim)]
    rays: list[list[Fraction]] = []
    seen: list[list[Fraction]] = []
    for a in ineqs:
        idx = next((i for i, ln in enumerate(lines) if dot(a, ln) != 0), None)
        if idx is not None:
            pivot = lines[idx]
            s = dot(a, pivot)
            if s > 0:
                pivot = [-x for x in pivot]
                s = -s
            others = []
            for ln in lines[:idx] + lines[idx + 1:]:
                t = dot(a, ln)
                others.append([x - t / s * y for x, y in zip(ln, pivot)] if t else ln)
            lines = [ln for ln in others if not _is_zero(ln)]
            lines = row_basis(lines) if lines else []
            new_rays = []
            for r in rays:
                t = dot(a, r)
                new_rays.append([x - t / s * y for x, y in zip(r, pivot)] if t else r)
            rays = new_rays + [pivot]
            seen.append(a)
            continue
        vals = [dot(a, r) for r in rays]
        neg = [(r, v) for r, v in zip(rays, vals) if v < 0]
        keep = [r for r, v in zip(rays, vals) if v <= 0]
        target = dim - len(lines) - 2
        for p, vp in ((r, v) for r, v in zip(rays, vals) if v > 0):
            tight_p = [b for b in seen if dot(b, p) == 0]
            for n, vn in neg:
                common = [b for b in tight_p if dot(b, n) == 0]
                if rank(common) != target:
                    continue
                keep.append([vp * y - vn * x for x, y in zip(p, n)])
        rays = keep
        seen.append(a)
    lines = [primitive(ln) for ln in row_basis(lines)] if lines else []
    if lines:
        # rays are only defined modulo the lines; take the part orthogonal to them
        ginv = inverse([[dot(u, v) for v in lines] for u in lines])
        rays = [_drop_lines(r, lines, ginv) for r in rays]
    out = {}
    for r in rays:
        if not _is_zero(r):
            pr = primitive(r)
            out[_key(pr)] = pr
    return lines, sorted(out.values())


def _drop_lines(r, lines, ginv):
    c = [sum(g * dot(ln, r) for g, ln in zip(row, lines)) for row in ginv]
    return [x - sum(ci * ln[k] for ci, ln in zip(c, lines)) for k, x in enumerate(r)]


def hrep_of_cone(gens, dim: int):
    """Normals a with cone(gens) = {x : a.x <= 0 for all a}."""
    gens = [fvec(g) for g in gens if not _is_zero(g)]
    lines, rays = cone_generators(gens, dim)  # the polar cone
    return rays + lines + [[-x for x in ln] for ln in lines]


def extreme_rays(gens, dim: int):
    """(lines, extreme rays) of the cone spanned by ``gens``."""
    gens = [fvec(g) for g in gens if not _is_zero(g)]
    if not gens:
        return [], []
    return cone_generators(hrep_of_cone(gens, dim), dim)


def in_cone(x, hrep) -> bool:
    return all(dot(a, x) <= 0 for a in hrep)


# ---------------------------------------------------------------------------
# data types


@dataclass
class RootSystemData:
    dim_a: int
    roots: list
    positive_subset: frozenset
    a_H: list = field(default_factory=list)

    def __post_init__(self):
        self.roots = [fvec(r) for r in self.roots]
        self.a_H = row_basis([fvec(v) for v in self.a_H])
        self.positive_subset = frozenset(self.positive_subset)
        if any(len(r) != self.dim_a for r in self.roots) or any(len(v) != self.dim_a for v in self.a_H):
            raise ValueError("dimension mismatch")
        if any(_is_zero(r) for r in self.roots):
            raise ValueError("roots must be nonzero")
        keys = {_key(r) for r in self.roots}
        if any(_key([-x for x in r]) not in keys for r in self.roots):
            raise ValueError("roots must be closed under negation")
        pos = self.positive
        # a generic functional: interior point of the dual cone of the positive roots
        lines, rays = cone_generators([[-x for x in r] for r in pos], self.dim_a)
        if rank(lines + rays) != self.dim_a:
            raise ValueError("positive roots do not lie in an open half-space")
        y0 = [sum(c) for c in zip(*rays)] if rays else [Fraction(0)] * self.dim_a
        for i, r in enumerate(self.roots):
            v = dot(r, y0)
            if v == 0 or (v > 0) != (i in self.positive_subset):
                raise ValueError("positive subset is not cut out by a generic functional")
        self.generic = y0

    @classmethod
    def from_positive(cls, dim_a: int, positive_roots, a_H=()):
        pos = [fvec(r) for r in positive_roots]
        roots = pos + [[-x for x in r] for r in pos]
        return cls(dim_a, roots, frozenset(range(len(pos))), list(a_H))

    @property
    def positive(self):
        return [self.roots[i] for i in sorted(self.positive_subset)]

    @property
    def a_Z(self):
        ambient = [[Fraction(int(i == j)) for j in range(self.dim_a)] for i in range(self.dim_a)]
        return orth_complement(self.a_H, ambient, self.dim_a)

    @property
    def sigma_u(self):
        """Positive roots that do not vanish on a_Z."""
        return [r for r in self.positive if not in_span(r, self.a_H)]

    def a_minus_generators(self):
        """Generators of the closed negative chamber plus a_H (lines counted with both signs)."""
        lines, rays = cone_generators(self.positive, self.dim_a)
        out = rays + lines + [[-x for x in ln] for ln in lines]
        out += [list(v) for v in self.a_H] + [[-x for x in v] for v in self.a_H]
        return out


@dataclass
class TFlagData:
    root_data: RootSystemData
    pairs: list

    def __post_init__(self):
        rd = self.root_data
        su = {_key(r) for r in rd.sigma_u}
        clean = []
        for alpha, beta in self.pairs:
            alpha = fvec(alpha)
            beta = fvec(beta) if beta is not None else [Fraction(0)] * rd.dim_a
            if _key(alpha) not in su:
                raise ValueError(f"alpha={alpha} is not in Sigma_u")
            if not _is_zero(beta) and _key(beta) not in su:
                raise ValueError(f"beta={beta} is not in {{0}} + Sigma_u")
            for y in rd.a_H:
                if -dot(alpha, y) != dot(beta, y):
                    raise ValueError(f"pair ({alpha}, {beta}) violates -alpha = beta on a_H")
            clean.append((alpha, beta))
        self.pairs = clean


@dataclass
class CompressionCone:
    dim_a: int
    M: list
    S: list
    a_H: list = field(default_factory=list)

    @property
    def cone_minus(self):
        """Normals of the H-representation {Y : sigma(Y) <= 0}."""
        return [list(s) for s in self.S]

    @property
    def is_whole_space(self) -> bool:
        return not self.S

    def contains(self, y) -> bool:
        return in_cone(fvec(y), self.S)

    def generators(self):
        lines, rays = cone_generators(self.S, self.dim_a)
        return lines, rays


def symmetric_pair_flags(root_data: RootSystemData, sigma) -> TFlagData:
    """Flags (alpha, -sigma alpha) of the symmetric pair given by an involution on a.

    ``sigma`` is a matrix acting on vectors of ``a``; it acts on covectors by the
    transpose.  It must be an orthogonal involution permuting the roots whose
    fixed space is a_H.
    """
    s = [fvec(r) for r in sigma]
    n = root_data.dim_a
    eye = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    if matmul(s, s) != eye or matmul(transpose(s), s) != eye:
        raise ValueError("sigma must be an orthogonal involution")
    st = transpose(s)
    keys = {_key(r) for r in root_data.roots}
    act = [[dot(row, r) for row in st] for r in root_data.roots]
    if any(_key(r) not in keys for r in act):
        raise ValueError("sigma does not permute the roots")
    fixed = nullspace([[s[i][j] - eye[i][j] for j in range(n)] for i in range(n)], n)
    if row_basis(fixed) != root_data.a_H:
        raise ValueError("a_H must be the fixed space of sigma")
    su = {_key(r) for r in root_data.sigma_u}
    pairs = []
    for alpha in root_data.sigma_u:
        beta = [-dot(row, alpha) for row in st]
        if _key(beta) not in su:
            raise ValueError(f"-sigma alpha = {beta} is not in Sigma_u")
        pairs.append((alpha, beta))
    return TFlagData(root_data, pairs)


# ---------------------------------------------------------------------------
# operations


def compute_M(flags: TFlagData):
    out = {}
    for alpha, beta in flags.pairs:
        m = [a + b for a, b in zip(alpha, beta)]
        for y in flags.root_data.a_H:
            if dot(m, y) != 0:
                raise ValueError(f"{m} does not vanish on a_H; flags are inconsistent")
        if not _is_zero(m):
            out[_key(m)] = m
    return sorted(out.values())


def _rational_gcd(values):
    values = [v for v in values if v != 0]
    num = reduce(math.gcd, (v.numerator for v in values))
    den = reduce(math.lcm, (v.denominator for v in values))
    return Fraction(num, den)


def spherical_roots(M):
    """Linearly independent S with cone(S) = cone(M) and M inside N_0[S].

    Each extreme ray is scaled by the largest rational for which every
    coordinate of every m is a nonnegative integer.
    """
    M = [fvec(m) for m in M]
    if not M:
        raise ValueError("M must be nonempty")
    dim = len(M[0])
    lines, rays = extreme_rays(M, dim)
    if lines or len(rays) != rank(rays):
        raise ConeError("cone generated by M is not simplicial")
    coords = []
    for m in M:
        c = coordinates(m, rays)
        if c is None or any(x < 0 for x in c):
            raise ConeError(f"{m} is not a nonnegative combination of the extreme rays")
        coords.append(c)
    S = []
    for i, r in enumerate(rays):
        lam = _rational_gcd([c[i] for c in coords])
        S.append([lam * x for x in r])
        for m, c in zip(M, coords):
            q = c[i] / lam
            if q.denominator != 1 or q < 0:
                raise ConeError(f"{m} has a non-integral coordinate")
    return sorted(S)


def decompose(m, S):
    """Coordinates of m in the basis S (exact)."""
    return coordinates(fvec(m), [fvec(s) for s in S])


def compression_cone(S, dim_a: int, a_H=(), M=()) -> CompressionCone:
    S = [fvec(s) for s in S]
    if S and rank(S) != len(S):
        raise ValueError("S must be linearly independent")
    return CompressionCone(dim_a, [fvec(m) for m in M], sorted(S), row_basis([fvec(v) for v in a_H]))


def structure_from_flags(flags: TFlagData) -> CompressionCone:
    """M, spherical roots and compression cone in one pass."""
    rd = flags.root_data
    M = compute_M(flags)
    S = spherical_roots(M) if M else []
    return compression_cone(S, rd.dim_a, rd.a_H, M)


def is_wavefront(root_data: RootSystemData, cone: CompressionCone) -> bool:
    """Exact test of a^- + a_H == {Y : sigma(Y) <= 0 for sigma in S}."""
    if cone.dim_a != root_data.dim_a:
        raise ValueError("dimension mismatch")
    gens = root_data.a_minus_generators()
    if not all(in_cone(g, cone.S) for g in gens):
        raise ConeError("a^- + a_H is not contained in the compression cone")
    hrep = hrep_of_cone(gens, root_data.dim_a)
    lines, rays = cone.generators()
    ok = all(in_cone(g, hrep) for g in rays + lines + [[-x for x in ln] for ln in lines])
    if not ok and cone.is_whole_space:
        warnings.warn("compression cone is all of a_Z; a real rank one space needs a proper cone",
                      stacklevel=2)
    return ok


# ---------------------------------------------------------------------------
# face decomposition


@dataclass
class FaceDecomposition:
    delta: Fraction
    S: list
    basis: list            # e_tau in a, dual to S: tau'(e_tau) = -[tau = tau']
    gram: list             # integer Gram matrix of the e_tau, up to the factor `scale`
    scale: int
    subsets: list
    compact_sets: dict = field(default_factory=dict)
    canonical: bool = False

    def coeffs(self, x):
        """c_tau = -tau(x) >= 0 on the cone."""
        return [-dot(s, fvec(x)) for s in self.S]

    def _norm_sq(self, c, idx):
        g = self.gram
        return sum(c[i] * c[j] * g[i][j] for i in idx for j in idx)

    def membership(self, x) -> dict:
        """Map I -> bool following the recursive definition of D_I."""
        c = self.coeffs(x)
        if any(v < 0 for v in c):
            return {I: False for I in self.subsets}
        den = math.lcm(*(v.denominator for v in c)) if c else 1
        c = [int(v * den) for v in c]
        k = len(self.S)
        full = self._norm_sq(c, range(k))
        p, q = self.delta.numerator + self.delta.denominator, self.delta.denominator
        out = {}
        for I in self.subsets:  # largest I first
            rest = [i for i in range(k) if i not in I]
            part = self._norm_sq(c, rest)
            inside = q * q * full <= p * p * part
            if inside and len(rest) > 1:
                inside = not any(out[J] for J in out if I < J)
            out[I] = inside
        return out

    def regions_of(self, x):
        return [I for I, v in self.membership(x).items() if v]

    def covers(self, x) -> bool:
        return any(self.membership(x).values())

    def regions(self):
        return {I: (lambda x, I=I: self.membership(x)[I]) for I in self.subsets}

    def point(self, c):
        """The cone point sum c_tau e_tau."""
        return [sum((ci * e[j] for ci, e in zip(c, self.basis)), Fraction(0)) for j in range(len(self.basis[0]))]


def face_decomposition(cone: CompressionCone, delta=Fraction(1, 10), samples: int = 2000,
                       seed: int = 0) -> FaceDecomposition:
    """Regions D_I, I a proper subset of S, with sampled compact sets C_I.

    ``C_I`` is the coordinate box (normalised to sum one) of the X_I parts of
    sampled points of D_I; it depends on the sample and is flagged as such.
    """
    delta = Fraction(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    dim = cone.dim_a
    ambient = [[Fraction(int(i == j)) for j in range(dim)] for i in range(dim)]
    aZ = orth_complement(cone.a_H, ambient, dim)
    S = [list(s) for s in cone.S]
    if len(S) != len(aZ):
        raise ValueError("a_S is nonzero: S must span the dual of a_Z")
    k = len(S)
    # e_tau = sum x_i aZ_i with S e_tau = -unit
    sa = [[dot(s, b) for b in aZ] for s in S]
    inv = inverse(sa)
    basis = []
    for t in range(k):
        x = [-inv[i][t] for i in range(k)]
        basis.append([sum((x[i] * aZ[i][j] for i in range(k)), Fraction(0)) for j in range(dim)])
    gram_q = [[dot(u, v) for v in basis] for u in basis]
    scale = math.lcm(*(g.denominator for row in gram_q for g in row)) if k else 1
    gram = [[int(g * scale) for g in row] for row in gram_q]
    subsets = []
    for size in range(k - 1, -1, -1):
        subsets += [frozenset(c) for c in combinations(range(k), size)]
    fd = FaceDecomposition(delta, S, basis, gram, scale, subsets)
    rng = random.Random(seed)
    boxes: dict = {}
    for _ in range(samples):
        c = [Fraction(rng.randint(0, 1000)) for _ in range(k)]
        if not any(c):
            continue
        for I in fd.regions_of(fd.point(c)):
            rest = [i for i in range(k) if i not in I]
            tot = sum(c[i] for i in rest)
            if tot == 0:
                continue
            norm = [c[i] / tot for i in rest]
            lo, hi = boxes.get(I, (norm, norm))
            boxes[I] = ([min(a, b) for a, b in zip(lo, norm)], [max(a, b) for a, b in zip(hi, norm)])
    fd.compact_sets = boxes
    return fd


# ---------------------------------------------------------------------------
# numeric calculators


def d_formula(l: int, p: float, dim_aZ: int, dim_g: int) -> float:
    """d = (l p + dim a_Z (l + dim g + 1)) / 4."""
    if l < 0 or p < 1 or dim_aZ < 1 or dim_g < 1:
        raise ValueError("need l >= 0, p >= 1, dim_aZ >= 1, dim_g >= 1")
    return (l * p + dim_aZ * (l + dim_g + 1)) / 4


def r_pi(k: int, delta: float, pi_abs: float, C: float) -> float:
    """R_pi = (k+8)/(2 delta) log(1+|pi|) + log(2C)/delta."""
    if not delta > 0 or not C > 0 or pi_abs < 0:
        raise ValueError("need delta > 0, C > 0, |pi| >= 0")
    return (k + 8) / (2 * delta) * math.log1p(pi_abs) + math.log(2 * C) / delta


def sobinf_bounds(k: int, chi_abs: float, C1: float = 1.0, C2: float = 1.0) -> tuple[float, float]:
    """(C1, C2) times (1+|chi|)^{k/2}, for a K-fixed vector with Delta v = chi v."""
    if k < 0 or k % 2:
        raise ValueError("k must be a nonnegative even integer")
    if chi_abs < 0:
        raise ValueError("|chi| must be nonnegative")
    f = (1 + chi_abs) ** (k // 2)
    return C1 * f, C2 * f


def sobolev_ratio(k: int, chi_abs) -> Fraction:
    """Exact sum_{j <= k/2} |chi|^j, the Sobolev norm over the sup norm for Delta v = chi v.

    Always between 2^{-k/2} (1+|chi|)^{k/2} and (1+|chi|)^{k/2}.
    """
    if k < 0 or k % 2:
        raise ValueError("k must be a nonnegative even integer")
    x = Fraction(chi_abs)
    return sum((x ** j for j in range(k // 2 + 1)), Fraction(0))


def table1() -> list[dict]:
    """Rows of the classification table, with real-rank-one markers."""
    text = resources.files("wavecount").joinpath("data/table1.json").read_text(encoding="utf-8")
    return json.loads(text)["rows"]


# ---------------------------------------------------------------------------
# small root systems in simple-root coordinates

POSITIVE_ROOTS = {
    "A1": [(1,)],
    "A2": [(1, 0), (0, 1), (1, 1)],
    "B2": [(1, 0), (0, 1), (1, 1), (1, 2)],
    "G2": [(1, 0), (0, 1), (1, 1), (2, 1), (3, 1), (3, 2)],
    "A3": [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (0, 1, 1), (1, 1, 1)],
}


def _block(mats):
    n = sum(len(m) for m in mats)
    out = [[Fraction(0)] * n for _ in range(n)]
    o = 0
    for m in mats:
        for i, row in enumerate(m):
            for j, x in enumerate(row):
                out[o + i][o + j] = Fraction(x)
        o += len(m)
    return out


def symmetric_example(kind: str, types) -> tuple[RootSystemData, list]:
    """Root data and involution for a product of simple types.

    ``kind`` is ``"split"`` (sigma = -1), ``"diagram"`` (minus the reversal
    of simple roots) or ``"group"`` (swap on a0 + a0, the group case).
    """
    if isinstance(types, str):
        types = [types]
    pos, blocks, off = [], [], 0
    dims = [len(POSITIVE_ROOTS[t][0]) for t in types]
    n0 = sum(dims)
    for t, d in zip(types, dims):
        for r in POSITIVE_ROOTS[t]:
            v = [0] * n0
            v[off:off + d] = r
            pos.append(v)
        if kind == "split":
            blocks.append([[-int(i == j) for j in range(d)] for i in range(d)])
        elif kind == "diagram":
            blocks.append([[-int(i + j == d - 1) for j in range(d)] for i in range(d)])
        off += d
    if kind == "group":
        n = 2 * n0
        pos = [r + [0] * n0 for r in pos] + [[0] * n0 + [-x for x in r] for r in pos]
        sigma = [[int(j == (i + n0) % n) for j in range(n)] for i in range(n)]
    elif kind in ("split", "diagram"):
        n = n0
        sigma = _block(blocks)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    s = [fvec(r) for r in sigma]
    eye = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    a_H = nullspace([[s[i][j] - eye[i][j] for j in range(n)] for i in range(n)], n)
    return RootSystemData.from_positive(n, pos, a_H), sigma
