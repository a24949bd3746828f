"""Counting PSL(2,Z) orbit points in hyperbolic balls of the upper half-plane."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._budget import budget


class BudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class UpperHalfPoint:
    x: float
    y: float

    def __post_init__(self):
        if not self.y > 0:
            raise ValueError("y must be positive")

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @classmethod
    def from_complex(cls, z: complex) -> "UpperHalfPoint":
        return cls(z.real, z.imag)


I = UpperHalfPoint(0.0, 1.0)


@dataclass(frozen=True, order=True)
class MobiusMatrix:
    """Integer matrix of determinant one, normalised so its first nonzero entry is positive."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.a * self.d - self.b * self.c != 1:
            raise ValueError("determinant must be 1")
        if (self.a, self.b, self.c, self.d) < (-self.a, -self.b, -self.c, -self.d):
            raise ValueError("representative is not normalised")

    @classmethod
    def normalised(cls, a: int, b: int, c: int, d: int) -> "MobiusMatrix":
        if (a, b, c, d) < (-a, -b, -c, -d):
            a, b, c, d = -a, -b, -c, -d
        return cls(a, b, c, d)

    def act(self, z: UpperHalfPoint) -> UpperHalfPoint:
        w = (self.a * z.z + self.b) / (self.c * z.z + self.d)
        return UpperHalfPoint(w.real, w.imag)

    def __matmul__(self, other: "MobiusMatrix") -> "MobiusMatrix":
        return MobiusMatrix.normalised(self.a * other.a + self.b * other.c, self.a * other.b + self.b * other.d,
                                       self.c * other.a + self.d * other.c, self.c * other.b + self.d * other.d)

    def frobenius_sq(self) -> int:
        return self.a ** 2 + self.b ** 2 + self.c ** 2 + self.d ** 2


@dataclass(frozen=True)
class HypCountRecord:
    R: float
    count: int
    main_term: float
    relative_error: float


def hyp_dist(z: UpperHalfPoint, w: UpperHalfPoint) -> float:
    """Hyperbolic distance: cosh d = 1 + |z-w|^2 / (2 Im z Im w)."""
    arg = 1 + abs(z.z - w.z) ** 2 / (2 * z.y * w.y)
    return math.acosh(max(arg, 1.0))


def ball_volume_hyp(R: float) -> float:
    if R < 0:
        raise ValueError("R must be nonnegative")
    return 4 * math.pi * math.sinh(R / 2) ** 2


def main_term(R: float) -> float:
    """(3/pi) vol B(R): the ball volume divided by the covolume pi/3."""
    return 12 * math.sinh(R / 2) ** 2


def trace_identity_check(samples: int = 200, seed: int = 0) -> float:
    """Largest discrepancy between cosh d(i, g i) and |g|_F^2 / 2 on random SL(2,Z)."""
    rng = np.random.default_rng(seed)
    gens = [MobiusMatrix(1, 1, 0, 1), MobiusMatrix.normalised(0, -1, 1, 0)]
    worst = 0.0
    for _ in range(samples):
        g = MobiusMatrix(1, 0, 0, 1)
        for _ in range(int(rng.integers(1, 8))):
            h = gens[int(rng.integers(0, 2))]
            if rng.random() < 0.5:
                h = MobiusMatrix.normalised(h.d, -h.b, -h.c, h.a)
            g = g @ h
        lhs = math.cosh(hyp_dist(I, g.act(I)))
        rhs = g.frobenius_sq() / 2
        worst = max(worst, abs(lhs - rhs) / rhs)
    return worst


_CHECKED = False


def _self_check():
    global _CHECKED
    if not _CHECKED:
        if trace_identity_check() > 1e-9:
            raise RuntimeError("trace identity failed against the distance formula")
        _CHECKED = True


def _quadruples(bound: float, limit: int | None):
    """All (a,b,c,d) with ad - bc = 1 and a^2+b^2+c^2+d^2 < bound, negation classes merged."""
    cap = budget(10**6) if limit is None else limit
    if bound > cap:
        raise BudgetExceeded(f"2 cosh R = {bound:.6g} exceeds budget {cap}")
    m = int(math.isqrt(int(math.ceil(bound))))
    rng = np.arange(-m, m + 1, dtype=np.int64)
    out = set()
    for a in range(-m, m + 1):
        rest = bound - a * a
        if rest <= 0:
            continue
        b, c = np.meshgrid(rng, rng, indexing="ij")
        b = b.ravel()
        c = c.ravel()
        keep = a * a + b * b + c * c < bound
        b, c = b[keep], c[keep]
        if a == 0:
            # -bc = 1 and d free
            sel = b * c == -1
            for bb, cc in zip(b[sel], c[sel]):
                lim = bound - bb * bb - cc * cc
                for d in range(-m, m + 1):
                    if d * d < lim:
                        out.add(MobiusMatrix.normalised(0, int(bb), int(cc), d))
            continue
        num = 1 + b * c
        ok = num % a == 0
        b, c, num = b[ok], c[ok], num[ok]
        d = num // a
        ok = a * a + b * b + c * c + d * d < bound
        for bb, cc, dd in zip(b[ok], c[ok], d[ok]):
            out.add(MobiusMatrix.normalised(a, int(bb), int(cc), int(dd)))
    return out


def enumerate_gamma(R: float, limit: int | None = None) -> list[MobiusMatrix]:
    """PSL(2,Z) classes with d(i, g i) < R, via cosh d(i, g i) = |g|_F^2 / 2."""
    if not R > 0:
        raise ValueError("R must be positive")
    _self_check()
    bound = 2 * math.cosh(R)
    return sorted(_quadruples(bound, limit))


def _base_matrix(z: UpperHalfPoint) -> np.ndarray:
    s = math.sqrt(z.y)
    return np.array([[s, z.x / s], [0.0, 1 / s]])


def count_in_ball(z: UpperHalfPoint, R: float, limit: int | None = None) -> HypCountRecord:
    """N_R(z) = #{g in PSL(2,Z) : d(i, g z) < R}."""
    if not R > 0:
        raise ValueError("R must be positive")
    if z == I:
        count = len(enumerate_gamma(R, limit))
    else:
        _self_check()
        # g z = (g h) i with h z-base matrix; |g h|_F <= |g|_F |h^-1|
        h = _base_matrix(z)
        hinv = np.linalg.norm(np.linalg.inv(h), 2)
        bound = 2 * math.cosh(R) * hinv ** 2 * (1 + 1e-12) + 1
        count = sum(1 for g in _quadruples(bound, limit) if hyp_dist(I, g.act(z)) < R)
    mt = main_term(R)
    return HypCountRecord(R, count, mt, (count - mt) / mt)


def selberg_cross_check(R: float) -> tuple[float, float]:
    """(3/pi) vol B(R) against 3 R' with R' = 2 cosh R; their ratio tends to 1."""
    if R < 2:
        raise ValueError("R >= 2 required")
    return main_term(R), 3 * (2 * math.cosh(R))


def polar_jacobian_ratio(t: float) -> float:
    """sinh(t)/e^t, the polar-coordinate Jacobian over its leading exponential."""
    if not t > 0:
        raise ValueError("t must be positive")
    return math.sinh(t) / math.exp(t)


def rotation(theta: float) -> np.ndarray:
    return np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])


def k_orbit(z: UpperHalfPoint, points: int = 1 << 10) -> tuple[np.ndarray, np.ndarray]:
    """Angles theta_j and the points k_theta . z on the SO(2)-orbit."""
    theta = 2 * math.pi * np.arange(points) / points
    c, s = np.cos(theta), np.sin(theta)
    w = (c * z.z - s) / (s * z.z + c)
    return theta, w


def k_fourier_coeff(f, tau_index: int, z: UpperHalfPoint, points: int = 1 << 10) -> complex:
    """(1/2 pi) int e^{-i n theta} f(k_theta z) d theta, trapezoidal rule.

    ``f`` receives a complex point of the upper half-plane.
    """
    theta, w = k_orbit(z, points)
    vals = np.array([f(complex(p)) for p in w], dtype=complex)
    return complex(np.mean(np.exp(-1j * tau_index * theta) * vals))


def adjoint_contraction(t: float) -> float:
    """Factor by which Ad(diag(e^{-t/2}, e^{t/2})) scales the upper nilpotent basis vector."""
    a = np.diag([math.exp(-t / 2), math.exp(t / 2)])
    E = np.array([[0.0, 1.0], [0.0, 0.0]])
    conj = a @ E @ np.linalg.inv(a)
    return float(np.linalg.norm(conj) / np.linalg.norm(E))


def adjoint_contraction_check(t: float) -> bool:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return adjoint_contraction(t) <= 1 + 1e-15


def hyperbolic_records(radii, limit: int | None = None) -> list[HypCountRecord]:
    """Records for a grid of radii from one enumeration at the largest radius."""
    radii = [float(r) for r in radii]
    if not radii:
        return []
    gammas = enumerate_gamma(max(radii), limit)
    sq = np.sort(np.array([g.frobenius_sq() for g in gammas], dtype=float))
    out = []
    for R in radii:
        count = int(np.searchsorted(sq, 2 * math.cosh(R), side="left"))
        mt = main_term(R)
        out.append(HypCountRecord(R, count, mt, (count - mt) / mt))
    return out
