"""Exact and mollified lattice point counting in R^n.

Conventions
-----------
* Balls are open: a point x is counted when |x| < R.
* Fourier transform: f^(lam) = int f(x) exp(-i lam.x) dx.  With this convention the
  Poisson summation formula reads

      sum_{g in G} f(g) = covol(G)^{-1} sum_{k in G^} f^(2 pi k),

  where G^ is spanned by the columns of the inverse transpose of the basis.  The
  ``dual_cutoff`` argument of :func:`poisson_spectral_count` bounds |k|, not |2 pi k|.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
from scipy import integrate, special
from scipy.special import roots_legendre

from . import _exact
from ._budget import budget

SEAM = 25.0
DEFAULT_TAIL_TOL = 1e-8


class BudgetExceeded(ValueError):
    pass


class TailBoundError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Bessel functions of the first kind

def _series_ratio(nu: float, x: float) -> float:
    """J_nu(x) / (x/2)^nu by its power series, summed in extended precision.

    The alternating series loses about log10(max term) digits near the seam,
    so the summation runs at 40 significant digits.
    """
    with mpmath.workdps(40):
        h = mpmath.mpf(x) / 2
        h2 = h * h
        term = 1 / mpmath.gamma(mpmath.mpf(nu) + 1)
        total = term
        k = 0
        while True:
            k += 1
            term = -term * h2 / (k * (k + nu))
            total += term
            if abs(term) < mpmath.mpf(10) ** -35 * max(abs(total), mpmath.mpf(1e-300)) and k > h:
                break
        return float(total)


def _hankel(nu: float, x: np.ndarray) -> np.ndarray:
    """Hankel asymptotic expansion of J_nu, truncated at its smallest term."""
    x = np.asarray(x, dtype=float)
    mu = 4.0 * nu * nu
    P = np.zeros_like(x)
    Q = np.zeros_like(x)
    term = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    prev = np.full(x.shape, np.inf)
    for k in range(0, 200):
        mag = np.abs(term)
        active &= mag <= prev
        if not active.any():
            break
        contrib = np.where(active, term, 0.0)
        if k % 4 == 0:
            P += contrib
        elif k % 4 == 1:
            Q += contrib
        elif k % 4 == 2:
            P -= contrib
        else:
            Q -= contrib
        prev = np.where(active, mag, prev)
        active &= mag > 1e-17 * (np.abs(P) + np.abs(Q) + 1e-300)
        coef = (mu - (2 * k + 1) ** 2) / ((k + 1) * 8.0)
        if coef == 0.0:
            break
        term = term * coef / x
    omega = x - (0.5 * nu + 0.25) * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (P * np.cos(omega) - Q * np.sin(omega))


def bessel_j(nu: float, x):
    """J_nu(x) for x >= 0: power series below the seam at 25, asymptotics above."""
    arr = np.asarray(x, dtype=float)
    out = np.empty(arr.shape)
    flat_in = arr.reshape(-1)
    flat_out = out.reshape(-1)
    big = flat_in >= SEAM
    if big.any():
        flat_out[big] = _hankel(nu, flat_in[big])
    for i in np.flatnonzero(~big):
        xi = flat_in[i]
        flat_out[i] = _series_ratio(nu, xi) * (xi / 2) ** nu
    return float(out) if np.ndim(x) == 0 else out


def ball_volume(n: int, R: float) -> float:
    return math.pi ** (n / 2) * R ** n / math.gamma(n / 2 + 1)


def ball_fourier(n: int, R: float, lambda_norm):
    """Fourier transform of the indicator of the radius-R ball at frequency |lambda|.

    Equals (2 pi)^{n/2} (R/|lambda|)^{n/2} J_{n/2}(R |lambda|), continued by the
    volume at zero.  Small arguments go through the normalised series so the
    value is continuous at the origin.
    """
    if n < 1:
        raise ValueError("dimension must be positive")
    lam = np.asarray(lambda_norm, dtype=float)
    nu = n / 2
    arg = R * lam
    out = np.empty(lam.shape)
    flat_arg = arg.reshape(-1)
    flat_lam = lam.reshape(-1)
    flat_out = out.reshape(-1)
    big = flat_arg >= SEAM
    if big.any():
        l = flat_lam[big]
        with np.errstate(over="raise"):
            flat_out[big] = (2 * math.pi) ** nu * (R / l) ** nu * _hankel(nu, flat_arg[big])
    scale = math.pi ** nu * R ** n
    for i in np.flatnonzero(~big):
        flat_out[i] = scale * _series_ratio(nu, flat_arg[i])
    return float(out) if lam.ndim == 0 else out


@lru_cache(maxsize=None)
def _sqrt_x_bessel_sup(nu: float) -> float:
    xs = np.linspace(1e-3, SEAM, 600)
    vals = [math.sqrt(t) * abs(bessel_j(nu, t)) for t in xs]
    far = np.linspace(SEAM, 4000.0, 200000)
    vals_far = np.sqrt(far) * np.abs(_hankel(nu, far))
    return max(max(vals), float(vals_far.max()), math.sqrt(2 / math.pi))


def ball_fourier_constant(n: int) -> float:
    """K with |ball_fourier(n, R, l)| <= K R^{(n-1)/2} l^{-(n+1)/2}.

    K = (2 pi)^{n/2} sup_x sqrt(x)|J_{n/2}(x)|, the supremum sampled on a dense
    grid and padded by 2%.
    """
    return (2 * math.pi) ** (n / 2) * _sqrt_x_bessel_sup(n / 2) * 1.02


# ---------------------------------------------------------------------------
# Lattices

@dataclass(frozen=True)
class IntegerLattice:
    """Lattice spanned by the columns of ``basis`` (exact rationals)."""

    basis: tuple
    dual_basis: tuple = field(init=False)

    def __post_init__(self):
        b = tuple(tuple(_exact.frac(x) for x in row) for row in self.basis)
        n = len(b)
        if n == 0 or any(len(row) != n for row in b):
            raise ValueError("basis must be a square matrix")
        if _exact.det([list(r) for r in b]) == 0:
            raise ValueError("basis must be invertible")
        inv = _exact.inverse([list(r) for r in b])
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "dual_basis", tuple(tuple(r) for r in _exact.transpose(inv)))

    @classmethod
    def standard(cls, n: int) -> "IntegerLattice":
        return cls(tuple(tuple(int(i == j) for j in range(n)) for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.basis)

    @property
    def covolume(self) -> float:
        return abs(float(_exact.det([list(r) for r in self.basis])))

    def basis_array(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self.basis])

    def dual_array(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self.dual_basis])


def _box(basis: np.ndarray, radius: float, limit: int | None):
    """Half-widths of the lattice-coordinate box containing the ball."""
    inv = np.linalg.inv(basis)
    half = np.floor(radius * np.linalg.norm(inv, axis=1) + 1e-9).astype(np.int64)
    total = 1
    for h in half:
        total *= int(2 * h + 1)
    cap = budget(10**9) if limit is None else limit
    if total > cap:
        raise BudgetExceeded(f"enumeration needs {total} candidates, budget is {cap}")
    return half, total


def _norms_sq(basis: np.ndarray, radius: float, limit: int | None = None, chunk: int = 1 << 21):
    """Yield squared norms of all lattice points in the bounding box, chunk by chunk."""
    half, total = _box(basis, radius, limit)
    shape = tuple(int(2 * h + 1) for h in half)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        coords = np.stack(np.unravel_index(idx, shape), axis=0) - half[:, None]
        pts = basis @ coords.astype(float)
        yield np.einsum("ij,ij->j", pts, pts)


def count_exact(lattice: IntegerLattice, R: float, limit: int | None = None) -> int:
    """Number of lattice points with |x| < R."""
    if not R > 0:
        raise ValueError("R must be positive")
    b = lattice.basis_array()
    r2 = R * R
    return int(sum(int(np.count_nonzero(q < r2)) for q in _norms_sq(b, R, limit)))


def count_exact_many(lattice: IntegerLattice, radii, limit: int | None = None) -> list[int]:
    """count_exact for several radii from a single enumeration."""
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0:
        return []
    if np.any(radii <= 0):
        raise ValueError("R must be positive")
    b = lattice.basis_array()
    order = np.argsort(radii)
    r2 = radii[order] ** 2
    counts = np.zeros(radii.size, dtype=np.int64)
    for q in _norms_sq(b, float(radii.max()), limit):
        q = np.sort(q)
        counts += np.searchsorted(q, r2, side="left")
    out = np.empty_like(counts)
    out[order] = counts
    return [int(c) for c in out]


# ---------------------------------------------------------------------------
# Mollifier

def bump(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    m = r < 1
    out[m] = np.exp(-1.0 / (1.0 - r[m] ** 2))
    return out


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


@lru_cache(maxsize=None)
def _bump_normaliser(n: int) -> float:
    val, _ = integrate.quad(lambda r: math.exp(-1 / (1 - r * r)) * r ** (n - 1), 0, 1,
                            epsabs=1e-15, epsrel=1e-13, limit=200)
    return 1.0 / (sphere_area(n) * val)


@lru_cache(maxsize=None)
def _projection_nodes(n: int, m: int):
    """Gauss-Legendre nodes t_j on [0,1] and weights times the projected profile.

    The projected profile P(t) = int_{R^{n-1}} phi(t, y) dy turns the radial
    transform into a cosine integral: phi^(xi) = 2 int_0^1 P(t) cos(xi t) dt.
    """
    cn = _bump_normaliser(n)
    t, w = roots_legendre(m)
    t = (t + 1) / 2
    w = w / 2
    y, wy = roots_legendre(160)
    y = (y + 1) / 2
    wy = wy / 2
    ymax = np.sqrt(1 - t * t)
    ys = ymax[:, None] * y[None, :]
    inner = bump(np.sqrt(t[:, None] ** 2 + ys ** 2)) * ys ** (n - 2)
    if n == 2:
        area = 2.0
    else:
        area = sphere_area(n - 1)
    P = cn * area * np.sum(inner * wy[None, :], axis=1) * ymax
    return t, 2 * w * P


@dataclass
class RadialMollifier:
    """phi_eps(x) = eps^{-n} phi(x/eps) with phi the normalised bump."""

    epsilon: float
    n: int = 2
    fourier_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.n < 1:
            raise ValueError("dimension must be positive")

    def profile(self, r):
        """Unit-scale profile as a function of the radius."""
        return _bump_normaliser(self.n) * bump(r)

    def total_mass(self) -> float:
        val, _ = integrate.quad(lambda r: float(self.profile(r)) * r ** (self.n - 1), 0, 1,
                                epsabs=1e-15, epsrel=1e-13, limit=200)
        return sphere_area(self.n) * val

    def unit_fourier(self, xi):
        """phi^ at the radii ``xi`` (unit scale)."""
        xi = np.abs(np.asarray(xi, dtype=float))
        flat = xi.reshape(-1)
        if flat.size == 0:
            return np.zeros(xi.shape)
        m = 300 + int(math.ceil(flat.max() / 2))
        t, wp = _projection_nodes(self.n, m)
        out = np.empty(flat.size)
        step = max(1, 4_000_000 // m)
        for s in range(0, flat.size, step):
            out[s:s + step] = np.cos(np.outer(flat[s:s + step], t)) @ wp
        return out.reshape(xi.shape)

    def fourier(self, xi):
        """Transform of phi_eps at the radii ``xi``."""
        return self.unit_fourier(self.epsilon * np.asarray(xi, dtype=float))

    # envelope used by the truncation bound -------------------------------
    def _envelope_table(self):
        if "grid" not in self.fourier_cache:
            grid = np.geomspace(1e-2, 2000.0, 1500)
            vals = np.abs(self.unit_fourier(grid))
            resolved = vals > 1e-12
            last = int(np.flatnonzero(resolved).max())
            grid, vals = grid[: last + 1], vals[: last + 1]
            suffix = np.maximum.accumulate(vals[::-1])[::-1]
            # far field: A exp(-b sqrt(xi)) with b below the observed rate
            b = 0.9
            tail = grid > 50
            A = float(np.max(vals[tail] * np.exp(b * np.sqrt(grid[tail])))) * 2.0
            self.fourier_cache.update(grid=grid, values=vals, suffix=suffix, A=A, b=b)
        return self.fourier_cache

    def envelope(self, xi):
        """Nonincreasing bound for |phi^| at unit scale (estimated)."""
        tab = self._envelope_table()
        xi = np.asarray(xi, dtype=float)
        grid, suffix = tab["grid"], tab["suffix"]
        idx = np.searchsorted(grid, xi, side="right") - 1
        inside = xi <= grid[-1]
        near = np.where(idx >= 0, suffix[np.clip(idx, 0, None)] * 1.5, 1.0)
        far = np.minimum(tab["A"] * np.exp(-tab["b"] * np.sqrt(np.maximum(xi, 0))), 1.0)
        return np.where(inside, np.maximum(np.minimum(near, 1.0), 0.0), far)


# ---------------------------------------------------------------------------
# Mollified and spectral counts

def _cap_fraction(n: int, c: np.ndarray) -> np.ndarray:
    """Fraction of the unit sphere in R^n on which <omega, e> > c."""
    c = np.clip(c, -1.0, 1.0)
    if n == 2:
        return np.arccos(c) / math.pi
    half = 0.5 * special.betainc((n - 1) / 2, 0.5, 1 - c * c)
    return np.where(c >= 0, half, 1 - half)


def convolution_value(n: int, s: float, R: float, eps: float) -> float:
    """(1_R * phi_eps)(x) for |x| = s, by radial quadrature."""
    if s + eps <= R:
        return 1.0
    if s - eps >= R:
        return 0.0
    cn = _bump_normaliser(n)
    area = sphere_area(n)

    def integrand(rho):
        if rho <= 0 or rho >= 1:
            return 0.0
        c = (s * s + (eps * rho) ** 2 - R * R) / (2 * s * eps * rho)
        return math.exp(-1 / (1 - rho * rho)) * rho ** (n - 1) * float(_cap_fraction(n, np.array(c)))

    brk = abs(R - s) / eps
    pts = [brk] if 0 < brk < 1 else None
    val, _ = integrate.quad(integrand, 0, 1, points=pts, epsabs=1e-14, epsrel=1e-12, limit=400)
    return min(max(cn * area * val, 0.0), 1.0)


def mollified_count(lattice: IntegerLattice, R: float, mollifier: RadialMollifier,
                    limit: int | None = None) -> float:
    """N_{R,eps} = sum over the lattice of (1_R * phi_eps), by direct summation."""
    eps = mollifier.epsilon
    if not eps < R:
        raise ValueError("epsilon must be smaller than R")
    n = lattice.n
    b = lattice.basis_array()
    ones = 0
    shell = []
    for q in _norms_sq(b, R + eps, limit):
        s = np.sqrt(q)
        one = s + eps <= R
        ones += int(np.count_nonzero(one))
        mid = (~one) & (s - eps < R)
        shell.append(s[mid])
    shell = np.concatenate(shell) if shell else np.zeros(0)
    uniq, mult = np.unique(shell, return_counts=True)
    parts = [float(ones)]
    parts += [m * convolution_value(n, float(s), R, eps) for s, m in zip(uniq, mult)]
    return math.fsum(parts)


def _dual_points(lattice: IntegerLattice, cutoff: float, limit: int | None):
    """Distinct nonzero dual norms |k| <= cutoff with multiplicities."""
    d = lattice.dual_array()
    norms = []
    for q in _norms_sq(d, cutoff, limit):
        keep = (q > 0) & (q <= cutoff * cutoff)
        norms.append(q[keep])
    q = np.concatenate(norms) if norms else np.zeros(0)
    uniq, mult = np.unique(q, return_counts=True)
    return np.sqrt(uniq), mult


def truncation_tail(lattice: IntegerLattice, R: float, mollifier: RadialMollifier, cutoff: float) -> float:
    """Estimated size of the dual sum beyond |k| > cutoff.

    Integral comparison: the dual lattice 2 pi G^ has density covol(G)/(2 pi)^n,
    each fundamental cell lies within ``rho`` of its lattice point, and the
    summand is bounded by K R^{(n-1)/2} l^{-(n+1)/2} env(eps l).
    """
    n = lattice.n
    eps = mollifier.epsilon
    dual = 2 * math.pi * lattice.dual_array()
    rho = 0.5 * float(np.linalg.norm(dual, axis=0).sum())
    start = 2 * math.pi * cutoff - rho
    if start <= 0:
        return math.inf
    K = ball_fourier_constant(n)
    density = lattice.covolume / (2 * math.pi) ** n
    pref = K * R ** ((n - 1) / 2) * density * sphere_area(n)

    # upper Riemann sum on a geometric grid; envelope is nonincreasing
    grid = start * np.geomspace(1.0, 1e6, 6000)
    env = mollifier.envelope(eps * grid[:-1])
    powl = np.maximum(grid[:-1] ** ((n - 3) / 2), grid[1:] ** ((n - 3) / 2))
    total = float(np.sum(np.diff(grid) * powl * env))
    return pref * total


def poisson_spectral_count(lattice: IntegerLattice, R: float, mollifier: RadialMollifier,
                           dual_cutoff: float | None = None, tail_tol: float = DEFAULT_TAIL_TOL,
                           limit: int | None = None) -> float:
    """N_{R,eps} through the dual side of Poisson summation.

    Returns covol^{-1} (|B_R| + sum_{0 < |k| <= cutoff} 1^_R(2 pi k) phi^(2 pi eps k)).
    With ``dual_cutoff=None`` the cutoff grows until the estimated tail is below
    ``tail_tol``; an explicit cutoff whose tail estimate exceeds it is rejected.
    """
    n = lattice.n
    if n < 2:
        raise ValueError("spectral counting requires n >= 2")
    if mollifier.n != n:
        raise ValueError("mollifier dimension does not match the lattice")
    if dual_cutoff is None:
        cutoff = 4.0 / mollifier.epsilon
        while truncation_tail(lattice, R, mollifier, cutoff) >= tail_tol:
            cutoff *= 1.25
    else:
        cutoff = float(dual_cutoff)
        tail = truncation_tail(lattice, R, mollifier, cutoff)
        if not tail < tail_tol:
            raise TailBoundError(f"estimated truncation tail {tail:.3g} exceeds {tail_tol:.3g}")
    knorm, mult = _dual_points(lattice, cutoff, limit)
    lam = 2 * math.pi * knorm
    terms = mult * ball_fourier(n, R, lam) * mollifier.fourier(lam)
    return math.fsum([ball_volume(n, R)] + list(terms)) / lattice.covolume


# ---------------------------------------------------------------------------
# Error exponents

def _exact_root(R: float, q: int) -> float:
    y = R ** (1.0 / q)
    for _ in range(2):
        y -= (y ** q - R) / (q * y ** (q - 1))
    return y


def optimal_epsilon(n: int, R: float) -> float:
    """R^{(1-n)/(n+1)}, the scale balancing smoothing and spectral error."""
    if n < 2:
        raise ValueError("n >= 2 required")
    # root of R^{n-1} rather than a power of the root keeps perfect powers exact
    return 1 / _exact_root(R ** (n - 1), n + 1)


def error_exponent(n: int) -> Fraction:
    """Exponent of R in the mollified error bound, n(n-1)/(n+1)."""
    return Fraction(n * (n - 1), n + 1)


@dataclass(frozen=True)
class CountRecord:
    R: float
    exact_count: int
    smoothed_count: float
    ball_volume: float
    error: float
    epsilon: float = float("nan")


def make_record(n: int, R: float, exact: int, smoothed: float = float("nan"), epsilon: float = float("nan")) -> CountRecord:
    vol = ball_volume(n, R)
    return CountRecord(R, exact, smoothed, vol, exact - vol, epsilon)


def error_exponent_fit(records: list[CountRecord]) -> float:
    """Least-squares slope of log(running max |error|) against log |B_R|."""
    if len(records) < 10:
        raise ValueError("need at least 10 records")
    Rs = np.array([r.R for r in records], dtype=float)
    if np.any(np.diff(Rs) <= 0):
        raise ValueError("records must have strictly increasing R")
    err = np.abs(np.array([r.error for r in records], dtype=float))
    if not np.all(np.isfinite(err)):
        raise ValueError("errors must be finite")
    run = np.maximum.accumulate(err)
    if np.any(run <= 0):
        raise ValueError("running max error must be positive")
    vol = np.array([r.ball_volume for r in records], dtype=float)
    slope, _ = np.polyfit(np.log(vol), np.log(run), 1)
    return float(slope)


def run_experiment(lattice: IntegerLattice, radii, epsilon="auto", smoothed: bool = True) -> list[CountRecord]:
    """Exact (and optionally mollified) counts along a grid of radii."""
    radii = [float(r) for r in radii]
    n = lattice.n
    exact = count_exact_many(lattice, radii)
    out = []
    for R, c in zip(radii, exact):
        eps = optimal_epsilon(n, R) if epsilon == "auto" else float(epsilon)
        sm = mollified_count(lattice, R, RadialMollifier(eps, n)) if smoothed and eps < R else float("nan")
        out.append(make_record(n, R, c, sm, eps))
    return out


# ---------------------------------------------------------------------------
# Product example: G = R^2, H = {0} x R, lattice Z^2

def factorized_counts(R: float) -> tuple[int, int, int]:
    """(N_R(G), N_R(H), N_R(Z)) for the built-in product example."""
    m = math.floor(R)
    in_h = lambda b: -m <= b < m + 1  # [0,1) + {-m..m}
    in_z = lambda a: abs(a) < R
    span = m + 2
    n_h = sum(1 for b in range(-span, span + 1) if in_h(b))
    n_z = sum(1 for a in range(-span, span + 1) if in_z(a))
    n_g = sum(1 for a in range(-span, span + 1) for b in range(-span, span + 1) if in_z(a) and in_h(b))
    return n_g, n_h, n_z


def factorized_count_check(R: float) -> bool:
    n_g, n_h, n_z = factorized_counts(R)
    return n_g == n_h * n_z
