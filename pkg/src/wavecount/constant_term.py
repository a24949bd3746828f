"""Companion ODE systems and their constant-term approximation.

The state Phi solves Phi' = A Phi + R(t).  The constant term is the first
coordinate of e^{tA} u, with u = Phi(0) + int_0^inf e^{-sA} P R(s) ds and P the
spectral projection onto the modes decaying no faster than r + c0 - delta.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, linalg, special

from .spherical_structure import r_pi


class CertificateError(ValueError):
    """The remainder certificate does not make the improper integral converge."""


class GapError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# systems


@dataclass
class CompanionSystem:
    A: np.ndarray
    remainder: Callable[[float], np.ndarray]
    remainder_bound: tuple[float, float]  # (C_R, rate): |R(t)| <= C_R e^{-rate t}
    r: float
    c0: float
    c: complex | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=complex)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise ValueError("A must be square")
        C_R, rate = self.remainder_bound
        if C_R < 0 or not rate > 0:
            raise ValueError("remainder bound needs C_R >= 0 and rate > 0")
        if not self.r > 0 or not self.c0 > 0:
            raise ValueError("r and c0 must be positive")

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        if self.c is not None:
            mu = cmath.sqrt(1 + self.c)
            return np.array([-1 + mu, -1 - mu])
        return np.linalg.eigvals(self.A)

    def R(self, t: float) -> np.ndarray:
        return np.asarray(self.remainder(t), dtype=complex)


def rank_one_matrix(c: complex) -> np.ndarray:
    return np.array([[0, 1], [c, -2]], dtype=complex)


def build_rank_one_system(c: complex, remainder, r: float, c0: float, C_R: float) -> CompanionSystem:
    """phi'' = c phi - 2 phi' + remainder, with |remainder(t)| <= C_R e^{-(r+c0) t}.

    ``remainder`` returns the scalar forcing; the system carries (0, remainder).
    Eigenvalues are -1 +- sqrt(1+c) on the principal branch.
    """
    def R(t):
        return np.array([0.0, remainder(t)], dtype=complex)

    return CompanionSystem(rank_one_matrix(c), R, (float(C_R), r + c0), r, c0, complex(c))


def exponential_remainder(a: complex, rate: float):
    return lambda t: a * math.exp(-rate * t)


# ---------------------------------------------------------------------------
# matrix exponential


def gs_bound(A: np.ndarray, t: float) -> float:
    """e^{sigma t} sum_{k<N} (t |A|)^k / k!, sigma the top real part of the spectrum."""
    A = np.asarray(A, dtype=complex)
    N = A.shape[0]
    sigma = float(np.max(np.linalg.eigvals(A).real)) if N else 0.0
    norm = float(np.linalg.norm(A, 2)) if N else 0.0
    return math.exp(sigma * t) * sum((t * norm) ** k / math.factorial(k) for k in range(N))


def matrix_exp(A, t: float = 1.0) -> tuple[np.ndarray, float]:
    """(e^{tA}, bound).  For t >= 0 the bound is checked against the operator norm."""
    A = np.asarray(A, dtype=complex)
    E = linalg.expm(t * A)
    if t < 0:
        return E, math.inf
    bound = gs_bound(A, t)
    norm = float(np.linalg.norm(E, 2))
    if norm > bound * (1 + 1e-10) + 1e-14:
        raise ArithmeticError(f"|e^tA| = {norm} exceeds the Gelfand-Shilov bound {bound}")
    return E, bound


# ---------------------------------------------------------------------------
# spectral projections


@dataclass
class SpectralSplit:
    threshold: float
    P: np.ndarray
    delta: float
    contour: dict = field(default_factory=dict)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.P, 2))


def projector_bound_constant(nu: float, N: int) -> float:
    """C(nu, N) with |P| <= C (|A|+1)^N for the rectangle contour.

    Length <= 8(|A|+1), |det(A - z)| >= min(1, nu/2)^N, adjugate entries by
    Hadamard with |z| <= sqrt(2)(|A|+1).
    """
    d = min(1.0, nu / 2)
    return 8 / (2 * math.pi) * N * (1 + math.sqrt(2)) ** (N - 1) / d ** N


def _panel_values(A: np.ndarray, z0: np.ndarray, z1: np.ndarray, x, w) -> np.ndarray:
    """Gauss-Legendre value of int (z - A)^{-1} dz over each straight panel [z0[i], z1[i]]."""
    N = A.shape[0]
    z = (z0[:, None] + (z1 - z0)[:, None] * (x[None, :] + 1) / 2).ravel()
    eye = np.eye(N)
    res = np.linalg.solve(z[:, None, None] * eye - A[None], np.broadcast_to(eye, (len(z), N, N)))
    res = res.reshape(len(z0), len(x), N, N)
    return np.einsum("k,pkij->pij", w, res) * ((z1 - z0) / 2)[:, None, None]


def _adaptive_contour(A: np.ndarray, corners, ev: np.ndarray, tol: float, max_panels: int):
    """Closed polygonal contour integral with panel bisection.

    A panel is split while its two halves disagree with it by more than ``tol``
    (scaled to the panel's share of the perimeter) and more than rounding
    noise, or while it is longer than twice its distance to the spectrum.
    Returns (integral, panel count).
    """
    x, w = leggauss(16)
    sides = list(zip(corners, corners[1:] + corners[:1]))
    perimeter = sum(abs(b - a) for a, b in sides)
    scale = float(np.linalg.norm(A, 2)) + 1
    z0 = np.array([a for a, _ in sides], dtype=complex)
    z1 = np.array([b for _, b in sides], dtype=complex)
    whole = _panel_values(A, z0, z1, x, w)
    total = np.zeros(A.shape, dtype=complex)
    done = 0
    while len(z0):
        mid = (z0 + z1) / 2
        left = _panel_values(A, z0, mid, x, w)
        right = _panel_values(A, mid, z1, x, w)
        length = np.abs(z1 - z0)
        diff = np.max(np.abs(left + right - whole), axis=(1, 2))
        dist = np.min(np.abs(mid[:, None] - ev[None, :]), axis=1) if len(ev) else np.full(len(mid), np.inf)
        # a backward-stable solve perturbs A by about eps |A|, so differences
        # below that relative to the panel's size are rounding, not truncation
        floor = 64 * np.finfo(float).eps * scale * np.max(np.abs(whole), axis=(1, 2))
        ok = (diff < np.maximum(tol * length / perimeter, floor)) & (length <= 2 * dist)
        total += (left + right)[ok].sum(axis=0)
        done += 2 * int(np.count_nonzero(ok))
        keep = ~ok
        if done + 2 * int(np.count_nonzero(keep)) > max_panels:
            raise QuadratureError("contour quadrature did not converge")
        z0, z1 = np.concatenate([z0[keep], mid[keep]]), np.concatenate([mid[keep], z1[keep]])
        whole = np.concatenate([left[keep], right[keep]])
    return total / (2j * math.pi), done


def spectral_projection(A, threshold: float, nu: float, tol: float = 1e-10,
                        max_panels: int = 1 << 16) -> SpectralSplit:
    """Riesz projection onto the eigenvalues with real part below ``threshold``.

    The contour is the rectangle with corners -(|A|+1) -+ i(|A|+1) and
    min(threshold, |A|+1) +- i(|A|+1); panels are bisected until successive
    refinements agree to ``tol``.
    """
    A = np.asarray(A, dtype=complex)
    N = A.shape[0]
    if not nu > 0:
        raise ValueError("nu must be positive")
    ev = np.linalg.eigvals(A)
    if np.any(np.abs(ev.real - threshold) < nu / 2):
        raise GapError(f"an eigenvalue lies within nu/2 = {nu / 2} of the threshold {threshold}")
    a = float(np.linalg.norm(A, 2)) + 1
    right = min(threshold, a)
    contour = {"left": -a, "right": right, "height": a}
    if threshold <= -a:
        return SpectralSplit(threshold, np.zeros((N, N), dtype=complex), nu, contour)
    corners = [complex(-a, -a), complex(right, -a), complex(right, a), complex(-a, a)]
    P, panels = _adaptive_contour(A, corners, ev, tol, max_panels)
    contour["panels"] = panels
    return SpectralSplit(threshold, P, nu, contour)


def eigen_projector(A, threshold: float) -> np.ndarray:
    """Projector onto eigenvalues left of ``threshold`` from an eigendecomposition."""
    ev, V = np.linalg.eig(np.asarray(A, dtype=complex))
    sel = np.diag((ev.real < threshold).astype(float))
    return V @ sel @ np.linalg.inv(V)


def choose_delta(A, r: float, c0: float) -> float:
    """delta in [c0/4, c0/2] keeping r + c0 - delta as far as possible from {-Re lambda}."""
    ev = np.linalg.eigvals(np.asarray(A, dtype=complex))
    pts = np.sort(-ev.real)
    lo, hi = r + c0 / 2, r + 3 * c0 / 4
    # the distance to the spectrum is piecewise linear; its maxima sit at the
    # endpoints or at midpoints between consecutive eigenvalues
    cands = [lo, hi] + [(x + y) / 2 for x, y in zip(pts, pts[1:]) if lo <= (x + y) / 2 <= hi]
    best = max(cands, key=lambda x: (float(np.min(np.abs(pts - x))) if len(pts) else math.inf, -x))
    return float(r + c0 - best)


def gap_distance(A, r: float, c0: float, delta: float) -> float:
    ev = np.linalg.eigvals(np.asarray(A, dtype=complex))
    return float(np.min(np.abs(-ev.real - (r + c0 - delta))))


@dataclass
class SlowSplit:
    """The projection P of the constant-term recipe with orthonormal bases of both ranges."""

    P: np.ndarray
    delta: float
    nu: float
    V: np.ndarray
    W: np.ndarray
    split: SpectralSplit

    @property
    def Q(self) -> np.ndarray:
        return np.eye(self.P.shape[0]) - self.P


def _range_basis(P: np.ndarray, rank: int) -> np.ndarray:
    U, _, _ = np.linalg.svd(P)
    return U[:, :rank]


def slow_split(system: CompanionSystem, delta: float | None = None) -> SlowSplit:
    A = system.A
    if delta is None:
        delta = choose_delta(A, system.r, system.c0)
    kappa = system.r + system.c0
    thr = -(kappa - delta)
    dist = gap_distance(A, system.r, system.c0, delta)
    nu = 2 * dist
    fast = spectral_projection(A, thr, nu)
    P = np.eye(system.N) - fast.P
    ev = np.linalg.eigvals(A)
    k = int(np.sum(ev.real > thr))
    return SlowSplit(P, delta, nu, _range_basis(P, k), _range_basis(fast.P, system.N - k), fast)


# ---------------------------------------------------------------------------
# solutions


@dataclass
class Trajectory:
    t: np.ndarray
    Phi: np.ndarray

    @property
    def phi(self) -> np.ndarray:
        return self.Phi[:, 0]


def _steps(A: np.ndarray, forcing, y0: np.ndarray, ts: np.ndarray, epsabs: float) -> np.ndarray:
    """y' = A y + forcing(t) on the grid ts, one variation-of-constants step per interval."""
    out = np.empty((len(ts), len(y0)), dtype=complex)
    y = np.asarray(y0, dtype=complex)
    out[0] = y
    for i in range(1, len(ts)):
        t0, h = ts[i - 1], ts[i] - ts[i - 1]
        Eh = linalg.expm(h * A)

        def g(s, t0=t0, h=h):
            return linalg.expm((h - s) * A) @ forcing(t0 + s)

        val, err = integrate.quad_vec(g, 0.0, h, epsabs=epsabs, epsrel=1e-12)
        if not err <= max(1e-10, 1e3 * epsabs):
            raise QuadratureError(f"step at t={t0} failed, error estimate {err}")
        y = Eh @ y + val
        out[i] = y
    return out


def solve_inhomogeneous(system: CompanionSystem, phi0, T: float, step: float) -> Trajectory:
    """Phi(t) = e^{tA} Phi(0) + int_0^t e^{(t-s)A} R(s) ds on [0, T] with spacing ``step``."""
    if not T > 0 or not step > 0:
        raise ValueError("T and step must be positive")
    n = max(1, int(math.ceil(T / step - 1e-9)))
    ts = np.linspace(0.0, T, n + 1)
    Phi = _steps(system.A, system.R, np.asarray(phi0, dtype=complex), ts, 1e-14)
    return Trajectory(ts, Phi)


def _gs_tail(normA: float, k: int, b: float, S: float, scale: float) -> float:
    """scale * sum_{j<k} |A|^j / j! int_S^inf s^j e^{-b s} ds."""
    tot = 0.0
    for j in range(k):
        tot += normA ** j / math.factorial(j) * special.gammaincc(j + 1, b * S) * math.gamma(j + 1) / b ** (j + 1)
    return scale * tot


def truncation_point(system: CompanionSystem, split: SlowSplit, tol: float = 1e-12) -> float:
    """S with certified int_S^inf |e^{-sA} P R(s)| ds < tol."""
    C_R, rate = system.remainder_bound
    k = split.V.shape[1]
    if k == 0 or C_R == 0:
        return 0.0
    Av = split.V.conj().T @ system.A @ split.V
    sigma = float(np.max((-np.linalg.eigvals(Av)).real))
    b = rate - sigma
    if not b > 0:
        raise CertificateError(f"remainder rate {rate} does not dominate the growth {sigma} on range(P)")
    scale = float(np.linalg.norm(split.P, 2)) * C_R
    normA = float(np.linalg.norm(Av, 2))
    S = 1.0
    while _gs_tail(normA, k, b, S, scale) >= tol:
        S *= 1.5
        if S > 1e6:
            raise CertificateError("truncation point did not converge")
    return S


def seed_vector(system: CompanionSystem, phi0, split: SlowSplit | None = None) -> np.ndarray:
    """u = Phi(0) + int_0^inf e^{-sA} P R(s) ds, integrated on range(P)."""
    split = split or slow_split(system)
    phi0 = np.asarray(phi0, dtype=complex)
    S = truncation_point(system, split)
    if S == 0.0:
        return phi0.copy()
    V = split.V
    Av = V.conj().T @ system.A @ V
    PV = V.conj().T @ split.P

    def g(s):
        return linalg.expm(-s * Av) @ (PV @ system.R(s))

    val, err = integrate.quad_vec(g, 0.0, S, epsabs=1e-14, epsrel=1e-12, limit=2000)
    if not err < 1e-10:
        raise QuadratureError(f"seed integral error estimate {err}")
    return phi0 + V @ val


@dataclass
class ConstantTermFn:
    """sum_i e^{-exponents[i] t} sum_k coeffs[i][k] t^k.

    Exponents use the convention a^{lambda} = e^{-lambda t}, so each equals
    minus an eigenvalue of A.
    """

    exponents: list
    coeffs: list
    u: np.ndarray
    A: np.ndarray | None = None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for lam, poly in zip(self.exponents, self.coeffs):
            out = out + np.exp(-lam * t) * np.polynomial.polynomial.polyval(t, poly)
        return out

    def direct(self, t) -> np.ndarray:
        """First coordinate of e^{tA} u."""
        return np.array([(linalg.expm(s * self.A) @ self.u)[0] for s in np.atleast_1d(t)])

    def leading(self) -> list[complex]:
        """Coefficient of each exponent's constant part (c_1, c_2 in the rank-one case)."""
        return [complex(p[0]) for p in self.coeffs]

    def magnitude(self, i: int) -> float:
        return float(np.max(np.abs(self.coeffs[i])))


def eigen_clusters(A: np.ndarray, tol: float = 1e-6) -> list[tuple[complex, int]]:
    """Eigenvalues merged within ``tol``: (mean, multiplicity)."""
    ev = sorted(np.linalg.eigvals(A), key=lambda z: (z.real, z.imag))
    groups: list[list[complex]] = []
    for z in ev:
        for g in groups:
            if abs(g[0] - z) < tol:
                g.append(z)
                break
        else:
            groups.append([z])
    return [(complex(np.mean(g)), len(g)) for g in groups]


def _cluster_projector(A: np.ndarray, center: complex, radius: float, points: int = 256) -> np.ndarray:
    N = A.shape[0]
    theta = 2 * math.pi * (np.arange(points) + 0.5) / points
    z = center + radius * np.exp(1j * theta)
    eye = np.eye(N)
    res = np.linalg.solve(z[:, None, None] * eye - A[None], np.broadcast_to(eye, (points, N, N)))
    return np.tensordot(radius * np.exp(1j * theta), res, axes=1) / points


def exponential_polynomial(A, u) -> ConstantTermFn:
    """Split t -> (e^{tA} u)_0 into e^{lambda t} times polynomials, one per eigenvalue cluster."""
    A = np.asarray(A, dtype=complex)
    u = np.asarray(u, dtype=complex)
    N = A.shape[0]
    clusters = eigen_clusters(A)
    centers = [c for c, _ in clusters]
    exps, polys = [], []
    for lam, mult in clusters:
        others = [abs(lam - c) for c in centers if c != lam]
        radius = min(others) / 2 if others else 1.0
        Pl = _cluster_projector(A, lam, radius)
        v = Pl @ u
        Nl = A - lam * np.eye(N)
        poly = []
        for k in range(max(mult, 1)):
            poly.append(v[0] / math.factorial(k))
            v = Nl @ v
        exps.append(-lam)
        polys.append(np.array(poly))
    return ConstantTermFn(exps, polys, u, A)


def constant_term(system: CompanionSystem, phi0, split: SlowSplit | None = None) -> ConstantTermFn:
    split = split or slow_split(system)
    u = seed_vector(system, phi0, split)
    return exponential_polynomial(system.A, u)


def vanishing_violations(ct: ConstantTermFn, r: float, tol: float = 1e-9) -> list[tuple[complex, float]]:
    """Exponents slower than e^{-rt} whose coefficients are not negligible.

    A coefficient must vanish when Re(exponent) < r, i.e. Re(lambda) > -r for the
    eigenvalue lambda of A.
    """
    bad = []
    for i, lam in enumerate(ct.exponents):
        if lam.real < r - 1e-12 and ct.magnitude(i) >= tol:
            bad.append((lam, ct.magnitude(i)))
    return bad


# ---------------------------------------------------------------------------
# stable evaluation of Phi = e^{tA} u - I_1 + I_2


def _gl_steps(A: np.ndarray, forcing, y0: np.ndarray, ts: np.ndarray, backward: bool = False,
              nodes: int = 20) -> np.ndarray:
    """Variation of constants with a fixed Gauss-Legendre rule per grid interval.

    Forward: y(t+h) = e^{hA} y(t) + int_0^h e^{(h-s)A} g(t+s) ds.
    Backward: y(t) = e^{-hA} y(t+h) + int_0^h e^{-sA} g(t+s) ds, for the
    improper integral int_0^inf e^{-sA} g(t+s) ds whose value at the last grid
    point is supplied as ``y0``.
    """
    x, w = leggauss(nodes)
    out = np.empty((len(ts), len(y0)), dtype=complex)
    cache: dict = {}

    def mats(h):
        key = round(h, 14)
        if key not in cache:
            s = h * (x + 1) / 2
            if backward:
                cache[key] = (linalg.expm(-h * A), linalg.expm(-s[:, None, None] * A[None]), s, h * w / 2)
            else:
                cache[key] = (linalg.expm(h * A), linalg.expm((h - s)[:, None, None] * A[None]), s, h * w / 2)
        return cache[key]

    y = np.asarray(y0, dtype=complex)
    order = range(len(ts) - 2, -1, -1) if backward else range(1, len(ts))
    out[-1 if backward else 0] = y
    for i in order:
        t0 = ts[i] if backward else ts[i - 1]
        h = (ts[i + 1] - ts[i]) if backward else (ts[i] - ts[i - 1])
        Eh, Es, s, ws = mats(h)
        g = np.stack([forcing(t0 + sk) for sk in s])
        y = Eh @ y + np.einsum("k,kij,kj->i", ws, Es, g)
        out[i] = y
    return out


def remainder_integrals(system: CompanionSystem, ts, split: SlowSplit | None = None):
    """(I_1(t), I_2(t)) on the grid ts (ascending, starting at 0).

    I_1(t) = int_0^inf e^{-sA} P R(s+t) ds lives on range(P) and is stepped
    backwards from the last grid point; I_2(t) = int_0^t e^{(t-s)A} (1-P) R(s) ds
    lives on range(1-P) and is stepped forwards.  Each recursion only ever
    multiplies by contractions relative to the size of its target, so neither
    route amplifies rounding errors.
    """
    split = split or slow_split(system)
    ts = np.asarray(ts, dtype=float)
    N = system.N
    I1 = np.zeros((len(ts), N), dtype=complex)
    I2 = np.zeros((len(ts), N), dtype=complex)
    V, W = split.V, split.W
    if V.shape[1] and system.remainder_bound[0] > 0:
        S = truncation_point(system, split)
        Av = V.conj().T @ system.A @ V
        PV = V.conj().T @ split.P
        T = ts[-1]

        def g_end(s):
            return linalg.expm(-s * Av) @ (PV @ system.R(s + T))

        end, err = integrate.quad_vec(g_end, 0.0, S, epsabs=1e-15, epsrel=1e-12, limit=2000)
        if not err < 1e-10:
            raise QuadratureError(f"I_1 error estimate {err}")
        y = _gl_steps(Av, lambda t: PV @ system.R(t), end, ts, backward=True)
        I1 = y @ V.T
    if W.shape[1] and system.remainder_bound[0] > 0:
        Aw = W.conj().T @ system.A @ W
        QW = W.conj().T @ split.Q
        y = _gl_steps(Aw, lambda t: QW @ system.R(t), np.zeros(W.shape[1], dtype=complex), ts)
        I2 = y @ W.T
    return I1, I2


def stable_trajectory(system: CompanionSystem, phi0, ts, split: SlowSplit | None = None):
    """(phi(t), constant term, deviation) from the decomposition, without forward growth."""
    split = split or slow_split(system)
    ct = constant_term(system, phi0, split)
    I1, I2 = remainder_integrals(system, ts, split)
    dev = (-I1 + I2)[:, 0]
    c = ct(ts)
    return c + dev, c, dev, ct


# ---------------------------------------------------------------------------
# decay


def decay_verify(trajectory: Trajectory, ct: ConstantTermFn, r: float, c0: float,
                 floor: float = 1e-13) -> float:
    """Negated slope of log sup_{s >= t} |phi(s) - ct(s)| over the tail half of the grid.

    Points below ``floor`` (relative to the size of phi) are dropped as noise;
    if fewer than four remain the deviation counts as exact and +inf is returned.
    """
    t = np.asarray(trajectory.t)
    dev = np.abs(trajectory.phi - ct(t))
    env = np.maximum.accumulate(dev[::-1])[::-1]
    scale = max(1.0, float(np.max(np.abs(trajectory.phi))))
    half = t >= t[-1] / 2
    keep = half & (env > floor * scale)
    if np.count_nonzero(keep) < 4:
        return math.inf
    slope = np.polyfit(t[keep], np.log(env[keep]), 1)[0]
    return float(-slope)


def certified_rank_one(c: float, r: float, c0: float, amplitude: complex = 1.0,
                       slow_weights=(1.0, 0.5), resonance_gap: float = 0.05):
    """A rank-one system with R(t) = amplitude e^{-(r+c0)t} (0, 1) and a solution of decay rate >= r.

    Phi(t) = e^{tA} u' + q e^{-kappa t} with q = -(A + kappa)^{-1} w and u' a
    combination of the modes with Re lambda <= -r.  Returns (system, phi0, q, u').

    When some eigenvalue sits within ``resonance_gap`` of -kappa (necessarily a
    fast mode), q only carries the other mode; the fast mode then picks up a
    t e^{-kappa t} term, which still decays faster than e^{-rt}.
    """
    kappa = r + c0
    A = rank_one_matrix(c)
    ev = np.linalg.eigvals(A)
    w = np.array([0.0, amplitude], dtype=complex)
    i0 = int(np.argmin(np.abs(ev + kappa)))
    if abs(ev[i0] + kappa) >= resonance_gap:
        q = -np.linalg.solve(A + kappa * np.eye(2), w)
    else:
        lam0, lam1 = ev[i0], ev[1 - i0]
        if abs(lam1 - lam0) < resonance_gap:
            raise ValueError(f"c={c}: double eigenvalue resonant with kappa={kappa}")
        V = np.array([[1.0, 1.0], [lam0, lam1]], dtype=complex)
        coef = np.linalg.solve(V, w)
        q = -coef[1] * V[:, 1] / (lam1 + kappa)
    uprime = np.zeros(2, dtype=complex)
    allowed = [(lam, m) for lam, m in eigen_clusters(A) if lam.real <= -r]
    for (lam, _), wt in zip(allowed, slow_weights):
        # (1, lam) spans the eigenline of the companion matrix
        uprime += wt * np.array([1.0, lam])
    system = build_rank_one_system(c, exponential_remainder(amplitude, kappa), r, c0, abs(amplitude))
    return system, q + uprime, q, uprime


# ---------------------------------------------------------------------------
# model norms


@dataclass
class NormReport:
    norm: float
    q: float
    truncation: float
    tail: float


def _tail_integral(Cp: float, b: float, m: float, T: float) -> float:
    """int_T^inf Cp e^{-b t} (1+t)^m dt."""
    if m == 0:
        return Cp * math.exp(-b * T) / b
    x = b * (1 + T)
    return Cp * math.exp(b) * special.gammaincc(m + 1, x) * math.gamma(m + 1) / b ** (m + 1)


def model_norms(f, p: float, m: float = 0.0, samples: int = 2000, decay=None, lower: float = 0.0,
                tail_tol: float = 1e-10) -> NormReport:
    """(int_lower^inf |f(t)|^p (1+t)^m e^{2t} dt)^{1/p} and sup |f| e^{-2t/p} (1+t)^m.

    ``decay = (C, rate)`` certifies |f(t)| <= C e^{-rate t}; p * rate must exceed 2.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if decay is None:
        raise CertificateError("a decay certificate (C, rate) is required")
    C, rate = decay
    b = p * rate - 2
    if not b > 0:
        raise CertificateError(f"p * rate = {p * rate} leaves no decay margin over e^{{2t}}")
    Cp = C ** p
    T = max(lower, 1.0)
    while _tail_integral(Cp, b, m, T) >= tail_tol:
        T *= 1.25
    tail = _tail_integral(Cp, b, m, T)

    def g(t):
        return abs(f(t)) ** p * (1 + t) ** m * math.exp(2 * t)

    pts = np.linspace(lower, T, 9)[1:-1]
    val, _ = integrate.quad(g, lower, T, limit=500, points=pts, epsabs=1e-14, epsrel=1e-11)
    grid = np.linspace(lower, T, samples)
    fv = np.abs(np.asarray([f(t) for t in grid]))
    q = float(np.max(fv * np.exp(-2 * grid / p) * (1 + grid) ** m))
    return NormReport(float(val ** (1 / p)), q, T, tail)


def model_norm_exact(terms, p: int, m: int = 0) -> Fraction:
    """||f||_{p,m}^p exactly, for f = sum c_i e^{-a_i t} with rational data and even integer p."""
    if p < 2 or p % 2:
        raise ValueError("exact mode needs an even integer p")
    if m < 0 or int(m) != m:
        raise ValueError("exact mode needs an integer m >= 0")
    terms = [(Fraction(c), Fraction(a)) for c, a in terms]
    # expand f^p as a sum over exponents
    powers = {Fraction(0): Fraction(1)}
    for _ in range(p):
        nxt: dict = {}
        for e, k in powers.items():
            for c, a in terms:
                nxt[e + a] = nxt.get(e + a, Fraction(0)) + k * c
        powers = nxt
    total = Fraction(0)
    for e, k in powers.items():
        if k == 0:
            continue
        b = e - 2
        if b <= 0:
            raise CertificateError("integral diverges")
        # int (1+t)^m e^{-b t} dt = sum_j binom(m,j) j!/b^{j+1}
        total += k * sum(Fraction(math.comb(m, j) * math.factorial(j)) / b ** (j + 1) for j in range(m + 1))
    return total


def integrability_exponent_ok(s: float, rank: int = 1) -> bool:
    """int_0^inf (1+t)^{-s} dt is finite iff s > rank (the model has rank one)."""
    return s > rank


# ---------------------------------------------------------------------------
# Hypothesis B


def poly_exp_certificate(terms, rate: float) -> float:
    """C with sum c_j t^{k_j} e^{-g_j t} <= C e^{-rate t} for t >= 0, each g_j > rate."""
    C = 0.0
    for coef, k, g in terms:
        if coef == 0:
            continue
        eps = g - rate
        if not eps > 0:
            raise CertificateError("decay rate does not dominate")
        C += coef * ((k / (math.e * eps)) ** k if k else 1.0)
    return C


def _deviation_terms(system: CompanionSystem, split: SlowSplit) -> list[tuple[float, int, float]]:
    """Terms c t^k e^{-g t} bounding |I_1(t)| + |I_2(t)|."""
    C_R, kappa = system.remainder_bound
    out = []
    if split.V.shape[1]:
        Av = split.V.conj().T @ system.A @ split.V
        sig = float(np.max((-np.linalg.eigvals(Av)).real))
        nA = float(np.linalg.norm(Av, 2))
        b = kappa - sig
        k = Av.shape[0]
        c1 = float(np.linalg.norm(split.P, 2)) * C_R * sum(nA ** j / b ** (j + 1) for j in range(k))
        out.append((c1, 0, kappa))
    if split.W.shape[1]:
        Aw = split.W.conj().T @ system.A @ split.W
        sig = float(np.max(np.linalg.eigvals(Aw).real))
        nA = float(np.linalg.norm(Aw, 2))
        g = min(kappa, -sig)
        qn = float(np.linalg.norm(split.Q, 2)) * C_R
        for j in range(Aw.shape[0]):
            out.append((qn * nA ** j / math.factorial(j + 1), j + 1, g))
    return out


@dataclass
class HypothesisBReport:
    p: float
    p_prime: float
    k: int
    pi_abs: float
    delta_B: float
    l: float
    R: float
    norm_p: float
    sup: float
    head: float
    deviation_tail: float
    ct_tail: float
    ratio: float
    fitted: dict = field(default_factory=dict)

    @property
    def e1_holds(self) -> bool:
        return self.norm_p <= (self.head + self.deviation_tail + self.ct_tail) * (1 + 1e-8)


def hypothesis_b_pipeline(system: CompanionSystem, phi0, p: float, p_prime: float, k: int,
                          pi_abs: float, C: float = 1.0, bound: float | None = None,
                          scale: float = 1.0) -> HypothesisBReport:
    """Split ||f||_p at R_pi and report ||f||_p / ((1+|pi|)^l ||f||_inf).

    f is the first coordinate of the solution, evaluated as ct - I_1 + I_2.
    ``scale`` multiplies f (the ratio is homogeneous of degree zero).
    """
    if not 1 <= p_prime < p:
        raise ValueError("need 1 <= p' < p")
    if 1 / p_prime - 1 / p > system.c0 / 2 + 1e-15:
        raise ValueError("need 1/p' - 1/p <= c0/2")
    delta_B = 2 / p_prime - 2 / p
    l = (k + 8) / (2 * delta_B * p)
    R = r_pi(k, delta_B, pi_abs, C)
    split = slow_split(system)
    ct = constant_term(system, phi0, split)
    if vanishing_violations(ct, system.r):
        raise CertificateError("constant term has coefficients slower than the a-priori rate")
    ct = ConstantTermFn(ct.exponents, [np.zeros_like(cf) if lam.real < system.r - 1e-12 else cf
                                       for lam, cf in zip(ct.exponents, ct.coeffs)], ct.u, ct.A)
    rate = system.r - (system.r - 2 / p) / 4  # strictly between 2/p and r
    ct_terms = [(abs(complex(x)), j, float(lam.real))
                for lam, cf in zip(ct.exponents, ct.coeffs) for j, x in enumerate(cf)]
    dev_terms = _deviation_terms(system, split)
    C_ct = scale * poly_exp_certificate(ct_terms, rate)
    C_dev = scale * poly_exp_certificate(dev_terms, rate)

    h = 0.02
    b = p * rate - 2
    Cp = (C_ct + C_dev) ** p
    T = max(R, 1.0)
    while _tail_integral(Cp, b, 0.0, T) >= 1e-14 * Cp / b:
        T += max(1.0, T / 4)
    grid = np.arange(0.0, T + h / 2, h)
    I1, I2 = remainder_integrals(system, grid, split)
    dev = scale * (-I1 + I2)[:, 0]
    cval = scale * ct(grid)
    fval = cval + dev
    sup = float(np.max(np.abs(fval)))
    total = tabulated_norm(grid, fval, p, decay=(C_ct + C_dev, rate))
    head = math.exp(2 * R / p) * float(np.max(np.abs(fval[grid <= R + 1e-12])))
    dev_tail = tabulated_norm(grid, dev, p, decay=(C_dev, rate), lower=R)
    ct_tail = tabulated_norm(grid, cval, p, decay=(C_ct, rate), lower=R)
    ratio = total / ((1 + pi_abs) ** l * sup)
    if bound is not None and ratio > bound:
        raise AssertionError(f"ratio {ratio} exceeds the configured bound {bound}")
    return HypothesisBReport(p, p_prime, k, pi_abs, delta_B, l, R, total, sup, head, dev_tail, ct_tail, ratio)


def tabulated_norm(ts: np.ndarray, vals: np.ndarray, p: float, m: float = 0.0, decay=None,
                   lower: float = 0.0) -> float:
    """||f||_{p,m} over [lower, inf) from values on a uniform grid plus the certified tail.

    Composite Simpson on the grid (trapezoid on a leftover interval); the part
    beyond the grid is bounded by the decay certificate and added as an upper
    estimate.
    """
    if decay is None:
        raise CertificateError("a decay certificate (C, rate) is required")
    C, rate = decay
    b = p * rate - 2
    if not b > 0:
        raise CertificateError("no decay margin")
    sel = ts >= lower - 1e-12
    t = ts[sel]
    y = np.abs(vals[sel]) ** p * (1 + t) ** m * np.exp(2 * t)
    if len(t) < 2:
        body = 0.0
    else:
        body = float(integrate.simpson(y, x=t))
    # the grid may start a little after `lower`
    if len(t) and t[0] > lower:
        body += float(y[0]) * (t[0] - lower)
    tail = _tail_integral(C ** p, b, m, float(ts[-1]))
    return float((body + tail) ** (1 / p))


