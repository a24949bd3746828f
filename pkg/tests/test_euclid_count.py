import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from wavecount import euclid_count as ec

Z2 = ec.IntegerLattice.standard(2)


def brute_count(R, n=2):
    m = int(math.ceil(R))
    rng = range(-m, m + 1)
    if n == 2:
        return sum(1 for x in rng for y in rng if x * x + y * y < R * R)
    return sum(1 for x in rng for y in rng for z in rng if x * x + y * y + z * z < R * R)


# frozen from the double loop above
BRUTE = {0.5: 1, 1.5: 9, 5.0: 69, 10.0: 305, 2.5: 21}


def test_frozen_brute_values_are_current():
    for R, v in BRUTE.items():
        assert brute_count(R) == v


@pytest.mark.parametrize("R,expected", sorted(BRUTE.items()))
def test_count_exact_examples(R, expected):
    assert ec.count_exact(Z2, R) == expected


def test_open_ball_excludes_boundary():
    # 12 points have norm exactly 5
    closed = sum(1 for x in range(-5, 6) for y in range(-5, 6) if x * x + y * y <= 25)
    assert closed - ec.count_exact(Z2, 5.0) == 12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 14.0))
def test_count_matches_double_loop(R):
    assert ec.count_exact(Z2, R) == brute_count(R)


def test_count_3d():
    Z3 = ec.IntegerLattice.standard(3)
    for R in (1.1, 2.3, 4.0):
        assert ec.count_exact(Z3, R) == brute_count(R, 3)


def test_budget_guard():
    with pytest.raises(ec.BudgetExceeded):
        ec.count_exact(Z2, 1e6, limit=1000)


def test_unimodular_change_of_basis():
    skew = ec.IntegerLattice(((1, 2), (0, 1)))
    assert skew.dual_basis == ((1, 0), (-2, 1))
    for R in (3.3, 7.0, 12.5):
        assert ec.count_exact(skew, R) == ec.count_exact(Z2, R)


def test_lattice_validation():
    with pytest.raises(ValueError):
        ec.IntegerLattice(((1, 2), (2, 4)))
    assert ec.IntegerLattice.standard(3).dual_basis == ec.IntegerLattice.standard(3).basis


def test_mtc_window():
    for R in (200.0, 350.0, 600.0):
        ratio = ec.count_exact(Z2, R) / ec.ball_volume(2, R)
        assert 0.99 <= ratio <= 1.01


# --- Bessel and ball transform -------------------------------------------


@pytest.mark.parametrize("nu", [0.5, 1.0, 1.5, 2.0])
def test_bessel_against_scipy(nu):
    x = np.concatenate([np.linspace(0.01, 24.9, 200), np.linspace(25, 400, 300)])
    assert np.max(np.abs(ec.bessel_j(nu, x) - special.jv(nu, x))) < 1e-9


@pytest.mark.parametrize("nu", [0.5, 1.0, 1.5, 2.0])
def test_bessel_seam_continuity(nu):
    below = ec._series_ratio(nu, ec.SEAM) * (ec.SEAM / 2) ** nu
    above = float(ec._hankel(nu, np.array([ec.SEAM]))[0])
    assert abs(below - above) < 1e-10


def test_ball_fourier_at_zero_is_volume():
    assert ec.ball_fourier(2, 1.0, 0.0) == pytest.approx(math.pi, rel=1e-15)
    assert abs(ec.ball_fourier(2, 1.0, 1e-8) - math.pi) < 1e-6
    assert abs(ec.ball_fourier(3, 2.0, 1e-8) - ec.ball_volume(3, 2.0)) < 1e-6


def test_ball_fourier_against_2d_quadrature():
    # integral of e^{-i 3 x} over the unit disc, as an honest 2-D integral
    val, err = integrate.dblquad(lambda y, x: math.cos(3 * x), -1, 1,
                                 lambda x: -math.sqrt(1 - x * x), lambda x: math.sqrt(1 - x * x),
                                 epsabs=1e-13, epsrel=1e-13)
    assert abs(ec.ball_fourier(2, 1.0, 3.0) - val) < 1e-8


def test_ball_fourier_3d_closed_form():
    # n = 3: 4 pi (sin(Rl) - Rl cos(Rl)) / l^3
    for R, l in ((1.0, 0.7), (2.0, 9.0), (10.0, 50.0)):
        x = R * l
        exact = 4 * math.pi * (math.sin(x) - x * math.cos(x)) / l ** 3
        assert ec.ball_fourier(3, R, l) == pytest.approx(exact, rel=1e-9, abs=1e-12)


def test_ball_fourier_decay_bound():
    n, R, l = 3, 10.0, 50.0
    K = ec.ball_fourier_constant(n)
    assert abs(ec.ball_fourier(n, R, l)) <= K * R ** ((n - 1) / 2) * l ** (-(n + 1) / 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 4), st.floats(0.5, 20), st.floats(0.01, 200))
def test_ball_fourier_bound_property(n, R, l):
    K = ec.ball_fourier_constant(n)
    assert abs(ec.ball_fourier(n, R, l)) <= K * R ** ((n - 1) / 2) * l ** (-(n + 1) / 2) * (1 + 1e-9)


# --- mollifier ---------------------------------------------------------------


def test_profile_support_and_mass():
    m = ec.RadialMollifier(0.3, 2)
    assert m.profile(1.0) == 0 and m.profile(1.5) == 0
    assert m.profile(0.5) > 0
    assert abs(m.total_mass() - 1) < 1e-10
    assert abs(ec.RadialMollifier(0.3, 3).total_mass() - 1) < 1e-10


def test_unit_fourier_against_2d_quadrature():
    m = ec.RadialMollifier(1.0, 2)
    xi = 4.0
    val, _ = integrate.dblquad(lambda r, th: float(m.profile(r)) * math.cos(xi * r * math.cos(th)) * r,
                               0, 2 * math.pi, 0, 1, epsabs=1e-13, epsrel=1e-12)
    assert abs(float(m.unit_fourier(xi)) - val) < 1e-9
    assert abs(float(m.unit_fourier(0.0)) - 1) < 1e-10


def test_mollified_small_eps_converges_to_count():
    m = ec.RadialMollifier(1e-3, 2)
    # no lattice point on the circle of radius 3.05
    assert abs(ec.mollified_count(Z2, 3.05, m) - ec.count_exact(Z2, 3.05)) < 1e-9
    # the four points of norm 3 get weight close to one half each
    assert abs(ec.mollified_count(Z2, 3.0, m) - (ec.count_exact(Z2, 3.0) + 2)) < 1e-3


def test_sandwich_example():
    eps = 0.4
    val = ec.mollified_count(Z2, 2.5, ec.RadialMollifier(eps, 2))
    assert ec.count_exact(Z2, 2.5 - eps) <= val <= ec.count_exact(Z2, 2.5 + eps)


@settings(max_examples=25, deadline=None)
@given(st.floats(2.0, 12.0), st.floats(0.1, 0.9))
def test_sandwich_property(R, eps):
    m = ec.RadialMollifier(eps, 2)
    n = ec.count_exact(Z2, R)
    assert ec.mollified_count(Z2, R - eps, m) <= n <= ec.mollified_count(Z2, R + eps, m)


def test_poisson_matches_direct_sum():
    m = ec.RadialMollifier(0.5, 2)
    direct = ec.mollified_count(Z2, 3.0, m)
    assert abs(direct - ec.poisson_spectral_count(Z2, 3.0, m)) < 1e-6


def test_cutoff_forty_violates_tail_precondition():
    # at cutoff 40 the certified tail is about 2e-6, above the 1e-8 requirement
    m = ec.RadialMollifier(0.5, 2)
    with pytest.raises(ec.TailBoundError):
        ec.poisson_spectral_count(Z2, 3.0, m, dual_cutoff=40)
    # accepted with a looser tolerance, and then within 1e-6 of the direct sum
    val = ec.poisson_spectral_count(Z2, 3.0, m, dual_cutoff=40, tail_tol=1e-5)
    assert abs(val - ec.mollified_count(Z2, 3.0, m)) < 1e-6


def test_degenerate_cutoff_rejected():
    with pytest.raises(ec.TailBoundError):
        ec.poisson_spectral_count(Z2, 3.0, ec.RadialMollifier(0.5, 2), dual_cutoff=0.5)


def test_one_dimensional_rejected():
    with pytest.raises(ValueError):
        ec.poisson_spectral_count(ec.IntegerLattice.standard(1), 3.0, ec.RadialMollifier(0.5, 1))


def test_poisson_on_skew_basis():
    skew = ec.IntegerLattice(((2, 1), (0, 1)))
    m = ec.RadialMollifier(0.6, 2)
    assert abs(ec.mollified_count(skew, 4.0, m) - ec.poisson_spectral_count(skew, 4.0, m)) < 1e-6


# --- exponents -----------------------------------------------------------------


def test_optimal_epsilon_examples():
    assert ec.optimal_epsilon(2, 8) == 0.5
    assert ec.optimal_epsilon(3, 16) == 0.25
    assert ec.optimal_epsilon(2, 1) == 1
    with pytest.raises(ValueError):
        ec.optimal_epsilon(1, 4)


def test_error_exponent_bookkeeping():
    assert ec.error_exponent(2) == Fraction(2, 3)
    assert ec.error_exponent(3) == Fraction(3, 2)


def _records(errfun):
    Rs = np.linspace(10, 100, 20)
    return [ec.CountRecord(R, 0, float("nan"), ec.ball_volume(2, R), errfun(ec.ball_volume(2, R))) for R in Rs]


def test_fit_constant_error():
    assert abs(ec.error_exponent_fit(_records(lambda v: 1.0))) < 1e-12


def test_fit_manufactured_power():
    assert abs(ec.error_exponent_fit(_records(lambda v: v ** (1 / 3))) - 1 / 3) < 1e-6


def test_fit_rejects_bad_input():
    recs = _records(lambda v: 1.0)
    with pytest.raises(ValueError):
        ec.error_exponent_fit(recs[:9])
    with pytest.raises(ValueError):
        ec.error_exponent_fit(recs[::-1])


def test_record_invariants():
    r = ec.make_record(2, 7.0, ec.count_exact(Z2, 7.0))
    assert r.ball_volume == pytest.approx(math.pi * 49, rel=1e-12)
    assert r.error == r.exact_count - r.ball_volume


def _independent_factor_counts(R):
    m = math.floor(R)
    hs = [b for b in range(-m - 3, m + 4) if -m <= b < m + 1]
    zs = [a for a in range(-m - 3, m + 4) if abs(a) < R]
    return len(hs) * len(zs), len(hs), len(zs)


@pytest.mark.parametrize("R", [0.5, 3.5, 10.0])
def test_factorized_examples(R):
    assert ec.factorized_count_check(R)
    g, h, z = ec.factorized_counts(R)
    assert (g, h, z) == _independent_factor_counts(R)
    if R == 0.5:
        assert (g, h, z) == (1, 1, 1)
