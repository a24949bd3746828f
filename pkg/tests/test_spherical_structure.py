import random
import warnings
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings, strategies as st

from wavecount import spherical_structure as ss
from oracles import SYMMETRIC_CASES, nonneg_combination, spherical_scaling_search

fr = lambda *xs: [Fraction(x) for x in xs]


# --- double description ----------------------------------------------------


def test_orthant():
    lines, rays = ss.cone_generators([[-1, 0], [0, -1]], 2)
    assert lines == [] and rays == [fr(0, 1), fr(1, 0)]


def test_halfplane_has_a_line():
    lines, rays = ss.cone_generators([[1, 0]], 2)
    assert len(lines) == 1 and lines[0][0] == 0
    assert rays == [fr(-1, 0)]


def test_rank_two_cone_has_two_facets():
    gens = [[1, 2], [3, 1], [2, 2]]
    h = ss.hrep_of_cone(gens, 2)
    assert len(h) == 2
    assert ss.extreme_rays(gens, 2) == ([], [fr(1, 2), fr(3, 1)])


def test_square_pyramid():
    gens = [[1, 0, 1], [0, 1, 1], [-1, 0, 1], [0, -1, 1], [0, 0, 1]]
    lines, rays = ss.extreme_rays(gens, 3)
    assert lines == [] and len(rays) == 4 and fr(0, 0, 1) not in rays
    assert len(ss.hrep_of_cone(gens, 3)) == 4


vec3 = st.lists(st.integers(-3, 3), min_size=3, max_size=3)


@settings(max_examples=60, deadline=None)
@given(st.lists(vec3, min_size=1, max_size=6), st.lists(vec3, min_size=5, max_size=5))
def test_hrep_agrees_with_linear_program(gens, probes):
    h = ss.hrep_of_cone(gens, 3)
    for g in gens:
        assert ss.in_cone(fr(*g), h)
    for x in probes:
        assert ss.in_cone(fr(*x), h) == nonneg_combination(x, gens)


@settings(max_examples=40, deadline=None)
@given(st.lists(vec3, min_size=1, max_size=6), st.randoms(use_true_random=False))
def test_generator_order_is_irrelevant(gens, rnd):
    shuffled = gens[:]
    rnd.shuffle(shuffled)
    assert ss.extreme_rays(gens, 3) == ss.extreme_rays(shuffled, 3)
    assert sorted(map(tuple, ss.hrep_of_cone(gens, 3))) == sorted(map(tuple, ss.hrep_of_cone(shuffled, 3)))


# --- root data and flags ---------------------------------------------------


def test_root_data_validation():
    with pytest.raises(ValueError):
        ss.RootSystemData(1, [[1]], frozenset({0}))  # not closed under negation
    with pytest.raises(ValueError):
        ss.RootSystemData(1, [[0], [0]], frozenset({0}))
    rd = ss.RootSystemData.from_positive(2, ss.POSITIVE_ROOTS["A2"])
    assert len(rd.roots) == 6 and len(rd.positive) == 3


def test_flag_compatibility_is_checked():
    # a = R^2, a_H spanned by (1, 1); alpha = (1, 0), beta = (0, 1) breaks -alpha = beta on a_H
    rd = ss.RootSystemData.from_positive(2, [(1, 0), (0, 1)], [(1, 1)])
    with pytest.raises(ValueError):
        ss.TFlagData(rd, [((1, 0), (0, 1))])
    with pytest.raises(ValueError):
        ss.TFlagData(rd, [((1, 0), None)])  # alpha + 0 does not vanish on a_H


def test_compute_M_examples():
    rd = ss.RootSystemData.from_positive(1, [(1,)])
    assert ss.compute_M(ss.TFlagData(rd, [((1,), (1,))])) == [fr(2)]
    assert ss.compute_M(ss.TFlagData(rd, [])) == []


def test_sl2_symmetric_pair():
    rd, sigma = ss.symmetric_example("split", "A1")
    flags = ss.symmetric_pair_flags(rd, sigma)
    assert flags.pairs == [(fr(1), fr(1))]
    cone = ss.structure_from_flags(flags)
    assert cone.M == [fr(2)] and cone.S == [fr(2)]
    assert ss.is_wavefront(rd, cone)


def test_symmetric_pair_flag_validation():
    rd = ss.RootSystemData.from_positive(2, ss.POSITIVE_ROOTS["A2"])
    with pytest.raises(ValueError):
        ss.symmetric_pair_flags(rd, [[0, 1], [1, 1]])


# --- spherical roots ---------------------------------------------------------


def test_spherical_roots_examples():
    assert ss.spherical_roots([[2]]) == [fr(2)]
    assert ss.spherical_roots([[2, 0], [0, 2], [1, 1]]) == [fr(0, 1), fr(1, 0)]
    assert ss.spherical_roots([[1, 0], [0, 1], [1, 1]]) == [fr(0, 1), fr(1, 0)]


@pytest.mark.parametrize("M", [[[2, 0], [0, 2], [1, 1]], [[2, 0], [0, 2], [2, 2]], [[3, 0], [0, 2], [6, 4]],
                               [[2, 2, 0], [0, 2, 0], [0, 0, 4]]])
def test_spherical_roots_against_exhaustive_search(M):
    S = ss.spherical_roots(M)
    _, rays = ss.extreme_rays(M, len(M[0]))
    assert sorted(spherical_scaling_search(M, rays)) == S


def test_non_simplicial_rejected():
    with pytest.raises(ss.ConeError):
        ss.spherical_roots([[1, 0, 1], [0, 1, 1], [-1, 0, 1], [0, -1, 1]])
    with pytest.raises(ValueError):
        ss.spherical_roots([])


def _membership(M, S):
    for m in M:
        c = ss.decompose(m, S)
        assert c is not None and all(x.denominator == 1 and x >= 0 for x in c)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.integers(0, 4), min_size=2, max_size=2), min_size=1, max_size=5))
def test_spherical_roots_properties(M):
    M = [m for m in M if any(m)]
    assume(M)
    S = ss.spherical_roots(M)
    assert ss.rank(S) == len(S)
    _membership(M, S)
    # same cone
    hS, hM = ss.hrep_of_cone(S, 2), ss.hrep_of_cone(M, 2)
    assert all(ss.in_cone(s, hM) for s in S) and all(ss.in_cone(fr(*m), hS) for m in M)


# --- compression cone and wavefront ------------------------------------------


def test_compression_cone_examples():
    half = ss.compression_cone([[2]], 1)
    assert half.contains([-1]) and not half.contains([1])
    whole = ss.compression_cone([], 2)
    assert whole.is_whole_space and whole.contains([5, -3])
    two = ss.compression_cone([[1, 0], [0, 1]], 2)
    assert len(two.cone_minus) == 2
    with pytest.raises(ValueError):
        ss.compression_cone([[1, 0], [2, 0]], 2)


@pytest.mark.parametrize("kind,types", SYMMETRIC_CASES)
def test_symmetric_pairs_are_wavefront(kind, types):
    rd, sigma = ss.symmetric_example(kind, types)
    cone = ss.structure_from_flags(ss.symmetric_pair_flags(rd, sigma))
    assert ss.is_wavefront(rd, cone)
    _membership(cone.M, cone.S)


def test_known_spherical_roots():
    def S_of(kind, types):
        rd, sigma = ss.symmetric_example(kind, types)
        return ss.structure_from_flags(ss.symmetric_pair_flags(rd, sigma)).S

    assert S_of("split", "A2") == [fr(0, 2), fr(2, 0)]
    assert S_of("diagram", "A2") == [fr(1, 1)]
    assert S_of("diagram", "A3") == [fr(0, 2, 0), fr(1, 0, 1)]
    assert S_of("group", "A1") == [fr(1, -1)]


def test_whole_space_cone_is_not_wavefront():
    rd = ss.RootSystemData.from_positive(1, [(1,)])
    cone = ss.compression_cone([], 1)
    with pytest.warns(UserWarning):
        assert not ss.is_wavefront(rd, cone)


def test_degenerate_a_H_equals_a():
    rd = ss.RootSystemData.from_positive(1, [(1,)], [(1,)])
    cone = ss.structure_from_flags(ss.TFlagData(rd, []))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert ss.is_wavefront(rd, cone)


def test_inclusion_violation_detected():
    rd = ss.RootSystemData.from_positive(2, ss.POSITIVE_ROOTS["A2"])
    # the cone {-alpha_1 <= 0} misses a^-
    with pytest.raises(ss.ConeError):
        ss.is_wavefront(rd, ss.compression_cone([[-1, 0]], 2))


def test_proper_inclusion_is_not_wavefront():
    rd = ss.RootSystemData.from_positive(2, ss.POSITIVE_ROOTS["A2"])
    # one flag through alpha_1 + alpha_2: the half-space {(1,1).Y <= 0} strictly contains a^-
    cone = ss.structure_from_flags(ss.TFlagData(rd, [((1, 1), (1, 1))]))
    assert cone.S == [fr(2, 2)]
    assert not ss.is_wavefront(rd, cone)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(["A2", "B2", "G2", "A3"]), st.data())
def test_inclusion_property_random_flags(t, data):
    rd = ss.RootSystemData.from_positive(len(ss.POSITIVE_ROOTS[t][0]), ss.POSITIVE_ROOTS[t])
    pos = rd.positive
    idx = data.draw(st.lists(st.tuples(st.integers(0, len(pos) - 1), st.integers(-1, len(pos) - 1)),
                             min_size=1, max_size=4))
    pairs = [(pos[a], None if b < 0 else pos[b]) for a, b in idx]
    try:
        cone = ss.structure_from_flags(ss.TFlagData(rd, pairs))
    except ss.ConeError:
        assume(False)
    # a^- is always inside the compression cone
    for g in rd.a_minus_generators():
        assert cone.contains(g)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ss.is_wavefront(rd, cone)


# --- face decomposition --------------------------------------------------------


def test_rank_one_faces():
    fd = ss.face_decomposition(ss.compression_cone([[2]], 1), samples=50)
    assert fd.subsets == [frozenset()]
    assert fd.membership([-3]) == {frozenset(): True}
    assert not fd.canonical


def test_rank_two_coverage():
    rd, sigma = ss.symmetric_example("split", "A2")
    cone = ss.structure_from_flags(ss.symmetric_pair_flags(rd, sigma))
    fd = ss.face_decomposition(cone, Fraction(1, 10), samples=500, seed=3)
    rng = random.Random(11)
    for _ in range(10_000):
        c = [Fraction(rng.randint(0, 10**6), rng.randint(1, 1000)) for _ in range(2)]
        if any(c):
            assert fd.covers(fd.point(c))


def test_point_on_face_belongs_to_that_face():
    # the face a_I is cut out by tau = 0 for tau in I
    rd, sigma = ss.symmetric_example("split", "A3")
    cone = ss.structure_from_flags(ss.symmetric_pair_flags(rd, sigma))
    fd = ss.face_decomposition(cone, samples=100)
    for I in fd.subsets:
        if not I or len(I) == len(fd.S):
            continue
        c = [Fraction(0) if i in I else Fraction(3) for i in range(len(fd.S))]
        assert fd.membership(fd.point(c))[I]


def test_face_decomposition_requires_full_rank():
    with pytest.raises(ValueError):
        ss.face_decomposition(ss.compression_cone([[1, 0]], 2))


def test_face_points_lie_in_cone():
    rd, sigma = ss.symmetric_example("diagram", "A3")
    cone = ss.structure_from_flags(ss.symmetric_pair_flags(rd, sigma))
    fd = ss.face_decomposition(cone, samples=200)
    for c in ([1, 0], [0, 1], [2, 5]):
        assert cone.contains(fd.point([Fraction(x) for x in c]))
        assert fd.coeffs(fd.point([Fraction(x) for x in c])) == [Fraction(x) for x in c]


# --- calculators -------------------------------------------------------------


def test_d_formula():
    assert ss.d_formula(2, 2, 1, 3) == 2.5
    assert ss.d_formula(2, 4, 1, 3) == 3.5
    with pytest.raises(ValueError):
        ss.d_formula(0, 1, 0, 3)


def test_r_pi():
    assert ss.r_pi(0, 1, 0, 0.5) == 0
    assert ss.r_pi(0, 1, 2.718281828459045 - 1, 0.5) == pytest.approx(4, rel=1e-14)
    vals = [ss.r_pi(2, 0.5, p, 1) for p in (0, 1, 5, 50)]
    assert vals == sorted(vals) and len(set(vals)) == 4


def test_sobinf():
    assert ss.sobinf_bounds(0, 17.0) == (1, 1)
    assert ss.sobinf_bounds(2, 3) == (4, 4)
    assert ss.sobinf_bounds(4, 1) == (4, 4)
    with pytest.raises(ValueError):
        ss.sobinf_bounds(3, 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 5).map(lambda j: 2 * j), st.fractions(0, 50, max_denominator=20))
def test_sobolev_ratio_between_bounds(k, chi):
    val = ss.sobolev_ratio(k, chi)
    top = (1 + chi) ** (k // 2)
    assert top / 2 ** (k // 2) <= val <= top


def test_table1():
    rows = ss.table1()
    assert [r["row"] for r in rows] == list(range(1, 23))
    rank_one = {r["row"] for r in rows if r["real_rank_one"] is True}
    assert rank_one == {2, 6, 9, 10, 11, 20, 21, 22}
