import hashlib
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rwdpp.env import (
    ConditioningError,
    Environment,
    GammaCapError,
    ProcessSpec,
    SpecError,
    WindowCapError,
    batch_gaps,
    batch_windows,
    directions,
    ensemble_environment,
    ensemble_masters,
    make_environment,
)
from rwdpp.oracle import enumerate_probability
from rwdpp.seeding import Seed, derive, mix64, stream_uniforms

BERN = ProcessSpec.bernoulli(2, 0.5)


# -- seeding -------------------------------------------------------------------

def test_mix64_reference_value():
    # SplitMix64 output for state 0 (first output of the reference generator)
    assert mix64(0) == 0xE220A8397B1DCDAF


def test_derive_distinguishes_tags_and_indices():
    vals = {derive(7, t, i) for t in (1, 2, 3) for i in range(100)}
    assert len(vals) == 300


def test_uniforms_in_unit_interval():
    u = stream_uniforms(np.uint64(derive(1, 2)), np.arange(10_000))
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 4 * (1 / 12 / 10_000) ** 0.5


def test_seed_rejects_out_of_range():
    with pytest.raises(ValueError):
        Seed(-1)
    with pytest.raises(ValueError):
        Seed(2**64)


# -- specs -----------------------------------------------------------------------

def test_p_zero_names_assumption():
    with pytest.raises(SpecError, match=r"\(A1\)"):
        ProcessSpec.bernoulli(2, 0.0)


@pytest.mark.parametrize("bad", [
    dict(dimension=0, kind="bernoulli", p=0.5),
    dict(dimension=2, kind="nope"),
    dict(dimension=2, kind="bernoulli", p=1.5),
    dict(dimension=2, kind="block_factor", m=-1),
    dict(dimension=2, kind="block_factor", m=1, rule="xor"),
])
def test_invalid_specs(bad):
    with pytest.raises(SpecError):
        ProcessSpec(**bad)


def test_empty_pattern_rejected():
    with pytest.raises(SpecError):
        ProcessSpec.periodic([0, 0])


def test_full_lattice_flagged_degenerate():
    assert ProcessSpec.full_lattice(2).violates_a1
    assert not BERN.violates_a1


@pytest.mark.parametrize("spec", [
    BERN,
    ProcessSpec.block_factor(2, 1, "majority"),
    ProcessSpec.block_factor(2, 2, "all", 0.3),
    ProcessSpec.even_sites(),
    ProcessSpec.explicit([[1, 0], [1, 1]], origin=(1, 1)),
])
def test_spec_dict_round_trip(spec):
    assert ProcessSpec.from_dict(spec.to_dict()) == spec


def test_block_factor_range():
    assert ProcessSpec.block_factor(2, 2).dependence_range == 5


# -- make_environment / occupancy ------------------------------------------------

def test_even_sites_conditioned():
    env = make_environment(ProcessSpec.even_sites(), 0, condition_on_origin=True)
    assert [env.occupancy((x,)) for x in (0, 1, 2, 3)] == [1, 0, 1, 0]


def test_conditioning_impossible_for_pattern():
    with pytest.raises(ConditioningError):
        make_environment(ProcessSpec.periodic([0, 1]), 0, condition_on_origin=True)


def test_full_lattice_all_ones():
    env = make_environment(ProcessSpec.full_lattice(2), 3)
    assert env.window([(-1, 1), (-1, 1)]).all()
    assert env.window([(-1, 1), (-1, 1)]).shape == (3, 3)


def test_even_sites_window():
    env = make_environment(ProcessSpec.even_sites(), 0)
    assert env.window([(-2, 2)]).astype(int).tolist() == [1, 0, 1, 0, 1]


@pytest.mark.parametrize("spec", [BERN, ProcessSpec.block_factor(2, 1, "any", 0.4)])
def test_window_matches_pointwise(spec):
    env = make_environment(spec, 11, condition_on_origin=True)
    box = [(-5, 6), (-3, 4)]
    w = env.window(box)
    for i, x in enumerate(range(-5, 7)):
        for j, y in enumerate(range(-3, 5)):
            assert w[i, j] == env.occupancy((x, y))


def test_purity_digest():
    def digest(env):
        return hashlib.sha256(env.window([(-64, 64)] * 2).tobytes()).hexdigest()
    a = make_environment(BERN, 99)
    b = make_environment(BERN, 99)
    assert digest(a) == digest(b)
    # repeated point queries, in scrambled order, agree with the window
    w = a.window([(-64, 64)] * 2)
    rng = np.random.default_rng(0)
    for x in rng.integers(-64, 65, size=(200, 2)):
        assert a.occupancy(tuple(x)) == w[x[0] + 64, x[1] + 64]
        assert a.occupancy(tuple(x)) == a.occupancy(tuple(x))


def test_conditioned_origin_always_occupied():
    for spec in (BERN, ProcessSpec.bernoulli(3, 0.1), ProcessSpec.block_factor(2, 1, "all", 0.2)):
        for i in range(50):
            assert ensemble_environment(spec, 5, i, condition_on_origin=True).occupancy((0,) * spec.dimension)


def test_conditioned_neighbour_frequency():
    # product measure: conditioning on the origin leaves e_1 Bernoulli(p)
    idx = np.arange(100_000)
    occ = batch_windows(BERN, 8, idx, [(0, 1), (0, 0)], condition_on_origin=True)
    assert occ[:, 0, 0].all()
    freq = occ[:, 1, 0].mean()
    assert abs(freq - 0.5) < 3 * (0.25 / len(idx)) ** 0.5
    # exhaustive oracle for the two-site window: Q(w(e1) = 1 | w(0) = 1) = 1/2
    joint = enumerate_probability((2,), Fraction(1, 2), lambda w: w[0] and w[1])
    marg = enumerate_probability((2,), Fraction(1, 2), lambda w: w[0])
    assert joint / marg == Fraction(1, 2)


def test_batch_windows_match_single_environments():
    spec = ProcessSpec.block_factor(2, 1, "majority")
    box = [(-3, 3), (-2, 2)]
    batch = batch_windows(spec, 4, np.arange(5), box, condition_on_origin=True)
    for i in range(5):
        env = ensemble_environment(spec, 4, i, condition_on_origin=True)
        assert np.array_equal(batch[i], env.window(box))


def test_block_factor_marginal():
    for rule, marginal in (("any", 0.3), ("all", 0.6), ("majority", None)):
        spec = ProcessSpec.block_factor(2, 1, rule, marginal if marginal is not None else 0.5)
        occ = batch_windows(spec, 1, np.arange(40_000), [(0, 0), (0, 0)])
        se = (spec.density * (1 - spec.density) / occ.shape[0]) ** 0.5
        assert abs(occ.mean() - spec.density) < 4 * se


def test_block_factor_finite_dependence():
    m = 1
    spec = ProcessSpec.block_factor(2, m, "any", 0.5)
    ell = spec.dependence_range
    occ = batch_windows(spec, 2, np.arange(40_000), [(0, ell + 1), (0, 0)]).astype(float)
    a, far, near = occ[:, 0, 0], occ[:, ell + 1, 0], occ[:, 1, 0]
    n = len(a)

    def corr(u, v):
        return np.corrcoef(u, v)[0, 1]
    assert abs(corr(a, far)) < 4 / n**0.5
    assert corr(a, near) > 10 / n**0.5  # neighbours share inputs


@pytest.mark.parametrize("spec", [BERN, ProcessSpec.block_factor(2, 1, "majority")])
def test_stationarity(spec):
    # frequency of a fixed 2x1 pattern at the origin and at a shifted site
    idx = np.arange(100_000)
    occ = batch_windows(spec, 21, idx, [(0, 8), (0, 5)])
    pat0 = (occ[:, 0, 0] == 1) & (occ[:, 1, 0] == 0)
    pat1 = (occ[:, 7, 5] == 1) & (occ[:, 8, 5] == 0)
    p0, p1 = pat0.mean(), pat1.mean()
    se = ((p0 * (1 - p0) + p1 * (1 - p1)) / len(idx)) ** 0.5
    assert abs(p0 - p1) < 4 * se


def test_a1_strictly_inside_for_random_specs():
    for spec in (BERN, ProcessSpec.block_factor(2, 1, "any", 0.3), ProcessSpec.bernoulli(3, 0.2)):
        occ = batch_windows(spec, 6, np.arange(20_000), [(0, 0)] * spec.dimension)
        assert 0 < occ.mean() < 1


def test_window_cap():
    env = make_environment(BERN, 0, window_cap=100)
    with pytest.raises(WindowCapError):
        env.window([(0, 10), (0, 10)])


# -- gamma -------------------------------------------------------------------------

def test_gamma_examples():
    full = make_environment(ProcessSpec.full_lattice(2), 0)
    for k in range(4):
        assert full.gamma((3, -2), k) == 1
    even = make_environment(ProcessSpec.even_sites(), 0)
    assert even.gamma((0,), (1,)) == 2
    assert even.gamma((1,), (1,)) == 1


def test_gamma_cap_error():
    env = make_environment(ProcessSpec.bernoulli(1, 0.001), 0)
    with pytest.raises(GammaCapError):
        env.gamma((0,), (1,), cap=2)


def test_gamma_geometric_law():
    p = 0.5
    n = 1_000_000
    masters, attempts = ensemble_masters(BERN, 17, np.arange(n))
    g = batch_gaps(BERN, masters, attempts, np.zeros((n, 2), dtype=np.int64), np.zeros(n, dtype=np.int64))
    assert abs(g.mean() - 1 / p) / (1 / p) < 0.01
    # prefix enumeration: Q(gamma = k) = (1-p)^(k-1) p for k <= 8
    for k in range(1, 9):
        exact = enumerate_probability((k,), Fraction(1, 2), lambda w, k=k: (not w[:k - 1].any()) and w[k - 1])
        assert exact == Fraction(1, 2) ** k
        freq = (g == k).mean()
        assert abs(freq - float(exact)) < 4 * (float(exact) * (1 - float(exact)) / n) ** 0.5


def test_table_gaps_equal_scanned_gaps():
    env = make_environment(BERN, 12, condition_on_origin=True)
    fresh = make_environment(BERN, 12, condition_on_origin=True)
    env.prepare(20)
    rng = np.random.default_rng(1)
    coords = rng.integers(-40, 41, size=(500, 2))
    dirs = rng.integers(0, 4, size=500)
    assert np.array_equal(env.gaps(coords, dirs), fresh._scan(coords, dirs, 10**6))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(-30, 30), st.integers(-30, 30), st.integers(0, 3))
def test_reciprocity_property(seed, x, y, k):
    env = make_environment(ProcessSpec.bernoulli(2, 0.4), seed)
    site = np.array([x, y])
    if not env.occupancy(tuple(site)):
        return
    g = env.gamma(site, k)
    tgt = site + g * directions(2)[k]
    assert env.occupancy(tuple(tgt))
    assert env.gamma(tgt, k ^ 1) == g


def test_pickle_drops_caches():
    import pickle
    env = make_environment(BERN, 3)
    env.prepare(10)
    env.occupancy((1, 1))
    clone = pickle.loads(pickle.dumps(env))
    assert np.array_equal(clone.window([(-5, 5)] * 2), env.window([(-5, 5)] * 2))


def test_environment_reproducible_from_master():
    a = Environment(BERN, 123)
    b = Environment(BERN, Seed(123))
    assert np.array_equal(a.window([(-8, 8)] * 2), b.window([(-8, 8)] * 2))
