from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rwdpp.env import ProcessSpec, make_environment, ensemble_environment
from rwdpp.graph import (
    DISCONNECTED,
    UNREACHED,
    EventParams,
    NeighborMap,
    Unreached,
    batch_short_distance,
    blocked_batch,
    box_is_blocked,
    compute_M_N,
    count_lattice_animals,
    distance_field,
    estimate_p_L,
    event_E,
    event_F,
    event_G,
    event_H,
    event_Lambda,
    graph_distance,
    is_blocked,
    neighbors,
    short_distance_event,
    shortest_path,
)
from rwdpp.oracle import animals_brute_force, brute_force_paths, enumerate_probability

FULL2 = make_environment(ProcessSpec.full_lattice(2), 0)
EVEN = make_environment(ProcessSpec.even_sites(), 0)
BERN = ProcessSpec.bernoulli(2, 0.5)


# -- neighbours and distances ------------------------------------------------------

def test_neighbors_full_lattice():
    assert sorted(neighbors(NeighborMap(FULL2), (0, 0))) == sorted([(1, 0), (-1, 0), (0, 1), (0, -1)])


def test_neighbors_even_sites():
    assert sorted(neighbors(NeighborMap(EVEN), (0,))) == [(-2,), (2,)]


def test_neighbor_explicit_window():
    grid = np.ones((8, 8), dtype=int)
    grid[:, 0] = [1, 0, 0, 1, 0, 1, 0, 0]  # row 0 along e1
    env = make_environment(ProcessSpec.explicit(grid, origin=(0, 0)), 0)
    # independent oracle: scan the stated row
    row = grid[:, 0]
    scan = next(k for k in range(1, 8) if row[k])
    assert scan == 3
    assert neighbors(NeighborMap(env), (0, 0))[0] == (3, 0)


def test_neighbors_reject_vacant():
    with pytest.raises(ValueError):
        NeighborMap(EVEN).neighbors((1,))


def test_distance_examples():
    nm = NeighborMap(FULL2)
    assert graph_distance(nm, (2, 2), (2, 2)) == 0
    assert graph_distance(nm, (0, 0), (3, 4)) == 7
    en = NeighborMap(EVEN)
    for k in range(-5, 6):
        assert graph_distance(en, (0,), (2 * k,)) == abs(k)


def test_distance_hop_cap_and_disconnection():
    nm = NeighborMap(FULL2)
    res = graph_distance(nm, (0, 0), (10, 0), hop_cap=3)
    assert isinstance(res, Unreached) and not res and res == UNREACHED
    confined = graph_distance(nm, (0, 0), (3, 0), confinement=[(0, 2), (0, 2)])
    assert confined == DISCONNECTED


def test_shortest_path_is_a_path():
    env = make_environment(BERN, 4, condition_on_origin=True)
    nm = NeighborMap(env)
    for y in [(5, 3), (-7, 2), (0, 9)]:
        if not env.occupancy(y):
            continue
        path = shortest_path(nm, (0, 0), y)
        assert path[0] == (0, 0) and path[-1] == y
        for a, b in zip(path, path[1:]):
            assert b in nm.neighbors(a)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_metric_properties(seed):
    env = make_environment(ProcessSpec.bernoulli(2, 0.5), seed)
    nm = NeighborMap(env)
    w = env.window([(-4, 4), (-4, 4)])
    occ = [tuple(int(v) - 4 for v in s) for s in np.argwhere(w)]
    if len(occ) < 3:
        return
    rng = np.random.default_rng(seed)
    x, y, z = (occ[i] for i in rng.choice(len(occ), 3, replace=False))
    dxy, dyx = graph_distance(nm, x, y), graph_distance(nm, y, x)
    assert dxy == dyx
    assert graph_distance(nm, x, z) <= dxy + graph_distance(nm, y, z)
    # every neighbour is at distance 1
    for nb in nm.neighbors(x):
        assert graph_distance(nm, nb, x) == 1


def test_bfs_matches_brute_force_on_windows():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(100):
        w = rng.random((6, 6)) < 0.5
        occ = np.argwhere(w)
        if len(occ) < 2:
            continue
        a, b = occ[rng.choice(len(occ), 2, replace=False)]
        dist, _ = _confined_distance(w, tuple(a))
        brute = brute_force_paths(w, tuple(a), tuple(b), max_len=36, state_cap=10**7)
        bfs = dist[tuple(b)]
        if isinstance(brute, Unreached):
            assert np.isinf(bfs)
        else:
            assert bfs == brute
        checked += 1
    assert checked > 90


def _confined_distance(window, src):
    from rwdpp.graph import window_graph
    from scipy.sparse import csgraph
    g = window_graph(window)
    flat = int(np.ravel_multi_index(src, window.shape))
    return csgraph.shortest_path(g, unweighted=True, indices=flat).reshape(window.shape), g


def test_brute_force_example():
    assert brute_force_paths(np.ones((5, 5), bool), (0, 0), (2, 1), 10) == 3
    assert brute_force_paths(np.ones((5, 5), bool), (1, 1), (1, 1), 10) == 0


def test_distance_field_full_lattice_is_l1():
    dist, box = distance_field(FULL2, (0, 0), 4)
    xs = np.arange(-4, 5)
    l1 = np.abs(xs)[:, None] + np.abs(xs)[None, :]
    assert np.array_equal(dist, l1)


# -- blocked boxes / p_L ------------------------------------------------------------

def test_blocked_examples():
    assert box_is_blocked(np.ones((2, 2), bool))
    assert box_is_blocked(np.ones((6, 6, 6), bool))
    occ = np.ones((2, 2), bool)
    occ[:, 0] = False
    assert not box_is_blocked(occ)
    assert is_blocked(FULL2, (3, 3), 2)


def test_p1_enumeration():
    blocked = enumerate_probability((2, 2), Fraction(1, 2), box_is_blocked)
    assert blocked == Fraction(7, 16)
    assert 1 - blocked == Fraction(9, 16)


def test_blocked_batch_agrees_with_scalar():
    rng = np.random.default_rng(5)
    occ = rng.random((500, 4, 4)) < 0.4
    assert np.array_equal(blocked_batch(occ), [box_is_blocked(o) for o in occ])


def test_p_L_full_lattice_zero():
    for L in (1, 3):
        assert estimate_p_L(ProcessSpec.full_lattice(2), L, 500, 1).hits == 0


def test_p1_estimate_covers_exact():
    est = estimate_p_L(BERN, 1, 100_000, 31)
    assert est.ci_low <= 9 / 16 <= est.ci_high


def test_p_L_decreasing():
    p1 = estimate_p_L(BERN, 1, 100_000, 32)
    p4 = estimate_p_L(BERN, 4, 100_000, 33)
    assert p1.estimate - p4.estimate > 4 * (p1.stderr**2 + p4.stderr**2) ** 0.5


# -- animals -------------------------------------------------------------------------

def test_animal_counts():
    assert count_lattice_animals(2, 1) == 1
    assert count_lattice_animals(2, 2) == 4
    n3 = count_lattice_animals(2, 3)
    assert n3 <= 4**6
    assert n3 == animals_brute_force(2, 3)


@pytest.mark.parametrize("d,n", [(2, 4), (2, 5), (2, 6), (3, 3), (3, 4)])
def test_animals_redelmeier_vs_brute_force(d, n):
    assert count_lattice_animals(d, n) == animals_brute_force(d, n)


def test_animal_cap():
    with pytest.raises(ValueError):
        count_lattice_animals(2, 13)


# -- connectivity events -----------------------------------------------------------

def test_event_E_full_lattice():
    for n in (1, 3, 6):
        assert event_E(FULL2, n, 1.0, 1.0)


def test_event_E_walled_off_site():
    # origin at grid (3, 3); the only other occupied site of the box [-2, 2]^2
    # is (2, 2), and every line through either leaves the box before meeting
    # an occupied site (the frame at grid index 8 connects them outside)
    grid = np.zeros((12, 12), dtype=int)
    grid[8, :] = grid[:, 8] = 1
    grid[3, 3] = 1
    grid[5, 5] = 1
    env = make_environment(ProcessSpec.explicit(grid, origin=(3, 3)), 0)
    assert not event_E(env, 2, 1.0, 1.0)
    # with a large enough box the connection is found
    assert event_E(env, 2, 1.0, 5.0)


def test_event_E_vacuous_confinement():
    env = make_environment(BERN, 7, condition_on_origin=True)
    n = 3
    occ = env.window([(-n, n)] * 2)
    nm = NeighborMap(env)
    unconfined = all(not isinstance(graph_distance(nm, (0, 0), tuple(s - n)), Unreached)
                     for s in np.argwhere(occ))
    assert event_E(env, n, 3.0, 1.0) == unconfined


def test_events_full_lattice_true():
    full3 = make_environment(ProcessSpec.full_lattice(3), 0)
    assert event_F(full3, 2, 2, (0, 0, 1))
    assert event_F(full3, 3, 1, (0, 0, 0))
    assert event_G(full3, 2, 2, (1, 0, 0))
    assert event_H(full3, 2, 2, (0, 0, 3))
    for which in (0, 1, 2):
        assert event_Lambda(FULL2, which, u=0, L=2, n=3, ell=1)


def test_event_F_against_brute_force():
    # centre row empty except x; other rows random
    rng = np.random.default_rng(9)
    trials = 0
    while trials < 30:
        w = rng.random((3, 3)) < 0.6
        w[:, 1] = False
        w[1, 1] = True
        if not (w.any(axis=0).all() and w.any(axis=1).all()):
            continue
        trials += 1
        env = make_environment(ProcessSpec.explicit(w.astype(int), origin=(1, 1)), 0)
        expected = all(not isinstance(brute_force_paths(w, (1, 1), tuple(s), 9, 10**6), Unreached)
                       for s in np.argwhere(w))
        assert event_F(env, 2, 1, (0, 0)) == expected


def test_event_H_empty_column():
    grid = np.ones((7, 7), dtype=int)
    grid[4, 1:6] = 0    # column x1 = 1 empty on |x2| <= 2
    env = make_environment(ProcessSpec.explicit(grid, origin=(3, 3)), 0)
    assert not event_H(env, 2, 2, (0, 0))
    assert event_H(env, 2, 2, (0, 0)) == event_H(env, 2, 2, (5, 5))


def test_event_parameters_validated():
    with pytest.raises(ValueError):
        EventParams(delta=1.5)
    with pytest.raises(ValueError):
        event_F(FULL2, 3, 1, (0, 0))
    assert EventParams.default_delta(2).delta == 0.25


def test_lambda0_enumeration():
    assert enumerate_probability((2,), Fraction(1, 2), lambda w: w.any()) == Fraction(3, 4)


def test_lambda1_empty_slab():
    grid = np.ones((10, 10), dtype=int)
    grid[:6, 8:10] = 0   # most columns of the slab below u empty
    env = make_environment(ProcessSpec.explicit(grid, origin=(0, 0)), 0)
    assert not event_Lambda(env, 1, u=0, delta=0.25, L=2, n=2)


def test_lambda1_complement_decreasing():
    spec = BERN
    L, delta = 4, 0.25
    freqs = []
    for n in (2, 8, 32):
        miss = sum(not event_Lambda(ensemble_environment(spec, 3, i), 1, 0, delta, L, n)
                   for i in range(2000))
        freqs.append(miss / 2000)
    assert freqs[0] > freqs[-1]
    assert all(a >= b for a, b in zip(freqs, freqs[1:]))


# -- M(omega), N(omega) ------------------------------------------------------------

def test_M_N_examples():
    assert compute_M_N(FULL2, search_cap=16) == {"M": 1, "N": 2, "cap": 16, "valid": True}
    r = compute_M_N(EVEN, search_cap=16)
    assert (r["M"], r["N"]) == (2, 4)


def test_N_at_least_M_plus_one():
    for i in range(10):
        r = compute_M_N(ensemble_environment(BERN, 1, i, condition_on_origin=True), 64)
        assert r["valid"] and r["N"] >= r["M"] + 1


def test_M_N_origin_vacant():
    with pytest.raises(ValueError):
        compute_M_N(make_environment(ProcessSpec.periodic([0, 1]), 0))


# -- chemical distance event -----------------------------------------------------

def test_short_distance_full_lattice_never():
    for x in [(2, 0), (5, 3), (10, 0)]:
        assert not short_distance_event(FULL2, x, 0.9)


def test_batch_short_distance_matches_scalar():
    spec = ProcessSpec.bernoulli(2, 0.5)
    idx = np.arange(400)
    for x, rho in [((6, 0), 0.5), ((4, 3), 0.6), ((8, 0), 0.3)]:
        batch = batch_short_distance(spec, 2, idx, x, rho)
        scalar = [short_distance_event(ensemble_environment(spec, 2, int(i)), x, rho) for i in idx]
        assert np.array_equal(batch, scalar)
        assert batch.any()


def test_short_distance_exact_frequency():
    # bernoulli(1/2), rho = 0.1, x = (10, 0): d <= 1 iff 0, x occupied and the
    # nine sites between them empty, probability 2^-11
    n = 200_000
    hits = batch_short_distance(BERN, 4, np.arange(n), (10, 0), 0.1).sum()
    p = 2.0**-11
    assert abs(hits / n - p) < 4 * (p * (1 - p) / n) ** 0.5
