from fractions import Fraction

import numpy as np
import pytest

from rwdpp.corrector import PeriodicEnvironment
from rwdpp.env import ProcessSpec, make_environment
from rwdpp.graph import UNREACHED, box_is_blocked
from rwdpp.oracle import (
    StateCapError,
    animals_brute_force,
    brute_force_paths,
    build_chain,
    enumerate_probability,
    exact_ct_distribution,
    exact_distribution,
    geometric_moment,
    tv_distance,
)
from rwdpp.walk import ensemble_positions


def test_full_torus_rows():
    chain = build_chain(PeriodicEnvironment(np.ones((4, 4), dtype=bool)))
    assert chain.n == 16
    for i in range(16):
        row = chain.row(i)
        assert len(row) == 4 and all(v == Fraction(1, 4) for v in row.values())


def test_even_sites_torus_rows():
    chain = build_chain(PeriodicEnvironment(np.array([1, 0] * 4, dtype=bool)))
    assert chain.n == 4
    for i in range(4):
        row = chain.row(i)
        assert sorted(row.values()) == [Fraction(1, 2), Fraction(1, 2)]
        assert i not in row


def test_uniform_is_stationary_exactly():
    penv = PeriodicEnvironment.sample(ProcessSpec.bernoulli(2, 0.5), 8, 1)
    chain = build_chain(penv)
    rows = [chain.row(i) for i in range(chain.n)]
    col = [Fraction(0)] * chain.n
    for r in rows:
        for j, v in r.items():
            col[j] += v
    assert all(c == 1 for c in col)


def test_exact_distribution_examples():
    full = PeriodicEnvironment(np.ones((6, 6), dtype=bool))
    chain = build_chain(full)
    p0 = exact_distribution(chain, (0, 0), 0)
    assert p0[chain.index((0, 0))] == 1 and p0.sum() == 1
    p1 = exact_distribution(chain, (0, 0), 1, exact=True)
    for nb in [(1, 0), (-1, 0), (0, 1), (0, -1)]:
        assert p1[chain.index(nb)] == Fraction(1, 4)
    p3 = exact_distribution(chain, (0, 0), 3, exact=True)
    assert sum(p3) == 1


def test_exact_ct_distribution():
    chain = build_chain(PeriodicEnvironment(np.ones((16, 16), dtype=bool)))
    p0 = exact_ct_distribution(chain, (0, 0), 0.0)
    assert p0[chain.index((0, 0))] == 1
    for t in (0.5, 5.0, 40.0):
        assert abs(exact_ct_distribution(chain, (0, 0), t).sum() - 1) < 1e-10


def test_tv_against_monte_carlo():
    penv = PeriodicEnvironment.sample(ProcessSpec.bernoulli(2, 0.5), 16, 4)
    exact = exact_distribution(build_chain(penv), (0, 0), 50)
    X = ensemble_positions(penv.as_environment(), (0, 0), 50, 200_000, 8)
    hist = np.bincount(penv.site_index(X), minlength=penv.n) / len(X)
    assert tv_distance(hist, exact) < 0.02


def test_tv_distance():
    assert tv_distance([1, 0], [0, 1]) == 1.0
    assert tv_distance([0.5, 0.5], [0.5, 0.5]) == 0.0


def test_enumeration_examples():
    assert enumerate_probability((2, 2), Fraction(1, 2), lambda w: True) == 1
    assert enumerate_probability((2, 2), Fraction(1, 2), box_is_blocked) == Fraction(7, 16)
    assert enumerate_probability((2,), Fraction(1, 2), lambda w: w.any()) == Fraction(3, 4)
    assert enumerate_probability((3,), Fraction(1, 3), lambda w: w.all()) == Fraction(1, 27)


def test_enumeration_cap():
    with pytest.raises(ValueError):
        enumerate_probability((5, 5), Fraction(1, 2), lambda w: True)


def test_brute_force_paths():
    full = np.ones((5, 5), dtype=bool)
    assert brute_force_paths(full, (0, 0), (0, 0), 5) == 0
    assert brute_force_paths(full, (0, 0), (2, 1), 10) == 3
    w = np.zeros((3, 3), dtype=bool)
    w[0, 0] = w[2, 2] = True
    assert brute_force_paths(w, (0, 0), (2, 2), 8) is UNREACHED
    with pytest.raises(StateCapError):
        brute_force_paths(np.ones((6, 6), bool), (0, 0), (5, 5), 12, state_cap=50)


def test_animals_brute_force():
    assert animals_brute_force(2, 1) == 1
    assert animals_brute_force(2, 2) == 4
    assert animals_brute_force(2, 5) == 315
    assert animals_brute_force(1, 4) == 4


def test_geometric_moment_series():
    p = 0.25
    assert geometric_moment(p, 1) == pytest.approx(1 / p)
    assert geometric_moment(p, 2) == pytest.approx((2 - p) / p**2)


def test_chain_uses_torus_wrap():
    # a single occupied row on a 1D torus of side 6 with sites {0, 3}
    penv = PeriodicEnvironment(np.array([1, 0, 0, 1, 0, 0], dtype=bool), offset=[0])
    chain = build_chain(penv)
    assert chain.row(0) == {1: Fraction(1)}
    assert make_environment(ProcessSpec.periodic([1, 0, 0]), 0).gamma((0,), 0) == 3
