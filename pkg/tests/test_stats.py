import math

import numpy as np
import pytest
from scipy import stats as sps

from rwdpp.corrector import DiffusionEstimate, PeriodicEnvironment
from rwdpp.env import ProcessSpec, make_environment
from rwdpp.estimates import Proportion, clopper_pearson, wilson_interval
from rwdpp.oracle import geometric_moment
from rwdpp.stats import (
    Check,
    DegenerateVarianceError,
    Report,
    Table,
    consistency_z,
    displacement_profile,
    distance_comparison,
    estimate_D_empirical,
    gamma_moment_check,
    gaussianity_check,
    isotropy_checks,
    jackknife_covariance,
    lattice_jitter,
    mann_kendall,
    return_prob_profile,
    unit,
    weighted_log_fit,
)

FULL2 = make_environment(ProcessSpec.full_lattice(2), 0)
EVEN = make_environment(ProcessSpec.even_sites(), 0)
BERN = ProcessSpec.bernoulli(2, 0.5)


# -- intervals ---------------------------------------------------------------------

def test_wilson_and_clopper_pearson():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert clopper_pearson(0, 1000)[0] == 0.0
    # zero-hit upper bound: 1 - 0.025^(1/n)
    assert clopper_pearson(0, 1000)[1] == pytest.approx(1 - 0.025 ** (1 / 1000), rel=1e-9)
    p = Proportion.from_counts(0, 1000)
    assert p.censored and p.upper > 0 and p.estimate == 0


# -- diffusion -------------------------------------------------------------------------

def test_jackknife_covariance_matches_numpy():
    rng = np.random.default_rng(1)
    Z = rng.normal(size=(5000, 2)) @ np.array([[1.0, 0.3], [0.0, 0.5]])
    C, se = jackknife_covariance(Z, groups=50)
    assert np.allclose(C, np.cov(Z.T))
    # standard error of a Gaussian variance, sigma^2 sqrt(2/(N-1))
    assert se[0, 0] == pytest.approx(C[0, 0] * math.sqrt(2 / 4999), rel=0.35)


def test_empirical_D_full_lattice():
    est = estimate_D_empirical(FULL2, 500, 10_000, 3)
    assert np.all(np.abs(est.D - np.diag([0.5, 0.5])) <= 3 * est.stderr + 1e-12)
    assert all(c.passed for c in isotropy_checks(est, k=4.0))


def test_empirical_D_even_sites():
    est = estimate_D_empirical(EVEN, 200, 10_000, 3)
    assert abs(est.D[0, 0] - 4.0) <= 3 * est.stderr[0, 0]


def test_consistency_z():
    a = DiffusionEstimate(np.eye(2), np.full((2, 2), 0.1), "a", 1)
    b = DiffusionEstimate(np.eye(2) * 1.3, np.full((2, 2), 0.1), "b", 1)
    assert consistency_z(a, b) == pytest.approx(0.3 / math.sqrt(0.02))
    zero = DiffusionEstimate(np.eye(2), np.zeros((2, 2)), "m", 1)
    assert consistency_z(zero, zero) == 0.0


# -- Gaussianity -------------------------------------------------------------------------

def test_lattice_jitter_spacing_and_range():
    X = np.array([[0, 2], [4, -2], [2, 6]])
    Xj, h = lattice_jitter(X, 5)
    assert h.tolist() == [2, 2]
    assert np.all(np.abs(Xj - X) <= 1.0)
    assert np.array_equal(lattice_jitter(X, 5)[0], Xj)


def test_gaussianity_full_lattice():
    res = gaussianity_check(FULL2, unit(2), 400, 4000, 9)
    assert res.pvalue > 0.01
    assert res.variance == pytest.approx(0.5 + 1 / (12 * 400), rel=0.1)


def test_gaussianity_detects_two_point_law():
    res = gaussianity_check(EVEN, unit(1), 1, 2000, 1, smooth=False)
    assert res.statistic > 0.3 and res.pvalue < 1e-10


def test_gaussianity_rejects_zero_projection():
    with pytest.raises(ValueError):
        gaussianity_check(FULL2, [0, 0], 10, 10, 1)


def test_degenerate_variance_error(monkeypatch):
    import rwdpp.stats as st
    zero = DiffusionEstimate(np.zeros((2, 2)), np.zeros((2, 2)), "empirical", 2)
    monkeypatch.setattr(st, "estimate_D_empirical", lambda *a, **k: zero)
    with pytest.raises(DegenerateVarianceError):
        gaussianity_check(FULL2, unit(2), 10, 10, 1)


# -- profiles ---------------------------------------------------------------------------

def test_return_prob_exact_profile():
    torus = PeriodicEnvironment(np.ones((64, 64), dtype=bool))
    rows = return_prob_profile(torus, (0, 0), [0, 50, 100])
    assert rows[0].value == pytest.approx(0.0) and rows[0].extra["prob"] == pytest.approx(1.0)
    assert abs(rows[2].value / rows[1].value - 1) < 0.05
    # local CLT: t P(Y_t = 0) -> 1 / (2 pi sqrt(det D)) = 1 / pi
    assert rows[2].value == pytest.approx(1 / math.pi, rel=0.02)


def test_return_prob_mc_profile_brackets_exact():
    torus = PeriodicEnvironment(np.ones((64, 64), dtype=bool))
    exact = return_prob_profile(torus, (0, 0), [5.0])[0].value
    mc = return_prob_profile(FULL2, (0, 0), [5.0], n_walks=20_000, seed=3)[0]
    assert mc.ci_low <= exact <= mc.ci_high


def test_return_prob_cutoff():
    torus = PeriodicEnvironment(np.ones((8, 8), dtype=bool))
    rows = return_prob_profile(torus, (0, 0), [1, 2, 3, 4], b_n=3)
    assert [r.t for r in rows] == [3.0, 4.0]


def test_displacement_profile():
    rows = displacement_profile(FULL2, (0, 0), [0, 1, 100], 4000, 2)
    assert rows[0].value == 0.0
    # E|Y_t| / sqrt(t) -> E|N(0, I/2)| = sqrt(pi)/2
    assert rows[2].ci_low - 0.02 <= math.sqrt(math.pi) / 2 <= rows[2].ci_high + 0.02


def test_displacement_graph_companion():
    rows = displacement_profile(FULL2, (0, 0), [25], 300, 4, graph=True)
    extra = rows[0].extra
    assert extra["graph_unresolved"] == 0
    # on Z^2 the chemical distance is the l1 norm, at least the Euclidean one
    assert extra["graph_mean"] >= rows[0].value


def test_mann_kendall():
    tau, p = mann_kendall(np.arange(20.0))
    assert tau == pytest.approx(1.0) and p < 1e-6
    rng = np.random.default_rng(0)
    _, p = mann_kendall(rng.normal(size=30))
    assert p > 0.01


# -- decay fit -------------------------------------------------------------------------

def test_weighted_log_fit_recovers_slope():
    norms = np.arange(5, 15)
    props = [Proportion.from_counts(int(round(1e6 * 0.5 ** (r + 1))), 1_000_000) for r in norms]
    fit = weighted_log_fit(norms, props, 2)
    assert fit.slope == pytest.approx(math.log(0.5), rel=0.02)
    assert fit.t_stat < -3
    assert fit.c7 == pytest.approx(8 / fit.c6)


def test_weighted_log_fit_degenerate():
    props = [Proportion.from_counts(0, 100)] * 3
    fit = weighted_log_fit([1, 2, 3], props, 2)
    assert fit.cells == 0 and math.isnan(fit.slope)


def test_distance_comparison_exact_counts():
    rep = distance_comparison(BERN, 0.1, [(10, 0), (12, 0)], 50_000, 5)
    for r, prop in zip(rep.norms, rep.props):
        exact = 2.0 ** -(r + 1)
        assert abs(prop.estimate - exact) < 4 * math.sqrt(exact / prop.samples)


# -- gap moments -------------------------------------------------------------------------

def test_gamma_moment_bernoulli():
    rep = gamma_moment_check(BERN, 0, 1.0, 200_000, 3)
    assert rep.analytic == pytest.approx(geometric_moment(0.5, 3))
    assert geometric_moment(0.5, 3) == pytest.approx(26.0)
    assert rep.z <= 3


def test_gamma_moment_deterministic():
    rep = gamma_moment_check(ProcessSpec.even_sites(), 0, 0.5, 10, 0)
    assert rep.mean == pytest.approx(2 ** 1.5) and rep.stderr == 0
    full = gamma_moment_check(ProcessSpec.full_lattice(2), 0, 1.0, 1000, 0)
    assert full.mean == pytest.approx(1.0)


def test_geometric_moment_oracle():
    assert geometric_moment(0.5, 1) == pytest.approx(2.0)
    assert geometric_moment(0.5, 2) == pytest.approx(6.0)
    assert geometric_moment(0.3, 2) == pytest.approx(sps.geom(0.3).moment(2))


# -- reports ------------------------------------------------------------------------------

def test_checks_and_merge():
    assert Check.below("a", 1, 2).passed and not Check.below("a", 2, 2).passed
    assert Check.at_most("b", 2, 2).passed
    assert Check.above("c", 3, 2).comparator == ">"
    sub = Report("x", estimates={"D": 1.0}, tables={"t": Table(["a"], [[1]])})
    sub.check(Check.below("k", 0.0, 1.0))
    top = Report("full-suite")
    top.merge(sub, "x")
    assert top.estimates == {"x.D": 1.0}
    assert top.checks[0].name == "x.k" and top.passed
    assert "x_t" in top.tables


# -- estimator invariants ---------------------------------------------------------------

def test_doubling_walks_halves_jackknife_variance():
    env = make_environment(BERN, 21, condition_on_origin=True)
    n = 4000

    def mean_var(walks, base):
        ests = [estimate_D_empirical(env, 100, walks, 22, first_walk=base + r * walks) for r in range(4)]
        return np.mean([np.diag(e.stderr) ** 2 for e in ests])

    ratio = mean_var(n, 0) / mean_var(2 * n, 10**6)
    assert abs(ratio / 2 - 1) < 0.3


def test_D_symmetric_and_psd_within_ci():
    env = make_environment(BERN, 23, condition_on_origin=True)
    est = estimate_D_empirical(env, 500, 5000, 24)
    assert np.array_equal(est.D, est.D.T)
    lam = np.linalg.eigvalsh(est.D)
    assert lam.min() + 3 * np.abs(est.stderr).max() >= 0
