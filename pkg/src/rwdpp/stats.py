"""Estimators and hypothesis checks for the scaling-limit content.

Every estimator here consumes walk ensembles or environment ensembles
produced elsewhere and returns plain numbers with uncertainty attached.
Monte Carlo proportions carry Wilson intervals; zero counts are reported
as Clopper-Pearson upper bounds rather than zeros.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .corrector import DiffusionEstimate, PeriodicEnvironment
from .env import Environment, ProcessSpec, batch_gaps, directions, ensemble_masters
from .estimates import Proportion
from .graph import batch_short_distance, distance_field
from .seeding import TAG_JITTER, as_seed, derive, derive_array, stream_uniforms
from .walk import ensemble_ct_positions, ensemble_positions


class DegenerateVarianceError(ValueError):
    """The projected variance estimate is zero or not finite."""


# -- reports ----------------------------------------------------------------

@dataclass
class Check:
    """One pass/fail flag with the numbers it was decided on."""

    name: str
    passed: bool
    measured: float
    threshold: float
    comparator: str

    @classmethod
    def below(cls, name: str, measured: float, threshold: float) -> "Check":
        return cls(name, bool(measured < threshold), float(measured), float(threshold), "<")

    @classmethod
    def above(cls, name: str, measured: float, threshold: float) -> "Check":
        return cls(name, bool(measured > threshold), float(measured), float(threshold), ">")

    @classmethod
    def at_most(cls, name: str, measured: float, threshold: float) -> "Check":
        return cls(name, bool(measured <= threshold), float(measured), float(threshold), "<=")


@dataclass
class Table:
    columns: list[str]
    rows: list[list]


@dataclass
class Report:
    """Outcome of one experiment: estimates, intervals, fits, checks, tables.

    ``timing`` is kept separate from everything else so that the numerical
    content can be digested independently of wall-clock noise.
    """

    experiment: str
    params: dict = field(default_factory=dict)
    estimates: dict = field(default_factory=dict)
    intervals: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    seeds: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    tables: dict[str, Table] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, c: Check) -> Check:
        self.checks.append(c)
        return c

    def merge(self, other: "Report", prefix: str) -> None:
        """Fold a sub-report in, namespacing every key with ``prefix``."""
        for name in ("params", "estimates", "intervals", "fits", "seeds", "timing"):
            target = getattr(self, name)
            for k, v in getattr(other, name).items():
                target[f"{prefix}.{k}"] = v
        for c in other.checks:
            self.checks.append(Check(f"{prefix}.{c.name}", c.passed, c.measured, c.threshold, c.comparator))
        for k, t in other.tables.items():
            self.tables[f"{prefix}_{k}"] = t


# -- diffusion matrix -----------------------------------------------------

def jackknife_covariance(Z: np.ndarray, groups: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Sample covariance of the rows of ``Z`` and its delete-a-group
    jackknife standard error (contiguous groups)."""
    Z = np.asarray(Z, dtype=np.float64)
    N, d = Z.shape
    if N < 2:
        raise ValueError("need at least two samples")
    G = max(2, min(groups, N))
    bounds = np.linspace(0, N, G + 1).astype(int)
    s1 = np.stack([Z[a:b].sum(axis=0) for a, b in zip(bounds[:-1], bounds[1:])])
    s2 = np.stack([Z[a:b].T @ Z[a:b] for a, b in zip(bounds[:-1], bounds[1:])])
    sizes = np.diff(bounds).astype(np.float64)
    T1, T2 = s1.sum(axis=0), s2.sum(axis=0)

    def cov(S1, S2, n):
        return (S2 - np.outer(S1, S1) / n) / (n - 1)

    full = cov(T1, T2, N)
    loo = np.stack([cov(T1 - s1[g], T2 - s2[g], N - sizes[g]) for g in range(G)])
    se = np.sqrt((G - 1) / G * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    return full, se


def estimate_D_empirical(env: Environment, n_steps: int, n_walks: int, seed, x0=None,
                         first_walk: int = 0, jobs: int = 1, groups: int = 50) -> DiffusionEstimate:
    """Covariance of X_n / sqrt(n) over independent quenched walks."""
    if x0 is None:
        x0 = (0,) * env.d
    X = ensemble_positions(env, x0, n_steps, n_walks, seed, first_walk=first_walk, jobs=jobs)
    Z = (X - np.asarray(x0)) / math.sqrt(n_steps)
    D, se = jackknife_covariance(Z, groups)
    D = 0.5 * (D + D.T)
    return DiffusionEstimate(D, se, "empirical", n_walks, n_steps,
                             meta={"first_walk": first_walk, "groups": groups})


def isotropy_checks(est: DiffusionEstimate, k: float = 3.0) -> list[Check]:
    """Off-diagonals contain zero and diagonals agree, both at k sigma."""
    out = []
    d = est.D.shape[0]
    for i in range(d):
        for j in range(i + 1, d):
            z = abs(est.D[i, j]) / max(est.stderr[i, j], 1e-300)
            out.append(Check.at_most(f"offdiag_{i + 1}{j + 1}_z", z, k))
            diff = abs(est.D[i, i] - est.D[j, j])
            se = math.hypot(est.stderr[i, i], est.stderr[j, j])
            out.append(Check.at_most(f"diag_{i + 1}{j + 1}_z", diff / max(se, 1e-300), k))
    return out


def consistency_z(a: DiffusionEstimate, b: DiffusionEstimate) -> float:
    """Largest entrywise |difference| in units of the combined standard error."""
    se = np.sqrt(a.stderr**2 + b.stderr**2)
    diff = np.abs(a.D - b.D)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, diff / se, np.where(diff > 0, np.inf, 0.0))
    return float(z.max())


# -- Gaussianity ----------------------------------------------------------

@dataclass
class GaussianityResult:
    statistic: float
    pvalue: float
    variance: float
    n_steps: int
    n_walks: int
    raw_statistic: float = math.nan
    raw_pvalue: float = math.nan
    spacing: tuple = ()


def lattice_jitter(X: np.ndarray, seed, first_walk: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Spread integer positions uniformly over their lattice cells.

    Coordinate i of every walk gets an independent U(-h_i/2, h_i/2) offset,
    where h_i is the gcd of the observed coordinate values (the lattice
    spacing of the sample).  The offsets come from their own counter stream
    (walk id, coordinate), so they are reproducible and independent of the
    walk.  Returns the jittered positions and the spacings.
    """
    X = np.asarray(X, dtype=np.int64)
    h = np.array([max(1, int(np.gcd.reduce(np.abs(X[:, i])))) for i in range(X.shape[1])])
    keys = derive_array(np.uint64(derive(as_seed(seed).master, TAG_JITTER)),
                        np.arange(first_walk, first_walk + len(X), dtype=np.int64))
    U = np.stack([stream_uniforms(keys, i) for i in range(X.shape[1])], axis=1)
    return X + (U - 0.5) * h, h


def gaussianity_check(env: Environment, a, n: int, n_walks: int, seed, x0=None,
                      jobs: int = 1, variance_walks: int | None = None,
                      smooth: bool = True) -> GaussianityResult:
    """KS distance between a.X_n/sqrt(n) and N(0, a.D a).

    D is estimated from walks ``n_walks .. n_walks + variance_walks - 1`` of
    the same seed, which share no random numbers with the tested walks.
    With ``smooth`` (the default) the lattice-valued positions receive the
    continuity correction of :func:`lattice_jitter` and the reference
    variance grows by sum_i a_i^2 h_i^2 / (12 n); the uncorrected KS result
    is reported alongside.
    """
    a = np.asarray(a, dtype=np.float64)
    if not np.any(a):
        raise ValueError("projection vector must be nonzero")
    if x0 is None:
        x0 = (0,) * env.d
    variance_walks = variance_walks or n_walks
    D = estimate_D_empirical(env, n, variance_walks, seed, x0=x0, first_walk=n_walks, jobs=jobs)
    var = float(a @ D.D @ a)
    if not np.isfinite(var) or var <= 0:
        raise DegenerateVarianceError(f"projected variance estimate is {var!r}")
    X = ensemble_positions(env, x0, n, n_walks, seed, jobs=jobs) - np.asarray(x0)
    raw = sps.kstest(X @ a / math.sqrt(n), "norm", args=(0.0, math.sqrt(var)))
    if not smooth:
        return GaussianityResult(float(raw.statistic), float(raw.pvalue), var, n, n_walks,
                                 float(raw.statistic), float(raw.pvalue))
    Xj, h = lattice_jitter(X, seed)
    var_j = var + float(np.sum(a**2 * h**2)) / (12 * n)
    res = sps.kstest(Xj @ a / math.sqrt(n), "norm", args=(0.0, math.sqrt(var_j)))
    return GaussianityResult(float(res.statistic), float(res.pvalue), var_j, n, n_walks,
                             float(raw.statistic), float(raw.pvalue), tuple(int(v) for v in h))


# -- heat kernel and displacement profiles ---------------------------------

@dataclass
class ProfileRow:
    t: float
    value: float
    ci_low: float
    ci_high: float
    censored: bool = False
    extra: dict = field(default_factory=dict)


def return_prob_profile(target, x, times, b_n: float | None = None, n_walks: int = 10_000,
                        seed=0, jobs: int = 1, tail_tol: float = 1e-12) -> list[ProfileRow]:
    """t^{d/2} P(Y_t = x) over ``times`` (those with t >= b_n).

    Exact on a :class:`PeriodicEnvironment`; Monte Carlo frequencies with
    Wilson intervals on a lazily evaluated environment.
    """
    from .oracle import build_chain, exact_ct_distribution

    times = [float(t) for t in times if b_n is None or t >= b_n]
    x = tuple(int(c) for c in x)
    rows = []
    if isinstance(target, PeriodicEnvironment):
        chain = build_chain(target)
        i = chain.index(x)
        d = target.d
        for t in times:
            pr = float(exact_ct_distribution(chain, x, t, tail_tol)[i])
            v = t ** (d / 2) * pr
            rows.append(ProfileRow(t, v, v, v, extra={"prob": pr, "exact": True}))
        return rows
    env = target
    d = env.d
    Y = ensemble_ct_positions(env, x, times, n_walks, seed, jobs=jobs)
    for j, t in enumerate(times):
        hits = int(np.count_nonzero(np.all(Y[j] == np.asarray(x), axis=1)))
        prop = Proportion.from_counts(hits, n_walks)
        s = t ** (d / 2)
        value = s * (prop.upper if prop.censored else prop.estimate)
        rows.append(ProfileRow(t, value, s * prop.ci_low, s * prop.ci_high, prop.censored,
                               extra={"prob": prop.estimate, "hits": hits, "exact": False}))
    return rows


def displacement_profile(env: Environment, x, times, n_walks: int, seed, jobs: int = 1,
                         graph: bool = False, independent: bool = True) -> list[ProfileRow]:
    """E|Y_t - x| / sqrt(t) with normal-theory 95% intervals.

    With ``independent`` each time point uses its own block of walk ids, so
    the series entries are independent (as a trend test requires).  With
    ``graph`` a companion series d(x, Y_t)/sqrt(t) in the chemical distance
    is added under ``extra``.
    """
    times = [float(t) for t in times]
    x = np.asarray(x, dtype=np.int64)
    if independent:
        Ys = [ensemble_ct_positions(env, x, [t], n_walks, seed, first_walk=j * n_walks, jobs=jobs)[0]
              for j, t in enumerate(times)]
    else:
        Ys = list(ensemble_ct_positions(env, x, times, n_walks, seed, jobs=jobs))
    z = sps.norm.ppf(0.975)
    rows = []
    for t, Y in zip(times, Ys):
        disp = Y - x
        r = np.sqrt(np.sum(disp.astype(np.float64) ** 2, axis=1))
        scale = math.sqrt(t) if t > 0 else math.inf
        mean = float(r.mean()) / scale if t > 0 else 0.0
        se = float(r.std(ddof=1) / math.sqrt(len(r))) / scale if t > 0 and len(r) > 1 else 0.0
        extra = {"mean_abs": float(r.mean())}
        if graph:
            radius = int(np.max(np.abs(disp))) if len(disp) else 0
            radius = 2 * radius + 2
            dist, box = distance_field(env, x, radius)
            idx = tuple((Y - np.array([lo for lo, _ in box])).T)
            g = dist[idx]
            finite = np.isfinite(g)
            extra["graph_mean"] = float(g[finite].mean()) / scale if t > 0 and finite.any() else 0.0
            extra["graph_unresolved"] = int(np.count_nonzero(~finite))
        rows.append(ProfileRow(t, mean, mean - z * se, mean + z * se, extra=extra))
    return rows


def mann_kendall(values) -> tuple[float, float]:
    """One-sided Mann-Kendall test for an upward trend: (tau, p-value)."""
    values = np.asarray(values, dtype=np.float64)
    res = sps.kendalltau(np.arange(len(values)), values, alternative="greater")
    return float(res.statistic), float(res.pvalue)


# -- chemical-distance decay ----------------------------------------------

@dataclass
class DecayFit:
    slope: float
    intercept: float
    stderr: float
    t_stat: float
    c6: float
    c7: float
    cells: int


def weighted_log_fit(norms, props: list[Proportion], d: int) -> DecayFit:
    """Weighted least squares of log frequency on |x| over uncensored cells.

    Weights are inverse delta-method variances of log p-hat; the slope
    error is the larger of the model-based and residual-scaled values.
    """
    norms = np.asarray(norms, dtype=np.float64)
    keep = np.array([not p.censored for p in props])
    cells = int(keep.sum())
    if cells < 2 or len(np.unique(norms[keep])) < 2:
        return DecayFit(math.nan, math.nan, math.nan, math.nan, math.nan, math.nan, cells)
    xs = norms[keep]
    est = np.array([p.estimate for p, k in zip(props, keep) if k])
    hits = np.array([p.hits for p, k in zip(props, keep) if k], dtype=np.float64)
    ys = np.log(est)
    w = hits / np.maximum(1.0 - est, 1e-12)
    xb = np.sum(w * xs) / w.sum()
    yb = np.sum(w * ys) / w.sum()
    sxx = np.sum(w * (xs - xb) ** 2)
    slope = float(np.sum(w * (xs - xb) * (ys - yb)) / sxx)
    intercept = float(yb - slope * xb)
    se = 1.0 / math.sqrt(sxx)
    if cells > 2:
        chi2 = float(np.sum(w * (ys - intercept - slope * xs) ** 2) / (cells - 2))
        se *= math.sqrt(max(1.0, chi2))
    c6 = -slope
    c7 = 2 * (d + 2) / c6 if c6 > 0 else math.inf
    return DecayFit(slope, intercept, se, slope / se, c6, c7, cells)


@dataclass
class DecayReport:
    sites: list[tuple]
    norms: list[float]
    props: list[Proportion]
    fit: DecayFit


def distance_comparison(spec: ProcessSpec, rho: float, sites, samples: int, seed,
                        chunk: int = 20_000) -> DecayReport:
    """Frequency of {0, x occupied, d(0, x) <= rho |x|} over fresh
    environments (site k uses environment indices disjoint from the others),
    with an exponential fit in |x|."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    sites = [tuple(int(c) for c in s) for s in sites]
    norms, props = [], []
    for k, x in enumerate(sites):
        hits = 0
        for lo in range(0, samples, chunk):
            idx = np.arange(lo, min(samples, lo + chunk), dtype=np.int64) + k * samples
            hits += int(np.count_nonzero(batch_short_distance(spec, seed, idx, x, rho)))
        norms.append(float(np.linalg.norm(x)))
        props.append(Proportion.from_counts(hits, samples))
    return DecayReport(sites, norms, props, weighted_log_fit(norms, props, spec.dimension))


# -- gap moments -----------------------------------------------------------

@dataclass
class MomentReport:
    power: float
    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    analytic: float | None
    samples: int

    @property
    def z(self) -> float:
        if self.analytic is None:
            return math.nan
        if self.stderr == 0:
            return 0.0 if math.isclose(self.mean, self.analytic, rel_tol=1e-12) else math.inf
        return abs(self.mean - self.analytic) / self.stderr


def gamma_moment_check(spec: ProcessSpec, e: int, eps: float, samples: int, seed,
                       chunk: int = 100_000) -> MomentReport:
    """E[gamma_e^{d+eps}] for direction index ``e``.

    Random kinds sample gamma at the origin of fresh environments.  Periodic
    and explicit kinds are deterministic: the moment is averaged exactly over
    the occupied sites of one period.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    d = spec.dimension
    s = d + eps
    if not spec.is_random:
        env = Environment(spec, 0)
        sites = np.argwhere(np.asarray(spec.pattern).reshape(spec.periods) == 1)
        if spec.kind == "explicit":
            sites = sites - np.asarray(spec.origin)
        g = env.gaps(sites, np.full(len(sites), e)).astype(np.float64)
        vals = g**s
        m = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        return MomentReport(s, m, se, m - 3 * se, m + 3 * se, None, len(vals))
    parts = []
    origin = np.zeros(d, dtype=np.int64)
    for lo in range(0, samples, chunk):
        idx = np.arange(lo, min(samples, lo + chunk), dtype=np.int64)
        masters, attempts = ensemble_masters(spec, seed, idx)
        g = batch_gaps(spec, masters, attempts, np.broadcast_to(origin, (len(idx), d)),
                       np.full(len(idx), e))
        parts.append(g.astype(np.float64) ** s)
    total = np.concatenate(parts)
    m = float(total.mean())
    se = float(total.std(ddof=1) / math.sqrt(len(total)))
    z = sps.norm.ppf(0.975)
    analytic = None
    if spec.kind == "bernoulli":
        from .oracle import geometric_moment
        analytic = geometric_moment(spec.p, s)
    return MomentReport(s, m, se, m - z * se, m + z * se, analytic, len(total))


def unit(d: int, i: int = 0) -> np.ndarray:
    return directions(d)[2 * i].astype(np.float64)
