"""Exact small-instance computations used to anchor the Monte Carlo code.

Nothing here shares a code path with the simulators: transition operators
are assembled from the torus neighbour table, configuration probabilities
by full enumeration, distances by exhaustive path search.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import sparse, stats

from .corrector import PeriodicEnvironment
from .graph import UNREACHED, Unreached

ENUMERATION_CAP = 24


class StateCapError(RuntimeError):
    """Exhaustive search exceeded its state budget."""


@dataclass
class ExactChain:
    """Transition operator P = A / (2d) on the occupied torus sites.

    ``counts`` is the integer multigraph adjacency (each row sums to 2d), so
    probabilities are exact rationals ``counts / denominator``.
    """

    penv: PeriodicEnvironment
    counts: sparse.csr_matrix
    denominator: int

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def P(self) -> sparse.csr_matrix:
        return (self.counts / self.denominator).tocsr()

    def row(self, i: int) -> dict[int, Fraction]:
        lo, hi = self.counts.indptr[i], self.counts.indptr[i + 1]
        return {int(j): Fraction(int(c), self.denominator)
                for j, c in zip(self.counts.indices[lo:hi], self.counts.data[lo:hi])}

    def index(self, x) -> int:
        i = int(self.penv.site_index(np.asarray(x, dtype=np.int64)))
        if i < 0:
            raise ValueError(f"site {x} is not occupied")
        return i


def build_chain(penv: PeriodicEnvironment) -> ExactChain:
    nd = 2 * penv.d
    rows = np.repeat(np.arange(penv.n), nd)
    counts = sparse.csr_matrix((np.ones(penv.n * nd, dtype=np.int64), (rows, penv.nbr.ravel())),
                               shape=(penv.n, penv.n))
    counts.sum_duplicates()
    return ExactChain(penv, counts, nd)


def _kahan_add(total: np.ndarray, comp: np.ndarray, term: np.ndarray) -> None:
    y = term - comp
    t = total + y
    comp[:] = (t - total) - y
    total[:] = t


def exact_distribution(chain: ExactChain, x0, n: int, exact: bool = False):
    """Law of X_n from x0: a float vector, or exact Fractions with ``exact``."""
    i = chain.index(x0)
    if exact:
        v = [0] * chain.n
        v[i] = 1
        rows = [chain.row(r) for r in range(chain.n)]
        for _ in range(n):
            w = [0] * chain.n
            for r, mass in enumerate(v):
                if mass:
                    for j, pr in rows[r].items():
                        w[j] += mass * pr.numerator
            v = w
        scale = chain.denominator ** n
        return [Fraction(m, scale) for m in v]
    v = np.zeros(chain.n)
    v[i] = 1.0
    PT = chain.P.T.tocsr()
    for _ in range(n):
        v = PT @ v
    return v


def exact_ct_distribution(chain: ExactChain, x0, t: float, tail_tol: float = 1e-12) -> np.ndarray:
    """Law of Y_t = X_{N_t}: sum_n Poisson(t; n) delta_x0 P^n, truncated
    once the remaining Poisson mass is below ``tail_tol``."""
    i = chain.index(x0)
    v = np.zeros(chain.n)
    v[i] = 1.0
    total = np.zeros(chain.n)
    comp = np.zeros(chain.n)
    if t == 0:
        return v
    PT = chain.P.T.tocsr()
    n = 0
    while True:
        w = stats.poisson.pmf(n, t)
        if w > 0:
            _kahan_add(total, comp, w * v)
        if stats.poisson.sf(n, t) < tail_tol:
            break
        v = PT @ v
        n += 1
    return total


def tv_distance(p, q) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p, dtype=np.float64) - np.asarray(q, dtype=np.float64))))


def enumerate_probability(shape, p, predicate) -> Fraction:
    """Exact Q(predicate) for i.i.d. Bernoulli(p) occupancy on a window.

    ``predicate`` receives a boolean array of the given shape.
    """
    shape = tuple(int(s) for s in shape)
    vol = int(np.prod(shape)) if shape else 1
    if vol > ENUMERATION_CAP:
        raise ValueError(f"window of {vol} sites exceeds the enumeration cap {ENUMERATION_CAP}")
    p = Fraction(p) if not isinstance(p, Fraction) else p
    by_weight = [0] * (vol + 1)
    for bits in itertools.product((False, True), repeat=vol):
        if predicate(np.array(bits, dtype=bool).reshape(shape)):
            by_weight[sum(bits)] += 1
    return sum((c * p**k * (1 - p) ** (vol - k) for k, c in enumerate(by_weight) if c), Fraction(0))


def _window_neighbors(window: np.ndarray, x):
    d = window.ndim
    out = []
    for axis in range(d):
        for sign in (1, -1):
            y = list(x)
            while True:
                y[axis] += sign
                if not 0 <= y[axis] < window.shape[axis]:
                    break
                if window[tuple(y)]:
                    out.append(tuple(y))
                    break
    return out


def brute_force_paths(window, x, y, max_len: int, state_cap: int = 10_000):
    """Fewest hops from x to y over self-avoiding in-window paths, found by
    iterative-deepening depth-first search; :data:`UNREACHED` if no path of
    length <= ``max_len`` exists."""
    window = np.asarray(window, dtype=bool)
    x, y = tuple(x), tuple(y)
    if not (window[x] and window[y]):
        raise ValueError("endpoints must be occupied")
    if x == y:
        return 0
    states = [0]

    def dfs(node, depth, limit, on_path):
        states[0] += 1
        if states[0] > state_cap:
            raise StateCapError(f"more than {state_cap} path prefixes explored")
        if node == y:
            return True
        if depth == limit:
            return False
        for nb in _window_neighbors(window, node):
            if nb not in on_path:
                on_path.add(nb)
                if dfs(nb, depth + 1, limit, on_path):
                    return True
                on_path.discard(nb)
        return False

    for limit in range(1, max_len + 1):
        if dfs(x, 0, limit, {x}):
            return limit
    return UNREACHED


def animals_brute_force(d: int, n: int) -> int:
    """Connected n-subsets of Z^d containing the origin, by breadth-first
    growth over explicit sets (slow; small n only)."""
    origin = (0,) * d
    units = []
    for axis in range(d):
        for s in (1, -1):
            u = [0] * d
            u[axis] = s
            units.append(tuple(u))
    layer = {frozenset([origin])}
    for _ in range(n - 1):
        nxt = set()
        for cells in layer:
            for c in cells:
                for u in units:
                    nb = tuple(a + b for a, b in zip(c, u))
                    if nb not in cells:
                        nxt.add(cells | {nb})
        layer = nxt
    return len(layer)


def geometric_moment(p: float, s: float, tol: float = 1e-15) -> float:
    """E[G^s] for G ~ Geometric(p) on {1, 2, ...}, by direct series."""
    total, k, q = 0.0, 1, 1.0 - p
    while True:
        term = k**s * q ** (k - 1) * p
        total += term
        if k > 10 and term < tol * total:
            return total
        k += 1


def is_unreached(value) -> bool:
    return isinstance(value, Unreached)
