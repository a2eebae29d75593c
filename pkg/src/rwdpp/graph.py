"""The nearest-neighbour graph on occupied sites and its combinatorial events.

Each occupied site ``x`` is joined to the first occupied site along each of
the ``2d`` signed axis directions.  Distances are hop counts in that graph.
Breadth-first search always expands directions in the order
``+e_1, -e_1, ..., +e_d, -e_d`` so reported shortest paths are unique.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .env import (
    Environment,
    ProcessSpec,
    as_box,
    batch_windows,
    box_coords,
    directions,
    ensemble_environment,
    line_gap_arrays,
)
from .estimates import Proportion

ANIMAL_CAP = 12


@dataclass(frozen=True)
class Unreached:
    """Negative result of a distance query; falsy."""

    reason: str

    def __bool__(self) -> bool:
        return False


UNREACHED = Unreached("hop_cap")
DISCONNECTED = Unreached("disconnected")


@dataclass(frozen=True)
class EventParams:
    L: int = 1
    theta: float = 1.0
    lam: float = 1.0
    delta: float = 0.25
    delta1: float = 0.1
    delta2: float = 0.1
    delta3: float = 0.1
    ell: int = 1
    rho: float = 0.1

    def __post_init__(self):
        for name in ("delta", "delta1", "delta2", "delta3"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        for name in ("theta", "lam", "rho"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.L < 1 or self.ell < 1:
            raise ValueError("L and ell must be positive integers")

    @classmethod
    def default_delta(cls, d: int, **kw) -> "EventParams":
        return cls(delta=1.0 / 2**d, **kw)


class NeighborMap:
    """Jump lengths of an environment, memoized per (site, direction)."""

    def __init__(self, env: Environment):
        self.env = env
        self.d = env.d
        self.dirs = directions(env.d)
        self.cache: dict[tuple, int] = {}

    def gamma(self, x, k: int) -> int:
        key = (tuple(int(c) for c in x), k)
        g = self.cache.get(key)
        if g is None:
            g = self.env.gamma(key[0], k)
            self.cache[key] = g
        return g

    def neighbors(self, x) -> list[tuple[int, ...]]:
        """The 2d neighbours of an occupied site, in direction order."""
        x = tuple(int(c) for c in x)
        if not self.env.occupancy(x):
            raise ValueError(f"site {x} is not occupied")
        return [tuple(int(v) for v in np.add(x, self.gamma(x, k) * self.dirs[k])) for k in range(2 * self.d)]

    def neighbor_array(self, sites: np.ndarray) -> np.ndarray:
        """Neighbours of many sites at once, shape ``(n, 2d, d)``."""
        sites = np.asarray(sites, dtype=np.int64).reshape(-1, self.d)
        n, nd = len(sites), 2 * self.d
        rep = np.repeat(sites, nd, axis=0)
        ks = np.tile(np.arange(nd), n)
        g = self.env.gaps(rep, ks)
        return (rep + g[:, None] * self.dirs[ks]).reshape(n, nd, self.d)


def neighbors(nm: NeighborMap, x) -> list[tuple[int, ...]]:
    return nm.neighbors(x)


def _in_box(sites: np.ndarray, box) -> np.ndarray:
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return np.all((sites >= lo) & (sites <= hi), axis=-1)


def shortest_path(nm: NeighborMap, x, y, confinement=None, hop_cap: int = 10_000):
    """Deterministic shortest path from ``x`` to ``y`` as a list of sites.

    Returns :data:`UNREACHED` when ``y`` is not found within ``hop_cap`` hops
    and :data:`DISCONNECTED` when the (confined) component of ``x`` is
    exhausted without meeting ``y``.
    """
    d = nm.d
    x = tuple(int(c) for c in x)
    y = tuple(int(c) for c in y)
    for s in (x, y):
        if not nm.env.occupancy(s):
            raise ValueError(f"site {s} is not occupied")
    box = None if confinement is None else as_box(confinement, d)
    if box is not None and not (_in_box(np.array(x), box) and _in_box(np.array(y), box)):
        return DISCONNECTED
    parent: dict[tuple, tuple | None] = {x: None}
    frontier = [x]
    hops = 0
    while y not in parent:
        if not frontier:
            return DISCONNECTED
        if hops >= hop_cap:
            return UNREACHED
        nbrs = nm.neighbor_array(np.array(frontier))
        ok = np.ones(nbrs.shape[:2], dtype=bool) if box is None else _in_box(nbrs, box)
        nxt = []
        for f, src in enumerate(frontier):
            for k in range(2 * d):
                if ok[f, k]:
                    key = tuple(int(c) for c in nbrs[f, k])
                    if key not in parent:
                        parent[key] = src
                        nxt.append(key)
        frontier = nxt
        hops += 1
    path = [y]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


def graph_distance(nm: NeighborMap, x, y, confinement=None, hop_cap: int = 10_000):
    """Hop distance d_omega(x, y), or an :class:`Unreached` value."""
    path = shortest_path(nm, x, y, confinement, hop_cap)
    return path if isinstance(path, Unreached) else len(path) - 1


# -- confined reachability on materialized windows ------------------------

def window_graph(occ: np.ndarray) -> sparse.csr_matrix:
    """Directed nearest-neighbour graph on a finite window (flat site index);
    jumps whose landing site lies outside the window are dropped."""
    shape = occ.shape
    flat = np.arange(occ.size).reshape(shape)
    rows, cols = [], []
    for k, g in enumerate(line_gap_arrays(occ)):
        axis, sign = divmod(k, 2)
        step = 1 if sign == 0 else -1
        src = occ & (g > 0)
        idx = np.nonzero(src)
        tgt = list(idx)
        tgt[axis] = idx[axis] + step * g[idx]
        rows.append(flat[idx])
        cols.append(flat[tuple(tgt)])
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    data = np.ones(len(rows), dtype=np.int8)
    return sparse.csr_matrix((data, (rows, cols)), shape=(occ.size, occ.size))


def reachable_mask(occ: np.ndarray, sources) -> np.ndarray:
    """Sites of a window reachable from any source index by in-window paths."""
    g = window_graph(occ)
    mask = np.zeros(occ.size, dtype=bool)
    for s in sources:
        flat = int(np.ravel_multi_index(tuple(s), occ.shape))
        if mask[flat] or not occ.ravel()[flat]:
            continue
        order = csgraph.breadth_first_order(g, flat, directed=True, return_predecessors=False)
        mask[order] = True
    return mask.reshape(occ.shape)


def distance_field(env: Environment, x, radius: int) -> tuple[np.ndarray, tuple]:
    """Hop distances from ``x`` to every site of ``x + [-radius, radius]^d``
    along paths confined to that box (``inf`` where unreachable)."""
    box = tuple((int(c) - radius, int(c) + radius) for c in x)
    occ = env.window(box)
    g = window_graph(occ)
    src = int(np.ravel_multi_index((radius,) * env.d, occ.shape))
    dist = csgraph.shortest_path(g, method="D", unweighted=True, indices=src)
    return dist.reshape(occ.shape), box


def _slab(env: Environment, free_axes, fixed, half: int):
    """Occupancy on the section where ``free_axes`` range over [-half, half]
    and every other coordinate equals ``fixed``."""
    d = env.d
    box = []
    for a in range(d):
        box.append((-half, half) if a in free_axes else (int(fixed[a]), int(fixed[a])))
    occ = env.window(box)
    squeeze = tuple(a for a in range(d) if a not in free_axes)
    return occ.squeeze(axis=squeeze) if squeeze else occ


def _slab_connects(env: Environment, x, free_axes, half: int) -> bool:
    """Every occupied site of the slab through ``x`` is reachable from ``x``
    by a path whose sites after ``x`` stay in the slab."""
    free_axes = tuple(free_axes)
    occ = _slab(env, free_axes, x, half)
    local = np.array([int(x[a]) + half for a in free_axes])
    if np.all((local >= 0) & (local <= 2 * half)):
        sources = [tuple(local)]
    else:
        # x outside the slab box: its first hops inside the slab seed the search
        nm = NeighborMap(env)
        sources = []
        for k in range(2 * env.d):
            axis = k // 2
            if axis not in free_axes:
                continue
            z = np.add(x, nm.gamma(x, k) * nm.dirs[k])
            loc = np.array([int(z[a]) + half for a in free_axes])
            if np.all((loc >= 0) & (loc <= 2 * half)):
                sources.append(tuple(loc))
    mask = reachable_mask(occ, sources)
    return bool(np.all(mask[occ]))


def event_E(env: Environment, n: int, theta: float, lam: float = 1.0) -> bool:
    """Every occupied site of [-n, n]^d is reached from the origin by a path
    confined to |z|_inf <= lam * n**theta."""
    if not env.occupancy((0,) * env.d):
        raise ValueError("origin is not occupied")
    radius = math.floor(lam * float(n) ** theta + 1e-12)
    if radius < n:
        target = env.window([(-n, n)] * env.d)
        inner = env.window([(-radius, radius)] * env.d)
        if target.sum() > inner.sum():
            return False
    radius = max(radius, 0)
    occ = env.window([(-radius, radius)] * env.d)
    mask = reachable_mask(occ, [(radius,) * env.d])
    lo, hi = radius - min(n, radius), radius + min(n, radius)
    core = tuple(slice(lo, hi + 1) for _ in range(env.d))
    return bool(np.all(mask[core][occ[core]]))


event_E_theta_n = event_E


def event_F(env: Environment, i: int, n: int, x) -> bool:
    """F_{i,n}(x): the section [-n,n]^i x {(x_{i+1},...,x_d)} is connected to x."""
    if not 2 <= i <= env.d:
        raise ValueError(f"need 2 <= i <= d, got i={i}")
    return _slab_connects(env, x, range(i), n)


def event_G(env: Environment, i: int, n: int, x) -> bool:
    """G_{i,n}(x): as F with the section {x_1} x [-n,n]^i x {(x_{i+2},...)}."""
    if not 2 <= i <= env.d - 1:
        raise ValueError(f"need 2 <= i <= d - 1, got i={i}")
    return _slab_connects(env, x, range(1, i + 1), n)


def event_H(env: Environment, i: int, n: int, z) -> bool:
    """H_{i,n}(z): each column k e_1, |k| <= n, of the box
    [-n,n]^i x {z_{i+1}} carries an occupied site."""
    d = env.d
    if not 2 <= i <= d:
        raise ValueError(f"need 2 <= i <= d, got i={i}")
    box = [(-n, n)] * i
    if i < d:
        box.append((int(z[i]), int(z[i])))
    box += [(0, 0)] * (d - len(box))
    occ = env.window(box)
    other = tuple(range(1, d))
    return bool(np.all(np.any(occ, axis=other)))


def _check_d2(env):
    if env.d != 2:
        raise ValueError("Lambda events are defined for d = 2")


def lambda0_column(env: Environment, u: int, L: int, n: int) -> np.ndarray:
    """Indicators of Lambda_0(u, L) shifted by i e_1 for i = -n..n."""
    occ = env.window([(-n, n), (u - L, u - 1)])
    return np.any(occ, axis=1)


def event_Lambda(env: Environment, which: int, u: int, delta: float = 0.25, L: int = 1,
                 n: int = 1, ell: int = 1) -> bool:
    _check_d2(env)
    if which == 0:
        return bool(env.window([(0, 0), (u - L, u - 1)]).any())
    if which == 1:
        return bool(lambda0_column(env, u, L, n).mean() > 1 - delta)
    if which == 2:
        base = env.window([(0, n), (0, 0)])[:, 0]
        for j in range(ell, L + 1):
            col = env.window([(0, n), (u - j, u - j)])[:, 0]
            if not np.any(base & col):
                return False
        for m in range(ell):
            a = env.window([(0, n), (u - m, u - m)])[:, 0]
            b = env.window([(0, n), (u - m - ell, u - m - ell)])[:, 0]
            if not np.any(a & b):
                return False
        return True
    raise ValueError(f"which must be 0, 1 or 2, got {which}")


def is_blocked(env: Environment, x, L: int) -> bool:
    """Every axis-parallel line through x + [-L, L)^d meets an occupied site."""
    if L < 1:
        raise ValueError("L must be >= 1")
    box = [(int(c) - L, int(c) + L - 1) for c in x]
    return box_is_blocked(env.window(box))


def box_is_blocked(occ: np.ndarray) -> bool:
    return all(bool(np.all(np.any(occ, axis=a))) for a in range(occ.ndim))


def blocked_batch(occ: np.ndarray) -> np.ndarray:
    """Blocked indicator for a stack of boxes, shape ``(samples, *box)``."""
    out = np.ones(occ.shape[0], dtype=bool)
    for a in range(1, occ.ndim):
        lines = np.any(occ, axis=a).reshape(occ.shape[0], -1)
        out &= np.all(lines, axis=1)
    return out


def estimate_p_L(spec: ProcessSpec, L: int, samples: int, seed, chunk: int = 20_000) -> Proportion:
    """Monte Carlo estimate of p_L = Q(B_L(0) is unblocked)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    box = [(-L, L - 1)] * spec.dimension
    hits = 0
    per = max(1, min(chunk, 5_000_000 // (2 * L) ** spec.dimension))
    for start in range(0, samples, per):
        idx = np.arange(start, min(samples, start + per))
        occ = batch_windows(spec, seed, idx, box)
        hits += int(np.count_nonzero(~blocked_batch(occ)))
    return Proportion.from_counts(hits, samples)


def count_lattice_animals(d: int, n: int) -> int:
    """Number of connected n-site subsets of Z^d containing the origin.

    Fixed animals are enumerated once each (Redelmeier's method) and every
    one of them has n placements covering the origin.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > ANIMAL_CAP:
        raise ValueError(f"n = {n} exceeds the enumeration cap {ANIMAL_CAP}")
    return n * fixed_animal_counts(d, n)[n]


def fixed_animal_counts(d: int, n_max: int) -> list[int]:
    """Counts of fixed (translation classes of) animals of sizes 0..n_max."""
    counts = [0] * (n_max + 1)
    units = [tuple(int(v) for v in row) for row in directions(d)]
    origin = (0,) * d

    def allowed(c):
        # half-space ordered by the last coordinate first
        for v in reversed(c):
            if v != 0:
                return v > 0
        return True

    seen = {origin}

    def grow(untried: list, size: int):
        while untried:
            cell = untried.pop()
            size1 = size + 1
            counts[size1] += 1
            if size1 < n_max:
                new = []
                for u in units:
                    nb = tuple(a + b for a, b in zip(cell, u))
                    if nb not in seen and allowed(nb):
                        seen.add(nb)
                        new.append(nb)
                grow(untried + new, size1)
                seen.difference_update(new)

    grow([origin], 0)
    return counts


def compute_M_N(env: Environment, search_cap: int = 256) -> dict:
    """Empirical M(omega) and N(omega) up to ``search_cap``.

    ``M`` is the smallest n0 >= 1 such that every occupied x with
    |x|_inf <= n has all 2d jump lengths <= n, for all n0 <= n <= cap.
    ``N = M + max gamma_e(T_x omega)`` over |x|_inf <= M.  ``valid`` is False
    when the condition fails at the cap itself.
    """
    d = env.d
    if not env.occupancy((0,) * d):
        raise ValueError("origin is not occupied")
    env.prepare(search_cap)
    coords = box_coords([(-search_cap, search_cap)] * d).reshape(-1, d)
    radius = np.max(np.abs(coords), axis=1)
    occ = env.occupancy_array(coords)
    nd = 2 * d
    g = env.gaps(np.repeat(coords, nd, axis=0), np.tile(np.arange(nd), len(coords))).reshape(-1, nd)
    gmax = g.max(axis=1)
    # worst jump among occupied sites at each sup-radius, then running max
    worst = np.zeros(search_cap + 1, dtype=np.int64)
    np.maximum.at(worst, radius[occ], gmax[occ])
    running = np.maximum.accumulate(worst)
    ns = np.arange(search_cap + 1)
    bad = np.flatnonzero((running > ns) & (ns >= 1))
    valid = not (len(bad) and bad[-1] == search_cap)
    M = int(bad[-1]) + 1 if len(bad) else 1
    M = min(M, search_cap)
    near = radius <= M
    N = M + int(gmax[near].max())
    return {"M": M, "N": N, "cap": search_cap, "valid": bool(valid)}


# -- Monte Carlo over environment ensembles -------------------------------

def estimate_event(spec: ProcessSpec, predicate, samples: int, seed, condition_on_origin: bool = True,
                   start: int = 0) -> Proportion:
    """Frequency of ``predicate(env)`` over independent ensemble environments."""
    hits = 0
    for i in range(start, start + samples):
        env = ensemble_environment(spec, seed, i, condition_on_origin)
        hits += bool(predicate(env))
    return Proportion.from_counts(hits, samples)


def short_distance_event(env: Environment, x, rho: float) -> bool:
    """{0, x occupied and d_omega(0, x) <= rho |x|}."""
    d = env.d
    if not (env.occupancy((0,) * d) and env.occupancy(x)):
        return False
    cap = math.floor(rho * math.dist(x, (0,) * d) + 1e-12)
    if cap < 1:
        return tuple(x) == (0,) * d
    res = graph_distance(NeighborMap(env), (0,) * d, x, hop_cap=cap)
    return not isinstance(res, Unreached)



def batch_short_distance(spec: ProcessSpec, seed, indices, x, rho: float) -> np.ndarray:
    """:func:`short_distance_event` for many unconditioned ensemble
    environments at once, by layered breadth-first search over all of them."""
    from .env import batch_gaps, batch_occupancy, ensemble_masters

    d = spec.dimension
    x = np.asarray(x, dtype=np.int64)
    masters, attempts = ensemble_masters(spec, seed, indices)
    E = len(masters)
    origin = np.zeros((E, d), dtype=np.int64)
    both = batch_occupancy(spec, masters, attempts, origin) & batch_occupancy(
        spec, masters, attempts, np.broadcast_to(x, (E, d)))
    hit = np.zeros(E, dtype=bool)
    cap = math.floor(rho * float(np.linalg.norm(x)) + 1e-12)
    if not np.any(x):
        return both
    if cap < 1:
        return hit
    dirs = directions(d)
    nd = 2 * d
    env_idx = np.flatnonzero(both)
    front_env = env_idx
    front = np.zeros((len(env_idx), d), dtype=np.int64)
    # (env, site) keys already discovered, as rows of a structured set
    width = d + 1
    seen = np.concatenate([front_env[:, None], front], axis=1)
    for _ in range(cap):
        if not len(front_env):
            break
        rep_env = np.repeat(front_env, nd)
        rep = np.repeat(front, nd, axis=0)
        ks = np.tile(np.arange(nd), len(front_env))
        g = batch_gaps(spec, masters[rep_env], attempts[rep_env], rep, ks)
        nxt = rep + g[:, None] * dirs[ks]
        found = np.all(nxt == x, axis=1)
        hit[np.unique(rep_env[found])] = True
        keep = ~hit[rep_env]
        rows = np.concatenate([rep_env[keep][:, None], nxt[keep]], axis=1)
        rows = np.unique(rows, axis=0)
        if len(seen):
            allrows = np.concatenate([seen, rows])
            _, first = np.unique(allrows, axis=0, return_index=True)
            fresh = np.sort(first[first >= len(seen)]) - len(seen)
            rows = rows[fresh]
        seen = np.concatenate([seen, rows]).reshape(-1, width)
        front_env, front = rows[:, 0], rows[:, 1:]
    return hit
