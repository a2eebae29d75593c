"""Quenched simple random walk on the occupied sites of an environment.

From an occupied site the walk jumps to one of its 2d nearest occupied
sites along the axes, each with probability 1/(2d).  Walk ``w`` of seed ``s``
reads its k-th step variate from the counter-based stream
``(s, walk, w)``; the Poisson clock of the continuous-time version reads a
separate ``(s, clock, w)`` stream, so the embedded jump chain of
:func:`simulate_ct` is bit-identical to :func:`simulate`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import Environment, directions
from .parallel import map_chunks
from .seeding import TAG_CLOCK, TAG_WALK, as_seed, derive, derive_array, stream_uniforms


def walk_key(seed, walk_id: int) -> int:
    return derive(as_seed(seed).master, TAG_WALK, walk_id)


def clock_key(seed, walk_id: int) -> int:
    return derive(as_seed(seed).master, TAG_CLOCK, walk_id)


def _keys(seed, tag, walk_ids) -> np.ndarray:
    walk_ids = np.asarray(walk_ids, dtype=np.int64)
    base = np.uint64(derive(as_seed(seed).master, tag))
    return derive_array(base, walk_ids)


class Stream:
    """Sequential view of one counter-based uniform stream."""

    def __init__(self, key: int, counter: int = 0):
        self.key = np.uint64(key)
        self.counter = counter

    def next(self) -> float:
        u = float(stream_uniforms(self.key, self.counter))
        self.counter += 1
        return u


@dataclass
class Trajectory:
    start: tuple
    positions: np.ndarray
    event_times: np.ndarray | None = None
    horizon: float | None = None
    walk_id: int = 0
    walk_seed: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def n_steps(self) -> int:
        return len(self.positions) - 1

    def position_at(self, t: float) -> np.ndarray:
        """Continuous-time position Y_t."""
        if self.event_times is None:
            raise ValueError("trajectory has no event times")
        k = int(np.searchsorted(self.event_times, t, side="right"))
        return self.positions[k]


@dataclass
class ExitClock:
    n: float
    tau_n: float
    index: int = -1


def _check_occupied(env: Environment, x0) -> tuple:
    x0 = tuple(int(c) for c in x0)
    if len(x0) != env.d:
        raise ValueError(f"start {x0} is not a site of Z^{env.d}")
    if not env.occupancy(x0):
        raise ValueError(f"start site {x0} is not occupied")
    return x0


def step(env: Environment, x, stream) -> tuple:
    """One transition from occupied ``x``; consumes exactly one uniform.

    ``stream`` is a :class:`Stream` or a uniform variate in [0, 1).
    """
    x = _check_occupied(env, x)
    u = stream.next() if isinstance(stream, Stream) else float(stream)
    nd = 2 * env.d
    k = min(int(u * nd), nd - 1)
    g = env.gamma(x, k)
    return tuple(int(c) for c in np.add(x, g * directions(env.d)[k]))


def _choose(u: np.ndarray, nd: int) -> np.ndarray:
    return np.minimum((u * nd).astype(np.int64), nd - 1)


def _prepare(env: Environment, n_steps: int) -> None:
    if env.spec.kind not in ("bernoulli", "block_factor"):
        return
    rho = max(env.spec.density, 1e-3)
    spread = math.sqrt(max(n_steps, 1) * 2.0 / rho**2)
    radius = int(5 * spread) + 32
    limit = {1: 200_000, 2: 1500, 3: 120}.get(env.d, 40)
    radius = min(radius, limit)
    try:
        env.prepare(radius)
    except Exception:
        pass


def _run(env: Environment, x0, n_steps: int, keys: np.ndarray, record_steps=None, observer=None):
    """Advance one walker per key for ``n_steps`` steps from ``x0``.

    ``record_steps`` is a sorted array of step indices whose positions are
    returned as an array ``(len(record_steps), W, d)``; ``observer(k, pos)``
    is called after every step k (and once with k = 0 before moving).
    """
    d = env.d
    nd = 2 * d
    dirs = directions(d)
    pos = np.tile(np.asarray(x0, dtype=np.int64), (len(keys), 1))
    rec = None
    if record_steps is not None:
        record_steps = np.asarray(record_steps, dtype=np.int64)
        rec = np.empty((len(record_steps), len(keys), d), dtype=np.int64)
        ri = 0
        while ri < len(record_steps) and record_steps[ri] == 0:
            rec[ri] = pos
            ri += 1
    if observer is not None:
        observer(0, pos)
    for k in range(n_steps):
        di = _choose(stream_uniforms(keys, k), nd)
        g = env.gaps(pos, di)
        pos = pos + g[:, None] * dirs[di]
        if rec is not None:
            while ri < len(record_steps) and record_steps[ri] == k + 1:
                rec[ri] = pos
                ri += 1
        if observer is not None:
            observer(k + 1, pos)
    return pos, rec


def simulate(env: Environment, x0, n_steps: int, seed, walk_id: int = 0) -> Trajectory:
    """Discrete-time quenched walk X_0 = x0, ..., X_n."""
    x0 = _check_occupied(env, x0)
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    keys = _keys(seed, TAG_WALK, [walk_id])
    _, rec = _run(env, x0, n_steps, keys, record_steps=np.arange(n_steps + 1))
    return Trajectory(start=x0, positions=rec[:, 0, :], walk_id=walk_id, walk_seed=int(keys[0]))


def jump_times(seed, walk_id: int, horizon: float) -> np.ndarray:
    """Poisson(1) event times in (0, horizon] of walk ``walk_id``."""
    key = np.uint64(clock_key(seed, walk_id))
    times = []
    t, j = 0.0, 0
    chunk = int(horizon + 6 * math.sqrt(horizon) + 16)
    while True:
        u = stream_uniforms(key, np.arange(j, j + chunk))
        s = t + np.cumsum(-np.log1p(-u))
        inside = s[s <= horizon]
        times.append(inside)
        if len(inside) < chunk:
            break
        t = float(s[-1])
        j += chunk
    return np.concatenate(times)


def simulate_ct(env: Environment, x0, horizon: float, seed, walk_id: int = 0) -> Trajectory:
    """Continuous-time walk Y_t = X_{N_t} on [0, horizon]."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    times = jump_times(seed, walk_id, horizon)
    traj = simulate(env, x0, len(times), seed, walk_id)
    traj.event_times = times
    traj.horizon = float(horizon)
    return traj


def interpolate(traj: Trajectory, n: int, t: float) -> np.ndarray:
    """Rescaled linearly interpolated path B_n(t)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    tn = t * n
    k = math.floor(tn)
    if k + 1 > len(traj.positions) - 1 and not (k == len(traj.positions) - 1 and tn == k):
        raise ValueError(f"trajectory of {traj.n_steps} steps too short for t={t}, n={n}")
    x = traj.positions[k].astype(np.float64)
    if tn == k:
        return x / math.sqrt(n)
    nxt = traj.positions[k + 1].astype(np.float64)
    return (x + (tn - k) * (nxt - x)) / math.sqrt(n)


def exit_times(traj: Trajectory, radii) -> list[ExitClock]:
    """tau_n = first event time with |Y_t - Y_0| >= n (inf within horizon)."""
    if traj.event_times is None:
        raise ValueError("exit times need a continuous-time trajectory")
    disp = np.linalg.norm(traj.positions - traj.positions[0], axis=1)
    times = np.concatenate([[0.0], traj.event_times])
    out = []
    for n in radii:
        hit = np.flatnonzero(disp >= n)
        if len(hit):
            out.append(ExitClock(n, float(times[hit[0]]), int(hit[0])))
        else:
            out.append(ExitClock(n, math.inf, -1))
    return out


def stopped_sup_displacement(traj: Trajectory, radii) -> np.ndarray:
    """max_t |Y_{t ^ tau_n} - Y_0|_inf for each radius n."""
    disp = np.max(np.abs(traj.positions - traj.positions[0]), axis=1)
    out = []
    for clock in exit_times(traj, radii):
        last = clock.index if clock.index >= 0 else len(disp) - 1
        out.append(int(disp[: last + 1].max()))
    return np.asarray(out)


# -- ensembles --------------------------------------------------------------

def _final_chunk(args):
    env, x0, n_steps, seed, ids, record = args
    _prepare(env, n_steps)
    keys = _keys(seed, TAG_WALK, ids)
    pos, rec = _run(env, x0, n_steps, keys, record_steps=record)
    return rec if record is not None else pos


def ensemble_positions(env: Environment, x0, n_steps: int, n_walks: int, seed, record=None,
                       first_walk: int = 0, jobs: int = 1, chunk: int = 20_000) -> np.ndarray:
    """X_n of ``n_walks`` independent quenched walks (walk ids
    ``first_walk, first_walk + 1, ...``), shape ``(n_walks, d)``; with
    ``record`` (sorted step indices) returns ``(len(record), n_walks, d)``."""
    x0 = _check_occupied(env, x0)
    ids = np.arange(first_walk, first_walk + n_walks, dtype=np.int64)
    pieces = [ids[i:i + chunk] for i in range(0, len(ids), chunk)] or [ids]
    if record is not None:
        record = np.asarray(sorted(set(int(r) for r in record)), dtype=np.int64)
    parts = map_chunks(_final_chunk, [(env, x0, n_steps, seed, p, record) for p in pieces], jobs)
    return np.concatenate(parts, axis=1 if record is not None else 0)


def _ct_chunk(args):
    env, x0, times, seed, ids = args
    times = np.asarray(times, dtype=np.float64)
    horizon = float(times.max())
    counts = np.stack([np.searchsorted(jump_times(seed, int(w), horizon), times, side="right") for w in ids])
    n_max = int(counts.max()) if counts.size else 0
    _prepare(env, n_max)
    keys = _keys(seed, TAG_WALK, ids)
    W, T = counts.shape
    out = np.empty((T, W, env.d), dtype=np.int64)
    flat = counts.ravel()
    order = np.argsort(flat, kind="stable")
    sorted_counts = flat[order]
    bounds = np.searchsorted(sorted_counts, np.arange(n_max + 2))

    def observe(k, pos):
        sel = order[bounds[k]:bounds[k + 1]]
        if len(sel):
            w, j = np.divmod(sel, T)
            out[j, w] = pos[w]

    _run(env, x0, n_max, keys, observer=observe)
    return out


def ensemble_ct_positions(env: Environment, x0, times, n_walks: int, seed, first_walk: int = 0,
                          jobs: int = 1, chunk: int = 2_000) -> np.ndarray:
    """Y_t at each of ``times`` for independent continuous-time walks,
    shape ``(len(times), n_walks, d)``."""
    x0 = _check_occupied(env, x0)
    ids = np.arange(first_walk, first_walk + n_walks, dtype=np.int64)
    pieces = [ids[i:i + chunk] for i in range(0, len(ids), chunk)]
    parts = map_chunks(_ct_chunk, [(env, x0, list(times), seed, p) for p in pieces], jobs)
    return np.concatenate(parts, axis=1)


def _exit_chunk(args):
    env, x0, horizon, seed, ids, radii = args
    radii = np.asarray(radii, dtype=np.float64)
    counts = np.array([len(jump_times(seed, int(w), horizon)) for w in ids])
    n_max = int(counts.max()) if len(counts) else 0
    _prepare(env, n_max)
    keys = _keys(seed, TAG_WALK, ids)
    origin = np.asarray(x0, dtype=np.int64)
    W, R = len(ids), len(radii)
    stopped = np.zeros((W, R), dtype=bool)
    sup = np.zeros((W, R), dtype=np.int64)
    exited = np.zeros((W, R), dtype=bool)

    def observe(k, pos):
        live = (k <= counts)[:, None] & ~stopped
        disp = pos - origin
        inf = np.max(np.abs(disp), axis=1)[:, None]
        eu = np.sqrt(np.sum(disp.astype(np.float64) ** 2, axis=1))[:, None]
        np.maximum(sup, np.where(live, inf, 0), out=sup)
        hit = live & (eu >= radii[None, :])
        exited[hit] = True
        stopped[hit] = True

    _run(env, x0, n_max, keys, observer=observe)
    return sup, exited


def ensemble_stopped_sup(env: Environment, x0, horizon: float, radii, n_walks: int, seed,
                         first_walk: int = 0, jobs: int = 1, chunk: int = 1_000):
    """Per walk and radius n: max over t <= horizon of |Y_{t ^ tau_n} - Y_0|_inf,
    and whether tau_n <= horizon.  Arrays of shape ``(n_walks, len(radii))``."""
    x0 = _check_occupied(env, x0)
    ids = np.arange(first_walk, first_walk + n_walks, dtype=np.int64)
    pieces = [ids[i:i + chunk] for i in range(0, len(ids), chunk)]
    parts = map_chunks(_exit_chunk, [(env, x0, float(horizon), seed, p, list(radii)) for p in pieces], jobs)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def geometric_bound_check(env: Environment, n_steps: int, N: int, n_walks: int = 1000, seed=0,
                          jobs: int = 1) -> bool:
    """Every walk from the origin obeys |X_1|_inf <= N and
    |X_k|_inf <= 2^(k-1) N for 2 <= k <= n_steps."""
    origin = (0,) * env.d
    rec = ensemble_positions(env, origin, n_steps, n_walks, seed, record=range(1, n_steps + 1), jobs=jobs)
    sup = np.max(np.abs(rec), axis=2)
    bound = N * 2.0 ** (np.arange(1, n_steps + 1) - 1)
    return bool(np.all(sup <= bound[:, None]))
