"""Random occupancy fields on Z^d and their lazy evaluation.

An environment is a 0/1 field on the lattice.  Occupied sites form the point
process on which the walk lives.  Every bit is a pure function of
``(spec, master seed, site)``: random kinds hash the site coordinates with the
master seed, periodic kinds read a pattern modulo its periods.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .seeding import (
    TAG_ENV,
    TAG_INPUT,
    TAG_RESAMPLE,
    TAG_SITE,
    Seed,
    as_seed,
    as_u64,
    derive,
    derive_array,
    mix64,
    mix64_array,
    to_uniform,
)

KINDS = ("bernoulli", "block_factor", "periodic", "explicit")
BLOCK_RULES = ("any", "all", "majority")
DEFAULT_GAMMA_CAP = 10**6
DEFAULT_WINDOW_CAP = 50_000_000


class SpecError(ValueError):
    """Invalid process specification or experiment configuration."""


class ConditioningError(RuntimeError):
    """Conditioning on an occupied origin is impossible or exceeded its cap."""


class GammaCapError(RuntimeError):
    """No occupied site found within the scan cap along a line."""


class WindowCapError(RuntimeError):
    """Requested materialization exceeds the configured volume cap."""


def directions(d: int) -> np.ndarray:
    """Signed unit vectors ordered +e_1, -e_1, ..., +e_d, -e_d."""
    out = np.zeros((2 * d, d), dtype=np.int64)
    for i in range(d):
        out[2 * i, i] = 1
        out[2 * i + 1, i] = -1
    return out


def opposite(direction: int) -> int:
    return direction ^ 1


def sup_norm(x) -> int:
    return int(np.max(np.abs(np.asarray(x)))) if len(x) else 0


def as_box(box, d: int) -> tuple[tuple[int, int], ...]:
    """Normalize an inclusive integer box given as ``[(lo, hi), ...]``."""
    box = tuple((int(lo), int(hi)) for lo, hi in box)
    if len(box) != d:
        raise ValueError(f"box has {len(box)} axes, environment has {d}")
    for lo, hi in box:
        if hi < lo:
            raise ValueError(f"empty box axis ({lo}, {hi})")
    return box


def box_coords(box) -> np.ndarray:
    """Coordinates of every site of an inclusive box, shape ``(*sides, d)``."""
    axes = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in box]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


@dataclass(frozen=True)
class ProcessSpec:
    """Law descriptor of a stationary finitely dependent occupancy field.

    ``pattern`` is stored flattened (C order) with its shape in ``periods``.
    For ``explicit`` grids, ``origin`` is the grid index of the lattice origin
    and the grid is extended periodically.
    """

    dimension: int
    kind: str
    p: float | None = None
    m: int | None = None
    rule: str = "any"
    marginal: float | None = None
    pattern: tuple[int, ...] | None = None
    periods: tuple[int, ...] | None = None
    origin: tuple[int, ...] | None = None

    def __post_init__(self):
        self.validate()

    # -- constructors -------------------------------------------------
    @classmethod
    def bernoulli(cls, d: int, p: float) -> "ProcessSpec":
        return cls(dimension=d, kind="bernoulli", p=float(p))

    @classmethod
    def block_factor(cls, d: int, m: int, rule: str = "any", marginal: float = 0.5) -> "ProcessSpec":
        return cls(dimension=d, kind="block_factor", m=int(m), rule=rule, marginal=float(marginal))

    @classmethod
    def periodic(cls, pattern) -> "ProcessSpec":
        arr = np.asarray(pattern, dtype=np.int64)
        return cls(
            dimension=arr.ndim,
            kind="periodic",
            pattern=tuple(int(v) for v in arr.ravel()),
            periods=tuple(arr.shape),
        )

    @classmethod
    def explicit(cls, grid, origin=None) -> "ProcessSpec":
        arr = np.asarray(grid, dtype=np.int64)
        if origin is None:
            origin = tuple(s // 2 for s in arr.shape)
        return cls(
            dimension=arr.ndim,
            kind="explicit",
            pattern=tuple(int(v) for v in arr.ravel()),
            periods=tuple(arr.shape),
            origin=tuple(int(o) for o in origin),
        )

    @classmethod
    def full_lattice(cls, d: int) -> "ProcessSpec":
        return cls.bernoulli(d, 1.0)

    @classmethod
    def even_sites(cls) -> "ProcessSpec":
        return cls.periodic([1, 0])

    # -- validation ----------------------------------------------------
    def validate(self) -> None:
        d = self.dimension
        if not isinstance(d, (int, np.integer)) or d < 1:
            raise SpecError(f"dimension must be a positive integer, got {d!r}")
        if self.kind not in KINDS:
            raise SpecError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "bernoulli":
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise SpecError(f"bernoulli needs 0 < p <= 1, got p={self.p!r}")
            if self.p == 0.0:
                raise SpecError("p = 0 gives the empty point process: assumption (A1) 0 < Q(omega(0)=1) fails")
        elif self.kind == "block_factor":
            if self.m is None or self.m < 0:
                raise SpecError(f"block_factor needs a dependence radius m >= 0, got {self.m!r}")
            if self.rule not in BLOCK_RULES:
                raise SpecError(f"unknown block rule {self.rule!r}; expected one of {BLOCK_RULES}")
            if self.rule != "majority" and (self.marginal is None or not 0.0 < self.marginal < 1.0):
                raise SpecError(f"block_factor marginal must lie in (0, 1), got {self.marginal!r}")
        else:
            if self.pattern is None or self.periods is None:
                raise SpecError(f"{self.kind} spec needs a pattern")
            if len(self.periods) != d:
                raise SpecError(f"pattern has {len(self.periods)} axes but dimension is {d}")
            if math.prod(self.periods) != len(self.pattern):
                raise SpecError("pattern size does not match its periods")
            if any(v not in (0, 1) for v in self.pattern):
                raise SpecError("pattern entries must be 0 or 1")
            if not any(self.pattern):
                raise SpecError("pattern has no occupied site: assumption (A1) fails")
            if self.kind == "explicit":
                if self.origin is None or len(self.origin) != d:
                    raise SpecError("explicit grid needs an origin index per axis")

    # -- derived properties -------------------------------------------
    @property
    def is_random(self) -> bool:
        return self.kind in ("bernoulli", "block_factor")

    @property
    def violates_a1(self) -> bool:
        """True for degenerate test laws whose occupation probability is 1."""
        if self.kind == "bernoulli":
            return self.p >= 1.0
        if self.kind in ("periodic", "explicit"):
            return all(self.pattern)
        return False

    @property
    def dependence_range(self) -> int:
        """Smallest l such that the field is independent on sets l apart."""
        if self.kind == "block_factor":
            return 2 * self.m + 1
        return 1

    @property
    def density(self) -> float:
        """Q(omega(0) = 1)."""
        if self.kind == "bernoulli":
            return float(self.p)
        if self.kind == "block_factor":
            return float(self.marginal) if self.rule != "majority" else 0.5
        return sum(self.pattern) / len(self.pattern)

    @property
    def block_threshold(self) -> float:
        """Per-input threshold reproducing the target marginal."""
        vol = (2 * self.m + 1) ** self.dimension
        if self.rule == "any":
            return 1.0 - (1.0 - self.marginal) ** (1.0 / vol)
        if self.rule == "all":
            return self.marginal ** (1.0 / vol)
        return 0.5

    def grid(self) -> np.ndarray:
        return np.asarray(self.pattern, dtype=bool).reshape(self.periods)

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        out = {"dimension": int(self.dimension), "kind": self.kind}
        if self.kind == "bernoulli":
            out["p"] = float(self.p)
        elif self.kind == "block_factor":
            out.update(m=int(self.m), rule=self.rule)
            if self.rule != "majority":
                out["marginal"] = float(self.marginal)
        else:
            out["pattern"] = self.grid().astype(int).tolist()
            out["periods"] = list(self.periods)
            if self.kind == "explicit":
                out["origin"] = list(self.origin)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ProcessSpec":
        data = dict(data)
        kind = data.get("kind")
        try:
            d = int(data["dimension"])
        except (KeyError, TypeError, ValueError):
            raise SpecError("process spec needs an integer 'dimension'") from None
        if kind == "bernoulli":
            if "p" not in data:
                raise SpecError("bernoulli spec needs 'p'")
            return cls(dimension=d, kind=kind, p=float(data["p"]))
        if kind == "block_factor":
            if "m" not in data:
                raise SpecError("block_factor spec needs 'm'")
            marginal = data.get("marginal", 0.5)
            return cls(dimension=d, kind=kind, m=int(data["m"]), rule=data.get("rule", "any"),
                       marginal=None if marginal is None else float(marginal))
        if kind in ("periodic", "explicit"):
            if "pattern" not in data:
                raise SpecError(f"{kind} spec needs 'pattern'")
            arr = np.asarray(data["pattern"], dtype=np.int64)
            if "periods" in data and data["periods"] is not None:
                periods = tuple(int(v) for v in data["periods"])
                arr = arr.reshape(periods)
            if arr.ndim != d:
                raise SpecError(f"pattern has {arr.ndim} axes but dimension is {d}")
            if kind == "periodic":
                return cls.periodic(arr)
            origin = data.get("origin")
            return cls.explicit(arr, None if origin is None else tuple(origin))
        raise SpecError(f"unknown kind {kind!r}; expected one of {KINDS}")


def _offsets(m: int, d: int) -> np.ndarray:
    return np.array(list(itertools.product(range(-m, m + 1), repeat=d)), dtype=np.int64)


def _field(spec: ProcessSpec, masters, attempts, coords: np.ndarray, conditioned: bool) -> np.ndarray:
    """Occupancy bits at ``coords`` (shape ``(..., d)``) for environments with
    the given master seeds (broadcast against ``coords.shape[:-1]``)."""
    coords = np.asarray(coords, dtype=np.int64)
    d = spec.dimension
    if spec.kind in ("periodic", "explicit"):
        shape = np.asarray(spec.periods, dtype=np.int64)
        shift = np.asarray(spec.origin if spec.kind == "explicit" else (0,) * d, dtype=np.int64)
        idx = np.mod(coords + shift, shape)
        grid = spec.grid()
        bits = grid[tuple(idx[..., i] for i in range(d))]
        return np.broadcast_to(bits, np.broadcast_shapes(np.shape(masters), bits.shape)).copy()

    masters = np.asarray(masters, dtype=np.uint64)
    if spec.kind == "bernoulli":
        base = mix64_array(masters ^ np.uint64(mix64(TAG_SITE)))
        if spec.p >= 1.0:
            bits = np.ones(np.broadcast_shapes(masters.shape, coords.shape[:-1]), dtype=bool)
        else:
            h = derive_array(base, *(coords[..., i] for i in range(d)))
            bits = to_uniform(h) < spec.p
        if conditioned:
            bits = bits | np.all(coords == 0, axis=-1)
        return bits

    # block factor over i.i.d. per-site uniforms
    m = spec.m
    radius = m + spec.dependence_range
    in_base = mix64_array(masters ^ np.uint64(mix64(TAG_INPUT)))
    attempts = np.asarray(attempts, dtype=np.int64)
    resampling = conditioned and np.any(attempts > 0)
    if resampling:
        re_base = mix64_array(mix64_array(masters ^ np.uint64(mix64(TAG_RESAMPLE))) ^ as_u64(attempts))
    q = spec.block_threshold
    count = None
    for off in _offsets(m, d):
        y = coords + off
        u = to_uniform(derive_array(in_base, *(y[..., i] for i in range(d))))
        if resampling:
            near = np.all(np.abs(y) <= radius, axis=-1) & (attempts > 0)
            if np.any(near):
                u_re = to_uniform(derive_array(re_base, *(y[..., i] for i in range(d))))
                u = np.where(near, u_re, u)
        hit = (u < q).astype(np.int32)
        count = hit if count is None else count + hit
    vol = len(_offsets(m, d))
    if spec.rule == "any":
        return count > 0
    if spec.rule == "all":
        return count == vol
    return 2 * count > vol


def _find_attempts(spec: ProcessSpec, masters, max_attempts: int) -> np.ndarray:
    """Smallest resampling attempt giving an occupied origin, per master."""
    masters = np.atleast_1d(np.asarray(masters, dtype=np.uint64))
    attempts = np.zeros(masters.shape, dtype=np.int64)
    origin = np.zeros(spec.dimension, dtype=np.int64)
    todo = ~_field(spec, masters, attempts, origin, conditioned=True)
    a = 0
    while np.any(todo):
        a += 1
        if a > max_attempts:
            raise ConditioningError(f"origin still unoccupied after {max_attempts} resampling attempts")
        idx = np.flatnonzero(todo)
        trial = np.full(idx.shape, a, dtype=np.int64)
        ok = _field(spec, masters[idx], trial, origin, conditioned=True)
        attempts[idx[ok]] = a
        todo[idx[ok]] = False
    return attempts


@dataclass
class _GapTable:
    lo: np.ndarray
    hi: np.ndarray
    gaps: np.ndarray  # (2d, *sides), -1 where the scan left the padding


class Environment:
    """Lazily evaluated occupancy field with memoized point queries.

    Use :func:`make_environment` to construct one.
    """

    def __init__(self, spec: ProcessSpec, seed, conditioned_on_origin: bool = False,
                 attempt: int = 0, gamma_cap: int = DEFAULT_GAMMA_CAP,
                 window_cap: int = DEFAULT_WINDOW_CAP):
        self.spec = spec
        self.seed = as_seed(seed)
        self.conditioned_on_origin = conditioned_on_origin
        self.attempt = attempt
        self.gamma_cap = gamma_cap
        self.window_cap = window_cap
        self.memo: dict[tuple[int, ...], int] = {}
        self._dirs = directions(spec.dimension)
        self._table: _GapTable | None = None
        self._period_gaps: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.spec.dimension

    def __getstate__(self):
        state = self.__dict__.copy()
        state["memo"] = {}
        state["_table"] = None
        return state

    def __repr__(self) -> str:
        return f"Environment({self.spec.kind}, d={self.d}, seed={self.seed.master}, conditioned={self.conditioned_on_origin})"

    # -- point and array queries ------------------------------------------
    def occupancy_array(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64)
        return _field(self.spec, np.uint64(self.seed.master), self.attempt, coords, self.conditioned_on_origin)

    def occupancy(self, x) -> int:
        key = tuple(int(c) for c in x)
        bit = self.memo.get(key)
        if bit is None:
            if len(key) != self.d:
                raise ValueError(f"site {key} is not in Z^{self.d}")
            bit = int(self.occupancy_array(np.array(key, dtype=np.int64)))
            self.memo[key] = bit
        return bit

    def window(self, box) -> np.ndarray:
        box = as_box(box, self.d)
        vol = math.prod(hi - lo + 1 for lo, hi in box)
        if vol > self.window_cap:
            raise WindowCapError(f"window of {vol} sites exceeds the cap of {self.window_cap}")
        return self.occupancy_array(box_coords(box))

    def gamma(self, x, e, cap: int | None = None) -> int:
        """Distance to the first occupied site from ``x`` along direction ``e``.

        ``e`` is a direction index (see :func:`directions`) or a signed unit
        vector.
        """
        k = self._dir_index(e)
        out = self.gaps(np.asarray([x], dtype=np.int64), np.asarray([k]), cap=cap)
        return int(out[0])

    def _dir_index(self, e) -> int:
        if isinstance(e, (int, np.integer)):
            if not 0 <= e < 2 * self.d:
                raise ValueError(f"direction index {e} out of range")
            return int(e)
        vec = np.asarray(e, dtype=np.int64)
        hits = np.flatnonzero(np.all(self._dirs == vec, axis=1))
        if len(hits) != 1:
            raise ValueError(f"{e!r} is not a signed unit vector of Z^{self.d}")
        return int(hits[0])

    # -- vectorized jump lengths ------------------------------------------
    def gaps(self, coords: np.ndarray, dirs: np.ndarray, cap: int | None = None) -> np.ndarray:
        """Jump lengths gamma for each (site, direction index) pair."""
        coords = np.asarray(coords, dtype=np.int64)
        dirs = np.asarray(dirs, dtype=np.int64)
        if self.spec.kind in ("periodic", "explicit"):
            return self._periodic_gaps(coords, dirs)
        out = np.zeros(len(dirs), dtype=np.int64)
        todo = np.ones(len(dirs), dtype=bool)
        t = self._table
        if t is not None and len(dirs):
            inside = np.all((coords >= t.lo) & (coords <= t.hi), axis=1)
            if np.any(inside):
                idx = (coords[inside] - t.lo).T
                vals = t.gaps[(dirs[inside],) + tuple(idx)]
                out[inside] = vals
                todo[inside] = vals < 0
        if np.any(todo):
            out[todo] = self._scan(coords[todo], dirs[todo], cap)
        return out

    def _scan(self, coords, dirs, cap):
        cap = self.gamma_cap if cap is None else cap
        steps = self._dirs[dirs]
        out = np.zeros(len(dirs), dtype=np.int64)
        active = np.arange(len(dirs))
        k = 0
        while len(active):
            k += 1
            if k > cap:
                raise GammaCapError(f"no occupied site within {cap} steps of {coords[active[0]].tolist()}")
            occ = self.occupancy_array(coords[active] + k * steps[active])
            out[active[occ]] = k
            active = active[~occ]
        return out

    def _periodic_gaps(self, coords, dirs):
        if self._period_gaps is None:
            self._period_gaps = periodic_gap_table(self.spec.grid())
        shape = np.asarray(self.spec.periods, dtype=np.int64)
        shift = np.asarray(self.spec.origin if self.spec.kind == "explicit" else (0,) * self.d, dtype=np.int64)
        idx = np.mod(coords + shift, shape)
        return self._period_gaps[(dirs,) + tuple(idx.T)]

    def prepare(self, radius: int, pad: int = 64) -> None:
        """Precompute jump lengths for every site of ``[-radius, radius]^d``.

        Pure cache: answers are identical with or without it.
        """
        if self.spec.kind in ("periodic", "explicit"):
            return
        if self._table is not None and self._table.hi[0] >= radius:
            return
        d = self.d
        lo = np.full(d, -radius, dtype=np.int64)
        hi = np.full(d, radius, dtype=np.int64)
        if (2 * (radius + pad) + 1) ** d > self.window_cap:
            raise WindowCapError(f"gap table of radius {radius} exceeds the window cap")
        occ = self.window([(-radius - pad, radius + pad)] * d)
        line_gaps = line_gap_arrays(occ)
        core = tuple(slice(pad, pad + 2 * radius + 1) for _ in range(d))
        gaps = np.stack([g[core] for g in line_gaps])
        self._table = _GapTable(lo=lo, hi=hi, gaps=gaps.astype(np.int32))


def _next_along(occ: np.ndarray, axis: int) -> np.ndarray:
    """Distance to the next occupied site in the + direction of ``axis``
    (-1 if none inside the array)."""
    n = occ.shape[axis]
    pos = np.arange(n).reshape([-1 if a == axis else 1 for a in range(occ.ndim)])
    big = np.iinfo(np.int64).max // 2
    marks = np.where(occ, pos, big)
    # strictly after: shift by one before the reverse running minimum
    shifted = np.full_like(marks, big)
    src = [slice(None)] * occ.ndim
    dst = [slice(None)] * occ.ndim
    src[axis] = slice(1, None)
    dst[axis] = slice(0, n - 1)
    shifted[tuple(dst)] = marks[tuple(src)]
    nxt = np.flip(np.minimum.accumulate(np.flip(shifted, axis), axis=axis), axis)
    return np.where(nxt >= big, -1, nxt - pos)


def line_gap_arrays(occ: np.ndarray) -> list[np.ndarray]:
    """Jump lengths in each direction (ordered as :func:`directions`) for a
    finite occupancy array; -1 where the array ends first."""
    out = []
    for axis in range(occ.ndim):
        out.append(_next_along(occ, axis))
        out.append(np.flip(_next_along(np.flip(occ, axis), axis), axis))
    return out


def periodic_gap_table(grid: np.ndarray) -> np.ndarray:
    """Wrap-aware jump lengths on a periodic grid, shape ``(2d, *periods)``.

    Raises :class:`SpecError` if some axis line of the grid is empty.
    """
    grid = np.asarray(grid, dtype=bool)
    d = grid.ndim
    tables = []
    for axis in range(d):
        if np.any(~np.any(grid, axis=axis)):
            raise SpecError(f"some line along axis {axis + 1} of the periodic pattern is empty")
        reps = [1] * d
        reps[axis] = 3
        tiled = np.tile(grid, reps)
        n = grid.shape[axis]
        core = [slice(None)] * d
        core[axis] = slice(n, 2 * n)
        fwd = _next_along(tiled, axis)[tuple(core)]
        bwd = np.flip(_next_along(np.flip(tiled, axis), axis), axis)[tuple(core)]
        tables += [fwd, bwd]
    return np.stack(tables).astype(np.int64)


def make_environment(spec: ProcessSpec, seed, condition_on_origin: bool = False,
                     max_attempts: int = 10_000, **caps) -> Environment:
    """Build a queryable environment with law Q, or Q(. | origin occupied).

    Bernoulli fields conditioned on the origin simply force the origin bit.
    Block factors rejection-resample every input within ``m + l`` of the
    origin until the origin is occupied; periodic and explicit patterns must
    already occupy it.
    """
    spec.validate()
    seed = as_seed(seed)
    attempt = 0
    if condition_on_origin:
        if spec.kind in ("periodic", "explicit"):
            if not _field(spec, np.uint64(0), 0, np.zeros(spec.dimension, dtype=np.int64), False):
                raise ConditioningError("pattern leaves the origin unoccupied; cannot condition on it")
        elif spec.kind == "block_factor":
            attempt = int(_find_attempts(spec, np.uint64(seed.master), max_attempts)[0])
    return Environment(spec, seed, condition_on_origin, attempt, **caps)


def env_seed(seed, index: int) -> Seed:
    """Master seed of the ``index``-th environment of an ensemble."""
    return Seed(derive(as_seed(seed).master, TAG_ENV, index))


def ensemble_environment(spec: ProcessSpec, seed, index: int, condition_on_origin: bool = False,
                         **kw) -> Environment:
    return make_environment(spec, env_seed(seed, index), condition_on_origin, **kw)


def batch_windows(spec: ProcessSpec, seed, indices, box, condition_on_origin: bool = False,
                  max_attempts: int = 10_000, window_cap: int = DEFAULT_WINDOW_CAP) -> np.ndarray:
    """Windows of many ensemble environments at once.

    Row ``i`` equals ``ensemble_environment(spec, seed, indices[i],
    condition_on_origin).window(box)``.
    """
    indices = np.asarray(indices, dtype=np.int64)
    box = as_box(box, spec.dimension)
    vol = math.prod(hi - lo + 1 for lo, hi in box)
    if vol * len(indices) > window_cap:
        raise WindowCapError(f"{len(indices)} windows of {vol} sites exceed the cap of {window_cap}")
    base = np.uint64(derive(as_seed(seed).master, TAG_ENV))
    masters = derive_array(base, indices)
    attempts = np.zeros(len(indices), dtype=np.int64)
    if condition_on_origin and spec.kind == "block_factor":
        attempts = _find_attempts(spec, masters, max_attempts)
    if condition_on_origin and spec.kind in ("periodic", "explicit"):
        make_environment(spec, 0, True)
    coords = box_coords(box)
    expand = (slice(None),) + (None,) * spec.dimension
    return _field(spec, masters[expand], attempts[expand], coords, condition_on_origin)


def ensemble_masters(spec: ProcessSpec, seed, indices, condition_on_origin: bool = False,
                     max_attempts: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """Master seeds and conditioning attempts of ensemble environments."""
    indices = np.asarray(indices, dtype=np.int64)
    masters = derive_array(np.uint64(derive(as_seed(seed).master, TAG_ENV)), indices)
    attempts = np.zeros(len(indices), dtype=np.int64)
    if condition_on_origin and spec.kind == "block_factor":
        attempts = _find_attempts(spec, masters, max_attempts)
    return masters, attempts


def batch_occupancy(spec: ProcessSpec, masters, attempts, coords, conditioned: bool = False) -> np.ndarray:
    """Occupancy of row-aligned (environment, site) pairs; ``coords`` is (N, d)."""
    return _field(spec, masters, attempts, coords, conditioned)


def batch_gaps(spec: ProcessSpec, masters, attempts, coords, dirs, conditioned: bool = False,
               cap: int = DEFAULT_GAMMA_CAP) -> np.ndarray:
    """Jump lengths for row-aligned (environment, site, direction) triples."""
    coords = np.asarray(coords, dtype=np.int64)
    steps = directions(spec.dimension)[np.asarray(dirs, dtype=np.int64)]
    masters = np.asarray(masters, dtype=np.uint64)
    attempts = np.asarray(attempts, dtype=np.int64)
    out = np.zeros(len(coords), dtype=np.int64)
    active = np.arange(len(coords))
    k = 0
    while len(active):
        k += 1
        if k > cap:
            raise GammaCapError(f"no occupied site within {cap} steps")
        occ = _field(spec, masters[active], attempts[active], coords[active] + k * steps[active], conditioned)
        out[active[occ]] = k
        active = active[~occ]
    return out
