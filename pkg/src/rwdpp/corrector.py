"""Correctors on periodic environments and the martingale diffusion matrix.

On a torus of side S the corrector chi solves, at every occupied site x,

    sum_e [chi(x_e) - chi(x) + delta_e(x)] = 0,

where x_e is the neighbour in direction e and delta_e(x) the unwrapped jump
vector.  The operator is the graph Laplacian of a 2d-regular symmetric
multigraph, so the system is solvable once every connected component has
a zero total drift, and the solution is unique after pinning one anchor per
component.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import cg

from .env import Environment, ProcessSpec, directions, make_environment, periodic_gap_table


class SolverError(RuntimeError):
    """The corrector iteration did not reach the requested residual."""


class PeriodicEnvironment:
    """Finite-volume surrogate: an occupancy grid of side ``S`` on a torus.

    Grid index ``offset`` (default ``S // 2`` per axis) is the lattice origin,
    so the fundamental domain is ``[-S//2, S - S//2)^d``.
    """

    def __init__(self, grid, offset=None):
        grid = np.asarray(grid, dtype=bool)
        self.grid = grid
        self.d = grid.ndim
        self.shape = grid.shape
        self.offset = np.asarray(offset if offset is not None else [s // 2 for s in grid.shape], dtype=np.int64)
        self.gap_table = periodic_gap_table(grid)  # raises on an empty line
        self.sites = np.argwhere(grid)  # lexicographic grid order
        self.n = len(self.sites)
        self.index = np.full(grid.shape, -1, dtype=np.int64)
        self.index[tuple(self.sites.T)] = np.arange(self.n)
        dirs = directions(self.d)
        gam = self.gap_table[(slice(None),) + tuple(self.sites.T)].T  # (n, 2d)
        self.disp = gam[:, :, None] * dirs[None, :, :]  # (n, 2d, d)
        tgt = np.mod(self.sites[:, None, :] + self.disp, np.asarray(self.shape))
        self.nbr = self.index[tuple(np.moveaxis(tgt, -1, 0))]

    @classmethod
    def from_environment(cls, env: Environment, side: int) -> "PeriodicEnvironment":
        lo = -(side // 2)
        grid = env.window([(lo, lo + side - 1)] * env.d)
        return cls(grid)

    @classmethod
    def sample(cls, spec: ProcessSpec, side: int, seed, condition_on_origin: bool = True) -> "PeriodicEnvironment":
        return cls.from_environment(make_environment(spec, seed, condition_on_origin), side)

    @property
    def side(self) -> int:
        return int(self.shape[0])

    @property
    def coords(self) -> np.ndarray:
        """Lattice coordinates of the occupied sites in the fundamental domain."""
        return self.sites - self.offset

    def site_index(self, x) -> np.ndarray:
        """Occupied-site index of lattice points (mod S); -1 if unoccupied."""
        x = np.asarray(x, dtype=np.int64)
        g = np.mod(x + self.offset, np.asarray(self.shape))
        return self.index[tuple(np.moveaxis(g, -1, 0))]

    def as_environment(self) -> Environment:
        spec = ProcessSpec.explicit(self.grid.astype(np.int64), origin=tuple(int(o) for o in self.offset))
        return Environment(spec, 0)

    def adjacency(self) -> sparse.csr_matrix:
        n, nd = self.n, 2 * self.d
        rows = np.repeat(np.arange(n), nd)
        return sparse.csr_matrix((np.ones(n * nd), (rows, self.nbr.ravel())), shape=(n, n))

    def drift(self) -> np.ndarray:
        """Sum of jump vectors out of each site, shape (n, d); integer."""
        return self.disp.sum(axis=1)


@dataclass
class CorrectorField:
    penv: PeriodicEnvironment
    values: np.ndarray  # (n, d)
    anchor: int
    residual: float
    iterations: int
    tol: float
    components: int = 1
    meta: dict = field(default_factory=dict)

    def at(self, x) -> np.ndarray:
        idx = self.penv.site_index(x)
        if np.any(idx < 0):
            raise ValueError("corrector queried at an unoccupied site")
        return self.values[idx]

    def reanchored(self, anchor: int) -> np.ndarray:
        return self.values - self.values[anchor]

    def origin_anchored(self) -> np.ndarray:
        """Values shifted so chi(0) = 0 (origin must be occupied)."""
        i = int(self.penv.site_index(np.zeros(self.penv.d, dtype=np.int64)))
        if i < 0:
            raise ValueError("origin is not occupied")
        return self.reanchored(i)


def harmonic_defect(penv: PeriodicEnvironment, values: np.ndarray) -> np.ndarray:
    """(1/2d) sum_e [chi(x_e) - chi(x) + delta_e(x)] at every site, (n, d)."""
    inc = penv.disp + values[penv.nbr] - values[:, None, :]
    return inc.mean(axis=1)


def _cg(lap, b, atol, max_iter):
    count = [0]

    def tick(_):
        count[0] += 1

    x, _ = cg(lap, b, rtol=0.0, atol=atol, maxiter=max_iter, callback=tick)
    return x, count[0]


def solve_corrector(penv: PeriodicEnvironment, tol: float = 1e-10, max_iter: int = 100_000,
                    anchor: int | None = None, refinements: int = 8) -> CorrectorField:
    """Solve the periodic corrector equation by conjugate gradients.

    The anchor defaults to the lexicographically smallest occupied grid site;
    every other connected component is pinned at its own smallest site.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n, d, nd = penv.n, penv.d, 2 * penv.d
    drift = penv.drift()
    adj = penv.adjacency()
    ncomp, labels = csgraph.connected_components(adj, directed=False)
    for c in range(ncomp):
        tot = drift[labels == c].sum(axis=0)
        if np.any(tot != 0):
            raise SolverError(f"component {c} has nonzero total drift {tot.tolist()}; system unsolvable")
    anchor = 0 if anchor is None else int(anchor)
    anchors = [anchor] + [int(np.flatnonzero(labels == c)[0]) for c in range(ncomp) if c != labels[anchor]]
    lap = (sparse.identity(n, format="csr") * nd - adj).tocsr()
    values = np.zeros((n, d))
    used = 0
    for axis in range(d):
        b = drift[:, axis].astype(np.float64)
        x = np.zeros(n)
        for _ in range(refinements + 1):
            r = b - lap @ x
            for c in range(ncomp):
                sel = labels == c
                r[sel] -= r[sel].mean()
            if np.max(np.abs(r)) / nd <= tol * 0.5:
                break
            budget = max_iter - used
            if budget <= 0:
                break
            dx, its = _cg(lap, r, atol=tol * nd * 0.05, max_iter=budget)
            used += its
            x += dx
        values[:, axis] = x
    for a in anchors:
        sel = labels == labels[a]
        values[sel] -= values[a]
    values[anchor] = 0.0
    defect = harmonic_defect(penv, values)
    res = float(np.max(np.abs(defect))) if n else 0.0
    if res > tol:
        raise SolverError(f"residual {res:.3e} above tolerance {tol:.1e} within {max_iter} iterations")
    return CorrectorField(penv, values, anchor, res, used, tol, ncomp)


def increments(penv: PeriodicEnvironment, fld: CorrectorField) -> np.ndarray:
    """Martingale increments delta_e(x) + chi(x_e) - chi(x), shape (n, 2d, d)."""
    v = fld.values
    return penv.disp + v[penv.nbr] - v[:, None, :]


def martingale_increment(penv: PeriodicEnvironment, fld: CorrectorField, x, y) -> np.ndarray:
    """(y - x) + chi(y) - chi(x) for a torus neighbour y of x."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    i = int(penv.site_index(x))
    if i < 0:
        raise ValueError(f"site {x.tolist()} is not occupied")
    hits = np.flatnonzero(np.all(penv.disp[i] == (y - x), axis=1))
    if not len(hits):
        raise ValueError(f"{y.tolist()} is not a neighbour of {x.tolist()}")
    return increments(penv, fld)[i, hits[0]]


@dataclass
class DiffusionEstimate:
    D: np.ndarray
    stderr: np.ndarray
    method: str
    samples: int
    n_steps: int = 0
    meta: dict = field(default_factory=dict)

    def consistent_with(self, other: "DiffusionEstimate", k: float = 3.0) -> bool:
        se = np.sqrt(self.stderr**2 + other.stderr**2)
        return bool(np.all(np.abs(self.D - other.D) <= k * se))


def estimate_D_martingale(penv: PeriodicEnvironment, fld: CorrectorField) -> DiffusionEstimate:
    """Average of (1/2d) sum_e m m^T over the occupied torus sites."""
    inc = increments(penv, fld)
    D = np.einsum("nei,nej->ij", inc, inc) / (penv.n * 2 * penv.d)
    D = 0.5 * (D + D.T)
    return DiffusionEstimate(D, np.zeros_like(D), "martingale", penv.n)


def f_K_all(penv: PeriodicEnvironment, fld: CorrectorField, a, K: float) -> np.ndarray:
    """E_omega^x[(a.M_1)^2 1{|a.M_1| >= K}] at every occupied site."""
    proj = increments(penv, fld) @ np.asarray(a, dtype=np.float64)
    return np.where(np.abs(proj) >= K, proj**2, 0.0).mean(axis=1)


def f_K(penv: PeriodicEnvironment, fld: CorrectorField, a, K: float, x) -> float:
    i = int(penv.site_index(x))
    if i < 0:
        raise ValueError("site is not occupied")
    return float(f_K_all(penv, fld, a, K)[i])


def lindeberg_V(penv: PeriodicEnvironment, fld: CorrectorField, traj, a, eps: float, n: int) -> float:
    """(1/n) sum_{k=0}^{m} f_{eps sqrt n}(T_{X_k} omega) along a trajectory."""
    f = f_K_all(penv, fld, a, eps * math.sqrt(n))
    idx = penv.site_index(traj.positions)
    if np.any(idx < 0):
        raise ValueError("trajectory leaves the occupied sites of the torus")
    return float(f[idx].sum() / n)


def lindeberg_V_ensemble(penv: PeriodicEnvironment, fld: CorrectorField, a, eps: float, n: int,
                         n_walks: int, seed, x0=None, first_walk: int = 0) -> tuple[float, float]:
    """Mean and standard error of :func:`lindeberg_V` over independent walks
    on the torus, accumulated step by step without storing trajectories."""
    from .walk import TAG_WALK, _keys, _run

    f = f_K_all(penv, fld, a, eps * math.sqrt(n))
    env = penv.as_environment()
    if x0 is None:
        x0 = penv.coords[0] if penv.site_index(np.zeros(penv.d, dtype=np.int64)) < 0 else np.zeros(penv.d)
    x0 = np.asarray(x0, dtype=np.int64)
    ids = np.arange(first_walk, first_walk + n_walks, dtype=np.int64)
    acc = np.zeros(n_walks)

    def observe(k, pos):
        acc[:] += f[penv.site_index(pos)]

    _run(env, x0, n, _keys(seed, TAG_WALK, ids), observer=observe)
    v = acc / n
    se = float(v.std(ddof=1) / math.sqrt(n_walks)) if n_walks > 1 else 0.0
    return float(v.mean()), se


def corrector_diagnostics(ladder, eps: float = 0.1, theta: float = 0.5) -> list[dict]:
    """Finite-volume sublinearity diagnostics along a ladder of solved tori.

    ``ladder`` holds ``(penv, field)`` pairs in increasing side length.  Values
    are re-anchored at the origin and n = S / 2.
    """
    rows = []
    for penv, fld in ladder:
        chi = fld.origin_anchored()
        n = penv.side / 2
        inc = chi[penv.nbr] - chi[:, None, :]
        energy = float(np.sum(inc**2) / penv.n)
        norm = np.linalg.norm(chi, axis=1)
        inside = np.linalg.norm(penv.coords, axis=1) <= n
        frac = float(np.count_nonzero(norm[inside] >= eps * n) / n**penv.d)
        mx = float(norm[inside].max()) if np.any(inside) else 0.0
        rows.append({
            "S": penv.side,
            "n": n,
            "sites": penv.n,
            "energy_per_site": energy,
            "fraction": frac,
            "max_ratio": mx / n,
            "max_theta_ratio": mx / n**theta,
            "max_abs": mx,
            "residual": fld.residual,
        })
    return rows


def save_field(fld: CorrectorField, path, meta: dict | None = None) -> None:
    """CSV of (coords, chi, defect) plus a ``.meta`` key = value sidecar."""
    path = Path(path)
    penv = fld.penv
    d = penv.d
    defect = np.max(np.abs(harmonic_defect(penv, fld.values)), axis=1)
    header = ",".join([f"x{i + 1}" for i in range(d)] + [f"chi{i + 1}" for i in range(d)] + ["defect"])
    lines = [header]
    for c, v, r in zip(penv.coords, fld.values, defect):
        lines.append(",".join([str(int(t)) for t in c] + [repr(float(t)) for t in v] + [repr(float(r))]))
    path.write_text("\n".join(lines) + "\n")
    info = {"S": penv.side, "d": d, "tol": fld.tol, "iterations": fld.iterations,
            "residual": fld.residual, "anchor": int(fld.anchor), "components": fld.components}
    info.update(meta or {})
    info.update(fld.meta)
    Path(str(path) + ".meta").write_text("".join(f"{k} = {v}\n" for k, v in info.items()))


def load_field(path) -> tuple[np.ndarray, np.ndarray]:
    """Read back (coords, chi) from :func:`save_field` output."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = (data.shape[1] - 1) // 2
    return data[:, :d].astype(np.int64), data[:, d:2 * d]


__all__ = [
    "CorrectorField",
    "DiffusionEstimate",
    "PeriodicEnvironment",
    "SolverError",
    "corrector_diagnostics",
    "estimate_D_martingale",
    "f_K",
    "f_K_all",
    "harmonic_defect",
    "increments",
    "lindeberg_V",
    "lindeberg_V_ensemble",
    "load_field",
    "martingale_increment",
    "save_field",
    "solve_corrector",
]
