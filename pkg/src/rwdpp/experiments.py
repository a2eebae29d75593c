"""Experiment runners behind the command line.

Each runner takes a validated :class:`ExperimentConfig` and fills a
:class:`Report`.  Runners mutate the report as they go, so a failure midway
still leaves the finished parts available for emission.
"""
from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np
from scipy.sparse import csgraph

from . import corrector as cr
from . import graph as gr
from . import oracle as orc
from . import stats as st
from .config import ConfigError, ExperimentConfig
from .env import Environment, ProcessSpec, SpecError, box_coords, directions, ensemble_environment, make_environment, opposite
from .estimates import Proportion
from .seeding import TAG_RESAMPLE, TAG_TASK, derive
from .stats import Check, Report, Table
from .walk import ensemble_positions, ensemble_stopped_sup, geometric_bound_check, simulate_ct

# stable sub-stream ids, one per experiment part
PART = {
    "env": 1, "walk": 2, "diffusion": 3, "gaussianity": 4, "corrector": 5, "heatkernel": 6,
    "displacement": 7, "decay": 8, "decay_far": 9, "events": 10, "gamma": 11, "oracle": 12,
    "oracle_walks": 13, "paths": 14, "cross": 15, "lindeberg": 16, "torus_env": 17,
}


def part_seed(master: int, name: str) -> int:
    return derive(master, TAG_TASK, PART[name])


def _deterministic(spec: ProcessSpec) -> bool:
    """Laws with a single realization up to shifts (periodic, explicit,
    and the degenerate all-occupied field)."""
    return not spec.is_random or spec.violates_a1


def _environment(spec: ProcessSpec, seed: int) -> Environment:
    return make_environment(spec, seed, condition_on_origin=spec.is_random)


def start_site(env: Environment) -> tuple:
    """The origin when occupied, else the lexicographically first occupied
    site of one period."""
    d = env.d
    if env.occupancy((0,) * d):
        return (0,) * d
    spec = env.spec
    grid = spec.grid()
    first = np.argwhere(grid)[0]
    if spec.kind == "explicit":
        first = first - np.asarray(spec.origin)
    return tuple(int(c) for c in first)


def _torus_side(spec: ProcessSpec, side: int) -> int:
    if spec.kind in ("periodic", "explicit"):
        periods = set(spec.periods)
        if len(periods) != 1 or side % periods.pop():
            raise ConfigError(f"torus side {side} must be a multiple of the pattern period {spec.periods}")
    return side


TORUS_ATTEMPTS = 1000


def _torus(spec: ProcessSpec, side: int, seed: int) -> cr.PeriodicEnvironment:
    """Periodic surrogate of side ``side``.  A random torus needs an occupied
    site on every axis line; samples without one are redrawn from
    ``derive(seed, TAG_RESAMPLE, attempt)``."""
    side = _torus_side(spec, side)
    if spec.is_random:
        s = seed
        for attempt in range(1, TORUS_ATTEMPTS + 1):
            try:
                return cr.PeriodicEnvironment.sample(spec, side, s, condition_on_origin=True)
            except SpecError:
                s = derive(seed, TAG_RESAMPLE, attempt)
        raise RuntimeError(f"no torus of side {side} with every axis line occupied "
                           f"in {TORUS_ATTEMPTS} draws")
    grid = np.tile(spec.grid(), [side // p for p in spec.periods])
    offset = None
    if spec.kind == "explicit":
        offset = [int(o) for o in spec.origin]
    return cr.PeriodicEnvironment(grid, offset if offset is not None else [0] * spec.dimension)


def _matrix_rows(tag, est, extra=()):
    rows = []
    d = est.D.shape[0]
    for i in range(d):
        for j in range(d):
            rows.append([*extra, tag, i + 1, j + 1, float(est.D[i, j]), float(est.stderr[i, j])])
    return rows


# -- env-check --------------------------------------------------------------

def run_env_check(cfg: ExperimentConfig, rep: Report) -> None:
    P = cfg.resolved()
    spec = cfg.spec
    d = spec.dimension
    seed = part_seed(cfg.seed, "env")
    rep.seeds["environment"] = seed
    env = make_environment(spec, seed, condition_on_origin=P["conditioned"] and spec.is_random)
    h = int(P["window"])
    box = [(-h, h)] * d
    occ = env.window(box)
    rep.estimates["window_density"] = float(occ.mean())
    rep.estimates["density"] = spec.density
    if spec.is_random:
        from .env import batch_occupancy, ensemble_masters
        idx = np.arange(P["samples"], dtype=np.int64)
        masters, attempts = ensemble_masters(spec, seed, idx)
        hits = int(np.count_nonzero(batch_occupancy(spec, masters, attempts, np.zeros((len(idx), d), dtype=np.int64))))
        prop = Proportion.from_counts(hits, len(idx))
        rep.estimates["origin_frequency"] = prop.estimate
        rep.intervals["origin_frequency"] = [prop.ci_low, prop.ci_high]
        se = math.sqrt(spec.density * (1 - spec.density) / len(idx))
        z = abs(prop.estimate - spec.density) / se if se > 0 else abs(prop.estimate - spec.density) * math.inf
        rep.check(Check.at_most("density_z", 0.0 if math.isnan(z) else z, 4.0))
    # reciprocity of jumps: y = x + g e  implies  x = y - gamma(y, -e) e
    dirs = directions(d)
    inner = box_coords([(-h // 2, h // 2)] * d).reshape(-1, d)
    inner = inner[env.occupancy_array(inner)]
    bad = 0
    hist_rows = []
    for k in range(2 * d):
        g = env.gaps(inner, np.full(len(inner), k))
        y = inner + g[:, None] * dirs[k]
        back = env.gaps(y, np.full(len(y), opposite(k)))
        bad += int(np.count_nonzero(back != g))
        vals, counts = np.unique(g, return_counts=True)
        hist_rows += [[k, int(v), int(c)] for v, c in zip(vals, counts)]
    rep.tables["gap_histogram"] = Table(["direction", "gap", "count"], hist_rows)
    rep.check(Check.at_most("reciprocity_violations", bad, 0))
    if env.occupancy((0,) * d):
        mn = gr.compute_M_N(env, P["search_cap"])
        rep.estimates["M"] = mn["M"]
        rep.estimates["N"] = mn["N"]
        rep.check(Check.at_most("M_search_capped", 0 if mn["valid"] else 1, 0))


# -- walk ----------------------------------------------------------------

def run_walk(cfg: ExperimentConfig, rep: Report) -> None:
    P = cfg.resolved()
    spec = cfg.spec
    seed_env = part_seed(cfg.seed, "env")
    seed = part_seed(cfg.seed, "walk")
    rep.seeds.update(environment=seed_env, walks=seed)
    env = _environment(spec, seed_env)
    x0 = start_site(env)
    traj = simulate_ct(env, x0, float(P["n_steps"]), seed, walk_id=0)
    times = np.concatenate([[0.0], traj.event_times])
    rep.tables["trajectory"] = Table(["walk_id", "k", "t"] + [f"x{i + 1}" for i in range(env.d)],
                                     [[0, k, float(t), *map(int, p)]
                                      for k, (t, p) in enumerate(zip(times, traj.positions))])
    X = ensemble_positions(env, x0, P["n_steps"], P["n_walks"], seed, jobs=cfg.jobs)
    r = np.linalg.norm(X - np.asarray(x0), axis=1)
    rep.tables["ensemble"] = Table(["walk_id", "n"] + [f"x{i + 1}" for i in range(env.d)] + ["norm"],
                                   [[w, P["n_steps"], *map(int, x), float(v)] for w, (x, v) in enumerate(zip(X, r))])
    rep.estimates["mean_displacement"] = float(r.mean())
    rep.estimates["mean_displacement_over_sqrt_n"] = float(r.mean() / math.sqrt(P["n_steps"]))
    if x0 != (0,) * env.d:
        return
    mn = gr.compute_M_N(env)
    rep.estimates.update(M=mn["M"], N=mn["N"])
    ok = geometric_bound_check(env, P["geometric_steps"], mn["N"], P["geometric_walks"], seed, jobs=cfg.jobs)
    rep.check(Check.at_most("geometric_bound_violated", 0 if ok else 1, 0))
    radii = [mn["N"] + int(r) for r in P["radii_above_N"]]
    sup, exited = ensemble_stopped_sup(env, x0, P["horizon"], radii, P["stopped_walks"], seed, jobs=cfg.jobs)
    rows = []
    worst = 0
    for j, n in enumerate(radii):
        over = int(np.count_nonzero(sup[:, j] > 3 * n))
        worst = max(worst, over)
        rows.append([n, int(sup[:, j].max()), float(exited[:, j].mean()), over])
    rep.tables["stopped_sup"] = Table(["n", "max_sup", "exit_fraction", "count_above_3n"], rows)
    rep.check(Check.at_most("big_jump_count", worst, 0))


# -- diffusion -----------------------------------------------------------

def run_diffusion(cfg: ExperimentConfig, rep: Report) -> None:
    P = cfg.resolved()
    spec = cfg.spec
    seed_env = part_seed(cfg.seed, "env")
    seed = part_seed(cfg.seed, "diffusion")
    rep.seeds.update(environments=seed_env, walks=seed)
    ests = []
    rows = []
    for i in range(P["environments"]):
        env = ensemble_environment(spec, seed_env, i, condition_on_origin=spec.is_random)
        x0 = start_site(env)
        est = st.estimate_D_empirical(env, P["n_steps"], P["n_walks"], seed, x0=x0, jobs=cfg.jobs)
        ests.append(est)
        rows += _matrix_rows("empirical", est, (i,))
        for k, v in enumerate(np.linalg.eigvalsh(est.D)):
            rep.estimates[f"env{i}.eig{k + 1}"] = float(v)
        rep.check(Check.above(f"env{i}.min_eig_plus_3se", float(np.linalg.eigvalsh(est.D).min() + 3 * est.stderr.max()), 0.0))
    worst = 0.0
    for i in range(len(ests)):
        for j in range(i + 1, len(ests)):
            worst = max(worst, st.consistency_z(ests[i], ests[j]))
    if len(ests) > 1:
        rep.check(Check.at_most("cross_environment_z", worst, P["cross_sigma"]))
    if _deterministic(spec):
        penv = _torus(spec, P["torus_side"], seed_env)
        fld = cr.solve_corrector(penv)
        mart = cr.estimate_D_martingale(penv, fld)
        rows += _matrix_rows("martingale", mart, (-1,))
        rep.check(Check.at_most("martingale_vs_empirical_z", st.consistency_z(ests[0], mart), P["cross_sigma"]))
    rep.tables["diffusion_matrix"] = Table(["environment", "method", "i", "j", "D", "stderr"], rows)


# -- gaussianity ---------------------------------------------------------

def run_gaussianity(cfg: ExperimentConfig, rep: Report) -> None:
    P = cfg.resolved()
    spec = cfg.spec
    seed_env = part_seed(cfg.seed, "env")
    seed = part_seed(cfg.seed, "gaussianity")
    rep.seeds.update(environment=seed_env, walks=seed)
    env = _environment(spec, seed_env)
    a = P["direction"] or st.unit(spec.dimension).tolist()
    res = st.gaussianity_check(env, a, P["n_steps"], P["n_walks"], seed, x0=start_site(env), jobs=cfg.jobs)
    rep.estimates.update(ks_statistic=res.statistic, ks_pvalue=res.pvalue, variance=res.variance,
                         raw_ks_statistic=res.raw_statistic, raw_ks_pvalue=res.raw_pvalue)
    rep.tables["ks"] = Table(["n_steps", "n_walks", "statistic", "pvalue", "variance", "raw_statistic",
                              "raw_pvalue"],
                             [[res.n_steps, res.n_walks, res.statistic, res.pvalue, res.variance,
                               res.raw_statistic, res.raw_pvalue]])
    rep.check(Check.above("ks_pvalue", res.pvalue, P["min_pvalue"]))


# -- corrector -----------------------------------------------------------

def run_corrector(cfg: ExperimentConfig, rep: Report) -> None:
    P = cfg.resolved()
    spec = cfg.spec
    seed_env = part_seed(cfg.seed, "torus_env")
    rep.seeds["environment"] = seed_env
    ladder = []
    drows = []
    for S in P["sides"]:
        penv = _torus(spec, int(S), seed_env)
        fld = cr.solve_corrector(penv, tol=P["tol"])
        ladder.append((penv, fld))
        rep.check(Check.at_most(f"S{S}.residual", fld.residual, P["tol"]))
        if not np.any(penv.drift()):
            rep.check(Check.at_most(f"S{S}.max_abs_chi", float(np.abs(fld.values).max()), 1e-10))
        drows += _matrix_rows("martingale", cr.estimate_D_martingale(penv, fld), (S,))
    rep.tables["martingale_D"] = Table(["S", "method", "i", "j", "D", "stderr"], drows)
    diag = cr.corrector_diagnostics(ladder, eps=P["eps"], theta=P["theta"])
    cols = list(diag[0])
    rep.tables["sublinearity"] = Table(cols, [[r[c] for c in cols] for r in diag])
    penv, fld = ladder[-1]
    rep.tables["corrector_field"] = Table(
        [f"x{i + 1}" for i in range(penv.d)] + [f"chi{i + 1}" for i in range(penv.d)],
        [[*map(int, c), *map(float, v)] for c, v in zip(penv.coords, fld.origin_anchored())])
    if len(diag) > 1 and not _deterministic(spec):
        ratios = [r["max_ratio"] for r in diag]
        fracs = [r["fraction"] for r in diag]
        worst_step = max(b - a for a, b in zip(ratios, ratios[1:]))
        rep.check(Check.below("max_ratio_largest_increment", worst_step, 0.0))
        rep.check(Check.at_most("fraction_largest_increment", max(b - a for a, b in zip(fracs, fracs[1:])), 0.0))
    if P["cross_check_walks"] > 0 or P["lindeberg_ns"]:
        S = P["sides"][-1]
        env = penv.as_environment()
        x0 = start_site(env)
        if P["cross_check_walks"] > 0:
            seed = part_seed(cfg.seed, "cross")
            rep.seeds["cross_check_walks"] = seed
            emp = st.estimate_D_empirical(env, P["cross_check_steps"], P["cross_check_walks"], seed,
                                          x0=x0, jobs=cfg.jobs)
            mart = cr.estimate_D_martingale(penv, fld)
            rep.tables["cross_check"] = Table(["S", "method", "i", "j", "D", "stderr"],
                                              _matrix_rows("empirical", emp, (S,)) + _matrix_rows("martingale", mart, (S,)))
            rep.check(Check.at_most("martingale_vs_empirical_z", st.consistency_z(emp, mart), 3.0))
        if P["lindeberg_ns"]:
            seed = part_seed(cfg.seed, "lindeberg")
            rep.seeds["lindeberg_walks"] = seed
            a = st.unit(penv.d)
            rows = []
            for n in P["lindeberg_ns"]:
                v, se = cr.lindeberg_V_ensemble(penv, fld, a, P["lindeberg_eps"], int(n),
                                                P["lindeberg_walks"], seed, x0=x0)
                rows.append([int(n), v, se])
            rep.tables["lindeberg"] = Table(["n", "V", "stderr"], rows)
            if len(rows) > 1:
                ratio = rows[-1][1] / rows[0][1] if rows[0][1] > 0 else 0.0
                rep.check(Check.at_most("lindeberg_ratio", ratio, 0.1))


# -- heat kernel -------------------------------------------------------------

def run_heatkernel(cfg: ExperimentConfig, rep: Report) -> None:
    P = cfg.resolved()
    spec = cfg.spec
    seed_env = part_seed(cfg.seed, "torus_env")
    rep.seeds["environment"] = seed_env
    penv = _torus(spec, int(P["side"]), seed_env)
    x = start_site(penv.as_environment())
    times = sorted(set(float(t) for t in P["times"]) | set(float(t) for t in P["plateau"]))
    # b_n defaults to n = S/2, the spatial scale of the torus
    b_n = float(P["b_n"]) if P["b_n"] is not None else penv.side / 2
    rep.estimates["b_n"] = b_n
    rows = st.return_prob_profile(penv, x, times)
    rep.tables["return_probability"] = Table(
        ["t", "scaled", "probability", "in_window"],
        [[r.t, r.value, r.extra["prob"], r.t >= b_n] for r in rows])
    vals = {r.t: r.value for r in rows}
    window = [v for t, v in vals.items() if t >= b_n]
    if window:
        rep.estimates["sup_scaled"] = max(window)
    t1, t2 = (float(t) for t in P["plateau"])
    if t1 in vals and t2 in vals and vals[t1] > 0:
        rep.check(Check.below("plateau_relative_change", abs(vals[t2] / vals[t1] - 1), P["plateau_tol"]))


# -- displacement ----------------------------------------------------------

def run_displacement(cfg: ExperimentConfig, rep: Report) -> None:
    P = cfg.resolved()
    spec = cfg.spec
    seed_env = part_seed(cfg.seed, "env")
    seed = part_seed(cfg.seed, "displacement")
    rep.seeds.update(environment=seed_env, walks=seed)
    env = _environment(spec, seed_env)
    rows = st.displacement_profile(env, start_site(env), P["times"], P["n_walks"], seed,
                                   jobs=cfg.jobs, graph=P["graph"])
    cols = ["t", "mean_over_sqrt_t", "ci_low", "ci_high", "mean_abs"]
    if P["graph"]:
        cols += ["graph_mean_over_sqrt_t", "graph_unresolved"]
    rep.tables["displacement"] = Table(cols, [[r.t, r.value, r.ci_low, r.ci_high, *r.extra.values()] for r in rows])
    series = [r.value for r in rows if r.t > 0]
    if len(series) >= 3:
        tau, p = st.mann_kendall(series)
        rep.fits.update(mann_kendall_tau=tau, mann_kendall_pvalue=p)
        rep.check(Check.above("trend_pvalue", p, P["alpha"]))


# -- distance decay ----------------------------------------------------------

def run_distance_decay(cfg: ExperimentConfig, rep: Report) -> None:
    P = cfg.resolved()
    spec = cfg.spec
    seed = part_seed(cfg.seed, "decay")
    seed_far = part_seed(cfg.seed, "decay_far")
    rep.seeds.update(environments=seed, far_environments=seed_far)
    dec = st.distance_comparison(spec, P["rho"], P["sites"], P["samples"], seed)
    far = st.distance_comparison(spec, P["rho"], [P["far_site"]], P["far_samples"], seed_far)
    rows = []
    for s, nrm, p in zip(dec.sites + far.sites, dec.norms + far.norms, dec.props + far.props):
        rows.append([*s, nrm, p.hits, p.samples, p.estimate, p.ci_low, p.ci_high, int(p.censored)])
    rep.tables["decay"] = Table([f"x{i + 1}" for i in range(spec.dimension)] +
                                ["norm", "hits", "samples", "frequency", "ci_low", "ci_high", "censored"], rows)
    fit = dec.fit
    rep.fits.update(slope=fit.slope, slope_stderr=fit.stderr, t_stat=fit.t_stat, c6=fit.c6, c7=fit.c7,
                    cells=fit.cells)
    if fit.cells >= 2:
        rep.check(Check.below("slope_t_stat", fit.t_stat, -P["min_t"]))
    else:
        # decay is vacuous when every cell is empty: bound them all instead
        worst = max(p.upper if p.censored else p.estimate for p in dec.props)
        rep.check(Check.below("max_cell_bound", worst, P["far_threshold"]))
    fp = far.props[0]
    rep.check(Check.below("far_frequency", fp.upper if fp.censored else fp.estimate, P["far_threshold"]))


# -- events ------------------------------------------------------------------

def run_events(cfg: ExperimentConfig, rep: Report) -> None:
    P = cfg.resolved()
    spec = cfg.spec
    d = spec.dimension
    seed = part_seed(cfg.seed, "events")
    rep.seeds["environments"] = seed
    props = []
    rows = []
    for L in P["L"]:
        lseed = derive(seed, TAG_TASK, int(L))
        prop = gr.estimate_p_L(spec, int(L), P["samples"], lseed)
        props.append(prop)
        exact = None
        if spec.kind == "bernoulli" and (2 * L) ** d <= 16:
            blocked = orc.enumerate_probability((2 * L,) * d, Fraction(spec.p).limit_denominator(10**9),
                                                gr.box_is_blocked)
            exact = float(1 - blocked)
            rep.check(Check.at_most(f"p_L{L}_outside_ci", 0 if prop.contains(exact) else 1, 0))
        rows.append(["unblocked", int(L), "", "", prop.samples, prop.hits, prop.estimate, prop.ci_low,
                     prop.ci_high, "" if exact is None else exact, lseed])
    # Only the limit p_L -> 0 holds in general; dependent fields can have
    # p_L increasing at small L, so step-by-step monotonicity is enforced
    # for independent sites only and reported otherwise.
    for (L1, a), (L2, b) in zip(zip(P["L"], props), list(zip(P["L"], props))[1:]):
        se = math.hypot(a.stderr, b.stderr)
        if a.hits == 0 and b.hits == 0:
            z = math.inf  # both vanish: nothing left to decrease
        else:
            z = (a.estimate - b.estimate) / se if se > 0 else math.inf * np.sign(a.estimate - b.estimate)
        if spec.kind == "bernoulli":
            rep.check(Check.above(f"p_L{L1}_minus_p_L{L2}_z", z, P["sigma"]))
        else:
            rep.estimates[f"p_L{L1}_minus_p_L{L2}_z"] = z
    if d == 2 and P["lambda_ns"]:
        L, delta = int(P["lambda_L"]), float(P["lambda_delta"])
        for n in P["lambda_ns"]:
            nseed = derive(seed, TAG_TASK, 1000 + int(n))
            prop = gr.estimate_event(spec, lambda e: not gr.event_Lambda(e, 1, 0, delta, L, int(n)),
                                     P["lambda_samples"], nseed, condition_on_origin=False)
            rows.append(["lambda1_complement", L, int(n), delta, prop.samples, prop.hits, prop.estimate,
                         prop.ci_low, prop.ci_high, "", nseed])
    rep.tables["events"] = Table(["event", "L", "n", "delta", "samples", "hits", "estimate", "ci_low",
                                  "ci_high", "exact", "seed"], rows)
    gseed = part_seed(cfg.seed, "gamma")
    rep.seeds["gamma"] = gseed
    mom = st.gamma_moment_check(spec, 0, P["gamma_eps"], P["gamma_samples"], gseed)
    rep.estimates.update(gamma_moment=mom.mean, gamma_moment_power=mom.power)
    rep.intervals["gamma_moment"] = [mom.ci_low, mom.ci_high]
    if mom.analytic is not None:
        rep.estimates["gamma_moment_analytic"] = mom.analytic
        rep.check(Check.at_most("gamma_moment_z", mom.z, 3.0))


# -- oracle comparison -------------------------------------------------------

def run_oracle_compare(cfg: ExperimentConfig, rep: Report) -> None:
    P = cfg.resolved()
    spec = cfg.spec
    seed_env = part_seed(cfg.seed, "torus_env")
    seed = part_seed(cfg.seed, "oracle_walks")
    rep.seeds.update(environment=seed_env, walks=seed)
    penv = _torus(spec, int(P["side"]), seed_env)
    chain = orc.build_chain(penv)
    col = np.asarray(chain.counts.sum(axis=0)).ravel()
    rep.check(Check.at_most("column_sum_defects", int(np.count_nonzero(col != chain.denominator)), 0))
    env = penv.as_environment()
    x0 = start_site(env)
    exact = orc.exact_distribution(chain, x0, P["n_steps"])
    X = ensemble_positions(env, x0, P["n_steps"], P["n_walks"], seed, jobs=cfg.jobs)
    idx = penv.site_index(X)
    mc = np.bincount(idx, minlength=chain.n) / P["n_walks"]
    tv = orc.tv_distance(exact, mc)
    rep.estimates["tv_distance"] = tv
    rep.check(Check.below("tv_distance", tv, P["max_tv"]))
    rep.tables["distribution"] = Table(
        [f"x{i + 1}" for i in range(penv.d)] + ["exact", "monte_carlo"],
        [[*map(int, c), float(e), float(m)] for c, e, m in zip(penv.coords, exact, mc)])
    # breadth-first search against exhaustive path search on small windows
    side = int(P["path_window_side"])
    pseed = part_seed(cfg.seed, "paths")
    rep.seeds["path_windows"] = pseed
    mismatches, compared = 0, 0
    for w in range(P["path_windows"]):
        wenv = ensemble_environment(spec, pseed, w)
        occ = wenv.window([(0, side - 1)] * spec.dimension)
        sites = np.argwhere(occ)
        if len(sites) < 2:
            continue
        g = gr.window_graph(occ)
        src = tuple(sites[0])
        dist = csgraph.shortest_path(g, unweighted=True, indices=int(np.ravel_multi_index(src, occ.shape)))
        for y in sites[1:]:
            bfs = dist[np.ravel_multi_index(tuple(y), occ.shape)]
            try:
                bf = orc.brute_force_paths(occ, src, tuple(y), max_len=2 * side)
            except orc.StateCapError:
                continue
            bf = math.inf if orc.is_unreached(bf) else bf
            compared += 1
            mismatches += int(bf != bfs)
    rep.estimates["path_pairs_compared"] = compared
    rep.check(Check.at_most("bfs_bruteforce_mismatches", mismatches, 0))


RUNNERS = {
    "env-check": run_env_check,
    "walk": run_walk,
    "diffusion": run_diffusion,
    "gaussianity": run_gaussianity,
    "corrector": run_corrector,
    "heatkernel": run_heatkernel,
    "displacement": run_displacement,
    "distance-decay": run_distance_decay,
    "events": run_events,
    "oracle-compare": run_oracle_compare,
}


def run_full_suite(cfg: ExperimentConfig, rep: Report) -> None:
    for name in cfg.resolved()["include"]:
        sub = cfg.sub(name)
        part = Report(name, params=sub.resolved())
        t0 = time.perf_counter()
        try:
            RUNNERS[name](sub, part)
        finally:
            part.timing["seconds"] = time.perf_counter() - t0
            rep.merge(part, name)


RUNNERS["full-suite"] = run_full_suite


def run(cfg: ExperimentConfig) -> Report:
    """Execute ``cfg``; exceptions propagate after the report is populated
    as far as the run got (the caller keeps a reference via ``rep``)."""
    rep = Report(cfg.experiment, params=cfg.resolved(), seeds={"master": cfg.seed})
    execute(cfg, rep)
    return rep


def execute(cfg: ExperimentConfig, rep: Report) -> None:
    t0 = time.perf_counter()
    try:
        RUNNERS[cfg.experiment](cfg, rep)
    finally:
        rep.timing["seconds"] = time.perf_counter() - t0
