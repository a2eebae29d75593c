"""Command line entry point: ``rwdpp <experiment> [--config ...]``.

Exit status: 0 when every check passes, 1 when a check fails or the run
aborts (reports written so far are kept), 2 for an invalid configuration or
a replay whose version does not match.
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
import time
import traceback
from pathlib import Path

from . import __version__
from .config import EXPERIMENTS, ConfigError, ExperimentConfig
from .env import SpecError
from .experiments import execute
from .reports import SUMMARY, read_replay, write_report
from .stats import Report

OUT_ENV = "RWDPP_OUT"


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rwdpp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", type=Path, help="flat key = value config file")
        p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
        p.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV}/<experiment>)")
        p.add_argument("--jobs", type=_positive, help="worker processes")
    p = sub.add_parser("replay", help="re-run a replay file and verify its digests")
    p.add_argument("replay_file", type=Path)
    p.add_argument("--out", type=Path, help="where to write the re-run (default: a temporary directory)")
    p.add_argument("--jobs", type=_positive, help="worker processes")
    return parser


def _default_out(experiment: str) -> Path:
    return Path(os.environ.get(OUT_ENV, "rwdpp-out")) / experiment


def run_config(cfg: ExperimentConfig, out: Path) -> tuple[int, dict]:
    """Run, emit, print the checks; returns (exit status, digests)."""
    rep = Report(cfg.experiment, params=cfg.resolved(), seeds={"master": cfg.seed})
    status, error = 0, None
    try:
        execute(cfg, rep)
    except (ConfigError, SpecError) as exc:
        print(f"rwdpp: invalid configuration: {exc}", file=sys.stderr)
        return 2, {}
    except Exception as exc:  # keep whatever the run produced
        traceback.print_exc(file=sys.stderr)
        error = f"{type(exc).__name__}: {exc}"
        status = 1
    digests = write_report(rep, cfg, out, status="error" if error else None, error=error)
    for c in rep.checks:
        flag = "PASS" if c.passed else "FAIL"
        print(f"{flag} {rep.experiment}.{c.name}: measured {c.measured!r} {c.comparator} {c.threshold!r}")
    if not rep.passed:
        status = 1
    print(f"{'pass' if status == 0 else 'fail'}: reports in {out}")
    for k, v in sorted(rep.timing.items()):
        print(f"timing {k} = {v:.3f}", file=sys.stderr)
    return status, digests


def cmd_experiment(args) -> int:
    try:
        if args.config is not None:
            cfg = ExperimentConfig.load(args.config, args.command)
        else:
            cfg = ExperimentConfig.loads("", args.command)
        cfg = cfg.with_overrides(seed=args.seed, jobs=args.jobs,
                                 out=str(args.out) if args.out is not None else None)
    except (ConfigError, SpecError, OSError) as exc:
        print(f"rwdpp: invalid configuration: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out) if cfg.out is not None else _default_out(cfg.experiment)
    status, _ = run_config(cfg, out)
    return status


def cmd_replay(args) -> int:
    try:
        cfg, version, recorded = read_replay(args.replay_file)
    except (ConfigError, SpecError, OSError) as exc:
        print(f"rwdpp: unreadable replay file: {exc}", file=sys.stderr)
        return 2
    if version != __version__:
        print(f"rwdpp: replay recorded with version {version!r}, this is {__version__!r}; "
              "refusing to replay", file=sys.stderr)
        return 2
    if args.jobs is not None:
        cfg = cfg.with_overrides(jobs=args.jobs)
    out = args.out or Path(tempfile.mkdtemp(prefix="rwdpp-replay-"))
    status, digests = run_config(cfg, out)
    mismatched = sorted(f for f in set(recorded) | set(digests) if recorded.get(f) != digests.get(f))
    for f in mismatched:
        print(f"MISMATCH {f}: recorded {recorded.get(f)} replayed {digests.get(f)}")
    if mismatched:
        return 1
    print(f"replay identical: {len(digests)} report digests match ({out / SUMMARY})")
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    code = cmd_replay(args) if args.command == "replay" else cmd_experiment(args)
    print(f"timing wall_seconds = {time.perf_counter() - t0:.3f}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
