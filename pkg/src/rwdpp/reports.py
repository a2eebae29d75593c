"""Report emission: CSV tables, a key = value summary and a replay file.

Nothing written here depends on wall-clock time or on the number of
worker processes; those go to ``timing.txt`` only.  The summary records a
SHA-256 digest of every CSV so that a replay can be verified byte for byte.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, parse_pairs
from .stats import Report

SUMMARY = "summary.txt"
REPLAY = "replay.cfg"
TIMING = "timing.txt"


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def _value(v) -> str:
    """JSON rendering of summary values (non-finite floats as strings)."""
    if isinstance(v, np.ndarray):
        v = v.tolist()
    if isinstance(v, (np.integer,)):
        v = int(v)
    if isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return json.dumps(str(v))
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_value(x) for x in v) + "]"
    return json.dumps(v, sort_keys=True)


def table_bytes(columns, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(c) for c in r])
    return buf.getvalue().encode()


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", name)


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_report(rep: Report, cfg: ExperimentConfig, out, status: str | None = None,
                 error: str | None = None) -> dict[str, str]:
    """Write every artefact of ``rep`` to directory ``out``; returns the
    CSV digests by file name."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    digests = {}
    for name in sorted(rep.tables):
        t = rep.tables[name]
        data = table_bytes(t.columns, t.rows)
        fname = _safe(name) + ".csv"
        (out / fname).write_bytes(data)
        digests[fname] = digest(data)
    status = status or ("pass" if rep.passed else "fail")
    lines = [f"version = {_value(__version__)}", f"experiment = {_value(rep.experiment)}",
             f"status = {_value(status)}"]
    if error:
        lines.append(f"error = {_value(error)}")
    for k, v in cfg.items(include_run=False):
        lines.append(f"config.{k} = {_value(v)}")
    for section, data in (("param", rep.params), ("seed", rep.seeds), ("estimate", rep.estimates),
                          ("interval", rep.intervals), ("fit", rep.fits)):
        for k in sorted(data):
            lines.append(f"{section}.{k} = {_value(data[k])}")
    for c in rep.checks:
        lines.append(f"check.{c.name}.passed = {_value(c.passed)}")
        lines.append(f"check.{c.name}.measured = {_value(c.measured)}")
        lines.append(f"check.{c.name}.comparator = {_value(c.comparator)}")
        lines.append(f"check.{c.name}.threshold = {_value(c.threshold)}")
    for fname in sorted(digests):
        lines.append(f"digest.{fname} = {_value(digests[fname])}")
    (out / SUMMARY).write_text("\n".join(lines) + "\n")
    replay = cfg.dumps(include_run=False)
    replay += f"replay.version = {_value(__version__)}\n"
    replay += "".join(f"replay.digest.{f} = {_value(digests[f])}\n" for f in sorted(digests))
    (out / REPLAY).write_text(replay)
    timing = {f"timing.{k}": v for k, v in sorted(rep.timing.items())}
    timing["run.jobs"] = cfg.jobs
    (out / TIMING).write_text("".join(f"{k} = {_value(v)}\n" for k, v in timing.items()))
    return digests


def read_replay(path) -> tuple[ExperimentConfig, str, dict[str, str]]:
    """Split a replay file into (config, recorded version, digests)."""
    raw = parse_pairs(Path(path).read_text())
    version = raw.pop("replay.version", None)
    digests = {k[len("replay.digest."):]: raw.pop(k) for k in list(raw) if k.startswith("replay.digest.")}
    return ExperimentConfig.from_pairs(raw), version, digests


def read_summary(path) -> dict:
    return parse_pairs(Path(path).read_text())
