"""Flat experiment configuration files.

One ``key = value`` pair per line, values in JSON, ``#`` comments::

    experiment = "diffusion"
    dimension = 2
    kind = "bernoulli"
    p = 0.5
    seed = 7
    param.n_walks = 20000

Top-level keys are fixed; ``param.<name>`` keys must be known to the chosen
experiment.  Parsing then formatting a config reproduces it exactly.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .env import ProcessSpec, SpecError

EXPERIMENTS = ("env-check", "walk", "diffusion", "gaussianity", "corrector", "heatkernel",
               "displacement", "distance-decay", "events", "oracle-compare", "full-suite")

SPEC_KEYS = ("dimension", "kind", "p", "m", "rule", "marginal", "pattern", "periods", "origin")

# Kind-specific parameters and their defaults (sized for a quick run).
DEFAULTS: dict[str, dict] = {
    "env-check": {"window": 32, "samples": 20000, "search_cap": 256, "conditioned": True},
    "walk": {"n_steps": 1000, "n_walks": 1000, "geometric_steps": 30, "geometric_walks": 1000,
             "horizon": 2000.0, "radii_above_N": [0, 1, 2, 4, 8], "stopped_walks": 1000},
    "diffusion": {"n_steps": 2000, "n_walks": 4000, "environments": 3, "torus_side": 64,
                  "cross_sigma": 3.0},
    "gaussianity": {"n_steps": 2000, "n_walks": 2000, "direction": None, "min_pvalue": 0.01},
    "corrector": {"sides": [16, 32, 64], "tol": 1e-10, "eps": 0.1, "theta": 0.5,
                  "cross_check_walks": 0, "cross_check_steps": 10000,
                  "lindeberg_ns": [], "lindeberg_walks": 200, "lindeberg_eps": 0.2},
    "heatkernel": {"side": 64, "times": [10, 20, 50, 100, 200], "plateau": [50, 100],
                   "plateau_tol": 0.05, "b_n": None},
    "displacement": {"times": [1, 10, 100, 1000], "n_walks": 1000, "alpha": 0.01, "graph": False},
    "distance-decay": {"rho": 0.1, "sites": [[10, 0], [11, 0], [12, 0], [13, 0], [14, 0]],
                       "samples": 50000, "far_site": [40, 0], "far_samples": 10000,
                       "far_threshold": 1e-3, "min_t": 3.0},
    "events": {"L": [1, 2, 3, 4], "samples": 20000, "sigma": 4.0, "gamma_eps": 1.0,
               "gamma_samples": 20000, "lambda_ns": [2, 4, 8, 16], "lambda_L": 4,
               "lambda_delta": 0.25, "lambda_samples": 1000},
    "oracle-compare": {"side": 16, "n_steps": 50, "n_walks": 1000000, "max_tv": 0.01,
                       "path_windows": 20, "path_window_side": 6},
    "full-suite": {"include": ["env-check", "walk", "diffusion", "gaussianity", "corrector",
                               "heatkernel", "displacement", "distance-decay", "events",
                               "oracle-compare"],
                   "overrides": {}},
}

TOP_KEYS = ("experiment",) + SPEC_KEYS + ("seed", "out", "jobs")


class ConfigError(SpecError):
    """Malformed or inconsistent configuration."""


@dataclass
class ExperimentConfig:
    experiment: str
    spec: ProcessSpec
    seed: int = 0
    params: dict = field(default_factory=dict)
    out: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        unknown = set(self.params) - set(DEFAULTS[self.experiment])
        if unknown:
            raise ConfigError(f"unknown parameter(s) for {self.experiment}: {sorted(unknown)}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise ConfigError(f"jobs must be a positive integer, got {self.jobs!r}")
        if self.experiment == "full-suite":
            for name in self.params.get("overrides", {}):
                if name not in DEFAULTS or name == "full-suite":
                    raise ConfigError(f"full-suite override for unknown experiment {name!r}")
                bad = set(self.params["overrides"][name]) - set(DEFAULTS[name])
                if bad:
                    raise ConfigError(f"unknown parameter(s) for {name}: {sorted(bad)}")

    def resolved(self) -> dict:
        """Parameters with defaults filled in."""
        out = copy.deepcopy(DEFAULTS[self.experiment])
        out.update(copy.deepcopy(self.params))
        return out

    def sub(self, experiment: str) -> "ExperimentConfig":
        """Configuration of one member of a full suite."""
        params = copy.deepcopy(self.params.get("overrides", {}).get(experiment, {}))
        return ExperimentConfig(experiment, self.spec, self.seed, params, self.out, self.jobs)

    def with_overrides(self, seed=None, out=None, jobs=None) -> "ExperimentConfig":
        return ExperimentConfig(self.experiment, self.spec,
                                self.seed if seed is None else seed, copy.deepcopy(self.params),
                                self.out if out is None else out, self.jobs if jobs is None else jobs)

    # -- serialization ------------------------------------------------------
    def items(self, include_run: bool = True) -> list[tuple[str, object]]:
        """Ordered key/value pairs.  ``include_run=False`` drops ``out`` and
        ``jobs``, which do not influence any result."""
        spec = self.spec.to_dict()
        pairs: list[tuple[str, object]] = [("experiment", self.experiment)]
        pairs += [(k, spec[k]) for k in SPEC_KEYS if spec.get(k) is not None]
        pairs.append(("seed", self.seed))
        if include_run:
            if self.out is not None:
                pairs.append(("out", self.out))
            pairs.append(("jobs", self.jobs))
        pairs += [(f"param.{k}", self.params[k]) for k in sorted(self.params)]
        return pairs

    def dumps(self, include_run: bool = True) -> str:
        return "".join(f"{k} = {json.dumps(v, sort_keys=True)}\n" for k, v in self.items(include_run))

    @classmethod
    def loads(cls, text: str, experiment: str | None = None) -> "ExperimentConfig":
        """Parse a config; ``experiment`` fills in (or must match) its
        ``experiment`` key."""
        raw = parse_pairs(text)
        if experiment is not None:
            named = raw.setdefault("experiment", experiment)
            if named != experiment:
                raise ConfigError(f"config is for experiment {named!r}, not {experiment!r}")
        return cls.from_pairs(raw)

    @classmethod
    def from_pairs(cls, raw: dict) -> "ExperimentConfig":
        top = {}
        params = {}
        for k, v in raw.items():
            if k.startswith("param."):
                params[k[len("param."):]] = v
            elif k in TOP_KEYS:
                top[k] = v
            else:
                raise ConfigError(f"unknown config key {k!r}")
        if "experiment" not in top:
            raise ConfigError("config must name an experiment")
        spec_fields = {k: top[k] for k in SPEC_KEYS if k in top}
        if spec_fields.get("kind") in ("periodic", "explicit") and "pattern" in spec_fields:
            try:
                import numpy as np
                spec_fields.setdefault("dimension", int(np.asarray(spec_fields["pattern"]).ndim))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"pattern is not a rectangular array: {exc}") from exc
        spec_fields.setdefault("dimension", 2)
        spec_fields.setdefault("kind", "bernoulli")
        if spec_fields["kind"] == "bernoulli":
            spec_fields.setdefault("p", 0.5)
        try:
            spec = ProcessSpec.from_dict(spec_fields)
        except SpecError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid process spec: {exc}") from exc
        stray = set(spec_fields) - set(spec.to_dict())
        if stray:
            raise ConfigError(f"key(s) {sorted(stray)} do not apply to kind {spec.kind!r}")
        return cls(top["experiment"], spec, top.get("seed", 0), params, top.get("out"), top.get("jobs", 1))

    @classmethod
    def load(cls, path, experiment: str | None = None) -> "ExperimentConfig":
        return cls.loads(Path(path).read_text(), experiment)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())


def parse_pairs(text: str) -> dict:
    """Parse ``key = json`` lines; duplicate keys are an error."""
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        key, sep, value = s.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            out[key] = json.loads(value.strip())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {lineno}: value of {key!r} is not valid JSON ({exc.msg})") from exc
    return out
