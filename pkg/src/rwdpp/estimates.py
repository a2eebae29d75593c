"""Small value types for Monte Carlo proportions and their intervals."""
from __future__ import annotations

from dataclasses import dataclass

from scipy import stats


def wilson_interval(hits: int, samples: int, confidence: float = 0.95) -> tuple[float, float]:
    if samples <= 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(hits), int(samples)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


def clopper_pearson(hits: int, samples: int, confidence: float = 0.95) -> tuple[float, float]:
    if samples <= 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(hits), int(samples)).proportion_ci(confidence, method="exact")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class Proportion:
    """A Monte Carlo frequency with a Wilson interval.

    ``censored`` marks zero-hit cells, for which ``upper`` (Clopper-Pearson)
    is the reportable value.
    """

    hits: int
    samples: int
    ci_low: float
    ci_high: float

    @classmethod
    def from_counts(cls, hits: int, samples: int, confidence: float = 0.95) -> "Proportion":
        lo, hi = wilson_interval(hits, samples, confidence)
        return cls(int(hits), int(samples), lo, hi)

    @property
    def estimate(self) -> float:
        return self.hits / self.samples if self.samples else float("nan")

    @property
    def stderr(self) -> float:
        if not self.samples:
            return float("nan")
        q = self.estimate
        return (q * (1 - q) / self.samples) ** 0.5

    @property
    def censored(self) -> bool:
        return self.hits == 0

    @property
    def upper(self) -> float:
        return clopper_pearson(self.hits, self.samples)[1]

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high
