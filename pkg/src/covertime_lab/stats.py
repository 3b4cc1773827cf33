"""Replica aggregation, trend diagnostics, and tail-bound checks.

The limit laws being probed are asymptotic with logarithmic corrections, so
nothing here asserts closeness at a fixed size; trends report whether the
normalized statistic moved toward its limit as the size parameter grew,
and bound checks allow binomial sampling slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import UsageError

Z95 = 1.96


@dataclass(frozen=True)
class EstimatorSummary:
    """Mean / spread of one normalized statistic over replicas."""

    n_replicas: int
    mean: float
    variance: float
    std_error: float
    ci95: tuple[float, float]

    @property
    def ci_width(self) -> float:
        return self.ci95[1] - self.ci95[0]

    def relative_ci_width(self) -> float:
        if self.mean == 0:
            return math.inf
        return self.ci_width / abs(self.mean)


def summarize(samples: Iterable[float]) -> EstimatorSummary:
    """Unbiased summary; sums run over sorted values so any permutation of
    the input produces bit-identical results."""
    xs = sorted(float(x) for x in samples)
    n = len(xs)
    if n < 2:
        raise UsageError("summarize needs at least 2 samples")
    mean = math.fsum(xs) / n
    variance = math.fsum((x - mean) ** 2 for x in xs) / (n - 1)
    std_error = math.sqrt(variance / n)
    return EstimatorSummary(
        n_replicas=n,
        mean=mean,
        variance=variance,
        std_error=std_error,
        ci95=(mean - Z95 * std_error, mean + Z95 * std_error),
    )


@dataclass(frozen=True)
class TrendSeries:
    """Normalized-statistic summaries along a growing size parameter."""

    points: tuple[tuple[float, EstimatorSummary], ...]
    target: float

    def __post_init__(self):
        sizes = [s for s, _ in self.points]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise UsageError("size parameters must be strictly increasing")


@dataclass(frozen=True)
class TrendVerdict:
    verdict: str  # improving | flat | diverging
    distances: tuple[float, ...]


def trend_check(series: TrendSeries) -> TrendVerdict:
    """Did the statistic move toward the target as the size grew?

    "improving" means the distance |mean - target| at the largest size is at
    most the distance at the smallest size and the confidence interval,
    relative to the mean, tightened; a strictly larger final distance is
    "diverging", anything else "flat".
    """
    if len(series.points) < 3:
        raise UsageError("trend_check needs at least 3 points")
    distances = tuple(abs(s.mean - series.target) for _, s in series.points)
    first, last = series.points[0][1], series.points[-1][1]
    if distances[-1] <= distances[0] and last.relative_ci_width() < first.relative_ci_width():
        verdict = "improving"
    elif distances[-1] > distances[0]:
        verdict = "diverging"
    else:
        verdict = "flat"
    return TrendVerdict(verdict, distances)


@dataclass(frozen=True)
class BoundCheck:
    """One empirical frequency against a proven bound, with sampling slack."""

    x: float
    frequency: float
    n_replicas: int
    bound: float
    margin: float
    passed: bool


def bound_check(
    points: Sequence[tuple[float, float, int]], bound: Callable[[float], float]
) -> list[BoundCheck]:
    """Check empirical tail points (x, frequency, n_replicas) against bound(x).

    A point passes when frequency <= bound(x) + 3 binomial standard errors.
    """
    out = []
    for x, freq, n in points:
        if n < 1:
            raise UsageError("each point needs a positive replica count")
        if not 0.0 <= freq <= 1.0:
            raise UsageError(f"frequency {freq!r} outside [0, 1]")
        b = bound(x)
        slack = 3.0 * math.sqrt(freq * (1.0 - freq) / n)
        margin = b + slack - freq
        out.append(BoundCheck(x, freq, n, b, margin, margin >= 0.0))
    return out
