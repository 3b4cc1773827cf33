"""Galton-Watson simulation and the binomial/Gaussian tail comparison.

These back the embedded-branching-process argument: the probability that a
Binomial(m, 1/2) count stays below a threshold, its Gaussian limit, the
smallest level spacing certifying a supercritical embedded process, and
direct survival simulation of offspring laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import CapacityError, UsageError

BINOMIAL_TRIALS_CAP = 10**7
_NEGLIGIBLE = 1e-22  # stop extending the term sum once increments are this small


@dataclass(frozen=True)
class OffspringLaw:
    """Offspring distribution as (count, probability) support pairs."""

    support: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if not self.support:
            raise UsageError("offspring law needs a nonempty support")
        seen = set()
        total = 0.0
        for c, p in self.support:
            if c < 0 or int(c) != c:
                raise UsageError(f"offspring count {c!r} must be a nonnegative integer")
            if p < 0:
                raise UsageError("offspring probabilities must be nonnegative")
            if c in seen:
                raise UsageError(f"duplicate offspring count {c}")
            seen.add(c)
            total += p
        if abs(total - 1.0) > 1e-12:
            raise UsageError(f"offspring probabilities sum to {total!r}, not 1")

    def mean(self) -> float:
        return sum(c * p for c, p in self.support)

    def pgf(self, s: float) -> float:
        """Probability generating function E[s^X]."""
        return sum(p * s**c for c, p in self.support)


def extinction_probability(law: OffspringLaw, tol: float = 1e-13, max_iter: int = 100_000) -> float:
    """Smallest fixed point of the generating function, by iteration from 0."""
    q = 0.0
    for _ in range(max_iter):
        nxt = law.pgf(q)
        if abs(nxt - q) <= tol:
            return nxt
        q = nxt
    return q


@dataclass(frozen=True)
class BinomialTailQuery:
    """P[X < threshold] query for X ~ Binomial(trials, 1/2)."""

    trials: int
    threshold: float

    p: float = 0.5

    def __post_init__(self):
        if self.trials < 0:
            raise UsageError("trials must be nonnegative")
        if not 0 <= self.threshold <= self.trials:
            raise UsageError("threshold must lie in [0, trials]")
        if self.p != 0.5:
            raise UsageError("only the symmetric p = 1/2 case is supported")


def proof_tail_query(r: float, ell: int, j: int) -> BinomialTailQuery:
    """The comparison made level-to-level in the lower-bound argument.

    Trials r*ell*(j^2 + (j+1)^2) rounded to nearest, threshold r*ell*j^2
    kept real.
    """
    if r <= 0 or ell < 1 or j < 0:
        raise UsageError("need r > 0, ell >= 1, j >= 0")
    trials = round(r * ell * (j * j + (j + 1) * (j + 1)))
    return BinomialTailQuery(trials, r * ell * j * j)


def _scaled_product(values: np.ndarray) -> tuple[float, int]:
    """Product of positive doubles as (mantissa, exponent), mantissa in [0.5, 1)."""
    mants, exps = np.frexp(values)
    total_exp = int(exps.sum())
    while len(mants) > 1:
        if len(mants) & 1:
            mants = np.append(mants, 0.5)
            total_exp += 1
        mants = mants[0::2] * mants[1::2]
        mants, exps = np.frexp(mants)
        total_exp += int(exps.sum())
    return float(mants[0]), total_exp


def binomial_tail_below(q: BinomialTailQuery) -> float:
    """Exact-to-double P[X < threshold] for X ~ Binomial(trials, 1/2).

    Stable summation of the binomial probabilities: the top included term
    C(m, K)/2^m is accumulated as an exactly binary-scaled product (ldexp
    carries the exponent, so no large logarithms enter), lower terms follow
    by downward ratio recurrence and are fsum'd.  Thresholds past m/2 use the
    symmetry of Binomial(m, 1/2).
    """
    m = q.trials
    if m > BINOMIAL_TRIALS_CAP:
        raise CapacityError(
            f"exact binomial summation capped at {BINOMIAL_TRIALS_CAP} trials, got {m}"
        )
    top = math.ceil(q.threshold) - 1  # largest k with k < threshold
    return _mass_below(m, top)


def _mass_below(m: int, top: int) -> float:
    """P[X <= top] for X ~ Binomial(m, 1/2)."""
    if top < 0:
        return 0.0
    if top >= m:
        return 1.0
    if 2 * top + 1 > m:
        # P[X <= top] = 1 - P[X <= m - top - 1] by symmetry; smaller tail first
        return 1.0 - _mass_below(m, m - top - 1)
    # anchor term C(m, top) / 2^m, folding one factor of 2 into each of the
    # `top` ratios and scaling the remaining 2^-(m-top) exactly via ldexp
    if top == 0:
        mant, expo = 1.0, 0
    else:
        i = np.arange(1, top + 1, dtype=np.float64)
        mant, expo = _scaled_product((m - top + i) / (2.0 * i))
    expo -= m - top
    # downward terms: b_{k-1} / b_k = k / (m - k + 1) < 1 on this side
    terms = [1.0]
    rel = 1.0
    k = top
    while k >= 1:
        rel *= k / (m - k + 1.0)
        if rel < _NEGLIGIBLE:
            break
        terms.append(rel)
        k -= 1
    return math.ldexp(mant * math.fsum(terms), expo)


def gaussian_tail(x: float) -> float:
    """Upper tail P[Z > x] of the standard normal, for x >= 0.

    Computed as erfc(x / sqrt(2)) / 2; the platform erfc is the usual
    rational-approximation implementation, good to a few ULP here.
    """
    if x < 0:
        raise UsageError("gaussian_tail is defined for x >= 0")
    return 0.5 * math.erfc(x / math.sqrt(2.0))


@dataclass(frozen=True)
class SupercriticalCertificate:
    """Witness that level spacing ell embeds a supercritical process."""

    ell: int
    tail: float
    mean_offspring: float  # b**ell * tail, > 1


def certify_supercritical(b: int, r: float, ell_max: int) -> SupercriticalCertificate | None:
    """Smallest ell in 1..ell_max with gaussian_tail(sqrt(2 r ell)) > b**-ell.

    This is the large-j limit of the binomial comparison; since r < log(b)
    some ell always works once ell_max is raised far enough.  Returns None if
    none is found below the cap.
    """
    if b < 2:
        raise UsageError("branching factor must be >= 2")
    if not 0 < r < math.log(b):
        raise UsageError("need 0 < r < log(b)")
    for ell in range(1, ell_max + 1):
        tail = gaussian_tail(math.sqrt(2.0 * r * ell))
        if tail > float(b) ** -ell:
            return SupercriticalCertificate(ell, tail, b**ell * tail)
    return None


def _generation_counts(law: OffspringLaw, generations: int, replicas: int, seed: int) -> np.ndarray:
    """Population size of each replica after ``generations`` generations.

    Tracks counts only: each generation draws, per replica, a conditional-
    binomial split of the population over the support.  The generator is
    Philox keyed with the derived seed (counter-based, reproducible).
    """
    gen = np.random.Generator(np.random.Philox(key=rng.replica_seed(seed, 0)))
    sizes = np.ones(replicas, dtype=np.int64)
    probs = [p for _, p in law.support]
    counts = [c for c, _ in law.support]
    for _ in range(generations):
        alive = sizes > 0
        if not alive.any():
            break
        nxt = np.zeros_like(sizes)
        remaining = sizes.copy()
        prob_left = 1.0
        for c, p in zip(counts[:-1], probs[:-1]):
            frac = 0.0 if prob_left <= 0 else min(1.0, p / prob_left)
            take = gen.binomial(remaining, frac)
            nxt += take * c
            remaining -= take
            prob_left -= p
        nxt += remaining * counts[-1]
        sizes = nxt
    return sizes


def simulate_gw_survival(
    law: OffspringLaw, generations: int, replicas: int, seed: int = 0
) -> float:
    """Empirical probability the process is alive at ``generations``.

    For mean offspring > 1 this approaches 1 minus the smallest fixed point
    of the generating function as generations grow.
    """
    if generations < 1:
        raise UsageError("generations must be >= 1")
    if replicas < 1:
        raise UsageError("replicas must be >= 1")
    # counts (not trees) are tracked, so the only explosion risk is int64
    # overflow of a replica's population size
    mean = law.mean()
    if mean > 1.0 and generations * math.log(mean) > 62 * math.log(2.0):
        raise CapacityError(
            "expected population overflows the 64-bit count tracker; reduce generations"
        )
    sizes = _generation_counts(law, generations, replicas, seed)
    return float((sizes > 0).mean())
