"""Two-sided geometric noise conditioned on [-k, k], and count thresholding with it.

Adding this noise to a sensitivity-1 integer count and releasing the count
only when the noisy value exceeds k reproduces the optimal selection
primitive exactly whenever the budget makes the truncation bound an integer;
otherwise the integer ceiling spends slightly less delta and the release
probability is marginally lower.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .params import PrivacyParams
from .primitive import _snap, crossover_exponent

# Above this bound the inverse-transform table is too large; fall back to
# rejection from the untruncated two-sided geometric (acceptance ~ 1 - 2*delta).
_INVERSION_LIMIT = 10**6


@dataclass(frozen=True)
class TsgdParams:
    """Success probability ``p`` and truncation bound ``k``; ``c`` normalizes the pmf."""

    p: float
    k: int
    c: float = field(init=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must be in (0, 1), got {self.p}")
        if not isinstance(self.k, int) or isinstance(self.k, bool) or self.k < 1:
            raise ValueError(f"k must be an integer >= 1, got {self.k!r}")
        q = 1.0 - self.p
        object.__setattr__(self, "c", self.p / (1.0 + q - 2.0 * q ** (self.k + 1)))

    @property
    def eps(self) -> float:
        """The epsilon this noise corresponds to: p = 1 - e^-eps."""
        return -math.log1p(-self.p)

    @property
    def delta_effective(self) -> float:
        """P(X = k): the delta actually consumed after rounding k up to an integer."""
        return self.c * (1.0 - self.p) ** self.k

    @cached_property
    def _cdf(self) -> np.ndarray:
        # Closed-form partial sums per outcome; every factor stays in [0, 1]
        # so no intermediate can overflow regardless of k * eps.
        if self.k > _INVERSION_LIMIT:
            raise ValueError("inverse-transform table too large; sampling falls back to rejection")
        eps = self.eps
        xs = np.arange(-self.k, self.k + 1, dtype=np.float64)
        ratio = self.c / self.p
        cdf = np.empty(xs.shape, dtype=np.float64)
        neg = xs < 0
        cdf[neg] = ratio * np.exp(xs[neg] * eps) * -np.expm1(-(self.k + 1.0 + xs[neg]) * eps)
        pos = ~neg
        cdf[pos] = 1.0 + ratio * np.exp(-(xs[pos] + 1.0) * eps) * np.expm1(-(self.k - xs[pos]) * eps)
        cdf[-1] = 1.0
        return cdf


def tsgd_params(params: PrivacyParams) -> TsgdParams:
    """Noise parameters for a sensitivity-1 count under the given budget.

    The truncation bound is the integer ceiling of the crossover exponent, so
    the probability mass parked at +-k never exceeds the delta budget; the
    leftover shows up as a slightly smaller :attr:`TsgdParams.delta_effective`.
    """
    eps, delta = params.effective_epsilon, params.effective_delta
    if eps <= 0.0:
        raise ValueError("effective epsilon must be > 0 to derive noise parameters")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"effective delta must be in (0, 1), got {delta}")
    p = -math.expm1(-eps)
    if p >= 1.0:  # eps >= ~38 rounds the success probability to exactly 1
        raise ValueError(f"epsilon {eps} too large to represent the noise distribution in binary64")
    k = max(1, math.ceil(_snap(crossover_exponent(eps, delta))))
    return TsgdParams(p=p, k=k)


def delta_for_exact_threshold(epsilon: float, k: int) -> float:
    """The delta at which the truncation bound for ``epsilon`` is exactly ``k``.

    At such budgets, thresholding the noisy count reproduces the optimal
    primitive with no slack.
    """
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if (k + 1) * epsilon > 700.0:
        # e^(k*eps) would overflow; (e^eps - 1)/(e^eps + 1) is safe in logs
        half = math.exp(-epsilon)
        return math.exp(math.log1p(-2.0 * half / (1.0 + half)) - k * epsilon)
    denom = math.exp(k * epsilon) * (math.exp(epsilon) + 1.0) - 2.0
    return math.expm1(epsilon) / denom


def tsgd_pmf(t: TsgdParams, x: int) -> float:
    """P(X = x): c * (1-p)^|x| on [-k, k], zero outside."""
    if abs(x) > t.k:
        return 0.0
    return t.c * (1.0 - t.p) ** abs(x)


def _tail_from_below(t: TsgdParams, a: int) -> float:
    # delta_effective * (e^(a*eps) - 1) / (e^eps - 1), rearranged so every
    # factor is bounded: (c/p) * e^(-(k+1-a)*eps) * (1 - e^(-a*eps)).
    eps = t.eps
    return (t.c / t.p) * math.exp(-(t.k + 1.0 - a) * eps) * -math.expm1(-a * eps)


def tsgd_tail(t: TsgdParams, mu: int, y: int) -> float:
    """P(mu + X >= y): tail CDF of a noisy count, in closed form."""
    if mu < y - t.k:
        return 0.0
    if mu >= y + t.k:
        return 1.0
    if mu <= y:
        return min(1.0, _tail_from_below(t, mu + t.k + 1 - y))
    return max(0.0, 1.0 - _tail_from_below(t, t.k + y - mu))


def tsgd_sample(t: TsgdParams, rng: np.random.Generator) -> int:
    """One draw, by inverse transform over the 2k+1 outcomes."""
    if t.k > _INVERSION_LIMIT:
        return _sample_rejection(t, rng)
    return int(np.searchsorted(t._cdf, rng.random(), side="right")) - t.k


def tsgd_sample_many(t: TsgdParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized draws sharing one generator."""
    if t.k > _INVERSION_LIMIT:
        return np.array([_sample_rejection(t, rng) for _ in range(size)], dtype=np.int64)
    idx = np.searchsorted(t._cdf, rng.random(size), side="right")
    return idx.astype(np.int64) - t.k


def _sample_rejection(t: TsgdParams, rng: np.random.Generator) -> int:
    # The difference of two geometrics is the untruncated two-sided
    # distribution; the truncation discards only ~2 * delta of its mass.
    while True:
        d = int(rng.geometric(t.p)) - int(rng.geometric(t.p))
        if abs(d) <= t.k:
            return d


def selection_prob_via_threshold(params: PrivacyParams, n: int) -> float:
    """Keep probability realized by noising count ``n`` and thresholding at k."""
    if n < 0:
        raise ValueError(f"count must be >= 0, got {n}")
    t = tsgd_params(params)
    return tsgd_tail(t, n, t.k + 1)
