"""Laplace and Gaussian noisy-threshold baselines, plus utility summaries.

The midpoint (smallest count kept with probability at least one half) is the
headline utility number used to compare strategies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from scipy import optimize, stats

from .params import PrivacyParams

_norm = stats.norm


@dataclass(frozen=True)
class LaplacePrimitive:
    """Keep a partition when its Laplace-noised count clears a fixed threshold."""

    epsilon: float
    delta: float
    threshold: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        object.__setattr__(self, "threshold", 1.0 - math.log(2.0 * self.delta) / self.epsilon)

    @classmethod
    def from_params(cls, params: PrivacyParams) -> LaplacePrimitive:
        return cls(params.effective_epsilon, params.effective_delta)


def pi_laplace(prim: LaplacePrimitive, n: float) -> float:
    """Keep probability for count ``n``; zero at n = 0 (absent partitions never appear)."""
    if n < 0:
        raise ValueError(f"count must be >= 0, got {n}")
    if n == 0:
        return 0.0
    gap = prim.threshold - n
    if gap >= 0.0:
        return 0.5 * math.exp(-prim.epsilon * gap)
    return 1.0 - 0.5 * math.exp(prim.epsilon * gap)


def keep_laplace(prim: LaplacePrimitive, n: float, rng) -> bool:
    """Sampled form of :func:`pi_laplace`: keep iff n + Lap(1/eps) reaches the threshold."""
    if n < 0:
        raise ValueError(f"count must be >= 0, got {n}")
    if n == 0:
        return False
    return n + rng.laplace(0.0, 1.0 / prim.epsilon) >= prim.threshold


@dataclass(frozen=True)
class GaussianPrimitive:
    """Gaussian-noise thresholding sized for a user touching ``kappa`` partitions."""

    epsilon: float
    delta_noise: float
    delta_threshold: float
    sigma: float
    threshold: float
    kappa: int


def _log_delta_gaussian(sigma: float, epsilon: float, sensitivity: float) -> float:
    """log of the privacy profile delta(sigma) of the Gaussian mechanism."""
    a = sensitivity / (2.0 * sigma)
    b = epsilon * sigma / sensitivity
    x = float(_norm.logcdf(a - b))
    y = epsilon + float(_norm.logcdf(-a - b))
    if y >= x:
        return -math.inf
    return x + math.log1p(-math.exp(y - x))


def calibrate_gaussian_sigma(
    epsilon: float, delta: float, sensitivity: float, tol: float = 1e-12
) -> float:
    """Smallest Gaussian noise scale that is (epsilon, delta)-DP at this L2 sensitivity.

    Args:
        epsilon: privacy parameter, > 0.
        delta: privacy parameter, in (0, 1).
        sensitivity: L2 sensitivity of the noised statistic, > 0.
        tol: absolute tolerance of the root find.

    Returns:
        The calibrated standard deviation.

    Raises:
        ValueError: if the parameters are invalid or the privacy-profile
            equation cannot be bracketed.
    """
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    if not sensitivity > 0.0:
        raise ValueError(f"sensitivity must be > 0, got {sensitivity}")
    target = math.log(delta)
    # The profile is decreasing in sigma: expand until the target is bracketed.
    lo = hi = float(sensitivity)
    for _ in range(200):
        if _log_delta_gaussian(lo, epsilon, sensitivity) > target:
            break
        lo /= 2.0
    else:
        raise ValueError("gaussian calibration failed: could not bracket sigma from below")
    for _ in range(200):
        if _log_delta_gaussian(hi, epsilon, sensitivity) < target:
            break
        hi *= 2.0
    else:
        raise ValueError("gaussian calibration failed: could not bracket sigma from above")
    return float(
        optimize.brentq(
            lambda s: _log_delta_gaussian(s, epsilon, sensitivity) - target,
            lo,
            hi,
            xtol=tol,
            rtol=8.9e-16,
        )
    )


def gaussian_primitive(params: PrivacyParams, kappa: int) -> GaussianPrimitive:
    """Split delta between noise and thresholding to minimize the threshold.

    The noise covers ``kappa`` simultaneous unit count changes (L2 sensitivity
    sqrt(kappa)); the threshold is placed so the chance that any of the kappa
    noised empty counts clears it stays within the thresholding share of
    delta. The split is found by golden-section search over the log split
    fraction; the objective is empirically unimodal.
    """
    eps, delta = params.effective_epsilon, params.effective_delta
    if not eps > 0.0:
        raise ValueError("effective epsilon must be > 0")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"effective delta must be in (0, 1), got {delta}")
    if not isinstance(kappa, int) or isinstance(kappa, bool) or kappa < 1:
        raise ValueError(f"kappa must be a positive integer, got {kappa!r}")
    sensitivity = math.sqrt(kappa)

    def build(log_fraction: float) -> GaussianPrimitive:
        fraction = math.exp(log_fraction)
        delta_noise = fraction * delta
        delta_threshold = delta - delta_noise
        sigma = calibrate_gaussian_sigma(eps, delta_noise, sensitivity)
        # per-count tail bound: 1 - (1 - delta_threshold)^(1/kappa)
        tail = -math.expm1(math.log1p(-delta_threshold) / kappa)
        threshold = 1.0 + sigma * float(_norm.isf(tail))
        return GaussianPrimitive(eps, delta_noise, delta_threshold, sigma, threshold, kappa)

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(1e-9), math.log1p(-1e-9)
    c1 = b - invphi * (b - a)
    c2 = a + invphi * (b - a)
    f1 = build(c1).threshold
    f2 = build(c2).threshold
    for _ in range(64):
        if f1 <= f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - invphi * (b - a)
            f1 = build(c1).threshold
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + invphi * (b - a)
            f2 = build(c2).threshold
    return build((a + b) / 2.0)


def pi_gaussian(prim: GaussianPrimitive, n: float) -> float:
    """Keep probability for count ``n``; zero at n = 0."""
    if n < 0:
        raise ValueError(f"count must be >= 0, got {n}")
    if n == 0:
        return 0.0
    return float(_norm.sf((prim.threshold - n) / prim.sigma))


def percentile_n(pi: Callable[[int], float], q: float, *, upper: int | None = None) -> int:
    """Smallest count n >= 1 with pi(n) >= q, for nondecreasing pi.

    Exponential growth to bracket, then binary search. ``upper`` bounds the
    search for primitives that approach 1 only asymptotically.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q}")
    hard = int(upper) if upper is not None else 2**62
    if hard < 1:
        raise ValueError(f"upper must be >= 1, got {upper}")
    if pi(1) >= q:
        return 1
    lo, hi = 1, 2
    while hi < hard and pi(hi) < q:
        lo, hi = hi, hi * 2
    if hi >= hard:
        hi = hard
        if pi(hi) < q:
            raise ValueError(f"pi never reaches {q} within the search bound {hard}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pi(mid) >= q:
            hi = mid
        else:
            lo = mid
    return hi


def midpoint(pi: Callable[[int], float], *, upper: int | None = None) -> int:
    """Smallest count kept with probability at least one half."""
    return percentile_n(pi, 0.5, upper=upper)
