"""Closed-form moments for the intercept-only versus one-covariate comparison.

For an even-sized balanced design whose sole covariate is half +1 / half -1,
with one possibly outlying observation at a +1 design point, the moments of
the predictive-accuracy difference, of its leave-one-out estimate, and of
the estimation error reduce to rational functions of n.  This module
evaluates those rational functions directly, independent of the general
matrix machinery, and provides the large-n limits.

All expressions are evaluated in factored form with log1p for the
logarithmic constants, so they remain accurate for n up to about 1e6.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .quadform import Moments

__all__ = [
    "OneCovConfig",
    "Limit",
    "error_moments",
    "elpd_moments",
    "loocv_moments",
    "asymptotic_limits",
]


class Limit(enum.Enum):
    """Marker for asymptotic values that diverge instead of converging."""

    NEG_INF = "diverges to -infinity"


@dataclass(frozen=True)
class OneCovConfig:
    """Problem parameters for the one-covariate comparison.

    ``beta1`` is the true effect of the non-shared covariate, ``m_star`` the
    mean shift of the single outlier (placed at a +1 design point),
    ``s_star`` the true residual standard deviation, and ``tau`` the fixed
    model standard deviation.
    """

    n: int
    beta1: float = 0.0
    m_star: float = 0.0
    s_star: float = 1.0
    tau: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 4 or self.n % 2 != 0:
            raise ValueError(f"n must be even and >= 4, got {self.n}")
        if not self.s_star > 0.0:
            raise ValueError("s_star must be positive")
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")


def _skew(variance: float, third: float) -> float | None:
    if variance <= 0.0:
        return None
    return third / (variance * math.sqrt(variance))


def elpd_moments(cfg: OneCovConfig) -> Moments:
    """Mean and variance of the exact predictive-accuracy difference.

    The third moment has no published closed form here, so the result is
    partial (third_central and skewness are None).  The variance depends
    only on s_star and tau.
    """
    n = float(cfg.n)
    b1, ms, ss, t2 = cfg.beta1, cfg.m_star, cfg.s_star, cfg.tau**2

    p11 = -(n**2) / (2.0 * (n + 1.0))
    q10 = -n / (n + 1.0)
    r1m1 = -n / ((n + 2.0) * (n + 1.0))
    f1 = 0.5 * n * math.log1p(1.0 / (n + 1.0))
    mean = (p11 * b1**2 + q10 * b1 * ms + r1m1 * ms**2) / t2 + f1

    s20 = n**2 * (n**2 + 2.0 * n + 2.0) / (2.0 * (n + 1.0) ** 2 * (n + 2.0) ** 2)
    variance = s20 * ss**4 / t2**2
    return Moments(mean=mean, variance=variance)


def loocv_moments(cfg: OneCovConfig) -> Moments:
    """Mean and variance of the exact LOO-CV difference estimate (partial)."""
    n = float(cfg.n)
    b1, ms, ss, t2 = cfg.beta1, cfg.m_star, cfg.s_star, cfg.tau**2

    p11 = -(n**2) / (2.0 * (n - 1.0))
    q10 = -n / (n - 1.0)
    f1 = 0.5 * n * math.log1p(1.0 / (n - 2.0))
    mean = (p11 * b1**2 + q10 * b1 * ms) / t2 + f1

    p21 = n**3 / (n - 1.0) ** 2
    q20 = 2.0 * n**2 / (n - 1.0) ** 2
    r2m1 = n / ((n - 2.0) * (n - 1.0))
    s20 = n**2 / (2.0 * (n - 2.0) * (n - 1.0))
    variance = (p21 * b1**2 * ss**2 + q20 * b1 * ms * ss**2 + r2m1 * ms**2 * ss**2 + s20 * ss**4) / t2**2
    return Moments(mean=mean, variance=variance)


def _error_second_rationals(n: float) -> tuple[float, float, float, float]:
    p21 = n**3 / (n - 1.0) ** 2
    q20 = 2.0 * n**2 / (n - 1.0) ** 2
    r2m1 = n / ((n - 1.0) * (n - 2.0))
    s20 = (
        n**3
        * (4.0 * n**3 + 9.0 * n**2 + 5.0 * n - 6.0)
        / (2.0 * (n + 2.0) ** 2 * (n + 1.0) ** 2 * (n - 1.0) * (n - 2.0))
    )
    return p21, q20, r2m1, s20


def _error_third_rationals(n: float) -> tuple[float, float, float, float]:
    p31 = -3.0 * n**4 * (2.0 * n + 1.0) / ((n + 2.0) * (n - 1.0) ** 3)
    q30 = -6.0 * n**3 * (2.0 * n + 1.0) / ((n + 2.0) * (n - 1.0) ** 3)
    r3m1 = -3.0 * n**2 * (2.0 * n**2 - 5.0 * n - 2.0) / ((n - 2.0) ** 2 * (n - 1.0) ** 2 * (n + 2.0))
    s30 = (
        -(n**4)
        * (8.0 * n**6 + 12.0 * n**5 - 35.0 * n**4 - 102.0 * n**3 - 83.0 * n**2 - 36.0 * n + 20.0)
        / ((n + 2.0) ** 3 * (n + 1.0) ** 3 * (n - 1.0) ** 2 * (n - 2.0) ** 2)
    )
    return p31, q30, r3m1, s30


def error_moments(cfg: OneCovConfig) -> Moments:
    """All three moments of the LOO-CV estimation error.

    The skewness does not depend on tau: the second and third moments scale
    as tau^-4 and tau^-6 respectively and the ratio cancels exactly.
    """
    n = float(cfg.n)
    b1, ms, ss, t2 = cfg.beta1, cfg.m_star, cfg.s_star, cfg.tau**2

    p10 = -(n**2) / ((n + 1.0) * (n - 1.0))
    q1m1 = -2.0 * n / ((n + 1.0) * (n - 1.0))
    r1m1 = n / ((n + 2.0) * (n + 1.0))
    # (n/2) log((n+1)(n-1) / ((n+2)(n-2))) = (n/2) log1p(3 / (n^2 - 4))
    f1 = 0.5 * n * math.log1p(3.0 / (n**2 - 4.0))
    mean = (p10 * b1**2 + q1m1 * b1 * ms + r1m1 * ms**2) / t2 + f1

    p21, q20, r2m1, s20 = _error_second_rationals(n)
    variance = (p21 * b1**2 * ss**2 + q20 * b1 * ms * ss**2 + r2m1 * ms**2 * ss**2 + s20 * ss**4) / t2**2

    p31, q30, r3m1, s30 = _error_third_rationals(n)
    third = (p31 * b1**2 * ss**4 + q30 * b1 * ms * ss**4 + r3m1 * ms**2 * ss**4 + s30 * ss**6) / t2**3

    return Moments(mean=mean, variance=variance, third_central=third, skewness=_skew(variance, third))


def error_skewness_large_residual_sd(n: int) -> float:
    """Limit of the error skewness as s_star grows, at fixed even n.

    Equals S3(n) / S2(n)^{3/2} and approaches -2^{3/2} from below as n grows.
    """
    if n < 4 or n % 2 != 0:
        raise ValueError(f"n must be even and >= 4, got {n}")
    nf = float(n)
    _, _, _, s20 = _error_second_rationals(nf)
    _, _, _, s30 = _error_third_rationals(nf)
    return s30 / (s20 * math.sqrt(s20))


def asymptotic_limits(cfg: OneCovConfig) -> dict[str, float | Limit]:
    """Large-n limits of the relative means and of the error skewness.

    With beta1 = 0 the relative means of the estimate and of its target both
    converge to tau^2 / (sqrt(2) s_star^2) and the error skewness to
    -2^{3/2}; with beta1 != 0 the relative means diverge to -infinity
    (reported as Limit.NEG_INF) and the skewness vanishes.  The relative
    mean of the error converges to zero regardless.
    """
    if cfg.beta1 == 0.0:
        rel = cfg.tau**2 / (math.sqrt(2.0) * cfg.s_star**2)
        return {
            "rel_mean_elpdhat": rel,
            "rel_mean_elpd": rel,
            "rel_mean_error": 0.0,
            "skew_error": -(2.0**1.5),
        }
    return {
        "rel_mean_elpdhat": Limit.NEG_INF,
        "rel_mean_elpd": Limit.NEG_INF,
        "rel_mean_error": 0.0,
        "skew_error": 0.0,
    }
