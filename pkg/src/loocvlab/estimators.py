"""Practical uncertainty estimators for paired pointwise comparison terms.

Given the per-observation differences of two models' cross-validation log
densities, this module provides the summed difference estimate, its naive
standard error, the normal approximation to the uncertainty, the Bayesian
bootstrap (flat Dirichlet weights), probability-integral-transform values
against either approximation, and the exact variance/bias identities for
the naive estimator under dependent terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

__all__ = [
    "NormalApprox",
    "BBSample",
    "CovStructure",
    "elpd_hat_diff",
    "se_hat",
    "normal_uncertainty",
    "prob_a_better",
    "bb_uncertainty",
    "pit",
    "var_identities",
]

DEFAULT_BB_DRAWS = 2000


@dataclass(frozen=True)
class NormalApprox:
    """N(center, scale) uncertainty about the true difference."""

    center: float
    scale: float

    def __post_init__(self) -> None:
        if self.scale < 0.0:
            raise ValueError("scale must be nonnegative")


@dataclass(frozen=True)
class BBSample:
    """Bayesian bootstrap draws of the weighted-sum statistic."""

    draws: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "draws", np.asarray(self.draws, dtype=float))

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]


@dataclass(frozen=True)
class CovStructure:
    """Variance/covariance structure of the pointwise difference terms.

    ``sigma2_ab`` is the per-term variance and ``gamma_ab`` the common
    covariance between distinct terms.
    """

    sigma2_ab: float
    gamma_ab: float
    n: int

    def __post_init__(self) -> None:
        if self.sigma2_ab < 0.0:
            raise ValueError("sigma2_ab must be nonnegative")

    @classmethod
    def from_components(
        cls,
        n: int,
        sigma2_a: float,
        sigma2_b: float,
        rho_ab: float,
        gamma_a: float,
        gamma_b: float,
        gamma_ab: float,
    ) -> "CovStructure":
        """Assemble the difference structure from per-model (co)variances."""
        return cls(
            sigma2_ab=sigma2_a + sigma2_b - 2.0 * rho_ab,
            gamma_ab=gamma_a + gamma_b - 2.0 * gamma_ab,
            n=n,
        )


def elpd_hat_diff(terms: np.ndarray) -> float:
    """Sum of the pointwise differences: the comparison estimate itself."""
    return float(np.sum(np.asarray(terms, dtype=float)))


def se_hat(terms: np.ndarray) -> float:
    """Naive standard error sqrt(n/(n-1) * sum (d_i - dbar)^2)."""
    terms = np.asarray(terms, dtype=float)
    n = terms.shape[0]
    if n < 2:
        raise ValueError("need at least two terms for a standard error")
    centered = terms - terms.mean()
    return math.sqrt(n / (n - 1) * float(centered @ centered))


def normal_uncertainty(terms: np.ndarray) -> NormalApprox:
    """Normal approximation centered at the estimate with the naive SE."""
    return NormalApprox(center=elpd_hat_diff(terms), scale=se_hat(terms))


def prob_a_better(approx: NormalApprox) -> float:
    """P(difference > 0) under the normal approximation."""
    if approx.scale == 0.0:
        if approx.center > 0.0:
            return 1.0
        return 0.0 if approx.center < 0.0 else 0.5
    return float(norm.cdf(approx.center / approx.scale))


def bb_uncertainty(
    terms: np.ndarray,
    n_draws: int = DEFAULT_BB_DRAWS,
    rng: np.random.Generator | None = None,
) -> BBSample:
    """Bayesian bootstrap: n * sum_i w_i d_i with w ~ Dirichlet(1, ..., 1).

    Flat Dirichlet weights are drawn as normalised unit exponentials; the n
    factor matches the location of the sum-form estimate.
    """
    terms = np.asarray(terms, dtype=float)
    n = terms.shape[0]
    if n < 1:
        raise ValueError("need at least one term")
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    w = rng.standard_exponential((n_draws, n))
    w /= w.sum(axis=1, keepdims=True)
    return BBSample(draws=n * (w @ terms))


def pit(approx: NormalApprox | BBSample, target: float) -> float:
    """Probability integral transform of ``target`` under the approximation.

    Normal: Phi((target - center)/scale), degenerating to a step function
    when the scale is zero.  Bayesian bootstrap: mid-rank empirical CDF of
    the draws, which avoids saturating at exactly 0/1 on ties.
    """
    if isinstance(approx, NormalApprox):
        if approx.scale == 0.0:
            if target < approx.center:
                return 0.0
            return 1.0 if target > approx.center else 0.5
        return float(norm.cdf((target - approx.center) / approx.scale))
    draws = approx.draws
    below = float(np.count_nonzero(draws < target))
    equal = float(np.count_nonzero(draws == target))
    return (below + 0.5 * equal) / draws.shape[0]


def var_identities(cov: CovStructure) -> dict[str, float]:
    """Exact identities for the naive squared-SE estimator under dependence.

    true_var is the variance of the summed terms, naive_expectation the
    expected squared naive SE, and bias their difference -n^2 gamma.
    """
    n = float(cov.n)
    true_var = n * cov.sigma2_ab + n * (n - 1.0) * cov.gamma_ab
    naive_expectation = n * cov.sigma2_ab - n * cov.gamma_ab
    return {
        "true_var": true_var,
        "naive_expectation": naive_expectation,
        "bias": -(n**2) * cov.gamma_ab,
    }
