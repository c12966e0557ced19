"""Quadratic forms of correlated Gaussian vectors.

Exact machinery for random variables of the form

    Z = eps' A eps + b' eps + c,      eps ~ N(mu, Sigma),

with Sigma positive definite: closed-form mean/variance/third central
moment/skewness, a reparametrisation of Z as a constant plus a sum of
independent scaled non-central chi-square(1) variables, direct evaluation,
and a seeded Monte Carlo sampler that serves as an independent oracle for
the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "QuadraticForm",
    "GaussianLaw",
    "Moments",
    "SpectralForm",
    "SpectralDecompositionError",
    "evaluate",
    "moments",
    "spectral_form",
    "sample",
]

# Relative cutoff below which an eigenvalue of Sigma^{1/2} A Sigma^{1/2}
# counts as zero when building the non-central chi-square representation.
EIGENVALUE_ZERO_RTOL = 1e-10

# Relative cutoff for the component of the transformed linear term lying
# outside the column space of the quadratic part.  Components larger than
# this cannot be absorbed and the decomposition is refused.
LINEAR_RESIDUAL_RTOL = 1e-8

_SAMPLE_CHUNK = 100_000


class SpectralDecompositionError(ValueError):
    """The linear term cannot be absorbed into the quadratic part."""


@dataclass(frozen=True)
class QuadraticForm:
    """The triple (A, b, c) defining Z = eps' A eps + b' eps + c.

    A need not be symmetric; every operation symmetrises it internally,
    which leaves the value of the form unchanged.
    """

    a: np.ndarray
    b: np.ndarray
    c: float

    def __post_init__(self) -> None:
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"A must be square, got shape {a.shape}")
        if b.ndim != 1 or b.shape[0] != a.shape[0]:
            raise ValueError(f"b must be a vector of length {a.shape[0]}, got shape {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and math.isfinite(self.c)):
            raise ValueError("A, b, c must all be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @cached_property
    def a_sym(self) -> np.ndarray:
        """(A + A') / 2; defines the same form as A."""
        return (self.a + self.a.T) / 2.0


@dataclass(frozen=True)
class GaussianLaw:
    """Residual law eps ~ N(mu, sigma) with sigma symmetric positive definite."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if mu.ndim != 1:
            raise ValueError("mu must be a vector")
        if sigma.shape != (mu.shape[0], mu.shape[0]):
            raise ValueError(f"sigma must be {mu.shape[0]}x{mu.shape[0]}, got {sigma.shape}")
        scale = np.abs(sigma).max()
        if scale == 0.0 or np.abs(sigma - sigma.T).max() > 1e-12 * scale:
            raise ValueError("sigma must be symmetric within 1e-12 relative")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", (sigma + sigma.T) / 2.0)
        if np.min(self._eigvals) <= 0.0:
            raise ValueError("sigma must be positive definite")

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @cached_property
    def _eig(self) -> tuple[np.ndarray, np.ndarray]:
        w, v = np.linalg.eigh(self.sigma)
        return w, v

    @property
    def _eigvals(self) -> np.ndarray:
        return self._eig[0]

    @cached_property
    def sqrt_sigma(self) -> np.ndarray:
        """Unique symmetric square root of sigma (via eigendecomposition)."""
        w, v = self._eig
        return (v * np.sqrt(w)) @ v.T

    @cached_property
    def sigma_diag_sqrt(self) -> np.ndarray:
        """Per-coordinate standard deviations, sqrt(diag(sigma))."""
        return np.sqrt(np.diag(self.sigma))


@dataclass(frozen=True)
class Moments:
    """First three moments of a scalar random variable.

    ``third_central`` and ``skewness`` are None when not available
    (partial results) and ``skewness`` is None when the variance is zero.
    """

    mean: float
    variance: float
    third_central: float | None = None
    skewness: float | None = None

    def allclose(self, other: "Moments", rtol: float = 1e-8) -> bool:
        """Relative agreement of all populated moments."""

        def close(x: float | None, y: float | None) -> bool:
            if x is None or y is None:
                return (x is None) == (y is None)
            return math.isclose(x, y, rel_tol=rtol, abs_tol=rtol)

        return (
            close(self.mean, other.mean)
            and close(self.variance, other.variance)
            and close(self.third_central, other.third_central)
            and close(self.skewness, other.skewness)
        )


def _skewness(variance: float, third_central: float) -> float | None:
    if variance <= 0.0:
        return None
    # m2 * sqrt(m2) rather than m2**1.5: exact under power-of-two scaling.
    return third_central / (variance * math.sqrt(variance))


@dataclass(frozen=True)
class SpectralForm:
    """Z = sum_i lambdas[i] * g_i^2 + constant, g_i ~ N(noncentral_means[i], 1) indep."""

    lambdas: np.ndarray
    noncentral_means: np.ndarray
    constant: float

    def moments(self) -> Moments:
        """Moments recovered from the non-central chi-square representation."""
        lam = self.lambdas
        delta = self.noncentral_means**2
        mean = float(np.sum(lam * (1.0 + delta)) + self.constant)
        variance = float(np.sum(2.0 * lam**2 * (1.0 + 2.0 * delta)))
        third = float(np.sum(8.0 * lam**3 * (1.0 + 3.0 * delta)))
        return Moments(mean, variance, third, _skewness(variance, third))


def _check_dims(qf: QuadraticForm, law: GaussianLaw) -> None:
    if qf.dim != law.dim:
        raise ValueError(f"dimension mismatch: form has n={qf.dim}, law has n={law.dim}")


def evaluate(qf: QuadraticForm, eps: np.ndarray) -> float:
    """Evaluate eps' A eps + b' eps + c for a single vector eps."""
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (qf.dim,):
        raise ValueError(f"eps must have shape ({qf.dim},), got {eps.shape}")
    return float(eps @ qf.a @ eps + qf.b @ eps + qf.c)


def moments(qf: QuadraticForm, law: GaussianLaw) -> Moments:
    """Exact mean, variance, third central moment, and skewness of Z.

    With M = Sigma^{1/2} A Sigma^{1/2} (A symmetrised) and
    u = Sigma^{1/2} (b + 2 A mu):

        mean     = tr(M) + c + b'mu + mu'A mu
        variance = 2 tr(M^2) + |u|^2
        third    = 8 tr(M^3) + 6 u'M u
    """
    _check_dims(qf, law)
    a = qf.a_sym
    s = law.sqrt_sigma
    mu = law.mu
    m = s @ a @ s
    u = s @ (qf.b + 2.0 * (a @ mu))

    mean = float(np.trace(m) + qf.c + qf.b @ mu + mu @ a @ mu)
    variance = float(2.0 * np.sum(m * m) + u @ u)
    mm = m @ m
    third = float(8.0 * np.sum(mm * m) + 6.0 * (u @ m @ u))
    return Moments(mean, variance, third, _skewness(variance, third))


def spectral_form(qf: QuadraticForm, law: GaussianLaw) -> SpectralForm:
    """Represent Z as a constant plus independent scaled non-central chi-squares.

    Standardising eps and completing the square turns Z into
    sum over nonzero eigenvalues lambda_i of M = Sigma^{1/2} A Sigma^{1/2}
    of lambda_i g_i^2 plus d, where g_i ~ N(q_i / (2 lambda_i), 1) with
    q = Q' u, and d = c~ - (1/4) u' M^+ u.

    Raises SpectralDecompositionError when the transformed linear term has a
    component outside the column space of M (including the pure linear case
    M = 0, u != 0), for which the representation does not exist.
    """
    _check_dims(qf, law)
    a = qf.a_sym
    s = law.sqrt_sigma
    mu = law.mu
    m = s @ a @ s
    u = s @ (qf.b + 2.0 * (a @ mu))
    c_tilde = float(qf.c + qf.b @ mu + mu @ a @ mu)

    lam, q_mat = np.linalg.eigh(m)
    lam_scale = np.abs(lam).max() if lam.size else 0.0
    nonzero = np.abs(lam) > EIGENVALUE_ZERO_RTOL * lam_scale if lam_scale > 0.0 else np.zeros_like(lam, dtype=bool)

    q = q_mat.T @ u
    u_scale = float(np.linalg.norm(u))
    residual = float(np.linalg.norm(q[~nonzero])) if u_scale > 0.0 else 0.0
    if u_scale > 0.0 and residual > LINEAR_RESIDUAL_RTOL * u_scale:
        if lam_scale == 0.0:
            raise SpectralDecompositionError(
                "pure linear form: quadratic part vanishes but the linear term does not"
            )
        raise SpectralDecompositionError(
            "linear term has a component outside the column space of the quadratic part"
        )

    lam_nz = lam[nonzero]
    q_nz = q[nonzero]
    d = c_tilde - 0.25 * float(np.sum(q_nz**2 / lam_nz))
    order = np.argsort(-lam_nz)
    lam_nz = lam_nz[order]
    means = q_nz[order] / (2.0 * lam_nz) if lam_nz.size else np.empty(0)
    return SpectralForm(lambdas=lam_nz, noncentral_means=means, constant=d)


def sample(
    qf: QuadraticForm,
    law: GaussianLaw,
    n_draws: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw i.i.d. realisations of Z with eps = mu + Sigma^{1/2} g, g ~ N(0, I).

    Deterministic given the generator state; chunked so large n_draws do not
    materialise the full (n_draws, n) residual matrix at once.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    _check_dims(qf, law)
    a = qf.a_sym
    s = law.sqrt_sigma
    out = np.empty(n_draws)
    pos = 0
    while pos < n_draws:
        count = min(_SAMPLE_CHUNK, n_draws - pos)
        g = rng.standard_normal((count, law.dim))
        eps = law.mu + g @ s  # s symmetric, so g @ s == (s @ g')'
        out[pos : pos + count] = np.einsum("ni,ni->n", eps @ a, eps) + eps @ qf.b + qf.c
        pos += count
    return out
