"""Analytic score priors: noisy log-densities and their exact gradients.

A score prior exposes the gradient of the log-density of its *noised*
distribution: if p is the base distribution and p_sigma its convolution with
Normal(0, sigma^2 I), then ``score(x, sigma) = grad_x log p_sigma(x)``.  The
convolution is available in closed form for every prior in this module:

- Isotropic Gaussian with base variance s0^2: p_sigma is Gaussian with
  variance s0^2 + sigma^2, so the score is ``-(x - mean) / (s0^2 + sigma^2)``.
- Mixture of isotropic Gaussians with base variances v_j: p_sigma is the same
  mixture with variances v_j + sigma^2.  The score is the responsibility-
  weighted average of per-component Gaussian scores.
- Empirical point-mass prior over a dataset: the uniform mixture with all
  base variances zero, so p_sigma is a Gaussian kernel-density estimate at
  bandwidth sigma.

Mixture computations run in log space with max-shifted exponents, so weights
spanning hundreds of orders of magnitude are handled exactly: exponent
differences are effectively clamped near 700 and any contribution below
exp(-700) underflows harmlessly to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .core import (
    DegenerateDensityError,
    LogDensityUnavailableError,
    Shape,
    Signal,
    UnsupportedPriorError,
)

__all__ = [
    "ScorePrior",
    "IsotropicGaussianPrior",
    "GmmPrior",
    "EmpiricalDiracPrior",
    "gaussian_score",
    "gmm_noisy_log_density",
    "gmm_noisy_score",
    "empirical_prior",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


def _as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce ``x`` (Signal or array) to float64 with a trailing axis of ``dim``.

    Returns the coerced array and whether the input was a single point
    (no leading batch axes).
    """
    if isinstance(x, Signal):
        x = x.data
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0 and dim == 1:
        arr = arr.reshape(1)
    if arr.shape[-1:] != (dim,):
        raise ValueError(
            f"point has trailing dimension {arr.shape[-1] if arr.ndim else 0}, "
            f"prior expects {dim}"
        )
    return arr, arr.ndim == 1


def _check_sigma(sigma: float, allow_zero: bool) -> float:
    sigma = float(sigma)
    if not np.isfinite(sigma) or sigma < 0:
        raise ValueError(f"sigma must be finite and non-negative, got {sigma}")
    if sigma == 0 and not allow_zero:
        raise DegenerateDensityError(
            "sigma = 0 makes this prior a point mass with no density"
        )
    return sigma


class ScorePrior:
    """Interface shared by all priors the sampler can draw gradients from.

    Subclasses set ``shape`` (the signal shape this prior is defined over) and
    implement :meth:`score`.  ``log_density`` and ``sample`` are optional
    capabilities; callers can test ``has_log_density`` / ``has_sampling``
    before relying on them.
    """

    shape: Shape
    has_log_density: bool = False
    has_sampling: bool = False

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    def score(self, x, sigma: float) -> np.ndarray:
        """Gradient of log p_sigma at ``x`` (batched over leading axes)."""
        raise NotImplementedError

    def log_density(self, x, sigma: float):
        """Log p_sigma at ``x``; raises when the prior has no tractable density."""
        raise LogDensityUnavailableError(
            f"{type(self).__name__} does not expose a log-density"
        )

    def sample(self, sigma: float, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``count`` samples from p_sigma; raises when unsupported."""
        raise UnsupportedPriorError(f"{type(self).__name__} does not support sampling")


@dataclass(frozen=True)
class IsotropicGaussianPrior(ScorePrior):
    """Gaussian prior Normal(mean, base_variance * I) over a fixed shape."""

    mean: np.ndarray
    base_variance: float
    shape: Shape

    has_log_density = True
    has_sampling = True

    def __post_init__(self):
        shape = tuple(int(e) for e in self.shape)
        mean = np.ascontiguousarray(np.asarray(self.mean, dtype=np.float64).ravel())
        dim = int(np.prod(shape))
        if mean.size == 1 and dim > 1:
            mean = np.full(dim, mean[0])
        if mean.size != dim:
            raise ValueError(f"mean has {mean.size} entries, shape {shape} needs {dim}")
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean must be finite")
        v = float(self.base_variance)
        if not np.isfinite(v) or v < 0:
            raise ValueError(f"base_variance must be finite and >= 0, got {v}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "base_variance", v)
        object.__setattr__(self, "shape", shape)

    def _total_variance(self, sigma: float) -> float:
        sigma = _check_sigma(sigma, allow_zero=self.base_variance > 0)
        return self.base_variance + sigma * sigma

    def score(self, x, sigma: float) -> np.ndarray:
        v = self._total_variance(sigma)
        pts, _ = _as_points(x, self.dim)
        return (self.mean - pts) / v

    def log_density(self, x, sigma: float):
        v = self._total_variance(sigma)
        pts, single = _as_points(x, self.dim)
        d = self.dim
        sq = np.sum((pts - self.mean) ** 2, axis=-1)
        out = -0.5 * (d * (_LOG_2PI + np.log(v)) + sq / v)
        return float(out) if single else out

    def sample(self, sigma: float, count: int, rng: np.random.Generator) -> np.ndarray:
        v = self._total_variance(sigma)
        return self.mean + np.sqrt(v) * rng.standard_normal((int(count), self.dim))


@dataclass(frozen=True)
class GmmPrior(ScorePrior):
    """Mixture of isotropic Gaussians with per-component base variances.

    Noising by sigma shifts every base variance to ``v_j + sigma^2`` and
    leaves weights and means untouched, so scores and log-densities stay in
    closed form at every noise level.
    """

    weights: np.ndarray
    means: np.ndarray
    base_variances: np.ndarray
    shape: Shape

    has_log_density = True
    has_sampling = True

    def __post_init__(self):
        shape = tuple(int(e) for e in self.shape)
        dim = int(np.prod(shape))
        means = np.ascontiguousarray(np.asarray(self.means, dtype=np.float64))
        if means.ndim == 1:
            means = means[:, None] if dim == 1 else means[None, :]
        if means.ndim != 2 or means.shape[1] != dim:
            raise ValueError(f"means must be (components, {dim}), got {means.shape}")
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64).ravel())
        v = np.ascontiguousarray(np.asarray(self.base_variances, dtype=np.float64).ravel())
        if w.size != means.shape[0] or v.size != means.shape[0]:
            raise ValueError("weights, means, base_variances must agree in length")
        if w.size == 0:
            raise ValueError("mixture needs at least one component")
        if not np.all(np.isfinite(means)):
            raise ValueError("means must be finite")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be positive and finite")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("base_variances must be finite and >= 0")
        w = w / w.sum()
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "base_variances", v)
        object.__setattr__(self, "shape", shape)

    @property
    def components(self) -> int:
        return self.weights.size

    def _noisy_variances(self, sigma: float) -> np.ndarray:
        allow_zero = bool(np.all(self.base_variances > 0))
        sigma = _check_sigma(sigma, allow_zero=allow_zero)
        v = self.base_variances + sigma * sigma
        if np.any(v == 0):
            raise DegenerateDensityError(
                "mixture with a zero-variance component at sigma = 0 is a point mass"
            )
        return v

    def _component_logliks(self, pts: np.ndarray, var: np.ndarray) -> np.ndarray:
        # ||x - mu_j||^2 via the expanded form: avoids a (batch, comp, dim) array.
        sq = (
            np.sum(pts * pts, axis=-1)[..., None]
            - 2.0 * pts @ self.means.T
            + np.sum(self.means * self.means, axis=1)
        )
        np.maximum(sq, 0.0, out=sq)
        d = self.dim
        return np.log(self.weights) - 0.5 * (d * (_LOG_2PI + np.log(var)) + sq / var)

    def log_density(self, x, sigma: float):
        var = self._noisy_variances(sigma)
        pts, single = _as_points(x, self.dim)
        out = logsumexp(self._component_logliks(pts, var), axis=-1)
        return float(out) if single else out

    def score(self, x, sigma: float) -> np.ndarray:
        var = self._noisy_variances(sigma)
        pts, _ = _as_points(x, self.dim)
        resp = softmax(self._component_logliks(pts, var), axis=-1)
        scaled = resp / var
        return scaled @ self.means - pts * np.sum(scaled, axis=-1)[..., None]

    def sample(self, sigma: float, count: int, rng: np.random.Generator) -> np.ndarray:
        allow_zero = True  # a mixture of point masses can still be sampled
        sigma = _check_sigma(sigma, allow_zero=allow_zero)
        var = self.base_variances + sigma * sigma
        count = int(count)
        idx = rng.choice(self.components, size=count, p=self.weights)
        eps = rng.standard_normal((count, self.dim))
        return self.means[idx] + np.sqrt(var[idx])[:, None] * eps


class EmpiricalDiracPrior(GmmPrior):
    """Uniform mixture of point masses at the rows of a dataset.

    At noise level sigma this is exactly a Gaussian kernel-density estimate
    over the dataset with bandwidth sigma, so scores and log-densities come
    from the mixture formulas with all base variances zero.
    """

    def __init__(self, dataset, shape: Shape | None = None):
        pts, shape = _dataset_matrix(dataset, shape)
        n = pts.shape[0]
        super().__init__(
            weights=np.full(n, 1.0 / n),
            means=pts,
            base_variances=np.zeros(n),
            shape=shape,
        )

    @property
    def dataset(self) -> np.ndarray:
        return self.means


def _dataset_matrix(dataset, shape: Shape | None) -> tuple[np.ndarray, Shape]:
    """Normalize a dataset (list of Signals or an array) to an (N, dim) matrix."""
    if isinstance(dataset, np.ndarray):
        pts = np.asarray(dataset, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError(f"dataset array must be 2-D (points, dim), got {pts.shape}")
        if shape is None:
            shape = (pts.shape[1],)
        return np.ascontiguousarray(pts), tuple(int(e) for e in shape)
    signals = list(dataset)
    if not signals:
        raise ValueError("dataset must contain at least one point")
    if not all(isinstance(s, Signal) for s in signals):
        raise ValueError("dataset must be an array or a sequence of Signal")
    shapes = {s.shape for s in signals}
    if len(shapes) != 1:
        raise ValueError(f"dataset signals disagree in shape: {sorted(shapes)}")
    sig_shape = signals[0].shape
    if shape is not None and tuple(shape) != sig_shape:
        raise ValueError(f"requested shape {shape} != signal shape {sig_shape}")
    pts = np.stack([s.data for s in signals])
    return np.ascontiguousarray(pts), sig_shape


def gaussian_score(prior: IsotropicGaussianPrior, x, sigma: float) -> np.ndarray:
    """Score of a noised isotropic Gaussian: ``-(x - mean)/(s0^2 + sigma^2)``."""
    return prior.score(x, sigma)


def gmm_noisy_log_density(prior: GmmPrior, x, sigma: float):
    """Log-density of a mixture noised by sigma, computed in log space."""
    return prior.log_density(x, sigma)


def gmm_noisy_score(prior: GmmPrior, x, sigma: float) -> np.ndarray:
    """Responsibility-weighted score of a mixture noised by sigma."""
    return prior.score(x, sigma)


def empirical_prior(dataset, shape: Shape | None = None) -> EmpiricalDiracPrior:
    """Uniform point-mass prior over ``dataset`` (array or list of Signals)."""
    return EmpiricalDiracPrior(dataset, shape)
