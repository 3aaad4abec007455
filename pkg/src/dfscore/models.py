"""Reference likelihood surfaces with known derivatives.

These are the test beds for the generic estimators: a Gaussian location
model whose artificial posterior is conjugate (closed-form moments), and a
scalar Poisson log-link model for quadrature checks.
"""

from __future__ import annotations

import math

import numpy as np

from .general import GeneralModel, PosteriorMoments
from .perturbation import PerturbationKernel

__all__ = [
    "gaussian_location_model",
    "conjugate_posterior_moments",
    "poisson_loglink_model",
]


def gaussian_location_model(y=0.0, obs_sd: float = 1.0, dim: int = 1) -> GeneralModel:
    """Independent Gaussian observations with the parameter as location.

    ``l(theta) = sum_i -(theta_i - y_i)^2 / (2 obs_sd^2)`` plus constants;
    true score is ``(y - theta) / obs_sd^2`` and the observed information is
    ``I / obs_sd^2``.
    """
    y = np.broadcast_to(np.asarray(y, dtype=np.float64), (dim,)).copy()
    if obs_sd <= 0.0:
        raise ValueError("obs_sd must be > 0")
    const = -0.5 * dim * math.log(2.0 * math.pi * obs_sd**2)

    def log_likelihood(thetas: np.ndarray) -> np.ndarray:
        diff = thetas - y
        return const - 0.5 * np.sum(diff * diff, axis=1) / obs_sd**2

    return GeneralModel(dim=dim, log_likelihood=log_likelihood)


def conjugate_posterior_moments(
    theta, tau: float, kernel: PerturbationKernel, y=0.0, obs_sd: float = 1.0
) -> PosteriorMoments:
    """Closed-form artificial-posterior moments for the Gaussian location model.

    With prior N(theta, tau^2 sigma_i^2) per coordinate and likelihood
    N(y_i, obs_sd^2), the posterior is Gaussian with
    mean ``theta + tau^2 sigma_i^2 (y_i - theta_i) / (obs_sd^2 + tau^2 sigma_i^2)``
    and variance ``tau^2 sigma_i^2 obs_sd^2 / (obs_sd^2 + tau^2 sigma_i^2)``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    d = kernel.dim
    y = np.broadcast_to(np.asarray(y, dtype=np.float64), (d,))
    prior_var = tau**2 * kernel.variances()
    denom = obs_sd**2 + prior_var
    mean = theta + prior_var * (y - theta) / denom
    var = prior_var * obs_sd**2 / denom
    return PosteriorMoments(mean=mean, covariance=np.diag(var), ess=None, n=None)


def poisson_loglink_model(y: int) -> GeneralModel:
    """Scalar Poisson count with log-link rate: l(theta) = y theta - exp(theta).

    True score is ``y - exp(theta)``, observed information ``exp(theta)``.
    """
    if y < 0:
        raise ValueError("y must be a non-negative count")
    const = -math.lgamma(y + 1)

    def log_likelihood(thetas: np.ndarray) -> np.ndarray:
        t = thetas[:, 0]
        with np.errstate(over="ignore"):
            return y * t - np.exp(t) + const

    return GeneralModel(dim=1, log_likelihood=log_likelihood)
