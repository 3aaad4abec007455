"""Score and observed-information estimation for generic models.

Everything here operates on a plain log-likelihood evaluator.  The route is:
draw parameters from the perturbation prior, weight them by likelihood
(self-normalized importance sampling), and rescale the resulting posterior
mean and covariance into derivative estimates.  Central finite differences
are the baseline alternative, and a trapezoidal-quadrature version of the
posterior moments serves as an exact low-dimensional oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .perturbation import PerturbationKernel
from .results import InfoEstimate, ScoreEstimate

__all__ = [
    "GeneralModel",
    "PosteriorMoments",
    "DegeneratePosteriorError",
    "posterior_moments_is",
    "GridSpec",
    "posterior_moments_quadrature",
    "score_from_moments",
    "observed_info_from_moments",
    "FDConfig",
    "fd_score",
    "fd_info",
]


class DegeneratePosteriorError(RuntimeError):
    """Raised when every sampled parameter has zero likelihood.

    Signals a mis-scaled shrinkage factor rather than a recoverable state."""


@dataclass(frozen=True)
class GeneralModel:
    """A model reduced to its log-likelihood surface.

    ``log_likelihood`` maps an ``(n, dim)`` batch of parameter vectors to an
    ``(n,)`` array of log-likelihood values.  It must be deterministic given
    identical inputs (noisy evaluators own their random stream) and return
    finite values or ``-inf`` for impossible parameters.
    """

    dim: int
    log_likelihood: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PosteriorMoments:
    """Mean/covariance of the artificial posterior plus sampling diagnostics.

    ``ess`` and ``n`` are None for analytically computed moments (quadrature
    reports ``n`` as the grid size and no ess).
    """

    mean: np.ndarray
    covariance: np.ndarray
    ess: Optional[float] = None
    n: Optional[int] = None

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.asarray(self.covariance, dtype=np.float64)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match mean")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        if self.ess is not None and self.n is not None:
            if not 1.0 <= self.ess <= self.n:
                raise ValueError("ess must lie in [1, n]")


def _evaluate_loglik(model: GeneralModel, thetas: np.ndarray) -> np.ndarray:
    logl = np.asarray(model.log_likelihood(thetas), dtype=np.float64)
    if logl.shape != (thetas.shape[0],):
        raise ValueError(
            f"log_likelihood returned shape {logl.shape}, expected ({thetas.shape[0]},)"
        )
    if np.any(np.isnan(logl)) or np.any(np.isposinf(logl)):
        raise ValueError("log_likelihood must return finite values or -inf")
    return logl


def posterior_moments_is(
    model: GeneralModel,
    theta,
    tau: float,
    kernel: PerturbationKernel,
    n: int,
    rng: np.random.Generator,
) -> PosteriorMoments:
    """Importance-sampling posterior moments using the prior as proposal.

    Draws ``n`` parameters from the perturbation prior centered at ``theta``,
    weights them by likelihood with a max-shifted exponentiation, and returns
    the self-normalized mean, plug-in covariance and effective sample size.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if model.dim != kernel.dim:
        raise ValueError("model and kernel dimensions differ")
    thetas = kernel.sample(theta, tau, rng, size=n)
    logl = _evaluate_loglik(model, thetas)
    if np.max(logl) == -np.inf:
        raise DegeneratePosteriorError(
            "all importance weights are zero; tau is likely mis-scaled"
        )
    w, _ = kernels.normalize_log_weights(logl)
    mean, cov = kernels.weighted_mean_cov(thetas, w)
    ess = 1.0 / float(w @ w)
    ess = min(max(ess, 1.0), float(n))
    return PosteriorMoments(mean=mean, covariance=cov, ess=ess, n=n)


@dataclass(frozen=True)
class GridSpec:
    """Tensor-grid resolution for the quadrature oracle.

    The grid spans ``half_width_sds`` prior standard deviations either side
    of the center with ``points_per_axis`` nodes; both have floors that keep
    the trapezoid error far below sampling noise.
    """

    points_per_axis: int = 2001
    half_width_sds: float = 8.0

    def __post_init__(self):
        if self.points_per_axis < 2001:
            raise ValueError("points_per_axis must be >= 2001")
        if self.half_width_sds < 8.0:
            raise ValueError("half_width_sds must be >= 8")


def posterior_moments_quadrature(
    model: GeneralModel,
    theta,
    tau: float,
    kernel: PerturbationKernel,
    grid: GridSpec = GridSpec(),
) -> PosteriorMoments:
    """Exact posterior moments by trapezoidal quadrature (dim <= 2 only).

    Error is dominated by grid truncation, not sampling; with the default
    grid it is far below 1e-8 for smooth likelihoods.
    """
    if model.dim > 2:
        raise ValueError("quadrature oracle supports dim <= 2 only")
    if model.dim != kernel.dim:
        raise ValueError("model and kernel dimensions differ")
    if tau <= 0.0:
        raise ValueError("tau must be > 0 for quadrature moments")
    theta = np.asarray(theta, dtype=np.float64)

    m = grid.points_per_axis
    axes = []
    log_trap = []
    for i in range(model.dim):
        half = grid.half_width_sds * tau * kernel.sigmas[i]
        axes.append(np.linspace(theta[i] - half, theta[i] + half, m))
        coeff = np.full(m, axes[i][1] - axes[i][0])
        coeff[0] *= 0.5
        coeff[-1] *= 0.5
        log_trap.append(np.log(coeff))

    if model.dim == 1:
        points = axes[0][:, None]
        logw = log_trap[0]
    else:
        g0, g1 = np.meshgrid(axes[0], axes[1], indexing="ij")
        points = np.column_stack([g0.ravel(), g1.ravel()])
        logw = (log_trap[0][:, None] + log_trap[1][None, :]).ravel()

    z = (points - theta) / (tau * kernel.sigmas)
    log_prior = -0.5 * np.sum(z * z, axis=1)
    logl = _evaluate_loglik(model, points)
    log_post = logl + log_prior + logw
    if np.max(log_post) == -np.inf:
        raise DegeneratePosteriorError("posterior mass vanished on the grid")
    w, _ = kernels.normalize_log_weights(log_post)
    mean, cov = kernels.weighted_mean_cov(points, w)
    return PosteriorMoments(mean=mean, covariance=cov, ess=None, n=points.shape[0])


def _as_covariance(sigma, dim: int) -> np.ndarray:
    """Normalize a kernel, a variance diagonal, or a full matrix to (d, d)."""
    if isinstance(sigma, PerturbationKernel):
        return sigma.covariance()
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim == 1:
        return np.diag(sigma)
    if sigma.shape != (dim, dim):
        raise ValueError(f"covariance has shape {sigma.shape}, expected ({dim}, {dim})")
    return sigma


def score_from_moments(
    moments: PosteriorMoments, theta, tau: float, sigma
) -> ScoreEstimate:
    """Rescale the posterior mean displacement into a score estimate.

    Computes ``sigma^-1 (mean - theta) / tau^2``; the bias of the result is
    second order in ``tau``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(moments.mean)):
        raise ValueError("posterior mean must be finite")
    if tau <= 0.0:
        raise ValueError("tau must be > 0")
    cov = _as_covariance(sigma, theta.size)
    values = np.linalg.solve(cov, moments.mean - theta) / tau**2
    return ScoreEstimate(values=values, tau=tau, n=moments.n, method="posterior-mean")


def observed_info_from_moments(
    moments: PosteriorMoments, tau: float, sigma
) -> InfoEstimate:
    """Rescale the posterior covariance deficit into an information estimate.

    Computes ``sigma^-1 (tau^2 sigma - cov) sigma^-1 / tau^4`` and
    symmetrizes as ``(M + M.T) / 2`` so the output is symmetric exactly.
    """
    if tau <= 0.0:
        raise ValueError("tau must be > 0")
    d = moments.mean.size
    cov = _as_covariance(sigma, d)
    inner = tau**2 * cov - moments.covariance
    half = np.linalg.solve(cov, inner)
    full = np.linalg.solve(cov, half.T).T / tau**4
    sym = (full + full.T) / 2.0
    return InfoEstimate(values=sym, tau=tau, n=moments.n, method="posterior-cov")


@dataclass(frozen=True)
class FDConfig:
    """Step size and stream seeding for the finite-difference baselines.

    Every stencil node is evaluated with its own independent stream derived
    from ``base_seed`` (the paper's setting: no common random numbers).
    """

    h: float
    base_seed: Optional[int] = None

    def __post_init__(self):
        if self.h <= 0.0:
            raise ValueError("h must be > 0")


def _node_rng(config: FDConfig, k: int) -> np.random.Generator:
    if config.base_seed is None:
        return np.random.default_rng()
    return np.random.default_rng(np.random.SeedSequence((config.base_seed, k)))


def _checked_eval(loglik, theta, rng) -> float:
    value = float(loglik(theta, rng))
    if np.isnan(value) or np.isinf(value):
        raise ValueError(f"log-likelihood evaluation at {theta} is not finite")
    return value


def fd_score(
    loglik: Callable[[np.ndarray, np.random.Generator], float],
    theta,
    config: FDConfig,
) -> ScoreEstimate:
    """Central finite-difference score: (l(theta+h e_r) - l(theta-h e_r)) / 2h.

    ``loglik(theta, rng)`` may be a Monte Carlo estimator; the +h and -h
    evaluations of each coordinate use independent streams.
    """
    theta = np.asarray(theta, dtype=np.float64)
    d = theta.size
    h = config.h
    values = np.empty(d)
    k = 0
    for r in range(d):
        e = np.zeros(d)
        e[r] = h
        up = _checked_eval(loglik, theta + e, _node_rng(config, k))
        down = _checked_eval(loglik, theta - e, _node_rng(config, k + 1))
        k += 2
        values[r] = (up - down) / (2.0 * h)
    return ScoreEstimate(values=values, tau=None, n=None, method="fd-central")


def fd_info(
    loglik: Callable[[np.ndarray, np.random.Generator], float],
    theta,
    config: FDConfig,
) -> InfoEstimate:
    """Finite-difference observed information (negated second differences).

    Diagonal entries use the three-point second difference; off-diagonal
    entries the standard four-point cross stencil.  All stencil node
    evaluations are independent.
    """
    theta = np.asarray(theta, dtype=np.float64)
    d = theta.size
    h = config.h
    hess = np.empty((d, d))
    k = 0
    for r in range(d):
        e = np.zeros(d)
        e[r] = h
        up = _checked_eval(loglik, theta + e, _node_rng(config, k))
        mid = _checked_eval(loglik, theta, _node_rng(config, k + 1))
        down = _checked_eval(loglik, theta - e, _node_rng(config, k + 2))
        k += 3
        hess[r, r] = (up - 2.0 * mid + down) / h**2
    for r in range(d):
        for s in range(r + 1, d):
            er = np.zeros(d)
            es = np.zeros(d)
            er[r] = h
            es[s] = h
            pp = _checked_eval(loglik, theta + er + es, _node_rng(config, k))
            pm = _checked_eval(loglik, theta + er - es, _node_rng(config, k + 1))
            mp = _checked_eval(loglik, theta - er + es, _node_rng(config, k + 2))
            mm = _checked_eval(loglik, theta - er - es, _node_rng(config, k + 3))
            k += 4
            hess[r, s] = (pp - pm - mp + mm) / (4.0 * h**2)
            hess[s, r] = hess[r, s]
    return InfoEstimate(values=-hess, tau=None, n=None, method="fd-central")
