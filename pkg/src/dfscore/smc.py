"""Extended bootstrap particle filter with fixed-lag moment accumulation.

The filter runs on the modified model in which the parameter is re-drawn
from the perturbation prior at every time step (i.i.d. across time, not a
random walk) while the latent state evolves through the sample-only
transition under that step's parameter.  At each step the filter reads off
weighted posterior means/variances of the lagged parameter and the within-
lag cross-covariances; those moments assemble into score and observed
information estimates for the original model.

Particles are stored struct-of-arrays: states ``(n,)``, a sliding parameter
history window ``(n, min(2*lag+1, T), d)``, and one weight vector.  History
rows are copied along ancestor lines at resampling.  Moment read-off happens
after weighting and before resampling, so it uses the posterior-at-u weights
exactly.  RNG consumption does not depend on the lag, which makes runs with
different lags but equal seeds traverse identical particle trajectories.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .perturbation import PerturbationKernel, make_gaussian_kernel
from .results import InfoEstimate, ScoreEstimate
from .state_space import StateSpaceModel

__all__ = [
    "ParticleCollapseError",
    "ExtendedFilterConfig",
    "FixedLagAccumulator",
    "resample",
    "run_extended_bootstrap",
    "score_from_accumulator",
    "observed_info_from_accumulator",
    "bootstrap_loglik",
]

RESAMPLING_SCHEMES = ("multinomial", "systematic")


class ParticleCollapseError(RuntimeError):
    """Every particle weight vanished at some step (1-based ``step``)."""

    def __init__(self, step: int):
        super().__init__(f"all particle weights are zero at step {step}")
        self.step = step


@dataclass(frozen=True)
class ExtendedFilterConfig:
    """Settings for one extended-bootstrap run.

    ``lag >= T - 1`` is legal and means full smoothing.  ``tau = 0`` turns
    the filter into a plain bootstrap filter at ``theta`` (useful for
    likelihood estimation; the moment read-offs then carry no information).
    ``ess_threshold = None`` resamples every step, which is the analyzed
    setting; a fractional threshold enables ESS-triggered resampling.
    """

    theta: np.ndarray
    tau: float
    kernel: PerturbationKernel
    lag: int
    n_particles: int
    resampling: str = "multinomial"
    seed: Optional[int] = None
    ess_threshold: Optional[float] = None

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=np.float64))
        theta.flags.writeable = False
        object.__setattr__(self, "theta", theta)
        if theta.shape != (self.kernel.dim,):
            raise ValueError("theta dimension does not match kernel dimension")
        if self.tau < 0.0:
            raise ValueError("tau must be >= 0")
        if self.lag < 0:
            raise ValueError("lag must be >= 0")
        if self.n_particles < 2:
            raise ValueError("n_particles must be >= 2")
        if self.resampling not in RESAMPLING_SCHEMES:
            raise ValueError(f"resampling must be one of {RESAMPLING_SCHEMES}")
        if self.ess_threshold is not None and not 0.0 < self.ess_threshold <= 1.0:
            raise ValueError("ess_threshold must lie in (0, 1]")


@dataclass
class FixedLagAccumulator:
    """Per-time posterior moments of the step parameters, plus diagnostics.

    ``means[t]`` and ``covariances[t]`` estimate the lagged-horizon posterior
    mean/covariance of the step-(t+1) parameter; ``crosscovs[(s, t)]`` holds
    the cross-covariance for 0-based pairs with ``1 <= t - s <= lag``.
    ``readoff_horizon[t]`` records the 1-based step whose weights produced
    the read-off (``min(t + 1 + lag, T)`` by construction).
    """

    means: np.ndarray
    covariances: np.ndarray
    crosscovs: dict
    loglik_estimate: float
    readoff_horizon: np.ndarray
    ess_trace: np.ndarray
    tau: float
    lag: int
    n_particles: int

    @property
    def horizon(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def is_complete(self) -> bool:
        """True when every per-time slot and every in-lag pair was filled."""
        if np.any(np.isnan(self.means)) or np.any(np.isnan(self.covariances)):
            return False
        expected = sum(
            1
            for t in range(self.horizon)
            for _ in range(max(0, t - self.lag), t)
        )
        return len(self.crosscovs) == expected

    def save_moments_csv(self, path) -> None:
        """Rows ``t,component,mean,var_diag`` with 1-based indices."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "component", "mean", "var_diag"])
            for t in range(self.horizon):
                for i in range(self.dim):
                    writer.writerow(
                        [
                            t + 1,
                            i + 1,
                            repr(float(self.means[t, i])),
                            repr(float(self.covariances[t, i, i])),
                        ]
                    )

    def save_crosscov_csv(self, path) -> None:
        """Rows ``s,t,i,j,crosscov`` with 1-based indices."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["s", "t", "i", "j", "crosscov"])
            for (s, t) in sorted(self.crosscovs):
                c = self.crosscovs[(s, t)]
                for i in range(self.dim):
                    for j in range(self.dim):
                        writer.writerow(
                            [s + 1, t + 1, i + 1, j + 1, repr(float(c[i, j]))]
                        )


def resample(weights, scheme: str, rng: np.random.Generator) -> np.ndarray:
    """Draw ancestor indices under the given scheme.

    Multinomial draws i.i.d. categorical ancestors; systematic uses a single
    uniform and stratified inversion.  Both are unbiased in expected
    offspring counts.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be finite and non-negative")
    total = weights.sum()
    if total <= 0.0:
        raise ValueError("weights must have positive sum")
    n = weights.shape[0]
    cumw = np.cumsum(weights / total)
    if scheme == "multinomial":
        positions = rng.random(n)
    elif scheme == "systematic":
        positions = (rng.random() + np.arange(n)) / n
    else:
        raise ValueError(f"resampling must be one of {RESAMPLING_SCHEMES}")
    return kernels.inverse_cdf_indices(cumw, positions)


def run_extended_bootstrap(
    model: StateSpaceModel,
    ys,
    config: ExtendedFilterConfig,
    rng: Optional[np.random.Generator] = None,
    weight_observer=None,
) -> FixedLagAccumulator:
    """Run the extended bootstrap filter and accumulate fixed-lag moments.

    At each step the parameter is drawn fresh from the prior centered at
    ``config.theta``, the state propagates under it, and particles are
    weighted by the observation density.  Read-off for time ``t`` happens at
    step ``min(t + lag, T)``; remaining slots are flushed at the final step.

    ``weight_observer``, when given, is called as ``observer(step, weights)``
    with the 1-based step and that step's normalized weights (a diagnostics
    hook; it must not mutate the array).
    """
    ys = np.asarray(ys)
    horizon = ys.shape[0]
    if horizon < 1:
        raise ValueError("need at least one observation")
    if model.param_dim != config.kernel.dim:
        raise ValueError("model and kernel dimensions differ")
    if rng is None:
        rng = np.random.default_rng(config.seed)

    n = config.n_particles
    d = config.kernel.dim
    lag = config.lag
    window = min(2 * lag + 1, horizon)

    hist = np.empty((n, window, d))
    filled = 0
    means = np.full((horizon, d), np.nan)
    covariances = np.full((horizon, d, d), np.nan)
    crosscovs: dict = {}
    readoff_horizon = np.zeros(horizon, dtype=np.int64)
    ess_trace = np.empty(horizon)
    loglik = 0.0
    log_prev = None  # None encodes uniform weights from the last resampling
    x = None

    def read_off(t, u, w):
        newest = filled - 1
        offset = newest - (u - t)
        assert offset >= 0, "parameter history window underflow"
        theta_t = hist[:, offset, :]
        mean, cov = kernels.weighted_mean_cov(theta_t, w)
        means[t] = mean
        covariances[t] = cov
        readoff_horizon[t] = u + 1
        for s in range(max(0, t - lag), t):
            off_s = newest - (u - s)
            assert off_s >= 0, "parameter history window underflow"
            crosscovs[(s, t)] = kernels.weighted_crosscov(
                hist[:, off_s, :], theta_t, w
            )

    for u in range(horizon):
        thetas = config.kernel.sample(config.theta, config.tau, rng, size=n)
        if u == 0:
            x = model.init_sampler(thetas, rng)
        else:
            x = model.transition_sampler(x, thetas, rng)
        logg = np.asarray(model.obs_logdensity(ys[u], x, thetas), dtype=np.float64)
        if logg.shape != (n,):
            raise ValueError(
                f"obs_logdensity returned shape {logg.shape}, expected ({n},)"
            )
        logw = logg if log_prev is None else log_prev + logg
        if np.max(logw) == -np.inf:
            raise ParticleCollapseError(step=u + 1)
        w, lse = kernels.normalize_log_weights(logw)
        loglik += lse - (math.log(n) if log_prev is None else 0.0)
        ess_trace[u] = 1.0 / float(w @ w)
        if weight_observer is not None:
            weight_observer(u + 1, w)

        if filled < window:
            hist[:, filled, :] = thetas
            filled += 1
        else:
            hist[:, :-1, :] = hist[:, 1:, :]
            hist[:, -1, :] = thetas

        t = u - lag
        if t >= 0:
            read_off(t, u, w)
        if u == horizon - 1:
            for t_tail in range(max(0, horizon - lag), horizon):
                read_off(t_tail, u, w)

        if config.ess_threshold is None:
            do_resample = True
        else:
            do_resample = ess_trace[u] < config.ess_threshold * n
        if do_resample:
            ancestors = resample(w, config.resampling, rng)
            x = x[ancestors]
            hist[:, :filled, :] = hist[ancestors, :filled, :]
            log_prev = None
        else:
            log_prev = np.log(w)

    return FixedLagAccumulator(
        means=means,
        covariances=covariances,
        crosscovs=crosscovs,
        loglik_estimate=loglik,
        readoff_horizon=readoff_horizon,
        ess_trace=ess_trace,
        tau=config.tau,
        lag=lag,
        n_particles=n,
    )


def _require_complete(acc: FixedLagAccumulator) -> None:
    if not acc.is_complete():
        raise ValueError("accumulator is incomplete; run the filter to horizon")


def _as_covariance(sigma, dim: int) -> np.ndarray:
    if isinstance(sigma, PerturbationKernel):
        return sigma.covariance()
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim == 1:
        return np.diag(sigma)
    if sigma.shape != (dim, dim):
        raise ValueError(f"covariance has shape {sigma.shape}, expected ({dim}, {dim})")
    return sigma


def score_from_accumulator(
    acc: FixedLagAccumulator, theta, tau: float, sigma
) -> ScoreEstimate:
    """Assemble the score: ``sigma^-1 (sum_t mean_t - T theta) / tau^2``."""
    _require_complete(acc)
    if tau <= 0.0:
        raise ValueError("tau must be > 0")
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    cov = _as_covariance(sigma, theta.size)
    displacement = acc.means.sum(axis=0) - acc.horizon * theta
    values = np.linalg.solve(cov, displacement) / tau**2
    return ScoreEstimate(
        values=values, tau=tau, n=acc.n_particles, method="smc-fixed-lag"
    )


def observed_info_from_accumulator(
    acc: FixedLagAccumulator, tau: float, sigma
) -> InfoEstimate:
    """Assemble the observed information from variances and in-lag pairs.

    ``-sigma^-1 {sum_t var_t + sum_pairs (C + C.T) - tau^2 T sigma} sigma^-1
    / tau^4``, symmetrized so the output equals its transpose bit-for-bit.
    The pair sum symmetrizes each cross-covariance instead of doubling it,
    which is exact for the true posterior and keeps the estimate symmetric.
    """
    _require_complete(acc)
    if tau <= 0.0:
        raise ValueError("tau must be > 0")
    d = acc.dim
    cov = _as_covariance(sigma, d)
    inner = acc.covariances.sum(axis=0)
    for c in acc.crosscovs.values():
        inner = inner + (c + c.T)
    inner = inner - tau**2 * acc.horizon * cov
    half = np.linalg.solve(cov, inner)
    full = np.linalg.solve(cov, half.T).T / tau**4
    sym = -(full + full.T) / 2.0
    return InfoEstimate(
        values=sym, tau=tau, n=acc.n_particles, method="smc-fixed-lag"
    )


def bootstrap_loglik(
    model: StateSpaceModel,
    ys,
    theta,
    n_particles: int,
    rng: np.random.Generator,
    resampling: str = "multinomial",
) -> float:
    """Plain bootstrap-filter log-likelihood estimate at a fixed parameter.

    Runs the extended filter with ``tau = 0`` (the prior degenerates to the
    point mass at ``theta``), which reduces it to the standard bootstrap
    filter.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    config = ExtendedFilterConfig(
        theta=theta,
        tau=0.0,
        kernel=make_gaussian_kernel(np.ones(theta.size)),
        lag=0,
        n_particles=n_particles,
        resampling=resampling,
    )
    acc = run_extended_bootstrap(model, ys, config, rng=rng)
    return acc.loglik_estimate
