"""State-space models with sample-only dynamics, plus exact linear oracles.

The model abstraction deliberately has no transition density: dynamics are
things you can simulate, nothing more.  Observation densities are pointwise
evaluable (the particle filter needs them for weighting).  The scalar
AR(1)-plus-noise model is the reference case: its likelihood, score and
observed information are computable exactly through the Kalman recursion,
which is what the acceptance checks compare against.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional

import numpy as np

from . import kernels

__all__ = [
    "StateSpaceModel",
    "simulate",
    "save_observations",
    "load_observations",
    "LinearGaussianSSM",
    "kalman_loglik",
    "joint_gaussian_loglik",
    "KalmanDerivatives",
    "OracleAccuracyWarning",
    "richardson_score_info",
    "kalman_score_info",
    "make_nonlinear_shock_model",
]

PARAM_NAMES = ("phi", "log_sigma_v", "log_sigma_w")


@dataclass(frozen=True)
class StateSpaceModel:
    """Latent Markov chain observed through a pointwise density.

    All callables are vectorized over particles: ``thetas`` is ``(n, d)``,
    states are arrays with leading dimension ``n``.

    ``init_sampler(thetas, rng)`` draws x_1, ``transition_sampler(states,
    thetas, rng)`` advances one step, ``obs_logdensity(y, states, thetas)``
    returns per-particle log observation densities.  ``obs_sampler`` is only
    needed for data simulation.
    """

    param_dim: int
    init_sampler: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    transition_sampler: Callable[
        [np.ndarray, np.ndarray, np.random.Generator], np.ndarray
    ]
    obs_logdensity: Callable[[Any, np.ndarray, np.ndarray], np.ndarray]
    obs_sampler: Optional[
        Callable[[np.ndarray, np.ndarray, np.random.Generator], np.ndarray]
    ] = None


def simulate(model: StateSpaceModel, theta, horizon: int, rng: np.random.Generator):
    """Forward-simulate ``horizon`` steps; returns (states, observations)."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if model.obs_sampler is None:
        raise ValueError("model has no obs_sampler; cannot simulate observations")
    thetas = np.atleast_1d(np.asarray(theta, dtype=np.float64))[None, :]
    states = []
    ys = []
    x = model.init_sampler(thetas, rng)
    for _ in range(horizon):
        ys.append(model.obs_sampler(x, thetas, rng)[0])
        states.append(x[0])
        x = model.transition_sampler(x, thetas, rng)
    return np.asarray(states), np.asarray(ys)


def save_observations(path, ys) -> None:
    """Write observations as CSV rows ``t,y`` (t is 1-based), full precision."""
    ys = np.asarray(ys, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "y"])
        for t, y in enumerate(ys, start=1):
            writer.writerow([t, repr(float(y))])


def load_observations(path) -> np.ndarray:
    """Read a ``t,y`` observation CSV back into a float array."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["t", "y"]:
            raise ValueError(f"unexpected observation CSV header: {header}")
        return np.array([float(row[1]) for row in reader])


class _ParamMap:
    """Maps an unconstrained parameter vector onto (phi, sigma_v, sigma_w).

    ``free`` names the coordinates exposed in theta (in order); the rest are
    pinned in ``fixed``.  phi enters by identity, scales via log.
    """

    def __init__(self, free, fixed):
        free = tuple(free)
        for name in free:
            if name not in PARAM_NAMES:
                raise ValueError(f"unknown parameter name {name!r}")
        if len(set(free)) != len(free):
            raise ValueError("duplicate names in free")
        for name in fixed:
            if name not in PARAM_NAMES:
                raise ValueError(f"unknown parameter name {name!r}")
        missing = [n for n in PARAM_NAMES if n not in free and n not in fixed]
        if missing:
            raise ValueError(f"parameters neither free nor fixed: {missing}")
        self.free = free
        self.fixed = dict(fixed)

    @property
    def dim(self) -> int:
        return len(self.free)

    def raw(self, thetas: np.ndarray):
        """(phi, sigma_v, sigma_w) broadcast over the rows of ``thetas``."""
        out = []
        for name in PARAM_NAMES:
            if name in self.free:
                value = thetas[..., self.free.index(name)]
            else:
                value = np.float64(self.fixed[name])
            out.append(np.exp(value) if name.startswith("log_") else value)
        return tuple(out)


@dataclass(frozen=True)
class LinearGaussianSSM:
    """Scalar AR(1) state plus Gaussian observation noise.

    x_1 ~ N(m0, p0), x_{t+1} = phi x_t + sigma_v v_t, y_t = x_t + sigma_w w_t.
    ``init="stationary"`` uses m0=0, p0 = sigma_v^2/(1-phi^2) and requires
    |phi| < 1; ``init="fixed"`` uses (init_mean, init_sd^2) and places no
    constraint on phi, which keeps per-particle perturbed parameters valid.
    """

    free: tuple = PARAM_NAMES
    fixed: Mapping[str, float] = field(default_factory=dict)
    init: str = "stationary"
    init_mean: float = 0.0
    init_sd: float = 1.0

    def __post_init__(self):
        if self.init not in ("stationary", "fixed"):
            raise ValueError("init must be 'stationary' or 'fixed'")
        if self.init == "fixed" and self.init_sd <= 0.0:
            raise ValueError("init_sd must be > 0")
        object.__setattr__(self, "_pmap", _ParamMap(self.free, self.fixed))

    @property
    def param_dim(self) -> int:
        return self._pmap.dim

    def params(self, theta):
        """Scalar (phi, sigma_v, sigma_w) at a single parameter vector."""
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if theta.shape != (self.param_dim,):
            raise ValueError(f"theta must have shape ({self.param_dim},)")
        phi, sv, sw = self._pmap.raw(theta)
        self._check_phi(phi)
        return float(phi), float(sv), float(sw)

    def _check_phi(self, phi) -> None:
        if self.init == "stationary" and np.any(np.abs(phi) >= 1.0):
            raise ValueError(
                "stationary initial law needs |phi| < 1; use init='fixed' or "
                "a smaller perturbation scale"
            )

    def init_moments(self, phi, sigma_v):
        if self.init == "stationary":
            return 0.0, sigma_v**2 / (1.0 - phi**2)
        return self.init_mean, self.init_sd**2

    def state_space(self) -> StateSpaceModel:
        """The sampling interface used by the particle filter."""
        pmap = self._pmap

        def init_sampler(thetas, rng):
            phi, sv, _ = pmap.raw(thetas)
            self._check_phi(phi)
            if self.init == "stationary":
                sd0 = sv / np.sqrt(1.0 - phi**2)
                m0 = 0.0
            else:
                sd0 = self.init_sd
                m0 = self.init_mean
            return m0 + sd0 * rng.standard_normal(thetas.shape[0])

        def transition_sampler(states, thetas, rng):
            phi, sv, _ = pmap.raw(thetas)
            return phi * states + sv * rng.standard_normal(states.shape[0])

        def obs_logdensity(y, states, thetas):
            _, _, sw = pmap.raw(thetas)
            e = (y - states) / sw
            return -0.5 * (np.log(2.0 * np.pi) + e * e) - np.log(sw)

        def obs_sampler(states, thetas, rng):
            _, _, sw = pmap.raw(thetas)
            return states + sw * rng.standard_normal(states.shape[0])

        return StateSpaceModel(
            param_dim=self.param_dim,
            init_sampler=init_sampler,
            transition_sampler=transition_sampler,
            obs_logdensity=obs_logdensity,
            obs_sampler=obs_sampler,
        )


def kalman_loglik(model: LinearGaussianSSM, theta, ys) -> float:
    """Exact log-likelihood via the prediction error decomposition."""
    phi, sv, sw = model.params(theta)
    m0, p0 = model.init_moments(phi, sv)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    return float(kernels.kalman_loglik_core(ys, phi, sv**2, sw**2, m0, p0))


def joint_gaussian_loglik(model: LinearGaussianSSM, theta, ys) -> float:
    """Brute-force log-likelihood from the explicit joint Gaussian of y_{1:T}.

    O(T^3); intended as an independent cross-check for short series.
    """
    phi, sv, sw = model.params(theta)
    m0, p0 = model.init_moments(phi, sv)
    ys = np.asarray(ys, dtype=np.float64)
    big_t = ys.shape[0]
    var_x = np.empty(big_t)
    mean_x = np.empty(big_t)
    var_x[0] = p0
    mean_x[0] = m0
    for t in range(1, big_t):
        var_x[t] = phi**2 * var_x[t - 1] + sv**2
        mean_x[t] = phi * mean_x[t - 1]
    cov = np.empty((big_t, big_t))
    for s in range(big_t):
        for t in range(s, big_t):
            cov[s, t] = phi ** (t - s) * var_x[s]
            cov[t, s] = cov[s, t]
    cov_y = cov + sw**2 * np.eye(big_t)
    resid = ys - mean_x
    chol = np.linalg.cholesky(cov_y)
    alpha = np.linalg.solve(chol, resid)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(
        -0.5 * (big_t * np.log(2.0 * np.pi) + logdet + alpha @ alpha)
    )


class OracleAccuracyWarning(UserWarning):
    """Richardson extrapolation discrepancy exceeded the requested tolerance."""


@dataclass(frozen=True)
class KalmanDerivatives:
    """Oracle score/information with internal extrapolation error estimates."""

    score: np.ndarray
    info: np.ndarray
    score_err: np.ndarray
    info_err: np.ndarray


def richardson_score_info(
    f: Callable[[np.ndarray], float],
    theta,
    h: float = 0.002,
    warn_tol: float = 1e-4,
) -> KalmanDerivatives:
    """Gradient and negated Hessian of a smooth noise-free scalar function.

    Central differences at steps ``h`` and ``h/2`` combined by Richardson
    extrapolation (fourth-order); the discrepancy between the two step sizes
    yields a per-entry error estimate, and a warning is emitted when its
    maximum exceeds ``warn_tol``.  Exact on cubics, so quadratic surrogates
    recover their derivatives to machine precision.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    d = theta.size

    def richardson(diff):
        coarse = diff(h)
        fine = diff(h / 2.0)
        return (4.0 * fine - coarse) / 3.0, abs(fine - coarse) / 3.0

    score = np.empty(d)
    score_err = np.empty(d)
    for r in range(d):
        e = np.zeros(d)
        e[r] = 1.0

        def first(step, e=e):
            return (f(theta + step * e) - f(theta - step * e)) / (2.0 * step)

        score[r], score_err[r] = richardson(first)

    f0 = f(theta)
    hess = np.empty((d, d))
    hess_err = np.empty((d, d))
    for r in range(d):
        e = np.zeros(d)
        e[r] = 1.0

        def second(step, e=e):
            return (f(theta + step * e) - 2.0 * f0 + f(theta - step * e)) / step**2

        hess[r, r], hess_err[r, r] = richardson(second)
    for r in range(d):
        for s in range(r + 1, d):
            er = np.zeros(d)
            es = np.zeros(d)
            er[r] = 1.0
            es[s] = 1.0

            def cross(step, er=er, es=es):
                return (
                    f(theta + step * (er + es))
                    - f(theta + step * (er - es))
                    - f(theta - step * (er - es))
                    + f(theta - step * (er + es))
                ) / (4.0 * step**2)

            hess[r, s], hess_err[r, s] = richardson(cross)
            hess[s, r] = hess[r, s]
            hess_err[s, r] = hess_err[r, s]

    worst = max(score_err.max(), hess_err.max())
    if worst > warn_tol:
        warnings.warn(
            f"oracle extrapolation discrepancy {worst:.3e} exceeds {warn_tol:.1e}",
            OracleAccuracyWarning,
            stacklevel=2,
        )
    return KalmanDerivatives(
        score=score, info=-hess, score_err=score_err, info_err=hess_err
    )


def kalman_score_info(
    model: LinearGaussianSSM,
    theta,
    ys,
    h: float = 0.002,
    warn_tol: float = 1e-4,
) -> KalmanDerivatives:
    """Score and observed information of the exact Kalman log-likelihood.

    The differentiated function is noise-free, so Richardson-extrapolated
    finite differences reach accuracy far beyond any Monte Carlo estimate
    under test; the returned error estimates quantify it per entry.
    """
    ys = np.asarray(ys, dtype=np.float64)
    return richardson_score_info(
        lambda th: kalman_loglik(model, th, ys), theta, h=h, warn_tol=warn_tol
    )


_CUBIC_SHOCK_SCALE = np.sqrt(14.0 / 3.0)  # Var(z + z^3/3) for z ~ N(0,1)


def make_nonlinear_shock_model(
    free=("phi",),
    fixed: Optional[Mapping[str, float]] = None,
    init_mean: float = 0.0,
    init_sd: float = 1.0,
) -> StateSpaceModel:
    """AR(1) whose shocks pass through a cubic warp: sample-only dynamics.

    The transition noise is ``(z + z^3/3)`` rescaled to unit variance, for z
    standard normal.  Nothing in the package ever evaluates this transition
    density; the model exists to exercise the sample-only interface.
    Observations are ``y = x + sigma_w w`` with w standard normal.
    """
    if fixed is None:
        fixed = {"log_sigma_v": 0.0, "log_sigma_w": 0.0}
    pmap = _ParamMap(free, fixed)

    def shock(rng, n):
        z = rng.standard_normal(n)
        return (z + z**3 / 3.0) / _CUBIC_SHOCK_SCALE

    def init_sampler(thetas, rng):
        return init_mean + init_sd * rng.standard_normal(thetas.shape[0])

    def transition_sampler(states, thetas, rng):
        phi, sv, _ = pmap.raw(thetas)
        return phi * states + sv * shock(rng, states.shape[0])

    def obs_logdensity(y, states, thetas):
        _, _, sw = pmap.raw(thetas)
        e = (y - states) / sw
        return -0.5 * (np.log(2.0 * np.pi) + e * e) - np.log(sw)

    def obs_sampler(states, thetas, rng):
        _, _, sw = pmap.raw(thetas)
        return states + sw * rng.standard_normal(states.shape[0])

    return StateSpaceModel(
        param_dim=pmap.dim,
        init_sampler=init_sampler,
        transition_sampler=transition_sampler,
        obs_logdensity=obs_logdensity,
        obs_sampler=obs_sampler,
    )
