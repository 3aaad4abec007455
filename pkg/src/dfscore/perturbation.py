"""Gaussian perturbation prior placed around a parameter point.

The prior is a centered Gaussian with diagonal covariance, scaled by a
shrinkage factor ``tau``: a draw is ``center + tau * (sigmas * z)`` with
``z`` standard normal.  Coordinate-wise independence and Gaussian kurtosis
(fourth moment exactly ``3 * sigma**4``) are what the downstream
information-matrix identity requires, so no other prior family is shipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["PerturbationKernel", "make_gaussian_kernel"]


@dataclass(frozen=True)
class PerturbationKernel:
    """Centered Gaussian prior with per-coordinate standard deviations.

    Immutable after construction; safe to share across concurrent tasks.
    Every sampling call receives its own random stream.
    """

    sigmas: np.ndarray = field(repr=True)

    def __post_init__(self):
        sigmas = np.atleast_1d(np.asarray(self.sigmas, dtype=np.float64))
        if sigmas.ndim != 1 or sigmas.size == 0:
            raise ValueError("sigmas must be a non-empty 1-d vector")
        if not np.all(np.isfinite(sigmas)) or np.any(sigmas <= 0.0):
            raise ValueError("all kernel standard deviations must be finite and > 0")
        sigmas = sigmas.copy()
        sigmas.flags.writeable = False
        object.__setattr__(self, "sigmas", sigmas)

    @property
    def dim(self) -> int:
        return self.sigmas.shape[0]

    def covariance(self) -> np.ndarray:
        """Diagonal covariance matrix (exact, no sampling)."""
        return np.diag(self.sigmas**2)

    def variances(self) -> np.ndarray:
        """Diagonal of the covariance matrix."""
        return self.sigmas**2

    def fourth_moment(self, i: int) -> float:
        """Fourth marginal moment of coordinate ``i`` (0-based): 3 * sigma_i**4."""
        if not 0 <= i < self.dim:
            raise IndexError(f"coordinate index {i} out of range for dim {self.dim}")
        return float(3.0 * self.sigmas[i] ** 4)

    def sample(self, center, tau, rng=None, size=None, z=None):
        """Draw from the prior centered at ``center`` with scale ``tau``.

        ``tau = 0`` is the degenerate point mass at the center.  ``z``
        injects pre-drawn standard normals (shape ``(dim,)`` or
        ``(size, dim)``) in place of drawing from ``rng``; tests use it to
        check symmetry and scale identities exactly.

        Returns shape ``(dim,)`` when ``size`` is None, else ``(size, dim)``.
        """
        center = np.asarray(center, dtype=np.float64)
        if center.shape != (self.dim,):
            raise ValueError(
                f"center has shape {center.shape}, kernel dimension is {self.dim}"
            )
        if tau < 0.0:
            raise ValueError("tau must be >= 0")
        if z is None:
            if rng is None:
                raise ValueError("either rng or z must be supplied")
            shape = (self.dim,) if size is None else (size, self.dim)
            z = rng.standard_normal(shape)
        else:
            z = np.asarray(z, dtype=np.float64)
            expected = (self.dim,) if size is None else (size, self.dim)
            if z.shape != expected:
                raise ValueError(f"z has shape {z.shape}, expected {expected}")
        return center + tau * (self.sigmas * z)


def make_gaussian_kernel(sigmas) -> PerturbationKernel:
    """Build the Gaussian perturbation prior from per-coordinate sigmas."""
    return PerturbationKernel(np.asarray(sigmas, dtype=np.float64))
