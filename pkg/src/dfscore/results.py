"""Result containers shared by the general and state-space estimators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

__all__ = ["ScoreEstimate", "InfoEstimate", "EstimateReport"]


@dataclass(frozen=True)
class ScoreEstimate:
    """Estimated log-likelihood gradient with its provenance tags."""

    values: np.ndarray
    tau: Optional[float] = None
    n: Optional[int] = None
    method: str = ""

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class InfoEstimate:
    """Estimated observed information matrix; symmetric, enforced exactly."""

    values: np.ndarray
    tau: Optional[float] = None
    n: Optional[int] = None
    method: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("information matrix must be square")
        if not np.array_equal(values, values.T):
            raise ValueError("information matrix must be exactly symmetric")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class EstimateReport:
    """Score and information estimates bundled with run diagnostics."""

    score: Optional[ScoreEstimate] = None
    info: Optional[InfoEstimate] = None
    diagnostics: dict[str, Any] = field(default_factory=dict)
