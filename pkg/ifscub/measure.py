"""Probability vectors defining the invariant measure of an IFS."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize

from .errors import ValidationError
from .ifs_core import IFS

logger = logging.getLogger(__name__)

# Explicit weights within this distance of summing to one are renormalised, others rejected
RENORMALIZE_TOLERANCE = 1e-6
DIMENSION_TOLERANCE = 1e-14


class MeasureOrigin(StrEnum):
    EXPLICIT = "explicit"
    HAUSDORFF = "hausdorff"


@dataclass(frozen=True, slots=True, eq=False)
class MeasureSpec:
    """Weights mu_l in (0, 1) summing to one.

    For Hausdorff weights `dimension` holds d with mu_l = rho_l^d. `formal` marks Hausdorff weights of a
    system that is not made of similitudes, where they do not describe a Hausdorff measure.
    """

    weights: NDArray[np.float64]
    origin: MeasureOrigin = MeasureOrigin.EXPLICIT
    dimension: float | None = None
    formal: bool = False

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size == 0:
            raise ValidationError(f"Measure weights must be a non-empty vector, got shape {weights.shape}")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0.0):
            raise ValidationError(f"Measure weights must be strictly positive, got {weights.tolist()}")
        total = math.fsum(weights)
        if abs(total - 1.0) > RENORMALIZE_TOLERANCE:
            raise ValidationError(f"Measure weights must sum to 1, got {total!r}")
        weights = weights / total
        if np.any(weights >= 1.0):
            raise ValidationError("Every measure weight must be below 1")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def explicit(cls, values: Sequence[float] | ArrayLike) -> "MeasureSpec":
        return cls(np.asarray(values, dtype=np.float64))

    @classmethod
    def uniform(cls, count: int) -> "MeasureSpec":
        return cls(np.full(count, 1.0 / count))

    def __len__(self) -> int:
        return self.weights.shape[0]

    def matches(self, ifs: IFS) -> bool:
        return len(self) == len(ifs.maps)


def hausdorff_dimension(rhos: ArrayLike) -> float:
    """The unique d with sum_l rho_l^d = 1, found by bisection."""
    rhos = np.asarray(rhos, dtype=np.float64)
    if rhos.ndim != 1 or rhos.size < 2:
        raise ValidationError("At least two contraction factors are needed")
    if np.any(rhos <= 0.0) or np.any(rhos >= 1.0):
        raise ValidationError(f"Contraction factors must lie in (0, 1), got {rhos.tolist()}")

    def excess(d: float) -> float:
        return float(np.sum(rhos**d)) - 1.0

    upper = 1.0
    while excess(upper) > 0.0:
        upper *= 2.0
    return float(optimize.bisect(excess, 0.0, upper, xtol=DIMENSION_TOLERANCE, rtol=4 * np.finfo(float).eps))


def hausdorff_weights(ifs: IFS) -> MeasureSpec:
    """mu_l = rho_l^d with d the similarity dimension of the system."""
    rhos = ifs.rhos
    d = hausdorff_dimension(rhos)
    formal = not ifs.is_similar
    if formal:
        logger.warning(
            "the system is not made of similitudes; rho_l^d weights (d = %.6g) are a formal choice", d
        )
    return MeasureSpec(rhos**d, MeasureOrigin.HAUSDORFF, dimension=d, formal=formal)
