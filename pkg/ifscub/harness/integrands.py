"""Built-in integrands."""

from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray

from ..cubature import Integrand
from ..errors import ValidationError
from ..polyspace import Polynomial

DEFAULT_KAPPA = 5.0
DEFAULT_X0 = (0.1, -2.0)


def helmholtz_integrand(kappa: float = DEFAULT_KAPPA, x0: Sequence[float] = DEFAULT_X0) -> Integrand:
    """The Helmholtz kernel x -> exp(i kappa |x - x0|) / |x - x0|; infinite at x0."""
    source = np.asarray(x0, dtype=np.float64)
    if source.ndim != 1 or not np.all(np.isfinite(source)) or not np.isfinite(kappa):
        raise ValidationError(f"Need a finite wavenumber and source point, got kappa = {kappa}, x0 = {x0}")

    def f(points: NDArray[np.float64]) -> NDArray[np.complex128]:
        if points.shape[-1] != source.size:
            raise ValidationError(f"Source point in R^{source.size}, points in R^{points.shape[-1]}")
        r = np.linalg.norm(points - source, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.exp(1j * kappa * r) / r

    return Integrand(f, "helmholtz", {"kappa": float(kappa), "x0": source.tolist()})


def polynomial_integrand(p: Polynomial) -> Integrand:
    return Integrand(p, "polynomial", {"degree": p.degree, "terms": len(p.coeffs)})


def constant_integrand(value: complex = 1.0) -> Integrand:
    def f(points: NDArray[np.float64]) -> NDArray[np.complex128]:
        return np.full(points.shape[:-1], value, dtype=np.complex128)

    return Integrand(f, "constant", {"value": value})
