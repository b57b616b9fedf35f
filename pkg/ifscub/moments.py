"""Moments m_alpha = ∫ x^alpha dmu of the invariant measure, computed degree by degree.

Integrating the identity ∫ p dmu = ∫ F[p] dmu over the monomials of degree d gives the linear system
(I - F_dᵀ) M_d = R_d, where F_d is the block of F on H_d and R_d collects the contributions of the
already known lower-degree moments.
"""

import logging
import time
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import NumericalError, ValidationError
from .ifs_core import IFS
from .measure import MeasureSpec
from .polyspace import MultiIndex, Polynomial, homogeneous_basis, ruelle_images

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-12


@dataclass(frozen=True, slots=True)
class MomentTable:
    dim: int
    degree: int
    values: Mapping[MultiIndex, float]
    # residuals[d] is the max-norm residual of the degree-d solve; residuals[0] is 0
    residuals: tuple[float, ...]

    def __getitem__(self, alpha: MultiIndex) -> float:
        try:
            return self.values[tuple(alpha)]
        except KeyError:
            raise ValidationError(f"No moment for {alpha} in a table of degree {self.degree}") from None

    def integrate(self, p: Polynomial) -> float:
        return integrate_polynomial(p, self)


def compute_moments(ifs: IFS, mu: MeasureSpec, k: int) -> MomentTable:
    """All moments of total degree at most k."""
    if k < 0:
        raise ValidationError(f"Degree must be non-negative, got {k}")
    if not mu.matches(ifs):
        raise ValidationError(f"Measure with {len(mu)} weights for an IFS with {len(ifs.maps)} maps")

    before = time.perf_counter()
    values: dict[MultiIndex, float] = {(0,) * ifs.dim: 1.0}
    residuals = [0.0]
    for d in range(1, k + 1):
        basis = homogeneous_basis(ifs.dim, d)
        images = ruelle_images(basis, ifs, mu)

        block = np.empty((len(basis), len(basis)))
        rhs = np.empty(len(basis))
        for j, alpha in enumerate(images):
            image = images[alpha]
            block[:, j] = image.coefficient_vector(basis)
            rhs[j] = sum(c * values[beta] for beta, c in image.coeffs.items() if sum(beta) < d)

        system = np.eye(len(basis)) - block.T
        moments = linalg.solve(system, rhs)
        residual = float(np.max(np.abs(system @ moments - rhs)))
        if residual > RESIDUAL_TOLERANCE * (1.0 + float(np.max(np.abs(rhs)))):
            raise NumericalError(f"Moment solve for degree {d} has residual {residual:.3e}")

        residuals.append(residual)
        values.update(zip(basis, moments.tolist()))

    logger.debug("moments up to degree %d in %.3fs", k, time.perf_counter() - before)
    return MomentTable(ifs.dim, k, values, tuple(residuals))


def integrate_polynomial(p: Polynomial, table: MomentTable) -> float:
    """∫ p dmu = sum_alpha c_alpha m_alpha."""
    if p.dim != table.dim:
        raise ValidationError(f"Polynomial in {p.dim} variables, moments in {table.dim}")
    if p.degree > table.degree:
        raise ValidationError(f"Polynomial of degree {p.degree} exceeds the table degree {table.degree}")
    return sum((c * table.values[alpha] for alpha, c in p.coeffs.items()), 0.0)
