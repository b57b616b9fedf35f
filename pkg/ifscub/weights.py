"""Cubature weights as the left eigenvector of S for the eigenvalue 1.

S_ij = sum_l mu_l L_j(S_l(x_i)). Every row of S sums to one, so 1 is an eigenvalue; the weights are the
solution of Sᵀw = w normalised by w · 1 = 1. In the IFS-invariant case this eigenvalue is simple and
dominant, so power iteration on Sᵀ converges at the rate of the second eigenvalue.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from enum import StrEnum
from typing import final

import numpy as np
from numpy.typing import NDArray
from scipy import linalg

from .errors import NumericalError, ValidationError
from .ifs_core import IFS
from .interpolation import TensorGrid, lagrange_eval_many
from .measure import MeasureSpec
from .moments import MomentTable
from .polyspace import MultiIndex, SpaceSpec

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

ROW_SUM_TOLERANCE = 1e-8
# Above this |lambda_2| the eigenvalue 1 is reported as numerically close to degenerate
SIMPLICITY_WARNING = 1.0 - 1e-6


@dataclass(frozen=True, slots=True)
class SolverConfig:
    tol: float = 1e-13
    max_iter: int = 100_000
    # Give up on power iteration when the residual has not improved for this many iterations
    stagnation: int = 200
    dense_limit: int = 4096
    orthogonality_guard: float = 1e-8
    simplicity_tol: float = 1e-8
    max_residual: float = 1e-9
    deflation_iter: int = 500


class SolveMethod(StrEnum):
    POWER = "power"
    DENSE = "dense"


@dataclass(frozen=True, slots=True, eq=False)
class SMatrix:
    matrix: FloatArray
    ifs: IFS
    measure: MeasureSpec
    grid: TensorGrid

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, slots=True, eq=False)
class WeightSolution:
    weights: FloatArray
    residual: float
    iterations: int
    method: SolveMethod
    # Estimate of the modulus of the second largest eigenvalue of S
    second_eigenvalue: float

    @property
    def gap(self) -> float:
        return 1.0 - self.second_eigenvalue


@dataclass(frozen=True, slots=True, eq=False)
class CubatureRule:
    points: FloatArray
    weights: FloatArray
    residual: float
    gap: float
    space: SpaceSpec
    method: SolveMethod = SolveMethod.POWER
    iterations: int = 0

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def l1_norm(self) -> float:
        return math.fsum(np.abs(self.weights))


def assemble_S(ifs: IFS, mu: MeasureSpec, grid: TensorGrid) -> SMatrix:
    """S_ij = sum_l mu_l L_j(S_l(x_i)), summed over l in ascending order."""
    if not mu.matches(ifs):
        raise ValidationError(f"Measure with {len(mu)} weights for an IFS with {len(ifs.maps)} maps")
    if grid.dim != ifs.dim:
        raise ValidationError(f"Grid of dimension {grid.dim} for an IFS of dimension {ifs.dim}")

    matrix = np.zeros((grid.size, grid.size))
    for weight, affine in zip(mu.weights, ifs.maps):
        matrix += weight * lagrange_eval_many(grid, affine(grid.points))

    deviation = float(np.max(np.abs(matrix.sum(axis=1) - 1.0)))
    if deviation > ROW_SUM_TOLERANCE:
        raise NumericalError(
            f"Rows of S deviate from summing to one by {deviation:.3e}; the interpolation is unstable"
        )
    matrix.setflags(write=False)
    return SMatrix(matrix, ifs, mu, grid)


def spectrum(S: SMatrix | FloatArray) -> NDArray[np.complex128]:
    """All eigenvalues of S by decreasing modulus."""
    matrix = S.matrix if isinstance(S, SMatrix) else np.asarray(S)
    eigenvalues = linalg.eigvals(matrix)
    return eigenvalues[np.argsort(-np.abs(eigenvalues), kind="stable")]


def _residual(St: FloatArray, w: FloatArray) -> float:
    return float(np.max(np.abs(St @ w - w)))


@final
class WeightSolver:
    """Power iteration on Sᵀ with a dense eigensolve as fallback."""

    def __init__(self, config: SolverConfig = SolverConfig()):
        self.config = config

    def _power_iteration(self, St: FloatArray) -> tuple[FloatArray | None, int, float]:
        """Returns the converged vector (or None), the iteration count and the observed contraction rate."""
        v = np.ones(St.shape[0])
        best = math.inf
        since_best = 0
        residuals: list[float] = []
        for iteration in range(self.config.max_iter):
            y = St @ v
            residual = float(np.max(np.abs(y - v)))
            residuals.append(residual)
            if residual <= self.config.tol * float(np.max(np.abs(v))):
                return v, iteration, self._rate(residuals)
            if residual < best:
                best, since_best = residual, 0
            else:
                since_best += 1
                if since_best > self.config.stagnation:
                    logger.info("power iteration stagnated at residual %.3e", best)
                    return None, iteration, self._rate(residuals)
            scale = float(np.max(np.abs(y)))
            if scale == 0.0:
                return None, iteration, self._rate(residuals)
            v = y / scale
        logger.info("power iteration reached %d iterations", self.config.max_iter)
        return None, self.config.max_iter, self._rate(residuals)

    @staticmethod
    def _rate(residuals: list[float]) -> float:
        """Geometric mean of the last few residual ratios."""
        tail = [r for r in residuals[-6:] if r > 0.0]
        if len(tail) < 2:
            return 0.0
        return min(1.0, (tail[-1] / tail[0]) ** (1.0 / (len(tail) - 1)))

    def _dense(self, St: FloatArray) -> FloatArray:
        if St.shape[0] > self.config.dense_limit:
            raise NumericalError(
                f"Power iteration failed and S of size {St.shape[0]} exceeds the dense limit {self.config.dense_limit}"
            )
        eigenvalues, vectors = linalg.eig(St)
        near_one = np.flatnonzero(np.abs(eigenvalues - 1.0) <= self.config.simplicity_tol)
        if near_one.size > 1:
            raise NumericalError("eigenvalue 1 not numerically simple")
        if near_one.size == 0:
            raise NumericalError("S has no eigenvalue numerically equal to 1")
        return np.real(vectors[:, near_one[0]])

    def _second_eigenvalue(self, St: FloatArray, w: FloatArray) -> float:
        """Power iteration on Sᵀ - w 1ᵀ, which removes the eigenvalue 1 from the spectrum."""
        size = St.shape[0]
        if size == 1:
            return 0.0
        v = np.random.default_rng(0).standard_normal(size)
        v -= w * v.sum()
        v /= np.linalg.norm(v)
        # Mean log growth over windows, so complex pairs and non-normal transients average out
        window = 25
        growth: list[float] = []
        previous = math.inf
        for _ in range(self.config.deflation_iter):
            y = St @ v - w * v.sum()
            norm = float(np.linalg.norm(y))
            if norm == 0.0:
                return 0.0
            growth.append(math.log(norm))
            v = y / norm
            if len(growth) % window == 0:
                estimate = math.exp(math.fsum(growth[-window:]) / window)
                if abs(estimate - previous) <= 1e-6 * estimate:
                    break
                previous = estimate
        tail = growth[-window:]
        return math.exp(math.fsum(tail) / len(tail))

    def solve(self, S: SMatrix | FloatArray) -> WeightSolution:
        matrix = S.matrix if isinstance(S, SMatrix) else np.asarray(S, dtype=np.float64)
        St = matrix.T
        before = time.perf_counter()

        method = SolveMethod.POWER
        v, iterations, rate = self._power_iteration(St)
        if v is not None and abs(v.sum()) < self.config.orthogonality_guard * float(np.max(np.abs(v))):
            logger.info("power iteration vector is nearly orthogonal to the constants")
            v = None
        if v is None:
            logger.warning("falling back to a dense eigensolve for S of size %d", St.shape[0])
            method = SolveMethod.DENSE
            v = self._dense(St)

        total = float(v.sum())
        if abs(total) < self.config.orthogonality_guard * float(np.max(np.abs(v))):
            raise NumericalError("The eigenvector for eigenvalue 1 is orthogonal to the constants")
        w = v / total
        residual = _residual(St, w)
        if residual > self.config.max_residual:
            raise NumericalError(f"Weight residual {residual:.3e} exceeds {self.config.max_residual:.1e}")

        second = self._second_eigenvalue(St, w)
        if method == SolveMethod.POWER and rate > 0.0:
            logger.debug("observed convergence rate %.4f, deflated estimate %.4f", rate, second)
        if second > SIMPLICITY_WARNING:
            logger.warning(
                "second eigenvalue of S has modulus %.8f; eigenvalue 1 may not be simple", second
            )
        logger.debug(
            "weights for M = %d by %s in %d iterations, residual %.3e, %.3fs",
            St.shape[0],
            method,
            iterations,
            residual,
            time.perf_counter() - before,
        )
        w.setflags(write=False)
        return WeightSolution(w, residual, iterations, method, second)


def solve_weights(S: SMatrix | FloatArray, config: SolverConfig = SolverConfig()) -> WeightSolution:
    return WeightSolver(config).solve(S)


def build_rule(
    ifs: IFS, mu: MeasureSpec, grid: TensorGrid, config: SolverConfig = SolverConfig()
) -> CubatureRule:
    """The interpolatory rule on the grid: points x_i with weights solving Sᵀw = w, w · 1 = 1."""
    solution = solve_weights(assemble_S(ifs, mu, grid), config)
    return CubatureRule(
        points=grid.points,
        weights=solution.weights,
        residual=solution.residual,
        gap=solution.gap,
        space=grid.space,
        method=solution.method,
        iterations=solution.iterations,
    )


def monomial_values(points: FloatArray, alpha: MultiIndex) -> FloatArray:
    return np.prod(points ** np.array(alpha), axis=-1)


@dataclass(frozen=True, slots=True)
class ExactnessReport:
    space: SpaceSpec
    max_error: float
    worst: MultiIndex | None
    errors: dict[MultiIndex, float] = field(repr=False)


def verify_exactness(rule: CubatureRule, table: MomentTable, space: SpaceSpec) -> ExactnessReport:
    """Largest |Q[x^alpha] - m_alpha| over the basis monomials of `space`."""
    if space.max_total_degree > table.degree:
        raise ValidationError(
            f"{space} needs moments up to degree {space.max_total_degree}, the table stops at {table.degree}"
        )
    errors = {
        alpha: abs(float(rule.weights @ monomial_values(rule.points, alpha)) - table[alpha])
        for alpha in space.basis
    }
    worst = max(errors, key=errors.__getitem__, default=None)
    return ExactnessReport(space, errors[worst] if worst is not None else 0.0, worst, errors)
