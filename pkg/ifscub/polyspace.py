"""Multivariate polynomials, the spaces P_k and Q_k, and the Ruelle operator F[p] = sum_l mu_l p ∘ S_l.

Polynomials are sparse maps from multi-indices (tuples of exponents) to coefficients. Bases are listed in
graded-lexicographic order: ascending total degree, ties broken by descending exponent tuple, so x1 comes
before x2.
"""

import itertools
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cache

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ValidationError
from .ifs_core import IFS, AffineMap
from .measure import MeasureSpec

logger = logging.getLogger(__name__)

MultiIndex = tuple[int, ...]

# Affine substitution is only supported up to this degree
MAX_DEGREE = 60


def total_degree(alpha: MultiIndex) -> int:
    return sum(alpha)


def max_degree(alpha: MultiIndex) -> int:
    return max(alpha, default=0)


def graded_lex_key(alpha: MultiIndex) -> tuple[int, tuple[int, ...]]:
    return sum(alpha), tuple(-a for a in alpha)


@cache
def homogeneous_basis(dim: int, degree: int) -> tuple[MultiIndex, ...]:
    """All alpha with |alpha|_1 = degree, in graded-lex order."""
    if dim < 1 or degree < 0:
        raise ValidationError(f"Invalid homogeneous space H_{degree} in dimension {dim}")
    if dim == 1:
        return ((degree,),)
    return tuple(
        (first, *rest)
        for first in range(degree, -1, -1)
        for rest in homogeneous_basis(dim - 1, degree - first)
    )


class SpaceKind(StrEnum):
    TOTAL = "P"
    TENSOR = "Q"


@dataclass(frozen=True, slots=True)
class SpaceSpec:
    """P_k (total degree at most k) or Q_k (degree at most k in every variable) in dimension `dim`."""

    kind: SpaceKind
    dim: int
    degree: int
    basis: tuple[MultiIndex, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1 or self.degree < 0:
            raise ValidationError(f"Invalid space {self.kind}_{self.degree} in dimension {self.dim}")
        if self.kind == SpaceKind.TOTAL:
            basis = [alpha for d in range(self.degree + 1) for alpha in homogeneous_basis(self.dim, d)]
        else:
            basis = sorted(
                itertools.product(range(self.degree + 1), repeat=self.dim), key=graded_lex_key
            )
        object.__setattr__(self, "basis", tuple(basis))

    @classmethod
    def total(cls, dim: int, degree: int) -> "SpaceSpec":
        return cls(SpaceKind.TOTAL, dim, degree)

    @classmethod
    def tensor(cls, dim: int, degree: int) -> "SpaceSpec":
        return cls(SpaceKind.TENSOR, dim, degree)

    def __len__(self) -> int:
        return len(self.basis)

    def __contains__(self, alpha: object) -> bool:
        if not isinstance(alpha, tuple) or len(alpha) != self.dim:
            return False
        if self.kind == SpaceKind.TOTAL:
            return total_degree(alpha) <= self.degree
        return max_degree(alpha) <= self.degree

    @property
    def max_total_degree(self) -> int:
        return self.degree if self.kind == SpaceKind.TOTAL else self.degree * self.dim

    def __str__(self) -> str:
        return f"{self.kind}_{self.degree}"


@dataclass(frozen=True, slots=True)
class Polynomial:
    """A polynomial in `dim` variables as a sparse coefficient map; zero coefficients are never stored."""

    dim: int
    coeffs: Mapping[MultiIndex, float] = field(default_factory=dict)

    def __post_init__(self):
        cleaned: dict[MultiIndex, float] = {}
        for alpha, c in self.coeffs.items():
            if len(alpha) != self.dim:
                raise ValidationError(f"Exponent {alpha} does not have {self.dim} entries")
            if c != 0:
                cleaned[tuple(alpha)] = c
        object.__setattr__(self, "coeffs", cleaned)

    @classmethod
    def constant(cls, dim: int, value: float = 1.0) -> "Polynomial":
        return cls(dim, {(0,) * dim: value})

    @classmethod
    def monomial(cls, alpha: Sequence[int], coefficient: float = 1.0) -> "Polynomial":
        return cls(len(alpha), {tuple(alpha): coefficient})

    @classmethod
    def affine_form(cls, row: ArrayLike, offset: float) -> "Polynomial":
        """The polynomial x -> row · x + offset."""
        row = np.asarray(row, dtype=np.float64)
        dim = row.shape[0]
        coeffs = {(0,) * dim: float(offset)}
        for j, a in enumerate(row):
            alpha = [0] * dim
            alpha[j] = 1
            coeffs[tuple(alpha)] = float(a)
        return cls(dim, coeffs)

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        return max((sum(alpha) for alpha in self.coeffs), default=-1)

    def is_zero(self) -> bool:
        return not self.coeffs

    def homogeneous_part(self, degree: int) -> "Polynomial":
        return Polynomial(self.dim, {a: c for a, c in self.coeffs.items() if sum(a) == degree})

    def _check(self, other: "Polynomial"):
        if other.dim != self.dim:
            raise ValidationError(f"Dimension mismatch: {self.dim} and {other.dim}")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check(other)
        coeffs = dict(self.coeffs)
        for alpha, c in other.coeffs.items():
            coeffs[alpha] = coeffs.get(alpha, 0.0) + c
        return Polynomial(self.dim, coeffs)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.dim, {a: -c for a, c in self.coeffs.items()})

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: "Polynomial | float") -> "Polynomial":
        if isinstance(other, int | float):
            return Polynomial(self.dim, {a: other * c for a, c in self.coeffs.items()})
        self._check(other)
        coeffs: dict[MultiIndex, float] = {}
        for (alpha, a), (beta, b) in itertools.product(self.coeffs.items(), other.coeffs.items()):
            gamma = tuple(i + j for i, j in zip(alpha, beta))
            coeffs[gamma] = coeffs.get(gamma, 0.0) + a * b
        return Polynomial(self.dim, coeffs)

    def __rmul__(self, other: float) -> "Polynomial":
        return self * other

    def __call__(self, points: ArrayLike) -> NDArray[np.float64]:
        """Evaluates at a point, or at an array of points of shape (..., dim)."""
        points = np.asarray(points, dtype=np.float64)
        if points.shape[-1] != self.dim:
            raise ValidationError(f"Expected points with {self.dim} coordinates")
        result = np.zeros(points.shape[:-1])
        for alpha, c in self.coeffs.items():
            result = result + c * np.prod(points ** np.array(alpha), axis=-1)
        return result

    def coefficient_vector(self, basis: Sequence[MultiIndex]) -> NDArray[np.float64]:
        return np.array([self.coeffs.get(alpha, 0.0) for alpha in basis])


def _affine_powers(affine: AffineMap, degrees: Sequence[int]) -> list[list[Polynomial]]:
    """powers[i][k] = (A x + b)_i ** k for k up to degrees[i]."""
    powers: list[list[Polynomial]] = []
    for i, top in enumerate(degrees):
        form = Polynomial.affine_form(affine.A[i], affine.b[i])
        row = [Polynomial.constant(affine.dim)]
        for _ in range(top):
            row.append(row[-1] * form)
        powers.append(row)
    return powers


def compose_affine_many(
    monomials: Iterable[MultiIndex], affine: AffineMap
) -> dict[MultiIndex, Polynomial]:
    """x^alpha ∘ affine for each alpha, sharing the powers of the substituted affine forms."""
    monomials = list(monomials)
    if not monomials:
        return {}
    if any(len(alpha) != affine.dim for alpha in monomials):
        raise ValidationError("Monomial and map dimensions do not match")
    if any(sum(alpha) > MAX_DEGREE for alpha in monomials):
        raise ValidationError(f"Affine substitution is limited to degree {MAX_DEGREE}")
    degrees = [max(alpha[i] for alpha in monomials) for i in range(affine.dim)]
    powers = _affine_powers(affine, degrees)
    result: dict[MultiIndex, Polynomial] = {}
    for alpha in monomials:
        product = Polynomial.constant(affine.dim)
        for i, k in enumerate(alpha):
            if k:
                product = product * powers[i][k]
        result[alpha] = product
    return result


def _linear_combination(terms: Iterable[tuple[float, Polynomial]], dim: int) -> Polynomial:
    coeffs: dict[MultiIndex, float] = {}
    for scale, p in terms:
        for alpha, c in p.coeffs.items():
            coeffs[alpha] = coeffs.get(alpha, 0.0) + scale * c
    return Polynomial(dim, coeffs)


def compose_affine(p: Polynomial, affine: AffineMap) -> Polynomial:
    """The polynomial x -> p(A x + b)."""
    if p.dim != affine.dim:
        raise ValidationError(f"Polynomial in {p.dim} variables composed with a map of R^{affine.dim}")
    images = compose_affine_many(p.coeffs, affine)
    return _linear_combination(((c, images[alpha]) for alpha, c in p.coeffs.items()), p.dim)


def _check_pair(ifs: IFS, mu: MeasureSpec):
    if not mu.matches(ifs):
        raise ValidationError(f"Measure with {len(mu)} weights for an IFS with {len(ifs.maps)} maps")


def ruelle_images(
    monomials: Sequence[MultiIndex], ifs: IFS, mu: MeasureSpec, linear: bool = False
) -> dict[MultiIndex, Polynomial]:
    """F[x^alpha] for each alpha; with `linear` the translations are dropped (x -> A_l x)."""
    _check_pair(ifs, mu)
    per_map = [
        compose_affine_many(monomials, m.linear_part() if linear else m) for m in ifs.maps
    ]
    return {
        alpha: _linear_combination(zip(mu.weights, (images[alpha] for images in per_map)), ifs.dim)
        for alpha in monomials
    }


def ruelle_apply(p: Polynomial, ifs: IFS, mu: MeasureSpec) -> Polynomial:
    """F[p] = sum_l mu_l p ∘ S_l."""
    if p.dim != ifs.dim:
        raise ValidationError(f"Polynomial in {p.dim} variables for an IFS on R^{ifs.dim}")
    images = ruelle_images(list(p.coeffs), ifs, mu)
    return _linear_combination(((c, images[alpha]) for alpha, c in p.coeffs.items()), p.dim)


def ruelle_block(ifs: IFS, mu: MeasureSpec, k: int) -> NDArray[np.float64]:
    """Matrix of the diagonal block F_{k,k} on the graded-lex basis of H_k.

    Column j holds the coefficients of sum_l mu_l (A_l x)^alpha_j.
    """
    if k < 0:
        raise ValidationError(f"Degree must be non-negative, got {k}")
    basis = homogeneous_basis(ifs.dim, k)
    images = ruelle_images(basis, ifs, mu, linear=True)
    return np.column_stack([images[alpha].coefficient_vector(basis) for alpha in basis])


def spectral_radius_bound(ifs: IFS, mu: MeasureSpec, k: int) -> float:
    """r_k = sum_l mu_l rho_l^k, bounding the spectrum of F_{k,k} for k ≥ 1."""
    if k < 1:
        raise ValidationError("The bound only holds for k ≥ 1; F_{0,0} is the identity")
    _check_pair(ifs, mu)
    return math.fsum(mu.weights * ifs.rhos**k)


def ruelle_matrix(
    ifs: IFS, mu: MeasureSpec, space: SpaceSpec, tol: float = 1e-12
) -> NDArray[np.float64]:
    """Matrix of F restricted to an IFS-invariant space, columns being images of the basis monomials.

    Raises if some image has a coefficient above `tol` outside the space.
    """
    images = ruelle_images(space.basis, ifs, mu)
    for alpha, image in images.items():
        outside = {beta: c for beta, c in image.coeffs.items() if beta not in space and abs(c) > tol}
        if outside:
            raise ValidationError(f"{space} is not IFS-invariant: F[x^{alpha}] leaves the space")
    return np.column_stack([images[alpha].coefficient_vector(space.basis) for alpha in space.basis])


def is_ifs_invariant(ifs: IFS, mu: MeasureSpec, space: SpaceSpec, tol: float = 1e-12) -> bool:
    try:
        ruelle_matrix(ifs, mu, space, tol)
    except ValidationError:
        return False
    return True


def random_polynomial(dim: int, degree: int, rng: np.random.Generator) -> Polynomial:
    """Coefficients uniform in [-1, 1] on every monomial of P_degree."""
    return Polynomial(
        dim, {alpha: float(rng.uniform(-1.0, 1.0)) for alpha in SpaceSpec.total(dim, degree).basis}
    )
