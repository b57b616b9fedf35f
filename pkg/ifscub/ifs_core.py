"""Affine iterated function systems: maps, words, bounding boxes and chaos-game sampling.

An IFS is a finite family of contractions S_l(x) = A_l x + b_l of R^n. Everything here is immutable;
arrays stored on the value objects are flagged read-only.
"""

import itertools
import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from .errors import NumericalError, ValidationError

if TYPE_CHECKING:
    from .measure import MeasureSpec

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

# Burn-in of the random iteration algorithm
CHAOS_BURN_IN = 100
DEFAULT_DIAMETER_SAMPLES = 100_000
DEFAULT_DIAMETER_SEED = 42


def _frozen(values: ArrayLike, ndim: int) -> FloatArray:
    array = np.array(values, dtype=np.float64)
    if array.ndim != ndim:
        raise ValidationError(f"Expected a {ndim}-dimensional array, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValidationError("Non-finite entries are not allowed")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, slots=True)
class SpectralNormConfig:
    tol: float = 1e-14
    max_iter: int = 10_000
    # Problems of at most this dimension fall back to a dense eigensolve
    dense_dim: int = 4


def spectral_norm(A: ArrayLike, config: SpectralNormConfig = SpectralNormConfig()) -> float:
    """Largest singular value of A.

    Power iteration on AᵀA; when it does not settle within `max_iter` iterations the dense
    eigenvalues of AᵀA are used instead.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValidationError(f"Expected a matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError("Matrix has non-finite entries")
    if A.size == 0:
        return 0.0

    gram = A.T @ A
    v = np.random.default_rng(0).standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    for iteration in range(config.max_iter):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        estimate = float(v @ w)
        # For symmetric matrices the Rayleigh quotient is within |r| of an eigenvalue
        if np.linalg.norm(w - estimate * v) <= config.tol * abs(estimate):
            logger.debug("spectral norm converged after %d iterations", iteration + 1)
            return math.sqrt(max(estimate, 0.0))
        v = w / norm

    if gram.shape[0] > config.dense_dim:
        logger.warning(
            "power iteration for the spectral norm did not converge in %d iterations, using a dense solve",
            config.max_iter,
        )
    return math.sqrt(max(float(np.linalg.eigvalsh(gram)[-1]), 0.0))


@dataclass(frozen=True, slots=True, eq=False)
class AffineMap:
    """The map x -> A x + b, with its contraction factor rho (the spectral norm of A).

    Use `AffineMap.contraction` for the maps of an IFS (rho < 1 enforced) and `AffineMap.composed`
    for compositions and linear parts, which are exempt from the contraction requirement.
    """

    A: FloatArray
    b: FloatArray
    rho: float

    @classmethod
    def contraction(cls, A: ArrayLike, b: ArrayLike) -> "AffineMap":
        affine = cls.composed(A, b)
        if affine.rho >= 1.0:
            raise ValidationError(
                f"contraction factor ≥ 1 (rho = {affine.rho:.6g}), the map is not a contraction"
            )
        return affine

    @classmethod
    def composed(cls, A: ArrayLike, b: ArrayLike) -> "AffineMap":
        A_ = _frozen(A, 2)
        b_ = _frozen(b, 1)
        if A_.shape != (b_.shape[0], b_.shape[0]):
            raise ValidationError(
                f"Matrix of shape {A_.shape} does not match a translation of length {b_.shape[0]}"
            )
        return cls(A=A_, b=b_, rho=spectral_norm(A_))

    @classmethod
    def identity(cls, dim: int) -> "AffineMap":
        return cls.composed(np.eye(dim), np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def __call__(self, x: ArrayLike) -> FloatArray:
        """Applies the map to a point, or to an array of points of shape (..., n)."""
        return np.asarray(x, dtype=np.float64) @ self.A.T + self.b

    def then(self, inner: "AffineMap") -> "AffineMap":
        """The composition self ∘ inner."""
        return AffineMap.composed(self.A @ inner.A, self.A @ inner.b + self.b)

    def linear_part(self) -> "AffineMap":
        return AffineMap.composed(self.A, np.zeros(self.dim))


def fixed_point(affine: AffineMap) -> FloatArray:
    """The unique c with A c + b = c."""
    try:
        c = np.linalg.solve(np.eye(affine.dim) - affine.A, affine.b)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"I - A is singular, the map has no unique fixed point: {e}") from e
    c.setflags(write=False)
    return c


@dataclass(frozen=True, slots=True)
class Word:
    """A finite sequence of map indices m = (m_1, ..., m_p), standing for S_m = S_{m_1} ∘ ... ∘ S_{m_p}."""

    indices: tuple[int, ...]
    rho: float = 1.0

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True, slots=True, eq=False)
class IFS:
    maps: tuple[AffineMap, ...]
    dim: int = field(init=False)

    def __post_init__(self):
        if len(self.maps) < 2:
            raise ValidationError(f"An IFS needs at least 2 maps, got {len(self.maps)}")
        dims = {m.dim for m in self.maps}
        if len(dims) != 1:
            raise ValidationError(f"All maps must share one dimension, got {sorted(dims)}")
        for index, m in enumerate(self.maps):
            if m.rho >= 1.0:
                raise ValidationError(f"Map {index}: contraction factor ≥ 1 (rho = {m.rho:.6g})")
        object.__setattr__(self, "dim", dims.pop())

    @classmethod
    def from_arrays(cls, maps: Sequence[tuple[ArrayLike, ArrayLike]]) -> "IFS":
        return cls(tuple(AffineMap.contraction(A, b) for A, b in maps))

    def __len__(self) -> int:
        return len(self.maps)

    @property
    def rhos(self) -> FloatArray:
        return np.array([m.rho for m in self.maps])

    @property
    def rho_max(self) -> float:
        return max(m.rho for m in self.maps)

    @property
    def is_similar(self) -> bool:
        """True when every A_l is rho_l times an orthogonal matrix."""
        return all(
            np.allclose(m.A.T @ m.A, m.rho**2 * np.eye(self.dim), rtol=0.0, atol=1e-12)
            for m in self.maps
        )

    def word(self, indices: Sequence[int]) -> Word:
        indices = tuple(indices)
        for index in indices:
            if not 0 <= index < len(self.maps):
                raise ValidationError(f"Map index {index} out of range for {len(self.maps)} maps")
        return Word(indices, math.prod(self.maps[i].rho for i in indices))

    def fixed_points(self) -> FloatArray:
        return np.array([fixed_point(m) for m in self.maps])


def compose_word(ifs: IFS, word: Word | Sequence[int]) -> AffineMap:
    """The affine map S_m = S_{m_1} ∘ ... ∘ S_{m_p}; the empty word is the identity."""
    indices = word.indices if isinstance(word, Word) else tuple(word)
    ifs.word(indices)
    result = AffineMap.identity(ifs.dim)
    for index in indices:
        result = result.then(ifs.maps[index])
    return result


@dataclass(frozen=True, slots=True, eq=False)
class BoundingBox:
    """An axis-aligned box [lo, hi] with S_l(box) ⊂ box for every map of its IFS."""

    lo: FloatArray
    hi: FloatArray

    def __post_init__(self):
        object.__setattr__(self, "lo", _frozen(self.lo, 1))
        object.__setattr__(self, "hi", _frozen(self.hi, 1))
        if self.lo.shape != self.hi.shape:
            raise ValidationError("Box corners have different dimensions")
        if not np.all(self.lo < self.hi):
            raise ValidationError(f"Box needs lo < hi on every axis, got {self.lo} and {self.hi}")

    @classmethod
    def validated(cls, ifs: IFS, lo: ArrayLike, hi: ArrayLike) -> "BoundingBox":
        box = cls(np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64))
        if box.dim != ifs.dim:
            raise ValidationError(f"Box of dimension {box.dim} for an IFS of dimension {ifs.dim}")
        if not box.is_invariant(ifs):
            raise ValidationError("The box is not mapped into itself by every map of the IFS")
        return box

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def center(self) -> FloatArray:
        return (self.lo + self.hi) / 2

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def corners(self) -> FloatArray:
        """All 2ⁿ corners, shape (2ⁿ, n)."""
        return np.array(list(itertools.product(*zip(self.lo, self.hi))))

    def contains(self, points: ArrayLike, tol: float = 0.0) -> bool:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return bool(np.all(points >= self.lo - tol) and np.all(points <= self.hi + tol))

    def is_invariant(self, ifs: IFS) -> bool:
        """Corner test: an affine image of the box is the convex hull of the images of its corners."""
        corners = self.corners()
        tol = 1e-12 * (1.0 + float(np.max(np.abs(corners))))
        return all(self.contains(m(corners), tol) for m in ifs.maps)


@dataclass(frozen=True, slots=True)
class BoxSearchConfig:
    inflation: float = 1.001
    max_retries: int = 40
    xatol: float = 1e-10
    fatol: float = 1e-12


def _box_objective(ifs: IFS, z: FloatArray) -> float:
    return max(
        float(np.max(np.abs(z - m(z)))) / (1.0 - m.rho) for m in ifs.maps
    )


def bounding_box(
    ifs: IFS, seed: ArrayLike | None = None, config: BoxSearchConfig = BoxSearchConfig()
) -> BoundingBox:
    """A hypercube around the minimiser of z -> max_l |z - S_l(z)|∞ / (1 - rho_l).

    The seed defaults to the mean of the fixed points. The half-width is inflated and then doubled
    until the box passes the corner test.
    """
    z0 = ifs.fixed_points().mean(axis=0) if seed is None else np.asarray(seed, dtype=np.float64)
    result = optimize.minimize(
        lambda z: _box_objective(ifs, z),
        z0,
        method="Nelder-Mead",
        options={"xatol": config.xatol, "fatol": config.fatol, "maxiter": 2000 * ifs.dim},
    )
    center = np.asarray(result.x, dtype=np.float64)
    radius = _box_objective(ifs, center)
    logger.debug("box search: center %s, objective %.6g (%s)", center, radius, result.message)

    # A single point attractor gives a zero objective; any positive radius works then.
    half_width = max(radius * config.inflation, 1e-8 * (1.0 + float(np.max(np.abs(center)))))
    for retry in range(config.max_retries + 1):
        box = BoundingBox(center - half_width, center + half_width)
        if box.is_invariant(ifs):
            if retry:
                logger.info("bounding box validated after %d retries", retry)
            return box
        half_width *= 2.0

    raise NumericalError(
        f"No invariant bounding box found after {config.max_retries} retries; "
        "the system may not be contractive in the max norm"
    )


def _chaos_orbit(
    ifs: IFS, measure: "MeasureSpec", count: int, rng_seed: int
) -> Iterator[FloatArray]:
    rng = np.random.default_rng(rng_seed)
    choices = rng.choice(len(ifs.maps), size=CHAOS_BURN_IN + count, p=measure.weights)
    x = np.array(fixed_point(ifs.maps[0]))
    for step, index in enumerate(choices):
        x = ifs.maps[index](x)
        if step >= CHAOS_BURN_IN:
            yield x


def chaos_sample(ifs: IFS, measure: "MeasureSpec", count: int, rng_seed: int) -> FloatArray:
    """Points of the random iteration algorithm, shape (count, n), reproducible for a fixed seed."""
    if count < 1:
        raise ValidationError(f"count must be at least 1, got {count}")
    if len(measure.weights) != len(ifs.maps):
        raise ValidationError("The measure does not match the number of maps")
    return np.array(list(_chaos_orbit(ifs, measure, count, rng_seed)))


def point_set_diameter(points: ArrayLike) -> float:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[0] < 2:
        return 0.0
    if points.shape[1] == 1:
        return float(np.ptp(points[:, 0]))
    try:
        hull = ConvexHull(points)
        extreme = points[hull.vertices]
    except QhullError:
        # Degenerate (e.g. collinear) samples; the diagonal of the sample's box bounds the diameter.
        return float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))
    return float(pdist(extreme).max())


def attractor_diameter(
    ifs: IFS,
    measure: "MeasureSpec",
    count: int = DEFAULT_DIAMETER_SAMPLES,
    rng_seed: int = DEFAULT_DIAMETER_SEED,
) -> float:
    """Estimate of Diam Γ from a chaos-game sample."""
    return point_set_diameter(chaos_sample(ifs, measure, count, rng_seed))
