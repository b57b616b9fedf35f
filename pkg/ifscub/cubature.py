"""Applying cubature rules: the p-version Q[f] and the composite h-version over a word mesh.

The mesh L_h holds the minimal words m with rho_m · diam ≤ h. Since ∫ f dmu = sum_m mu_m ∫ f ∘ S_m dmu,
the composite rule is Q_h[f] = sum_m mu_m Q[f ∘ S_m].
"""

import logging
import math
import time
from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import NumericalError, ValidationError
from .ifs_core import IFS, BoundingBox
from .measure import MeasureSpec
from .weights import CubatureRule

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

DEFAULT_MAX_WORDS = 10_000_000
# Bound on evaluation points per vectorised batch in h_integrate
BATCH_POINTS = 1 << 18
# Relative slack in the refinement test rho_m · diam > h, so that products equal to h up to rounding pass
REFINEMENT_SLACK = 1e-12


@dataclass(frozen=True, slots=True)
class Integrand:
    """A function of points of shape (..., n) returning values of shape (...), possibly complex."""

    func: Callable[[FloatArray], NDArray[Any]]
    name: str = "f"
    parameters: Mapping[str, Any] = field(default_factory=dict)

    def __call__(self, points: ArrayLike) -> NDArray[np.complex128]:
        return np.asarray(self.func(np.asarray(points, dtype=np.float64)), dtype=np.complex128)


def _fsum_complex(values: ArrayLike) -> complex:
    values = np.asarray(values, dtype=np.complex128)
    return complex(math.fsum(values.real), math.fsum(values.imag))


def compensated_row_sums(terms: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Kahan sums along the last axis, vectorised over the rows."""
    total = np.zeros(terms.shape[:-1], dtype=np.complex128)
    carry = np.zeros_like(total)
    for column in np.moveaxis(terms, -1, 0):
        y = column - carry
        t = total + y
        carry = (t - total) - y
        total = t
    return total


def apply_rule(rule: CubatureRule, f: Integrand) -> complex:
    """Q[f] = sum_i w_i f(x_i)."""
    values = f(rule.points)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NumericalError(f"{f.name} is not finite at the cubature point {rule.points[bad[0]].tolist()}")
    return _fsum_complex(rule.weights * values)


@dataclass(frozen=True, slots=True, eq=False)
class MeshConfig:
    max_words: int = DEFAULT_MAX_WORDS


@dataclass(frozen=True, slots=True, eq=False)
class Mesh:
    """Words of L_h in depth-first letter order, with their products rho_m and mu_m."""

    words: tuple[tuple[int, ...], ...]
    rhos: FloatArray
    mus: FloatArray
    h: float
    diameter: float
    iterations: int

    def __len__(self) -> int:
        return len(self.words)

    @property
    def mu_total(self) -> float:
        return math.fsum(self.mus)

    @property
    def mesh_size(self) -> float:
        """Largest cell size max_m rho_m · diam."""
        return float(self.rhos.max()) * self.diameter


def refinement_bound(ifs: IFS, h: float, diameter: float) -> int:
    """k_* = ceil(log(h / diam) / log rho_max), the number of sweeps after which no word violates the bound."""
    if h >= diameter:
        return 0
    return math.ceil(math.log(h / diameter) / math.log(ifs.rho_max))


def build_mesh(
    ifs: IFS, mu: MeasureSpec, h: float, diameter: float, config: MeshConfig = MeshConfig()
) -> Mesh:
    """Refines the empty word until every word m satisfies rho_m · diam ≤ h."""
    if not h > 0.0 or not diameter > 0.0:
        raise ValidationError(f"Need h > 0 and a positive diameter, got h = {h}, diam = {diameter}")
    if not mu.matches(ifs):
        raise ValidationError(f"Measure with {len(mu)} weights for an IFS with {len(ifs.maps)} maps")

    letters = range(len(ifs.maps))
    rho_letters = ifs.rhos.tolist()
    mu_letters = mu.weights.tolist()
    threshold = h * (1.0 + REFINEMENT_SLACK)

    words: list[tuple[int, ...]] = [()]
    rhos = [1.0]
    mus = [1.0]
    iterations = 0
    while True:
        violators = sum(1 for rho in rhos if rho * diameter > threshold)
        if not violators:
            break
        predicted = len(words) + violators * (len(letters) - 1)
        if predicted > config.max_words:
            raise ValidationError(
                f"h = {h:g} needs more than {config.max_words} words (at least {predicted}); increase h"
            )
        new_words, new_rhos, new_mus = [], [], []
        for word, rho, weight in zip(words, rhos, mus):
            if rho * diameter > threshold:
                for letter in letters:
                    new_words.append((*word, letter))
                    new_rhos.append(rho * rho_letters[letter])
                    new_mus.append(weight * mu_letters[letter])
            else:
                new_words.append(word)
                new_rhos.append(rho)
                new_mus.append(weight)
        words, rhos, mus = new_words, new_rhos, new_mus
        iterations += 1

    bound = refinement_bound(ifs, h, diameter)
    if iterations > bound:
        raise NumericalError(f"Mesh refinement took {iterations} sweeps, more than the bound {bound}")

    mesh = Mesh(tuple(words), np.array(rhos), np.array(mus), h, diameter, iterations)
    logger.debug("mesh for h = %g: %d words after %d sweeps", h, len(mesh), iterations)
    return mesh


def word_maps(ifs: IFS, words: tuple[tuple[int, ...], ...]) -> tuple[FloatArray, FloatArray]:
    """Stacked matrices (W, n, n) and translations (W, n) of S_m for every word.

    Prefixes are composed once and shared, which makes this linear in the size of the word tree.
    """
    n = ifs.dim
    cache: dict[tuple[int, ...], tuple[FloatArray, FloatArray]] = {(): (np.eye(n), np.zeros(n))}

    def lookup(word: tuple[int, ...]) -> tuple[FloatArray, FloatArray]:
        if word not in cache:
            A_prefix, b_prefix = lookup(word[:-1])
            last = ifs.maps[word[-1]]
            cache[word] = (A_prefix @ last.A, A_prefix @ last.b + b_prefix)
        return cache[word]

    A = np.empty((len(words), n, n))
    b = np.empty((len(words), n))
    for index, word in enumerate(words):
        A[index], b[index] = lookup(word)
    return A, b


def _batches(count: int, size: int) -> Iterator[slice]:
    for start in range(0, count, size):
        yield slice(start, min(start + size, count))


def h_integrate(rule: CubatureRule, mesh: Mesh, ifs: IFS, f: Integrand) -> complex:
    """Q_h[f] = sum_m mu_m sum_i w_i f(S_m(x_i)).

    Each per-word sum is a Kahan sum over the points. The per-word sums are combined in the stored word
    order with fsum, so the result does not depend on how the words are batched.
    """
    if rule.dim != ifs.dim:
        raise ValidationError(f"Rule in dimension {rule.dim} for an IFS on R^{ifs.dim}")
    before = time.perf_counter()
    A, b = word_maps(ifs, mesh.words)
    per_word = np.empty(len(mesh), dtype=np.complex128)
    batch_words = max(1, BATCH_POINTS // rule.size)
    for batch in _batches(len(mesh), batch_words):
        images = np.einsum("wij,pj->wpi", A[batch], rule.points) + b[batch, None, :]
        values = f(images)
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            w_index, p_index = bad[0]
            word = mesh.words[batch.start + w_index]
            raise NumericalError(
                f"{f.name} is not finite at S_{word}(x_{p_index}) = {images[w_index, p_index].tolist()}"
            )
        per_word[batch] = compensated_row_sums(values * rule.weights)
    result = _fsum_complex(mesh.mus * per_word)
    logger.debug(
        "h-integration over %d words x %d points in %.3fs", len(mesh), rule.size, time.perf_counter() - before
    )
    return result


def mesh_boxes(mesh: Mesh, ifs: IFS, box: BoundingBox) -> list[FloatArray]:
    """Corners of the parallelotopes S_m(box), one (2ⁿ, n) array per word; their union is K_h."""
    A, b = word_maps(ifs, mesh.words)
    corners = box.corners()
    return [corners @ A_m.T + b_m for A_m, b_m in zip(A, b)]
