"""Tensor grids on a bounding box and barycentric evaluation of their Lagrange basis.

The Lagrange basis of a tensor grid is the outer product of the 1D bases along each axis. Points are
flattened row-major with the first axis varying slowest.
"""

import functools
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.stats import qmc

from .errors import ValidationError
from .ifs_core import BoundingBox
from .polyspace import SpaceSpec

FloatArray = NDArray[np.float64]

# Relative distance under which an evaluation point is treated as a node
COINCIDENCE_FACTOR = 4.0


def chebyshev_nodes(a: float, b: float, N: int) -> tuple[FloatArray, FloatArray]:
    """N+1 Chebyshev points of the first kind on [a, b] in ascending order, with barycentric weights."""
    if not a < b:
        raise ValidationError(f"Need a < b, got [{a}, {b}]")
    if N < 0:
        raise ValidationError(f"Degree must be non-negative, got {N}")
    angles = (2 * np.arange(N + 1) + 1) * np.pi / (2 * N + 2)
    nodes = (a + b) / 2 + (b - a) / 2 * np.cos(angles)
    weights = (-1.0) ** np.arange(N + 1) * np.sin(angles)
    return nodes[::-1].copy(), weights[::-1].copy()


def barycentric_weights(nodes: ArrayLike) -> FloatArray:
    """w_j = 1 / prod_{k != j} (t_j - t_k), rescaled to unit max norm."""
    nodes = np.asarray(nodes, dtype=np.float64)
    differences = np.subtract.outer(nodes, nodes)
    np.fill_diagonal(differences, 1.0)
    if np.any(differences == 0.0):
        raise ValidationError("Interpolation nodes must be distinct")
    # Scaling by the interval length keeps the products in range for many nodes
    scale = 4.0 / (np.ptp(nodes) if nodes.size > 1 else 1.0)
    weights = 1.0 / np.prod(differences * scale, axis=1)
    return weights / np.max(np.abs(weights))


@dataclass(frozen=True, slots=True, eq=False)
class TensorGrid:
    box: BoundingBox
    degree: int
    nodes: tuple[FloatArray, ...]
    weights: tuple[FloatArray, ...]
    points: FloatArray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.nodes) != self.box.dim or len(self.weights) != self.box.dim:
            raise ValidationError("Need one node set per box axis")
        for axis, t in enumerate(self.nodes):
            if t.shape != (self.degree + 1,) or not np.all(np.diff(t) > 0):
                raise ValidationError(f"Axis {axis}: need {self.degree + 1} increasing nodes")
            if t[0] < self.box.lo[axis] or t[-1] > self.box.hi[axis]:
                raise ValidationError(f"Axis {axis}: nodes outside the box")
        mesh = np.meshgrid(*self.nodes, indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=-1)
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @classmethod
    def chebyshev(cls, box: BoundingBox, N: int) -> "TensorGrid":
        axes = [chebyshev_nodes(lo, hi, N) for lo, hi in zip(box.lo, box.hi)]
        return cls(box, N, tuple(t for t, _ in axes), tuple(w for _, w in axes))

    @classmethod
    def from_nodes(cls, box: BoundingBox, nodes: Sequence[ArrayLike]) -> "TensorGrid":
        axes = [np.sort(np.asarray(t, dtype=np.float64)) for t in nodes]
        if len({t.size for t in axes}) != 1:
            raise ValidationError("Every axis needs the same number of nodes")
        return cls(box, axes[0].size - 1, tuple(axes), tuple(barycentric_weights(t) for t in axes))

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def space(self) -> SpaceSpec:
        return SpaceSpec.tensor(self.dim, self.degree)


def _axis_values(nodes: FloatArray, weights: FloatArray, x: FloatArray) -> FloatArray:
    """1D Lagrange values at the points x, shape (len(x), len(nodes)), by the second barycentric formula."""
    differences = x[:, None] - nodes[None, :]
    scale = np.maximum(np.maximum(np.abs(x)[:, None], np.abs(nodes)[None, :]), 1.0)
    on_node = np.abs(differences) <= COINCIDENCE_FACTOR * np.finfo(float).eps * scale
    hit = on_node.any(axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        terms = weights[None, :] / np.where(on_node, 1.0, differences)
    values = terms / terms.sum(axis=1, keepdims=True)
    if hit.any():
        rows = np.flatnonzero(hit)
        values[rows] = 0.0
        values[rows, on_node[rows].argmax(axis=1)] = 1.0
    return values


def lagrange_eval_many(grid: TensorGrid, points: ArrayLike) -> FloatArray:
    """Values of all M Lagrange polynomials at each point, shape (P, M)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != grid.dim:
        raise ValidationError(f"Expected points with {grid.dim} coordinates, got shape {points.shape}")
    if not np.all(np.isfinite(points)):
        raise ValidationError("Cannot evaluate the Lagrange basis at non-finite points")
    per_axis = [
        _axis_values(t, w, points[:, axis]) for axis, (t, w) in enumerate(zip(grid.nodes, grid.weights))
    ]
    return functools.reduce(
        lambda acc, v: (acc[:, :, None] * v[:, None, :]).reshape(points.shape[0], -1), per_axis
    )


def lagrange_eval_all(grid: TensorGrid, x: ArrayLike) -> FloatArray:
    """(L_1(x), ..., L_M(x)) at a single point."""
    return lagrange_eval_many(grid, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]


def lebesgue_estimate(grid: TensorGrid, sample_count: int = 4096) -> float:
    """max sum_i |L_i(x)| over a Halton sample of the box.

    A lower bound for the Lebesgue constant of the grid on the box, which in turn bounds the one on Γ.
    """
    if sample_count < 1:
        raise ValidationError(f"sample_count must be at least 1, got {sample_count}")
    unit = qmc.Halton(d=grid.dim, scramble=False).random(sample_count)
    samples = qmc.scale(unit, grid.box.lo, grid.box.hi)
    estimate = 0.0
    for chunk in np.array_split(samples, math.ceil(sample_count / 1024)):
        estimate = max(estimate, float(np.abs(lagrange_eval_many(grid, chunk)).sum(axis=1).max()))
    return estimate
