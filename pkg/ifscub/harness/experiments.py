"""Reference values and p- and h-convergence studies."""

import logging
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any

from ..cubature import Integrand, Mesh, MeshConfig, apply_rule, build_mesh, h_integrate
from ..errors import NumericalError, ValidationError
from ..interpolation import TensorGrid
from ..weights import CubatureRule, SolverConfig, build_rule
from .config import Fractal

logger = logging.getLogger(__name__)

REFERENCE_DEGREE = 14
# Default reference mesh width as a fraction of the attractor diameter
REFERENCE_RELATIVE_H = 0.05


class StudyKind(StrEnum):
    P = "p"
    H = "h"
    SINGLE = "single"


@dataclass(frozen=True, slots=True)
class ReferenceConfig:
    h: float | None = None
    degree: int = REFERENCE_DEGREE
    ratio: float = 2.0
    tol: float = 1e-10
    # Finer meshes tried while looking for one that differs from the coarse mesh
    max_refinements: int = 8


@dataclass(frozen=True, slots=True)
class ReferenceValue:
    value: complex
    # |Q_{h_fine} - Q_{h_coarse}|, used as the error proxy
    error: float
    h: float
    words: int


@dataclass(frozen=True, slots=True)
class ExperimentRow:
    param: float
    # Number of rule points for the p-version, number of mesh words for the h-version
    size: int
    value: complex
    abs_err: float | None
    rel_err: float | None
    weight_l1: float
    eoc: float | None = None
    runtime_s: float = 0.0
    mesh_size: float | None = None


@dataclass(frozen=True, slots=True)
class ExperimentResult:
    kind: StudyKind
    rows: tuple[ExperimentRow, ...]
    reference: complex | None = None
    parameters: dict[str, Any] = field(default_factory=dict)

    def estimated_order(self) -> float:
        """Convergence order between the first and the last row, measured against the effective mesh size."""
        if self.kind != StudyKind.H:
            raise ValidationError("An order is only defined for h-version studies")
        first, last = self.rows[0], self.rows[-1]
        if not first.abs_err or not last.abs_err or first.mesh_size == last.mesh_size:
            raise NumericalError("Not enough distinct non-zero errors to estimate an order")
        return math.log(first.abs_err / last.abs_err) / math.log(first.mesh_size / last.mesh_size)


def _rule(fractal: Fractal, degree: int, config: SolverConfig) -> CubatureRule:
    return build_rule(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, degree), config)


def _errors(value: complex, reference: complex | None) -> tuple[float | None, float | None]:
    if reference is None:
        return None, None
    error = abs(value - reference)
    return error, (error / abs(reference) if reference != 0 else None)


def reference_value(
    fractal: Fractal,
    f: Integrand,
    config: ReferenceConfig = ReferenceConfig(),
    mesh_config: MeshConfig = MeshConfig(),
    solver: SolverConfig = SolverConfig(),
) -> ReferenceValue:
    """h-version with a high-order rule on two meshes; the finer value is returned.

    The finer mesh uses the first h / ratio^j whose word set differs from the coarse one.
    """
    h = config.h if config.h is not None else REFERENCE_RELATIVE_H * fractal.diameter
    rule = _rule(fractal, config.degree, solver)
    coarse = build_mesh(fractal.ifs, fractal.measure, h, fractal.diameter, mesh_config)

    fine: Mesh | None = None
    fine_h = h
    for _ in range(config.max_refinements):
        fine_h /= config.ratio
        fine = build_mesh(fractal.ifs, fractal.measure, fine_h, fractal.diameter, mesh_config)
        if fine.words != coarse.words:
            break
    if fine is None or fine.words == coarse.words:
        raise NumericalError(f"No finer mesh found below h = {h:g}")

    coarse_value = h_integrate(rule, coarse, fractal.ifs, f)
    value = h_integrate(rule, fine, fractal.ifs, f)
    error = abs(value - coarse_value)
    logger.info(
        "reference for %s on %s: %r with error proxy %.3e (%d words)", f.name, fractal.name, value, error, len(fine)
    )
    if error > config.tol * (1.0 + abs(value)):
        raise NumericalError(
            f"Reference error proxy {error:.3e} exceeds {config.tol:.1e}; use a smaller h or a smoother integrand"
        )
    return ReferenceValue(value, error, fine_h, len(fine))


def _resolve_reference(
    fractal: Fractal, f: Integrand, reference: complex | ReferenceValue | None, solver: SolverConfig
) -> complex:
    if reference is None:
        reference = reference_value(fractal, f, solver=solver)
    return reference.value if isinstance(reference, ReferenceValue) else complex(reference)


def converge_p(
    fractal: Fractal,
    f: Integrand,
    degrees: Sequence[int],
    reference: complex | ReferenceValue | None = None,
    solver: SolverConfig = SolverConfig(),
) -> ExperimentResult:
    """One row per N: the Q_N rule applied to f."""
    if not degrees or any(b <= a for a, b in zip(degrees, degrees[1:])):
        raise ValidationError(f"Degrees must be strictly ascending, got {list(degrees)}")
    target = _resolve_reference(fractal, f, reference, solver)

    rows = []
    for N in degrees:
        before = time.perf_counter()
        rule = _rule(fractal, N, solver)
        value = apply_rule(rule, f)
        runtime = time.perf_counter() - before
        abs_err, rel_err = _errors(value, target)
        rows.append(ExperimentRow(N, rule.size, value, abs_err, rel_err, rule.l1_norm, runtime_s=runtime))
        logger.info("p-version N = %d: M = %d, error %.3e", N, rule.size, abs_err)
    return ExperimentResult(StudyKind.P, tuple(rows), target, {"fractal": fractal.name, **f.parameters})


def converge_h(
    fractal: Fractal,
    f: Integrand,
    k: int,
    hs: Sequence[float],
    reference: complex | ReferenceValue | None = None,
    mesh_config: MeshConfig = MeshConfig(),
    solver: SolverConfig = SolverConfig(),
) -> ExperimentResult:
    """One row per h: the composite rule built from Q_k, which is exact on P_k.

    The order column compares consecutive rows through their effective mesh sizes max rho_m · diam, and
    is left empty when two values of h give the same mesh.
    """
    if not hs or any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValidationError(f"Mesh widths must be strictly descending, got {list(hs)}")
    target = _resolve_reference(fractal, f, reference, solver)
    rule = _rule(fractal, k, solver)

    rows: list[ExperimentRow] = []
    for h in hs:
        before = time.perf_counter()
        mesh = build_mesh(fractal.ifs, fractal.measure, h, fractal.diameter, mesh_config)
        value = h_integrate(rule, mesh, fractal.ifs, f)
        runtime = time.perf_counter() - before
        abs_err, rel_err = _errors(value, target)

        eoc = None
        if rows:
            previous = rows[-1]
            if previous.abs_err and abs_err and previous.mesh_size != mesh.mesh_size:
                eoc = math.log(previous.abs_err / abs_err) / math.log(previous.mesh_size / mesh.mesh_size)
        rows.append(
            ExperimentRow(h, len(mesh), value, abs_err, rel_err, rule.l1_norm, eoc, runtime, mesh.mesh_size)
        )
        logger.info("h-version h = %g: %d words, error %.3e", h, len(mesh), abs_err)
    return ExperimentResult(StudyKind.H, tuple(rows), target, {"fractal": fractal.name, "k": k, **f.parameters})


def integrate(
    fractal: Fractal,
    f: Integrand,
    degree: int,
    h: float | None = None,
    mesh_config: MeshConfig = MeshConfig(),
    solver: SolverConfig = SolverConfig(),
) -> ExperimentResult:
    """A single value: Q_N[f], or Q_h[f] built from Q_N when h is given."""
    before = time.perf_counter()
    rule = _rule(fractal, degree, solver)
    if h is None:
        value, size, mesh_size = apply_rule(rule, f), rule.size, None
    else:
        mesh = build_mesh(fractal.ifs, fractal.measure, h, fractal.diameter, mesh_config)
        value, size, mesh_size = h_integrate(rule, mesh, fractal.ifs, f), len(mesh), mesh.mesh_size
    row = ExperimentRow(
        degree if h is None else h,
        size,
        value,
        None,
        None,
        rule.l1_norm,
        runtime_s=time.perf_counter() - before,
        mesh_size=mesh_size,
    )
    return ExperimentResult(StudyKind.SINGLE, (row,), None, {"fractal": fractal.name, **f.parameters})
