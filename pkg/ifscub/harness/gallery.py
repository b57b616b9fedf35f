"""Named fractals.

Entries take an optional argument in parentheses, e.g. "vicsek(0.4)" or "vicsek(45 deg)". The Koch
snowflake and the Barnsley fern use coefficients from the wider literature (Barnsley, "Fractals
Everywhere") and are only available with `allow_external=True`.
"""

import math
import re
from collections.abc import Callable

import numpy as np

from ..errors import ValidationError
from ..expression_parser import evaluate_number
from .config import FractalConfig, fractal_from_arrays

NAME_RE = re.compile(r"^\s*(?P<name>[a-z][a-z-]*)\s*(\((?P<argument>.*)\))?\s*$")

SQUARE_CORNERS = ((-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0))
UNIT_SQUARE_BOX = ((-1.0, -1.0), (1.0, 1.0))


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _similitude(rho: float, theta: float, center: tuple[float, float]) -> tuple[list[list[float]], list[float]]:
    """x -> rho R_theta (x - c) + c, the similitude fixing c."""
    A = rho * _rotation(theta)
    b = np.asarray(center) - A @ np.asarray(center)
    return A.tolist(), b.tolist()


def cantor() -> FractalConfig:
    rho = 1 / 3
    return fractal_from_arrays(
        "cantor", [([[rho]], [0.0]), ([[rho]], [1 - rho])], box=([0.0], [1.0]), diameter=1.0
    )


def cantor_dust() -> FractalConfig:
    """Tensor product of two Cantor sets on [-1, 1]."""
    rho = 1 / 3
    maps = [(np.diag([rho, rho]).tolist(), [(1 - rho) * c for c in corner]) for corner in SQUARE_CORNERS]
    return fractal_from_arrays("cantor-dust", maps, box=UNIT_SQUARE_BOX, diameter=2 * math.sqrt(2))


def vicsek(theta: float = 0.0) -> FractalConfig:
    """Four corner copies and a centre copy rotated by theta, all with ratio 1/3 and weight 1/5."""
    rho = 1 / 3
    maps = [((rho * _rotation(theta)).tolist(), [0.0, 0.0])]
    maps += [(np.diag([rho, rho]).tolist(), [(1 - rho) * c for c in corner]) for corner in SQUARE_CORNERS]
    return fractal_from_arrays(
        f"vicsek({theta:g})", maps, weights=[0.2] * 5, box=UNIT_SQUARE_BOX, diameter=2 * math.sqrt(2)
    )


def sierpinski_fat() -> FractalConfig:
    """Overlapping Sierpinski triangle with ratio (sqrt 5 - 1) / 2 on a triangle of circumradius 1."""
    rho = (math.sqrt(5) - 1) / 2
    angles = [math.pi / 2 + 2 * math.pi * k / 3 for k in range(3)]
    vertices = [(math.cos(a), math.sin(a)) for a in angles]
    maps = [(np.diag([rho, rho]).tolist(), [(1 - rho) * v for v in vertex]) for vertex in vertices]
    half = math.sqrt(3) / 2
    return fractal_from_arrays(
        "sierpinski-fat",
        maps,
        weights=[1 / 3] * 3,
        box=((-half, -0.5), (half, 1.0)),
        diameter=math.sqrt(3),
    )


def cantor_dust_asym() -> FractalConfig:
    """Four rotated similitudes with distinct ratios around fixed points outside the unit square."""
    parameters = [
        (0.25, 0.4, (-1.4, -1.1)),
        (0.35, 0.2, (0.8, -0.7)),
        (0.3, 0.3, (1.2, 1.3)),
        (0.4, 0.1, (-1.3, 0.9)),
    ]
    return fractal_from_arrays("cantor-dust-asym", [_similitude(*p) for p in parameters])


def koch() -> FractalConfig:
    """Koch snowflake with tips on the unit circle: a centre copy of ratio 1/sqrt 3 and six tip copies."""
    maps = [((_rotation(math.pi / 6) / math.sqrt(3)).tolist(), [0.0, 0.0])]
    for k in range(6):
        tip = (math.cos(k * math.pi / 3), math.sin(k * math.pi / 3))
        maps.append(_similitude(1 / 3, 0.0, tip))
    return fractal_from_arrays("koch", maps, box=UNIT_SQUARE_BOX, diameter=2.0)


def barnsley_fern() -> FractalConfig:
    maps = [
        ([[0.0, 0.0], [0.0, 0.16]], [0.0, 0.0]),
        ([[0.85, 0.04], [-0.04, 0.85]], [0.0, 1.6]),
        ([[0.2, -0.26], [0.23, 0.22]], [0.0, 1.6]),
        ([[-0.15, 0.28], [0.26, 0.24]], [0.0, 0.44]),
    ]
    return fractal_from_arrays("barnsley-fern", maps, weights=[0.01, 0.85, 0.07, 0.07])


GALLERY: dict[str, Callable[[], FractalConfig]] = {
    "cantor": cantor,
    "cantor-dust": cantor_dust,
    "sierpinski-fat": sierpinski_fat,
    "cantor-dust-asym": cantor_dust_asym,
}
PARAMETRIZED: dict[str, Callable[[float], FractalConfig]] = {
    "vicsek": vicsek,
}
EXTERNAL: dict[str, Callable[[], FractalConfig]] = {
    "koch": koch,
    "barnsley-fern": barnsley_fern,
}


def available(allow_external: bool = False) -> list[str]:
    names = [*GALLERY, *(f"{name}(theta)" for name in PARAMETRIZED)]
    if allow_external:
        names += list(EXTERNAL)
    return sorted(names)


def gallery(name: str, allow_external: bool = False) -> FractalConfig:
    match = NAME_RE.match(name)
    if match is None:
        raise ValidationError(f"Unknown gallery entry {name!r}; available: {', '.join(available(allow_external))}")
    key, argument = match["name"], match["argument"]

    if key in PARAMETRIZED:
        return PARAMETRIZED[key](0.0 if argument is None or not argument.strip() else evaluate_number(argument))
    if argument is not None:
        raise ValidationError(f"Gallery entry {key!r} takes no argument")
    if key in GALLERY:
        return GALLERY[key]()
    if key in EXTERNAL:
        if not allow_external:
            raise ValidationError(
                f"{key!r} uses coefficients from outside sources; enable it with --external-constants"
            )
        return EXTERNAL[key]()
    raise ValidationError(f"Unknown gallery entry {key!r}; available: {', '.join(available(allow_external))}")
