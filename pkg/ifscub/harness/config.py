"""JSON fractal configurations.

Schema (top-level keys):

    name       string
    dimension  int
    maps       [{"A": n rows of n numbers, "b": n numbers}, ...]
    measure    {"type": "weights", "values": [...]} or {"type": "hausdorff"}; optional, hausdorff if absent
    box        {"lo": [...], "hi": [...]}; optional, searched for if absent
    diameter   number; optional, estimated from a chaos-game sample if absent

Every number may also be a string expression such as "1/3", "sqrt(3)/2" or "cos(45 deg)".
"""

import json
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..errors import ConfigError, ValidationError
from ..expression_parser import evaluate_number
from ..ifs_core import IFS, AffineMap, BoundingBox, attractor_diameter, bounding_box
from ..measure import MeasureSpec, hausdorff_weights

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = frozenset({"name", "dimension", "maps", "measure", "box", "diameter"})
REQUIRED_KEYS = ("name", "dimension", "maps")

Vector = tuple[float, ...]
Matrix = tuple[Vector, ...]


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, int | float | str):
        raise ConfigError(path, f"expected a number or an expression, got {value!r}")
    try:
        return evaluate_number(value)
    except ValidationError as e:
        raise ConfigError(path, str(e)) from e


def _vector(value: Any, length: int, path: str) -> Vector:
    if not isinstance(value, list):
        raise ConfigError(path, f"expected an array of {length} numbers")
    if len(value) != length:
        raise ConfigError(path, f"expected {length} entries, got {len(value)}")
    return tuple(_number(item, f"{path}[{i}]") for i, item in enumerate(value))


def _matrix(value: Any, dim: int, path: str) -> Matrix:
    if not isinstance(value, list) or len(value) != dim:
        raise ConfigError(path, f"expected {dim} rows of {dim} numbers")
    return tuple(_vector(row, dim, f"{path}[{i}]") for i, row in enumerate(value))


def _object(value: Any, path: str, keys: frozenset[str]) -> Mapping[str, Any]:
    if not isinstance(value, dict):
        raise ConfigError(path, "expected an object")
    unknown = sorted(set(value) - keys)
    if unknown:
        raise ConfigError(path, f"unknown keys {unknown}, expected {sorted(keys)}")
    return value


@dataclass(frozen=True, slots=True)
class MapConfig:
    A: Matrix
    b: Vector


@dataclass(frozen=True, slots=True)
class FractalConfig:
    """The parsed but not yet validated description of an IFS, its measure and box.

    `weights` is None for Hausdorff weights.
    """

    name: str
    dimension: int
    maps: tuple[MapConfig, ...]
    weights: Vector | None = None
    box: tuple[Vector, Vector] | None = None
    diameter: float | None = None

    @classmethod
    def from_dict(cls, data: Any) -> "FractalConfig":
        data = _object(data, "$", TOP_LEVEL_KEYS)
        for key in REQUIRED_KEYS:
            if key not in data:
                raise ConfigError("$", f"missing key {key!r}")

        name = data["name"]
        if not isinstance(name, str):
            raise ConfigError("$.name", "expected a string")
        dim = data["dimension"]
        if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
            raise ConfigError("$.dimension", f"expected a positive integer, got {dim!r}")

        raw_maps = data["maps"]
        if not isinstance(raw_maps, list) or not raw_maps:
            raise ConfigError("$.maps", "expected a non-empty array of maps")
        maps = []
        for i, raw in enumerate(raw_maps):
            path = f"$.maps[{i}]"
            raw = _object(raw, path, frozenset({"A", "b"}))
            if "A" not in raw or "b" not in raw:
                raise ConfigError(path, "a map needs both 'A' and 'b'")
            maps.append(MapConfig(_matrix(raw["A"], dim, f"{path}.A"), _vector(raw["b"], dim, f"{path}.b")))

        weights = None
        if "measure" in data:
            measure = _object(data["measure"], "$.measure", frozenset({"type", "values"}))
            match measure.get("type"):
                case "hausdorff":
                    if "values" in measure:
                        raise ConfigError("$.measure", "hausdorff measures take no values")
                case "weights":
                    weights = _vector(measure.get("values"), len(maps), "$.measure.values")
                case other:
                    raise ConfigError("$.measure.type", f"expected 'weights' or 'hausdorff', got {other!r}")

        box = None
        if "box" in data:
            raw_box = _object(data["box"], "$.box", frozenset({"lo", "hi"}))
            box = (_vector(raw_box.get("lo"), dim, "$.box.lo"), _vector(raw_box.get("hi"), dim, "$.box.hi"))

        diameter = None
        if "diameter" in data:
            diameter = _number(data["diameter"], "$.diameter")
            if not diameter > 0.0:
                raise ConfigError("$.diameter", f"must be positive, got {diameter}")

        return cls(name, dim, tuple(maps), weights, box, diameter)

    @classmethod
    def from_json(cls, text: str) -> "FractalConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError("$", f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "name": self.name,
            "dimension": self.dimension,
            "maps": [{"A": [list(row) for row in m.A], "b": list(m.b)} for m in self.maps],
            "measure": (
                {"type": "hausdorff"} if self.weights is None else {"type": "weights", "values": list(self.weights)}
            ),
        }
        if self.box is not None:
            data["box"] = {"lo": list(self.box[0]), "hi": list(self.box[1])}
        if self.diameter is not None:
            data["diameter"] = self.diameter
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True, slots=True, eq=False)
class Fractal:
    """A validated system: IFS, measure, invariant box and the diameter used for meshing."""

    config: FractalConfig
    ifs: IFS
    measure: MeasureSpec
    box: BoundingBox
    diameter: float

    @property
    def name(self) -> str:
        return self.config.name


def build_fractal(config: FractalConfig) -> Fractal:
    maps = []
    for i, m in enumerate(config.maps):
        try:
            maps.append(AffineMap.contraction(m.A, m.b))
        except ValidationError as e:
            raise ConfigError(f"$.maps[{i}]", str(e)) from e
    try:
        ifs = IFS(tuple(maps))
    except ValidationError as e:
        raise ConfigError("$.maps", str(e)) from e

    try:
        measure = hausdorff_weights(ifs) if config.weights is None else MeasureSpec.explicit(config.weights)
    except ValidationError as e:
        raise ConfigError("$.measure", str(e)) from e

    if config.box is None:
        box = bounding_box(ifs)
        logger.info("%s: using the box [%s, %s]", config.name, box.lo.tolist(), box.hi.tolist())
    else:
        try:
            box = BoundingBox.validated(ifs, *config.box)
        except ValidationError as e:
            raise ConfigError("$.box", str(e)) from e

    diameter = config.diameter
    if diameter is None:
        diameter = attractor_diameter(ifs, measure)
        logger.info("%s: estimated attractor diameter %.6g", config.name, diameter)
    return Fractal(config, ifs, measure, box, diameter)


def parse_config(text: str) -> tuple[IFS, MeasureSpec, BoundingBox]:
    """Parses and validates a JSON configuration."""
    fractal = build_fractal(FractalConfig.from_json(text))
    return fractal.ifs, fractal.measure, fractal.box


def load_config(path: Path) -> Fractal:
    return build_fractal(FractalConfig.from_json(Path(path).read_text(encoding="utf-8")))


def fractal_from_arrays(
    name: str,
    maps: Sequence[tuple[Sequence[Sequence[float]], Sequence[float]]],
    weights: Sequence[float] | None = None,
    box: tuple[Sequence[float], Sequence[float]] | None = None,
    diameter: float | None = None,
) -> FractalConfig:
    """A configuration from plain Python numbers."""
    return FractalConfig(
        name=name,
        dimension=len(maps[0][1]),
        maps=tuple(
            MapConfig(tuple(tuple(float(a) for a in row) for row in A), tuple(float(x) for x in b)) for A, b in maps
        ),
        weights=None if weights is None else tuple(float(w) for w in weights),
        box=None if box is None else (tuple(map(float, box[0])), tuple(map(float, box[1]))),
        diameter=diameter,
    )
