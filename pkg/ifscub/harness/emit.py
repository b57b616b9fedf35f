"""CSV and JSON output of experiments, moment tables, rules, meshes and samples.

Numbers are written with 17 significant digits so that parsing them back gives the same doubles; missing
values are empty CSV fields and JSON nulls.
"""

import contextlib
import csv
import json
import sys
from collections.abc import Iterable, Iterator, Sequence
from enum import StrEnum
from pathlib import Path
from typing import Any, TextIO

import numpy as np
from numpy.typing import ArrayLike

from ..cubature import Mesh
from ..errors import OutputError, ValidationError
from ..moments import MomentTable
from ..polyspace import graded_lex_key
from ..weights import CubatureRule
from .experiments import ExperimentResult, ExperimentRow

COLUMNS = ("param", "M_or_words", "value_re", "value_im", "abs_err", "rel_err", "weight_l1", "eoc", "runtime_s")
STDOUT = "-"


class OutputFormat(StrEnum):
    CSV = "csv"
    JSON = "json"


def format_number(value: float | int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, int | np.integer):
        return str(int(value))
    return f"{float(value):.17g}"


@contextlib.contextmanager
def open_output(path: Path | str | None) -> Iterator[TextIO]:
    """The named file, or stdout for None and "-"."""
    if path is None or str(path) == STDOUT:
        yield sys.stdout
        sys.stdout.flush()
        return
    try:
        with open(path, "w", newline="", encoding="utf-8") as stream:
            yield stream
    except OutputError:
        raise
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e.strerror or e}") from e


def _row_values(row: ExperimentRow, timings: bool) -> list[float | int | None]:
    return [
        row.param,
        row.size,
        row.value.real,
        row.value.imag,
        row.abs_err,
        row.rel_err,
        row.weight_l1,
        row.eoc,
        row.runtime_s if timings else None,
    ]


def _check_finite(result: ExperimentResult):
    for index, row in enumerate(result.rows):
        values = [v for v in _row_values(row, True) if v is not None]
        if not all(np.isfinite(values)):
            raise ValidationError(f"Row {index} of the result has non-finite entries")


def _write_csv(stream: TextIO, header: Sequence[str], rows: Iterable[Sequence[Any]]):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else format_number(v) for v in row])


def _write_json(stream: TextIO, data: Any):
    json.dump(data, stream, indent=2, allow_nan=False)
    stream.write("\n")


def emit(
    result: ExperimentResult,
    fmt: OutputFormat = OutputFormat.CSV,
    path: Path | str | None = None,
    timings: bool = True,
):
    """Writes one line per row, or a JSON object mapping each column to its list of values.

    Without timings the runtime column is left empty, which makes the output reproducible byte for byte.
    """
    _check_finite(result)
    rows = [_row_values(row, timings) for row in result.rows]
    with open_output(path) as stream:
        if fmt == OutputFormat.CSV:
            _write_csv(stream, COLUMNS, rows)
        else:
            _write_json(stream, {column: [row[i] for row in rows] for i, column in enumerate(COLUMNS)})


def write_moments(table: MomentTable, path: Path | str | None = None, fmt: OutputFormat = OutputFormat.CSV):
    """One row per moment with its total degree and the residual of that degree's solve."""
    alphas = sorted(table.values, key=graded_lex_key)
    degrees = [sum(alpha) for alpha in alphas]
    values = [table.values[alpha] for alpha in alphas]
    residuals = [table.residuals[d] for d in degrees]
    with open_output(path) as stream:
        if fmt == OutputFormat.CSV:
            header = [f"a{i + 1}" for i in range(table.dim)] + ["degree", "value", "residual"]
            _write_csv(stream, header, ([*a, *rest] for a, *rest in zip(alphas, degrees, values, residuals)))
        else:
            _write_json(
                stream,
                {
                    "alpha": [list(alpha) for alpha in alphas],
                    "degree": degrees,
                    "value": values,
                    "residual": residuals,
                },
            )


def rule_diagnostics(rule: CubatureRule) -> dict[str, Any]:
    return {
        "space": str(rule.space),
        "points": rule.size,
        "residual": rule.residual,
        "gap": rule.gap,
        "method": str(rule.method),
        "iterations": rule.iterations,
        "weight_l1": rule.l1_norm,
        "weight_sum": float(np.sum(rule.weights)),
    }


def write_rule(rule: CubatureRule, path: Path | str | None = None, fmt: OutputFormat = OutputFormat.CSV):
    with open_output(path) as stream:
        if fmt == OutputFormat.CSV:
            header = [f"x{i + 1}" for i in range(rule.dim)] + ["weight"]
            _write_csv(stream, header, ([*x, w] for x, w in zip(rule.points.tolist(), rule.weights.tolist())))
        else:
            _write_json(
                stream,
                {
                    "points": rule.points.tolist(),
                    "weights": rule.weights.tolist(),
                    "diagnostics": rule_diagnostics(rule),
                },
            )


def diagnostics_path(path: Path | str | None) -> Path | None:
    """Sidecar file for the diagnostics of a rule written as CSV: rule.csv gets rule.diagnostics.json."""
    if path is None or str(path) == STDOUT:
        return None
    path = Path(path)
    return path.with_name(f"{path.stem}.diagnostics.json")


def write_rule_diagnostics(rule: CubatureRule, path: Path | str | None = None):
    """Diagnostics as JSON, to stderr without a path so they stay apart from a CSV rule on stdout."""
    if path is None:
        _write_json(sys.stderr, rule_diagnostics(rule))
        return
    with open_output(path) as stream:
        _write_json(stream, rule_diagnostics(rule))


def write_mesh(mesh: Mesh, path: Path | str | None = None, fmt: OutputFormat = OutputFormat.CSV):
    """Words with their rho_m and mu_m; in CSV, shorter words leave their trailing letter columns empty."""
    with open_output(path) as stream:
        if fmt == OutputFormat.CSV:
            length = max(len(word) for word in mesh.words)
            header = [f"letter{i + 1}" for i in range(length)] + ["rho_m", "mu_m"]
            _write_csv(
                stream,
                header,
                (
                    [*word, *([""] * (length - len(word))), rho, mu]
                    for word, rho, mu in zip(mesh.words, mesh.rhos.tolist(), mesh.mus.tolist())
                ),
            )
        else:
            _write_json(
                stream,
                {
                    "h": mesh.h,
                    "diameter": mesh.diameter,
                    "iterations": mesh.iterations,
                    "words": [list(word) for word in mesh.words],
                    "rho_m": mesh.rhos.tolist(),
                    "mu_m": mesh.mus.tolist(),
                },
            )


def write_points(points: ArrayLike, path: Path | str | None = None, fmt: OutputFormat = OutputFormat.CSV):
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    with open_output(path) as stream:
        if fmt == OutputFormat.CSV:
            _write_csv(stream, [f"x{i + 1}" for i in range(points.shape[1])], points.tolist())
        else:
            _write_json(stream, {f"x{i + 1}": points[:, i].tolist() for i in range(points.shape[1])})
