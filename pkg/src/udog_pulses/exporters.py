"""CSV and JSON artifacts for curves, sweeps, fits, filters and solver runs."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence

from .closure import XiSolution
from .error_geometry import ErrorCurve
from .robustness import FilterFunction, SweepFit

logger = logging.getLogger(__name__)


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(value)) for value in row])
    logger.debug("Escrito %s", path)
    return path


def write_json(path: Path, document: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, ensure_ascii=False), encoding="utf-8")
    logger.debug("Escrito %s", path)
    return path


def write_curve(curve: ErrorCurve, path: Path) -> Path:
    """``t,x,y,z`` samples plus a ``.json`` summary next to the CSV."""
    rows = ((t, *point) for t, point in zip(curve.times, curve.points))
    _write_rows(path, ("t", "x", "y", "z"), rows)
    write_json(path.with_suffix(".json"), curve.summary())
    return path


def write_sweep(fit: SweepFit, path: Path) -> Path:
    return _write_rows(path, ("beta", "infidelity"), zip(fit.betas, fit.infidelities))


def write_fit(fit: SweepFit, path: Path) -> Path:
    return write_json(path, fit.to_document())


def write_filter(filter_values: FilterFunction, path: Path) -> Path:
    return _write_rows(path, ("omega", "F"), zip(filter_values.omegas, filter_values.values))


def solve_document(solution: XiSolution, distances: Optional[Dict[str, float]] = None) -> dict:
    document = solution.to_document()
    document["distances"] = distances or {}
    return document


def write_solution(solution: XiSolution, path: Path, distances: Optional[Dict[str, float]] = None) -> Path:
    return write_json(path, solve_document(solution, distances))


def read_sweep(path: Path) -> Dict[str, list]:
    if not path.exists():
        raise FileNotFoundError(f"No existe el barrido {path}")
    columns: Dict[str, list] = {"beta": [], "infidelity": []}
    with path.open("r", encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            for key in columns:
                columns[key].append(float(row[key]))
    return columns


def read_curve(path: Path) -> Dict[str, list]:
    columns: Dict[str, list] = {"t": [], "x": [], "y": [], "z": []}
    with path.open("r", encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            for key in columns:
                columns[key].append(float(row[key]))
    return columns
