"""Configuration models and helpers."""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import List, Optional, Tuple

import yaml
from pydantic import BaseModel, Field, validator

from .pulses import GridSpec
from .su2 import NumericTolerances

logger = logging.getLogger(__name__)

THREADS_ENV = "UDOG_THREADS"


class NumericSettings(BaseModel):
    unitary_tol: float = 1e-12
    hermitian_tol: float = 1e-12
    axis_tol: float = 1e-12
    pole_tol: float = 1e-9

    @validator("unitary_tol", "hermitian_tol", "axis_tol", "pole_tol")
    def _positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("Las tolerancias deben ser positivas.")
        return value

    def tolerances(self) -> NumericTolerances:
        return NumericTolerances(unitary=self.unitary_tol, hermitian=self.hermitian_tol, axis=self.axis_tol)


class GridSettings(BaseModel):
    samples_per_segment: int = 257
    shaped_substeps: int = 256
    max_refinements: int = 6
    refinement_tol: float = 1e-10

    @validator("samples_per_segment")
    def _odd_samples(cls, value: int) -> int:
        if value < 3 or value % 2 == 0:
            raise ValueError("samples_per_segment debe ser impar y al menos 3.")
        return value

    @validator("shaped_substeps", "max_refinements")
    def _non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("Los contadores de la rejilla no pueden ser negativos.")
        return value

    @validator("refinement_tol")
    def _positive_tol(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("La tolerancia de refinamiento debe ser positiva.")
        return value

    def spec(self) -> GridSpec:
        return GridSpec(
            samples_per_segment=self.samples_per_segment,
            shaped_substeps=self.shaped_substeps,
            max_refinements=self.max_refinements,
            refinement_tol=self.refinement_tol,
        )


class FitWindow(BaseModel):
    beta_min: float = 1e-3
    beta_max: float = 3e-2
    points: int = 25

    @validator("beta_max")
    def _ordered(cls, value: float, values: dict) -> float:
        lower = values.get("beta_min") if isinstance(values, dict) else None
        if value <= 0 or (lower is not None and value <= lower):
            raise ValueError("La ventana de ajuste debe cumplir 0 < beta_min < beta_max.")
        return value

    @validator("beta_min")
    def _positive_min(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("beta_min debe ser positivo.")
        return value

    @validator("points")
    def _enough_points(cls, value: int) -> int:
        if value < 2:
            raise ValueError("La ventana de ajuste necesita al menos dos puntos.")
        return value

    def as_tuple(self) -> Tuple[float, float]:
        return (self.beta_min, self.beta_max)


class SolverSettings(BaseModel):
    grid_step: float = 0.5
    grid_bound: float = 3.0
    level5_starts: int = 200
    max_iterations: int = 200
    level3_tol: float = 1e-10
    level5_tol: float = 1e-7
    a2_initial_weight: float = 0.3
    parity_patterns: List[Tuple[int, int, int, int, int]] = Field(
        default_factory=lambda: [(0, 0, 0, 0, 1), (0, 0, 0, 0, 0)]
    )
    seed: int = 7
    threads: int = 1

    @validator("grid_step", "grid_bound", "level3_tol", "level5_tol", "a2_initial_weight")
    def _positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("Los parámetros del solver deben ser positivos.")
        return value

    @validator("level5_starts", "max_iterations", "threads")
    def _at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError("Los contadores del solver deben ser al menos 1.")
        return value


class RunConfig(BaseModel):
    numeric: NumericSettings = Field(default_factory=NumericSettings)
    grid: GridSettings = Field(default_factory=GridSettings)
    fit_window: FitWindow = Field(default_factory=FitWindow)
    level5_fit_window: FitWindow = Field(default_factory=lambda: FitWindow(beta_min=1e-2, beta_max=6e-2, points=25))
    solver: SolverSettings = Field(default_factory=SolverSettings)
    output_dir: Path = Path("udog-output")
    seed: int = 7
    threads: int = 1

    @validator("output_dir", pre=True)
    def _expand_path(cls, value: object) -> Path:
        if isinstance(value, Path):
            return value.expanduser()
        if isinstance(value, str):
            return Path(value).expanduser()
        raise TypeError("El directorio de salida debe ser una cadena o una instancia de Path.")

    def with_environment(self) -> "RunConfig":
        """Apply ``UDOG_THREADS`` and propagate seed/threads into the solver settings."""
        threads = self.threads
        raw = os.environ.get(THREADS_ENV)
        if raw:
            try:
                threads = max(1, int(raw))
            except ValueError:
                logger.warning("%s=%r no es un entero; se ignora.", THREADS_ENV, raw)
        for name in ("seed", "threads"):
            if name in self.solver.model_fields_set and getattr(self.solver, name) != getattr(self, name):
                logger.warning(
                    "solver.%s=%s se reemplaza por el valor global %s.",
                    name,
                    getattr(self.solver, name),
                    getattr(self, name),
                )
        solver = self.solver.model_copy(update={"seed": self.seed, "threads": threads})
        return self.model_copy(update={"threads": threads, "solver": solver})


def load_run_config(path: Optional[Path]) -> RunConfig:
    if path is None:
        return RunConfig().with_environment()
    if not path.exists():
        logger.debug("El archivo de configuración %s no existe; se utilizarán los valores por defecto.", path)
        return RunConfig().with_environment()

    with path.open("r", encoding="utf-8") as handle:
        raw = yaml.safe_load(handle) or {}

    return RunConfig(**raw).with_environment()
