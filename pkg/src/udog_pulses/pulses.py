"""Pulse sequences, exact propagation and Bloch-path extraction."""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, validator
from scipy import integrate

from .su2 import IDENTITY, PAULIS, InvalidArgumentError, Mat2
from .targets import GateTarget

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


class ShapeTag(str, enum.Enum):
    SQUARE = "square"
    SINE_SQUARED = "sine-squared"
    SAMPLED_TABLE = "sampled-table"


class PulseShape(BaseModel):
    """Relative amplitude profile ``a(x)`` on ``x in [0, 1]`` with peak value 1."""

    model_config = ConfigDict(frozen=True)

    tag: ShapeTag = ShapeTag.SQUARE
    table: Tuple[Tuple[float, float], ...] = ()

    @validator("table")
    def _check_table(cls, value: Tuple[Tuple[float, float], ...]) -> Tuple[Tuple[float, float], ...]:
        if not value:
            return value
        fractions = [item[0] for item in value]
        if fractions[0] != 0.0 or fractions[-1] != 1.0 or any(b <= a for a, b in zip(fractions, fractions[1:])):
            raise ValueError("La tabla debe cubrir [0, 1] con fracciones de tiempo crecientes.")
        if any(item[1] < 0 for item in value):
            raise ValueError("La amplitud relativa no puede ser negativa.")
        peak = max(item[1] for item in value)
        if peak <= 0:
            raise ValueError("La tabla de amplitudes no puede ser idénticamente nula.")
        return tuple((float(x), float(a) / peak) for x, a in value)

    @classmethod
    def square(cls) -> "PulseShape":
        return cls(tag=ShapeTag.SQUARE)

    @classmethod
    def sine_squared(cls) -> "PulseShape":
        return cls(tag=ShapeTag.SINE_SQUARED)

    @classmethod
    def sampled(cls, points: List[Tuple[float, float]]) -> "PulseShape":
        if len(points) < 2:
            raise ValueError("Una forma tabulada necesita al menos dos puntos.")
        return cls(tag=ShapeTag.SAMPLED_TABLE, table=tuple(points))

    @property
    def is_square(self) -> bool:
        return self.tag == ShapeTag.SQUARE

    def profile(self, x: npt.ArrayLike) -> FloatArray:
        grid = np.asarray(x, dtype=float)
        if self.tag == ShapeTag.SQUARE:
            return np.ones_like(grid)
        if self.tag == ShapeTag.SINE_SQUARED:
            return np.sin(np.pi * grid) ** 2
        if not self.table:
            raise InvalidArgumentError("La forma 'sampled-table' requiere una tabla de amplitudes.")
        xs, amps = zip(*self.table)
        return np.interp(grid, xs, amps)

    def mean_amplitude(self) -> float:
        """``integral_0^1 a(x) dx``: the area of a unit-duration, unit-peak pulse."""
        if self.tag == ShapeTag.SQUARE:
            return 1.0
        if self.tag == ShapeTag.SINE_SQUARED:
            return 0.5
        breakpoints = [item[0] for item in self.table[1:-1]]
        value, _ = integrate.quad(lambda u: float(self.profile(u)), 0.0, 1.0, points=breakpoints or None, limit=200)
        return float(value)

    def to_document(self) -> object:
        if self.tag == ShapeTag.SAMPLED_TABLE:
            return {"tag": self.tag.value, "table": [list(item) for item in self.table]}
        return self.tag.value

    @classmethod
    def from_document(cls, raw: object) -> "PulseShape":
        if isinstance(raw, str):
            return cls(tag=ShapeTag(raw))
        if isinstance(raw, dict):
            return cls(tag=ShapeTag(raw.get("tag", "sampled-table")), table=tuple(tuple(p) for p in raw.get("table", [])))
        raise ValueError(f"Forma de pulso no reconocida: {raw!r}")


class Segment(BaseModel):
    """Constant-phase drive segment of area ``area`` (radians) lasting ``duration`` (Omega_max = 1)."""

    model_config = ConfigDict(frozen=True)

    area: float
    phase: float
    duration: float
    shape: PulseShape = PulseShape()

    @validator("area")
    def _check_area(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("El área de un segmento debe ser positiva; los segmentos de área cero se descartan.")
        return value

    @validator("duration")
    def _check_duration(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("La duración de un segmento debe ser positiva.")
        return value

    @classmethod
    def from_area(cls, area: float, phase: float, shape: Optional[PulseShape] = None) -> "Segment":
        shape = shape or PulseShape.square()
        return cls(area=area, phase=phase, duration=area / shape.mean_amplitude(), shape=shape)


class PulseSequence(BaseModel):
    model_config = ConfigDict(frozen=True)

    scheme: str
    target: Optional[GateTarget] = None
    segments: Tuple[Segment, ...]

    @property
    def total_duration(self) -> float:
        return float(sum(segment.duration for segment in self.segments))

    @property
    def total_area(self) -> float:
        return float(sum(segment.area for segment in self.segments))

    @property
    def is_square(self) -> bool:
        return all(segment.shape.is_square for segment in self.segments)

    def substeps(self, shaped_substeps: int = 256) -> List["Substep"]:
        if not self.segments:
            raise InvalidArgumentError("La secuencia de pulsos está vacía.")
        steps: List[Substep] = []
        start = 0.0
        for index, segment in enumerate(self.segments):
            if segment.shape.is_square:
                amplitude = segment.area / segment.duration
                steps.append(Substep(start, segment.duration, amplitude, segment.phase, index))
            else:
                count = shaped_substeps
                tau = segment.duration / count
                mids = (np.arange(count) + 0.5) / count
                amplitudes = segment.shape.profile(mids)
                # el área discreta reproduce exactamente el área declarada
                amplitudes = amplitudes * (segment.area / (amplitudes.sum() * tau))
                for k, amplitude in enumerate(amplitudes):
                    steps.append(Substep(start + k * tau, tau, float(amplitude), segment.phase, index))
            start += segment.duration
        return steps

    def to_document(self) -> dict:
        target = None
        if self.target is not None:
            target = {"theta0": self.target.theta0, "phi0": self.target.phi0, "gamma_g": self.target.gamma_g}
        return {
            "scheme": self.scheme,
            "target": target,
            "segments": [
                {
                    "area": segment.area,
                    "phase": segment.phase,
                    "duration": segment.duration,
                    "shape": segment.shape.to_document(),
                }
                for segment in self.segments
            ],
        }

    @classmethod
    def from_document(cls, raw: dict) -> "PulseSequence":
        target = raw.get("target")
        return cls(
            scheme=raw["scheme"],
            target=GateTarget(**target) if target else None,
            segments=tuple(
                Segment(
                    area=item["area"],
                    phase=item["phase"],
                    duration=item["duration"],
                    shape=PulseShape.from_document(item.get("shape", "square")),
                )
                for item in raw["segments"]
            ),
        )


def save_sequence(sequence: PulseSequence, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(sequence.to_document(), handle, indent=2, sort_keys=False)
        handle.write("\n")
    logger.info("Secuencia '%s' escrita en %s", sequence.scheme, path)
    return path


def load_sequence(path: Path) -> PulseSequence:
    if not path.exists():
        raise FileNotFoundError(f"El archivo de secuencia {path} no existe.")
    with path.open("r", encoding="utf-8") as handle:
        return PulseSequence.from_document(json.load(handle))


@dataclass(frozen=True)
class Substep:
    start: float
    duration: float
    amplitude: float
    phase: float
    segment: int


@dataclass(frozen=True)
class GridSpec:
    """Sampling density: ``samples_per_segment`` points per square segment (odd)."""

    samples_per_segment: int = 257
    shaped_substeps: int = 256
    max_refinements: int = 6
    refinement_tol: float = 1e-10

    def __post_init__(self) -> None:
        if self.samples_per_segment < 3 or self.samples_per_segment % 2 == 0:
            raise InvalidArgumentError("samples_per_segment debe ser impar y al menos 3.")
        if self.shaped_substeps < 1:
            raise InvalidArgumentError("shaped_substeps debe ser positivo.")
        if self.max_refinements < 0 or self.refinement_tol <= 0:
            raise InvalidArgumentError("El refinamiento necesita max_refinements >= 0 y refinement_tol > 0.")

    def points_per_substep(self, substeps_in_segment: int) -> int:
        points = max(3, self.samples_per_segment // substeps_in_segment)
        return points if points % 2 == 1 else points + 1


def substep_generator(step: Substep, rabi_scale: float = 1.0, detuning: float = 0.0) -> FloatArray:
    """Bloch vector ``w`` with ``H = w.sigma / 2`` during the substep."""
    drive = rabi_scale * step.amplitude
    return np.array([drive * math.cos(step.phase), drive * math.sin(step.phase), detuning])


def _evolution(generator: FloatArray, offsets: FloatArray) -> npt.NDArray[np.complex128]:
    """``exp(-i (generator.sigma) u / 2)`` for every offset ``u`` (closed form, shape (n, 2, 2))."""
    lam = float(np.linalg.norm(generator))
    offsets = np.atleast_1d(offsets)
    result = np.empty((offsets.size, 2, 2), dtype=complex)
    if lam == 0.0:
        result[:] = IDENTITY
        return result
    axis = generator / lam
    op = axis[0] * PAULIS[0] + axis[1] * PAULIS[1] + axis[2] * PAULIS[2]
    half = 0.5 * lam * offsets
    result[:] = np.cos(half)[:, None, None] * IDENTITY - 1j * np.sin(half)[:, None, None] * op
    return result


@dataclass
class Propagation:
    """Time-ordered cumulative propagators on a sample grid.

    Substep boundaries appear twice (once per side) so integrands with
    discontinuous drive phases can be integrated piecewise.
    """

    times: FloatArray
    unitaries: npt.NDArray[np.complex128]
    amplitudes: FloatArray
    phases: FloatArray
    slices: List[slice] = field(default_factory=list)
    steps: List[Substep] = field(default_factory=list)

    def __iter__(self) -> Iterator[Tuple[float, Mat2]]:
        return iter(zip(self.times.tolist(), self.unitaries))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> Mat2:
        return self.unitaries[-1]

    def transformed(self, frame: Mat2) -> "Propagation":
        """Same evolution seen in the frame ``U -> W U W^dagger``."""
        unitaries = frame @ self.unitaries @ frame.conj().T
        return Propagation(self.times, unitaries, self.amplitudes, self.phases, self.slices, self.steps)


def _final_product(steps: List[Substep], rabi_scale: float, detuning: float) -> Mat2:
    current = IDENTITY.copy()
    for step in steps:
        current = _evolution(substep_generator(step, rabi_scale, detuning), np.array([step.duration]))[0] @ current
    return current


def refined_substeps(
    sequence: PulseSequence,
    rabi_scale: float = 1.0,
    detuning: float = 0.0,
    shaped_substeps: int = 256,
    max_refinements: int = 6,
    refinement_tol: float = 1e-10,
) -> Tuple[List[Substep], Mat2]:
    """Substeps whose ``U(T)`` is stable under doubling, together with that ``U(T)``.

    Square segments and detuning-free evolutions are exact at any count, so only shaped
    segments under detuning are doubled.
    """
    if rabi_scale <= 0:
        raise InvalidArgumentError("El factor de Rabi (1 + epsilon) debe ser positivo.")
    steps = sequence.substeps(shaped_substeps)
    result = _final_product(steps, rabi_scale, detuning)
    if sequence.is_square or detuning == 0.0:
        return steps, result
    count = shaped_substeps
    for _ in range(max_refinements):
        count *= 2
        refined_steps = sequence.substeps(count)
        refined = _final_product(refined_steps, rabi_scale, detuning)
        change = float(np.max(np.abs(refined - result)))
        steps, result = refined_steps, refined
        if change < refinement_tol:
            break
        logger.debug("Refinando a %d subpasos (cambio %.3e)", count, change)
    return steps, result


def propagate(
    sequence: PulseSequence,
    rabi_scale: float = 1.0,
    detuning: float = 0.0,
    grid: Optional[GridSpec] = None,
) -> Propagation:
    """Exact piecewise propagation of ``H = [(1+eps) Omega (cos phi sx + sin phi sy) + delta sz] / 2``.

    The substep count is the one ``final_unitary`` settles on, so ``propagation.final`` agrees
    with it for shaped pulses under detuning.
    """
    grid = grid or GridSpec()
    steps, _ = refined_substeps(
        sequence, rabi_scale, detuning, grid.shaped_substeps, grid.max_refinements, grid.refinement_tol
    )
    per_segment = np.bincount([step.segment for step in steps])

    times: List[FloatArray] = []
    unitaries: List[npt.NDArray[np.complex128]] = []
    amplitudes: List[FloatArray] = []
    phases: List[FloatArray] = []
    slices: List[slice] = []
    current = IDENTITY.copy()
    cursor = 0
    for step in steps:
        points = grid.points_per_substep(int(per_segment[step.segment]))
        offsets = np.linspace(0.0, step.duration, points)
        local = _evolution(substep_generator(step, rabi_scale, detuning), offsets)
        block = local @ current
        times.append(step.start + offsets)
        unitaries.append(block)
        amplitudes.append(np.full(points, step.amplitude))
        phases.append(np.full(points, step.phase))
        slices.append(slice(cursor, cursor + points))
        cursor += points
        current = block[-1]

    return Propagation(
        times=np.concatenate(times),
        unitaries=np.concatenate(unitaries),
        amplitudes=np.concatenate(amplitudes),
        phases=np.concatenate(phases),
        slices=slices,
        steps=steps,
    )


def final_unitary(
    sequence: PulseSequence,
    rabi_scale: float = 1.0,
    detuning: float = 0.0,
    shaped_substeps: int = 256,
    max_refinements: int = 6,
    refinement_tol: float = 1e-10,
    grid: Optional[GridSpec] = None,
) -> Mat2:
    """``U(T)`` only; shaped segments are refined by doubling until ``U(T)`` is stable.

    A ``grid`` overrides the three refinement arguments.
    """
    if grid is not None:
        shaped_substeps, max_refinements, refinement_tol = (
            grid.shaped_substeps,
            grid.max_refinements,
            grid.refinement_tol,
        )
    _, result = refined_substeps(sequence, rabi_scale, detuning, shaped_substeps, max_refinements, refinement_tol)
    return result


@dataclass
class PoleJump:
    index: int
    theta_pole: float
    delta_phi: float


@dataclass
class BlochPath:
    times: FloatArray
    theta: FloatArray
    phi: FloatArray
    f: FloatArray
    pole_jumps: List[PoleJump] = field(default_factory=list)

    def dressed_states(self) -> Tuple[npt.NDArray[np.complex128], npt.NDArray[np.complex128]]:
        """``psi_1 = e^{if}|mu_1>`` and ``psi_2 = e^{-if}|mu_2>`` as (n, 2) arrays."""
        half = self.theta / 2
        psi1 = np.stack([np.exp(1j * self.f) * np.cos(half), np.exp(1j * (self.f + self.phi)) * np.sin(half)], axis=1)
        psi2 = np.stack([-np.exp(-1j * (self.f + self.phi)) * np.sin(half), np.exp(-1j * self.f) * np.cos(half)], axis=1)
        return psi1, psi2


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2 * math.pi) - math.pi


def bloch_path(propagation: Propagation, pole_tol: float = 1e-9, start_tol: float = 1e-10) -> BlochPath:
    """Invert ``U = [[e^{if} c, -e^{-i(f+phi)} s], [e^{i(f+phi)} s, e^{-if} c]]`` sample by sample."""
    unitaries = propagation.unitaries
    if np.max(np.abs(unitaries[0] - IDENTITY)) > start_tol:
        raise InvalidArgumentError("La trayectoria debe comenzar en la identidad, U(t0) = I.")
    u00 = unitaries[:, 0, 0]
    u10 = unitaries[:, 1, 0]
    theta = 2 * np.arctan2(np.abs(u10), np.abs(u00))
    pole = np.sin(theta) < pole_tol

    f = np.zeros_like(theta)
    phi = np.zeros_like(theta)
    jumps: List[PoleJump] = []
    prev_f = prev_phi = 0.0
    last_pole_theta: Optional[float] = None
    for k in range(len(theta)):
        if pole[k]:
            if math.cos(theta[k]) > 0:
                f_k = prev_f + _wrap(float(np.angle(u00[k])) - prev_f)
            else:
                f_k = prev_f + _wrap(float(np.angle(u10[k])) - prev_phi - prev_f)
            phi_k = prev_phi
            last_pole_theta = float(round(theta[k] / math.pi) * math.pi)
        else:
            f_raw = float(np.angle(u00[k]))
            g = float(np.angle(u10[k]))
            if last_pole_theta is not None:
                # salto de azimut en el polo: se contabiliza de forma discreta
                phi_k = prev_phi + _wrap(g - f_raw - prev_phi)
                delta = phi_k - prev_phi
                expected_f = prev_f - 0.5 * (1 - math.cos(last_pole_theta)) * delta
                f_k = expected_f + _wrap(f_raw - expected_f)
                phi_k = prev_phi + _wrap(g - f_k - prev_phi)
                if abs(phi_k - prev_phi) > pole_tol:
                    jumps.append(PoleJump(k, last_pole_theta, phi_k - prev_phi))
                    logger.debug("Salto de azimut %.6f en el polo theta=%.3f (muestra %d)", phi_k - prev_phi, last_pole_theta, k)
                last_pole_theta = None
            else:
                f_k = prev_f + _wrap(f_raw - prev_f)
                phi_k = prev_phi + _wrap(g - f_k - prev_phi)
        f[k] = f_k
        phi[k] = phi_k
        prev_f, prev_phi = f_k, phi_k

    return BlochPath(times=propagation.times.copy(), theta=theta, phi=phi, f=f, pole_jumps=jumps)


def geometric_phase(path: BlochPath) -> float:
    """``-1/2 integral (1 - cos theta) dphi`` with pole jumps weighted by ``1 - cos theta_pole``."""
    jump_at = {jump.index: jump for jump in path.pole_jumps}
    weight = 1 - np.cos(path.theta)
    total = 0.0
    for k in range(1, len(path.theta)):
        dphi = path.phi[k] - path.phi[k - 1]
        if k in jump_at:
            total += (1 - math.cos(jump_at[k].theta_pole)) * jump_at[k].delta_phi
        elif dphi != 0.0:
            total += 0.5 * (weight[k] + weight[k - 1]) * dphi
    return -0.5 * total
