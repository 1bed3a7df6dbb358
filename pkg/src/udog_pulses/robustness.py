"""Perturbed-gate simulation, scaling fits, D-matrix checks and filter functions."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from joblib import Parallel, delayed

from .error_geometry import ErrorChannel, cumulative_piecewise, error_curve_direct, error_curve_path
from .pulses import GridSpec, PoleJump, PulseSequence, bloch_path, final_unitary, propagate
from .schemes import target_unitary
from .su2 import PAULIS, InvalidArgumentError, Mat2, rotation_matrix, trace_infidelity, xy_rotation

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]

INFIDELITY_FLOOR = 1e-13
MAX_ERROR_STRENGTH = 0.5
BETA_RANGE = (1e-4, 0.2)
MIN_SWEEP_POINTS = 10
Z_AXIS = np.array([0.0, 0.0, 1.0])


class FitUndefinedError(RuntimeError):
    """Every sample of a sweep sits below the numerical floor."""


# --- exact simulation --------------------------------------------------------------


def reference_unitary(sequence: PulseSequence) -> Mat2:
    if sequence.target is not None:
        return target_unitary(sequence.target)
    return final_unitary(sequence)


def gate_infidelity(
    sequence: PulseSequence,
    epsilon: float = 0.0,
    delta: float = 0.0,
    grid: Optional[GridSpec] = None,
) -> float:
    """``1 - |Tr(U_target^dagger U(T))| / 2`` under a Rabi scale ``1 + epsilon`` and detuning ``delta``."""
    if abs(epsilon) >= MAX_ERROR_STRENGTH or abs(delta) >= MAX_ERROR_STRENGTH:
        raise InvalidArgumentError("Las intensidades de error deben cumplir |epsilon|, |delta| < 0.5.")
    actual = final_unitary(sequence, rabi_scale=1.0 + epsilon, detuning=delta, grid=grid or GridSpec())
    return trace_infidelity(reference_unitary(sequence), actual)


def _channel_infidelity(
    sequence: PulseSequence, channel: ErrorChannel, beta: float, grid: Optional[GridSpec] = None
) -> float:
    if channel == ErrorChannel.RABI:
        return gate_infidelity(sequence, epsilon=beta, grid=grid)
    return gate_infidelity(sequence, delta=beta, grid=grid)


@dataclass
class SweepFit:
    channel: ErrorChannel
    betas: FloatArray
    infidelities: FloatArray
    slope: float
    coefficient: float
    r_squared: float
    window: Tuple[float, float]
    used_points: int = 0

    def to_document(self) -> dict:
        return {
            "channel": self.channel.value,
            "slope": float(self.slope),
            "coefficient": float(self.coefficient),
            "r_squared": float(self.r_squared),
            "window": [float(self.window[0]), float(self.window[1])],
        }


def beta_grid(beta_min: float, beta_max: float, points: int) -> FloatArray:
    return np.geomspace(beta_min, beta_max, points)


def sweep_and_fit(
    sequence: PulseSequence,
    channel: ErrorChannel,
    betas: Sequence[float],
    symmetric: bool = True,
    threads: int = 1,
    grid: Optional[GridSpec] = None,
) -> SweepFit:
    """Sweep one error channel and fit ``1 - F = c beta^slope`` in log-log space.

    With ``symmetric`` the infidelity is averaged over ``+beta`` and ``-beta``.
    """
    values = np.sort(np.asarray(betas, dtype=float))
    if values.size < MIN_SWEEP_POINTS:
        raise InvalidArgumentError(f"El barrido necesita al menos {MIN_SWEEP_POINTS} puntos.")
    if values[0] < BETA_RANGE[0] * (1 - 1e-12) or values[-1] > BETA_RANGE[1] * (1 + 1e-12):
        raise InvalidArgumentError(f"Los valores de beta deben estar en [{BETA_RANGE[0]}, {BETA_RANGE[1]}].")

    def evaluate(beta: float) -> float:
        value = _channel_infidelity(sequence, channel, beta, grid)
        if symmetric:
            value = 0.5 * (value + _channel_infidelity(sequence, channel, -beta, grid))
        return value

    if threads > 1:
        samples = Parallel(n_jobs=threads, prefer="threads")(delayed(evaluate)(beta) for beta in values.tolist())
    else:
        samples = [evaluate(beta) for beta in values.tolist()]
    return fit_power_law(channel, values, samples)


def fit_power_law(channel: ErrorChannel, betas: Sequence[float], samples: Sequence[float]) -> SweepFit:
    """Least-squares line through ``(log beta, log(1 - F))`` above the numerical floor."""
    grid = np.asarray(betas, dtype=float)
    infidelities = np.maximum(np.asarray(samples, dtype=float), -1e-14)
    if grid.shape != infidelities.shape:
        raise InvalidArgumentError("beta e infidelidad deben tener la misma longitud.")
    usable = infidelities > INFIDELITY_FLOOR
    if usable.sum() < 2:
        raise FitUndefinedError(
            f"Canal {channel.value}: todas las infidelidades están por debajo de {INFIDELITY_FLOOR:g}."
        )
    log_beta, log_inf = np.log(grid[usable]), np.log(infidelities[usable])
    slope, intercept = np.polyfit(log_beta, log_inf, 1)
    fitted = slope * log_beta + intercept
    total = float(np.sum((log_inf - log_inf.mean()) ** 2))
    r_squared = 1.0 - float(np.sum((log_inf - fitted) ** 2)) / total if total > 0 else 1.0
    logger.info("Canal %s: pendiente %.4f, coeficiente %.6g", channel.value, slope, math.exp(intercept))
    return SweepFit(
        channel=channel,
        betas=grid,
        infidelities=infidelities,
        slope=float(slope),
        coefficient=float(math.exp(intercept)),
        r_squared=r_squared,
        window=(float(grid.min()), float(grid.max())),
        used_points=int(usable.sum()),
    )


# --- perturbative D-matrix ---------------------------------------------------------


@dataclass
class DMatrix:
    """``D_km(t) = int <psi_k|V|psi_m> dt'`` with entries of shape (n, 2, 2)."""

    channel: ErrorChannel
    times: FloatArray
    entries: ComplexArray
    pole_jumps: List[PoleJump] = field(default_factory=list)

    @property
    def final(self) -> ComplexArray:
        return self.entries[-1]

    @property
    def d11(self) -> ComplexArray:
        return self.entries[:, 0, 0]

    @property
    def d21(self) -> ComplexArray:
        return self.entries[:, 1, 0]

    @property
    def d22(self) -> ComplexArray:
        return self.entries[:, 1, 1]


def _error_generators(amplitudes: FloatArray, phases: FloatArray, channel: ErrorChannel) -> ComplexArray:
    count = amplitudes.size
    if channel == ErrorChannel.DETUNING:
        return np.broadcast_to(0.5 * PAULIS[2], (count, 2, 2))
    half = 0.5 * amplitudes
    return (half * np.cos(phases))[:, None, None] * PAULIS[0] + (half * np.sin(phases))[:, None, None] * PAULIS[1]


def d_matrix(sequence: PulseSequence, channel: ErrorChannel, grid: Optional[GridSpec] = None) -> DMatrix:
    propagation = propagate(sequence, grid=grid)
    path = bloch_path(propagation)
    if path.pole_jumps:
        logger.debug("D-matrix: %d tramos degenerados en los polos", len(path.pole_jumps))
    psi1, psi2 = path.dressed_states()
    basis = np.stack([psi1, psi2], axis=2)  # columnas: estados vestidos
    generators = _error_generators(propagation.amplitudes, propagation.phases, channel)
    integrand = np.conj(np.swapaxes(basis, 1, 2)) @ generators @ basis
    flat = integrand.reshape(len(path.times), 4)
    real = cumulative_piecewise(flat.real.copy(), propagation)
    imag = cumulative_piecewise(flat.imag.copy(), propagation)
    entries = (real + 1j * imag).reshape(-1, 2, 2)
    return DMatrix(channel=channel, times=path.times.copy(), entries=entries, pole_jumps=list(path.pole_jumps))


@dataclass
class CorrespondenceReport:
    channel: ErrorChannel
    max_deviation: float
    traceless_deviation: float

    def passed(self, tol: float = 1e-8) -> bool:
        return self.max_deviation < tol and self.traceless_deviation < tol


def verify_correspondence(
    sequence: PulseSequence, channel: ErrorChannel, grid: Optional[GridSpec] = None
) -> CorrespondenceReport:
    """Compare ``Re D21 = x``, ``Im D21 = y`` and ``D11 = z`` against the path-based curve."""
    matrix = d_matrix(sequence, channel, grid)
    path = bloch_path(propagate(sequence, grid=grid))
    curve = error_curve_path(path, sequence, channel, grid)
    deviations = [
        np.max(np.abs(matrix.d21.real - curve.points[:, 0])),
        np.max(np.abs(matrix.d21.imag - curve.points[:, 1])),
        np.max(np.abs(matrix.d11 - curve.points[:, 2])),
    ]
    report = CorrespondenceReport(
        channel=channel,
        max_deviation=float(max(deviations)),
        traceless_deviation=float(np.max(np.abs(matrix.d22 + matrix.d11))),
    )
    logger.debug("Correspondencia %s: desviación máxima %.3e", channel.value, report.max_deviation)
    return report


def perturbative_infidelity(matrix: DMatrix, beta: float) -> float:
    """``(beta^2 / 4) sum_km |D_km(T)|^2`` over all four entries."""
    return 0.25 * beta**2 * float(np.sum(np.abs(matrix.final) ** 2))


# --- filter functions --------------------------------------------------------------


@dataclass
class FilterFunction:
    channel: ErrorChannel
    omegas: FloatArray
    values: FloatArray


def _phase_integral(k: FloatArray, duration: float) -> ComplexArray:
    """``int_0^duration e^{i k u} du`` with the small-``k`` limit handled."""
    k = np.asarray(k, dtype=float)
    small = np.abs(k * duration) < 1e-8
    safe = np.where(small, 1.0, k)
    exact = (np.exp(1j * safe * duration) - 1.0) / (1j * safe)
    series = duration * (1 + 0.5j * k * duration)
    return np.where(small, series, exact)


def filter_function(
    sequence: PulseSequence,
    channel: ErrorChannel,
    omegas: Sequence[float],
    grid: Optional[GridSpec] = None,
) -> FilterFunction:
    """``F(omega) = sum_j |int e^{i omega t} R_j(t) dt|^2`` with exact substep integrals."""
    omega = np.asarray(omegas, dtype=float)
    if np.any(omega < 0):
        raise InvalidArgumentError("Las frecuencias del filtro deben ser no negativas.")
    grid = grid or GridSpec()
    control = np.eye(2, dtype=complex)
    total = np.zeros((omega.size, 3), dtype=complex)
    for step in sequence.substeps(grid.shaped_substeps):
        q = rotation_matrix(control).T
        m = np.array([math.cos(step.phase), math.sin(step.phase), 0.0])
        w = np.cross(m, Z_AXIS)
        start_phase = np.exp(1j * omega * step.start)[:, None]
        if channel == ErrorChannel.RABI:
            local = 0.5 * step.amplitude * _phase_integral(omega, step.duration)[:, None] * m
        else:
            plus = _phase_integral(omega + step.amplitude, step.duration)
            minus = _phase_integral(omega - step.amplitude, step.duration)
            cos_part, sin_part = 0.5 * (plus + minus), (plus - minus) / 2j
            local = 0.5 * (cos_part[:, None] * Z_AXIS - sin_part[:, None] * w)
        total += start_phase * (local @ q.T)
        control = xy_rotation(step.amplitude * step.duration, step.phase) @ control
    values = np.sum(np.abs(total) ** 2, axis=1)
    return FilterFunction(channel=channel, omegas=omega, values=values)


# --- scheme comparison -------------------------------------------------------------


@dataclass
class SchemeComparison:
    scheme: str
    distances: Dict[ErrorChannel, float]
    fits: Dict[ErrorChannel, Optional[SweepFit]]

    def to_document(self) -> dict:
        return {
            "scheme": self.scheme,
            "distances": {channel.value: value for channel, value in self.distances.items()},
            "fits": {channel.value: fit.to_document() if fit else None for channel, fit in self.fits.items()},
        }


def compare_schemes(
    sequences: Sequence[PulseSequence],
    betas: Sequence[float],
    grid: Optional[GridSpec] = None,
    threads: int = 1,
) -> List[SchemeComparison]:
    """Error distances and scaling fits for every sequence on a shared beta grid."""
    rows = []
    for sequence in sequences:
        distances: Dict[ErrorChannel, float] = {}
        fits: Dict[ErrorChannel, Optional[SweepFit]] = {}
        for channel in (ErrorChannel.RABI, ErrorChannel.DETUNING):
            distances[channel] = error_curve_direct(sequence, channel, grid).distance_bloch
            try:
                fits[channel] = sweep_and_fit(sequence, channel, betas, threads=threads, grid=grid)
            except FitUndefinedError as exc:
                logger.warning("%s: %s", sequence.scheme, exc)
                fits[channel] = None
        rows.append(SchemeComparison(scheme=sequence.scheme, distances=distances, fits=fits))
    return rows
