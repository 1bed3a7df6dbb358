"""First- and second-order Magnus error terms and geometric error curves.

Curves are stored in the half convention: ``A1(t) = r(t).sigma``.  The
reported error distance doubles the endpoint norm (Bloch convention).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy import integrate

from .pulses import BlochPath, GridSpec, Propagation, PulseSequence, Substep, propagate
from .schemes import dressed_frame
from .su2 import InvalidArgumentError, Mat2, rotation_matrix, vector_to_operator, xy_rotation
from .targets import GateTarget

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
Z_AXIS = np.array([0.0, 0.0, 1.0])


class ErrorChannel(str, enum.Enum):
    RABI = "rabi"
    DETUNING = "detuning"

    def operator(self, amplitude: float = 1.0, phase: float = 0.0) -> Mat2:
        """Error generator: ``H_c`` for Rabi errors, ``sigma_z / 2`` for detuning."""
        if self == ErrorChannel.RABI:
            return vector_to_operator((amplitude * math.cos(phase) / 2, amplitude * math.sin(phase) / 2, 0.0))
        return vector_to_operator((0.0, 0.0, 0.5))


CHANNEL_PAIRS: Tuple[Tuple[ErrorChannel, ErrorChannel], ...] = (
    (ErrorChannel.RABI, ErrorChannel.RABI),
    (ErrorChannel.DETUNING, ErrorChannel.DETUNING),
    (ErrorChannel.RABI, ErrorChannel.DETUNING),
)


def pair_key(pair: Tuple[ErrorChannel, ErrorChannel]) -> str:
    return f"{pair[0].value}-{pair[1].value}"


@dataclass
class ErrorCurve:
    channel: ErrorChannel
    times: FloatArray
    points: FloatArray

    @property
    def endpoint(self) -> FloatArray:
        return self.points[-1]

    @property
    def distance_half(self) -> float:
        return float(np.linalg.norm(self.endpoint))

    @property
    def distance_bloch(self) -> float:
        return 2.0 * self.distance_half

    @property
    def closed(self) -> bool:
        return self.distance_bloch < 1e-8

    def summary(self) -> dict:
        return {
            "channel": self.channel.value,
            "endpoint": [float(v) for v in self.endpoint],
            "distance_bloch": self.distance_bloch,
        }


@dataclass
class MagnusTerms:
    a1: Dict[ErrorChannel, Mat2] = field(default_factory=dict)
    a2: Dict[str, Mat2] = field(default_factory=dict)
    a1_vectors: Dict[ErrorChannel, FloatArray] = field(default_factory=dict)
    a2_vectors: Dict[str, FloatArray] = field(default_factory=dict)


# --- closed-form substep integrals -------------------------------------------------


def _drive_axes(step: Substep) -> Tuple[FloatArray, FloatArray]:
    m = np.array([math.cos(step.phase), math.sin(step.phase), 0.0])
    return m, np.cross(m, Z_AXIS)


def _local_terms(step: Substep, channel: ErrorChannel, u: FloatArray) -> Tuple[FloatArray, FloatArray]:
    """Local first-order increment ``rho(u)`` and self term ``K(u) = int h x rho`` (shape (n, 3))."""
    m, w = _drive_axes(step)
    omega = step.amplitude
    u = np.atleast_1d(u)[:, None]
    if channel == ErrorChannel.RABI:
        return 0.5 * omega * u * m, np.zeros((u.shape[0], 3))
    if omega == 0.0:
        return 0.5 * u * Z_AXIS, np.zeros((u.shape[0], 3))
    s, c = np.sin(omega * u), np.cos(omega * u)
    rho = (s * Z_AXIS - (1 - c) * w) / (2 * omega)
    self_term = (u - s / omega) * m / (4 * omega)
    return rho, self_term


def _cross_local(step: Substep, u: FloatArray) -> FloatArray:
    """``int (h_rabi x rho_det + h_det x rho_rabi)`` over ``[0, u]`` in the substep frame."""
    m, w = _drive_axes(step)
    omega = step.amplitude
    u = np.atleast_1d(u)[:, None]
    if omega == 0.0:
        return np.zeros((u.shape[0], 3))
    s, c = np.sin(omega * u), np.cos(omega * u)
    return 0.25 * ((2 * (1 - c) / omega - u * s) * w + (u * (1 + c) - 2 * s / omega) * Z_AXIS)


@dataclass
class _Accumulated:
    times: FloatArray
    r: Dict[ErrorChannel, FloatArray]
    a2: Dict[str, FloatArray]


def _accumulate(steps: Sequence[Substep], offsets: Optional[Sequence[FloatArray]] = None) -> _Accumulated:
    """Walk the substeps carrying ``U_c``, ``r`` and ``a2``; sample at ``offsets`` when given."""
    channels = (ErrorChannel.RABI, ErrorChannel.DETUNING)
    control = np.eye(2, dtype=complex)
    r = {channel: np.zeros(3) for channel in channels}
    a2 = {pair_key(pair): np.zeros(3) for pair in CHANNEL_PAIRS}
    times: List[FloatArray] = []
    r_samples: Dict[ErrorChannel, List[FloatArray]] = {channel: [] for channel in channels}
    a2_samples: Dict[str, List[FloatArray]] = {key: [] for key in a2}

    for index, step in enumerate(steps):
        q = rotation_matrix(control).T
        u = offsets[index] if offsets is not None else np.array([step.duration])
        rho_global: Dict[ErrorChannel, FloatArray] = {}
        for channel in channels:
            rho, self_term = _local_terms(step, channel, u)
            rho_global[channel] = rho @ q.T
            key = pair_key((channel, channel))
            a2_block = a2[key] + np.cross(rho_global[channel], r[channel]) + self_term @ q.T
            if offsets is not None:
                a2_samples[key].append(a2_block)
            a2[key] = a2_block[-1]
        cross_key = pair_key((ErrorChannel.RABI, ErrorChannel.DETUNING))
        cross_block = (
            a2[cross_key]
            + np.cross(rho_global[ErrorChannel.RABI], r[ErrorChannel.DETUNING])
            + np.cross(rho_global[ErrorChannel.DETUNING], r[ErrorChannel.RABI])
            + _cross_local(step, u) @ q.T
        )
        if offsets is not None:
            a2_samples[cross_key].append(cross_block)
            times.append(step.start + u)
        a2[cross_key] = cross_block[-1]
        for channel in channels:
            block = r[channel] + rho_global[channel]
            if offsets is not None:
                r_samples[channel].append(block)
            r[channel] = block[-1]
        control = xy_rotation(step.amplitude * step.duration, step.phase) @ control

    if offsets is None:
        return _Accumulated(
            times=np.array([sum(step.duration for step in steps)]),
            r={channel: value[None, :] for channel, value in r.items()},
            a2={key: value[None, :] for key, value in a2.items()},
        )
    return _Accumulated(
        times=np.concatenate(times),
        r={channel: np.concatenate(blocks) for channel, blocks in r_samples.items()},
        a2={key: np.concatenate(blocks) for key, blocks in a2_samples.items()},
    )


def _sample_offsets(steps: Sequence[Substep], grid: GridSpec) -> List[FloatArray]:
    per_segment = np.bincount([step.segment for step in steps])
    return [np.linspace(0.0, step.duration, grid.points_per_substep(int(per_segment[step.segment]))) for step in steps]


def error_curve_direct(
    sequence: PulseSequence,
    channel: ErrorChannel,
    grid: Optional[GridSpec] = None,
    endpoint_tol: float = 1e-9,
    max_refinements: int = 6,
) -> ErrorCurve:
    """``r(t)`` from ``A1(t) = int U_c^dagger G U_c dt`` with exact substep integrals."""
    grid = grid or GridSpec()
    steps = sequence.substeps(grid.shaped_substeps)
    accumulated = _accumulate(steps, _sample_offsets(steps, grid))
    if not sequence.is_square and channel == ErrorChannel.DETUNING:
        endpoint = accumulated.r[channel][-1]
        count = grid.shaped_substeps
        for _ in range(max_refinements):
            count *= 2
            refined = GridSpec(grid.samples_per_segment, count)
            steps = sequence.substeps(count)
            candidate = _accumulate(steps, _sample_offsets(steps, refined))
            change = float(np.linalg.norm(candidate.r[channel][-1] - endpoint))
            accumulated, endpoint = candidate, candidate.r[channel][-1]
            if change < endpoint_tol:
                break
            logger.debug("Curva de desintonía refinada a %d subpasos (cambio %.3e)", count, change)
    return ErrorCurve(channel=channel, times=accumulated.times, points=accumulated.r[channel])


def magnus_terms(sequence: PulseSequence, order: int = 1, grid: Optional[GridSpec] = None) -> MagnusTerms:
    """Endpoint ``A1`` per channel and, for ``order == 2``, ``A2 = int h x r`` per channel pair."""
    if order not in (1, 2):
        raise InvalidArgumentError("El orden de Magnus debe ser 1 o 2.")
    grid = grid or GridSpec()
    accumulated = _accumulate(sequence.substeps(grid.shaped_substeps))
    terms = MagnusTerms()
    for channel, values in accumulated.r.items():
        terms.a1_vectors[channel] = values[-1]
        terms.a1[channel] = vector_to_operator(values[-1])
    if order == 2:
        for key, values in accumulated.a2.items():
            terms.a2_vectors[key] = values[-1]
            terms.a2[key] = vector_to_operator(values[-1])
    return terms


# --- path-based integrals ----------------------------------------------------------


def cumulative_piecewise(values: npt.NDArray, propagation: Propagation) -> npt.NDArray:
    """Cumulative Simpson integral restarted on every substep slice and chained."""
    result = np.zeros_like(values)
    offset = np.zeros(values.shape[1:], dtype=values.dtype)
    for part in propagation.slices:
        chunk = integrate.cumulative_simpson(values[part], x=propagation.times[part], axis=0, initial=0)
        result[part] = offset + chunk
        offset = result[part][-1]
    return result


def path_integrands(path: BlochPath, propagation: Propagation, channel: ErrorChannel) -> FloatArray:
    """Closed-form ``dr/dt`` in terms of ``theta``, ``phi``, ``f`` and the drive."""
    theta, phase_sum = path.theta, 2 * path.f + path.phi
    if channel == ErrorChannel.DETUNING:
        return np.stack(
            [-0.5 * np.sin(theta) * np.cos(phase_sum), -0.5 * np.sin(theta) * np.sin(phase_sum), 0.5 * np.cos(theta)],
            axis=1,
        )
    half_omega = 0.5 * propagation.amplitudes
    delta = propagation.phases - path.phi
    return np.stack(
        [
            -half_omega * (np.sin(delta) * np.sin(phase_sum) - np.cos(theta) * np.cos(delta) * np.cos(phase_sum)),
            half_omega * (np.sin(delta) * np.cos(phase_sum) + np.cos(theta) * np.cos(delta) * np.sin(phase_sum)),
            half_omega * np.sin(theta) * np.cos(delta),
        ],
        axis=1,
    )


def error_curve_path(
    path: BlochPath,
    sequence: PulseSequence,
    channel: ErrorChannel,
    grid: Optional[GridSpec] = None,
) -> ErrorCurve:
    propagation = propagate(sequence, grid=grid)
    if len(propagation) != len(path.times) or not np.allclose(propagation.times, path.times):
        raise InvalidArgumentError("La trayectoria de Bloch no corresponde a la rejilla de la secuencia.")
    points = cumulative_piecewise(path_integrands(path, propagation, channel), propagation)
    return ErrorCurve(channel=channel, times=path.times.copy(), points=points)


def endpoint_in_dressed_frame(endpoint: npt.ArrayLike, target: GateTarget) -> FloatArray:
    """Endpoint seen in the frame where the cyclic dressed state starts at |0>."""
    return rotation_matrix(dressed_frame(target)) @ np.asarray(endpoint, dtype=float)
