"""Pulse-sequence builders: geometric level-n schemes and an Euler dynamical baseline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .pulses import PulseSequence, PulseShape, Segment
from .su2 import InvalidArgumentError, Mat2, expm_su2, xy_rotation
from .targets import NAMED_GATES, GateTarget, parse_target

logger = logging.getLogger(__name__)

__all__ = [
    "LevelSpec",
    "NAMED_GATES",
    "GateTarget",
    "build_dynamical_euler",
    "build_geometric",
    "dressed_frame",
    "parse_target",
    "target_unitary",
]

DEFAULT_LEVEL5_PARITIES: Tuple[int, ...] = (0, 0, 0, 0, 1)


@dataclass(frozen=True)
class LevelSpec:
    """Level-n identity: sub-pulse ``k`` has phase ``phi0 + xi_k gamma_g + pi/2 + p_k pi``."""

    xi: Tuple[float, ...]
    parities: Tuple[int, ...]

    def __post_init__(self) -> None:
        n = len(self.xi)
        if n % 2 == 0 or n < 1:
            raise InvalidArgumentError(f"El nivel de la identidad debe ser impar; se recibió n={n}.")
        if len(self.parities) != n or any(p not in (0, 1) for p in self.parities):
            raise InvalidArgumentError("Las paridades deben ser 0 o 1, una por subpulso.")
        alternating = sum((-1) ** k * value for k, value in enumerate(self.xi))
        if abs(alternating - 1.0) > 1e-12:
            raise InvalidArgumentError(
                f"La suma alternada de xi debe valer 1 (se obtuvo {alternating:.3e})."
            )

    @property
    def n(self) -> int:
        return len(self.xi)

    @classmethod
    def level1(cls) -> "LevelSpec":
        return cls(xi=(1.0,), parities=(0,))

    @classmethod
    def level3(cls, xi1: float, xi2: float) -> "LevelSpec":
        return cls(xi=(xi1, xi2, 1.0 + xi2 - xi1), parities=(0, 0, 1))

    @classmethod
    def level5(cls, free: Sequence[float], parities: Sequence[int] = DEFAULT_LEVEL5_PARITIES) -> "LevelSpec":
        if len(free) != 4:
            raise InvalidArgumentError("El nivel 5 tiene exactamente 4 parámetros libres.")
        x1, x2, x3, x4 = (float(v) for v in free)
        return cls(xi=(x1, x2, x3, x4, 1.0 - x1 + x2 - x3 + x4), parities=tuple(int(p) for p in parities))

    @classmethod
    def for_level(cls, level: int, free: Sequence[float], parities: Optional[Sequence[int]] = None) -> "LevelSpec":
        if level == 1:
            return cls.level1()
        if level == 3:
            return cls.level3(*free)
        if level == 5:
            return cls.level5(free, parities or DEFAULT_LEVEL5_PARITIES)
        raise InvalidArgumentError(f"Nivel no soportado: {level}")

    def phases(self, target: GateTarget) -> Tuple[float, ...]:
        return tuple(
            target.phi0 + xi * target.gamma_g + math.pi / 2 + parity * math.pi
            for xi, parity in zip(self.xi, self.parities)
        )


def target_unitary(target: GateTarget) -> Mat2:
    """``exp(i gamma_g n.sigma)``."""
    return expm_su2(target.axis, -2.0 * target.gamma_g)


def dressed_frame(target: GateTarget) -> Mat2:
    """First outer rotation ``R1``; ``U -> R1 U R1^dagger`` moves the cyclic dressed state to |0>."""
    return xy_rotation(target.theta0, target.phi0 - math.pi / 2)


def build_geometric(
    target: GateTarget,
    level: Optional[LevelSpec] = None,
    shape: Optional[PulseShape] = None,
) -> PulseSequence:
    """``R3(pi - theta0) . [level-n pi block] . R1(theta0)``, all outer phases ``phi0 - pi/2``."""
    level = level or LevelSpec.level1()
    shape = shape or PulseShape.square()
    outer_phase = target.phi0 - math.pi / 2
    segments = []
    if target.theta0 > 0:
        segments.append(Segment.from_area(target.theta0, outer_phase, shape))
    for phase in level.phases(target):
        segments.append(Segment.from_area(math.pi, phase, shape))
    if math.pi - target.theta0 > 0:
        segments.append(Segment.from_area(math.pi - target.theta0, outer_phase, shape))
    scheme = "ngqc-level1" if level.n == 1 else f"udog-level{level.n}"
    logger.debug("Secuencia %s con %d segmentos para %s", scheme, len(segments), target.describe())
    return PulseSequence(scheme=scheme, target=target, segments=tuple(segments))


def build_dynamical_euler(alpha: float, shape: Optional[PulseShape] = None) -> PulseSequence:
    """``Rz(alpha) = Rx(pi/2) Ry(alpha) Rx(-pi/2)`` realised with positive areas only."""
    if abs(alpha) > 2 * math.pi + 1e-12:
        raise InvalidArgumentError("El ángulo de la rotación z debe cumplir |alpha| <= 2 pi.")
    shape = shape or PulseShape.square()
    segments = [Segment.from_area(math.pi / 2, math.pi, shape)]
    if alpha != 0.0:
        segments.append(Segment.from_area(abs(alpha), math.pi / 2 if alpha > 0 else -math.pi / 2, shape))
    segments.append(Segment.from_area(math.pi / 2, 0.0, shape))
    target = GateTarget(theta0=0.0, phi0=0.0, gamma_g=-alpha / 2)
    return PulseSequence(scheme="dynamical-euler", target=target, segments=tuple(segments))


def random_level(rng: np.random.Generator, level: int, bound: float = 3.0) -> LevelSpec:
    """Admissible ``LevelSpec`` with free parameters drawn uniformly from ``[-bound, bound]``."""
    if level == 1:
        return LevelSpec.level1()
    free = rng.uniform(-bound, bound, size=2 if level == 3 else 4)
    return LevelSpec.for_level(level, free.tolist())
