"""Target rotations and the named-gate shorthand table."""

from __future__ import annotations

import math
from typing import Dict

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, validator


class GateTarget(BaseModel):
    """Rotation ``exp(i gamma_g n.sigma)`` with ``n`` given by polar ``theta0`` and azimuth ``phi0``."""

    model_config = ConfigDict(frozen=True)

    theta0: float = 0.0
    phi0: float = 0.0
    gamma_g: float = 0.0

    @validator("theta0")
    def _check_polar(cls, value: float) -> float:
        if not 0.0 <= value <= math.pi + 1e-12:
            raise ValueError("theta0 debe estar en [0, pi] radianes.")
        return min(max(value, 0.0), math.pi)

    @property
    def axis(self) -> npt.NDArray[np.float64]:
        return np.array(
            [
                math.sin(self.theta0) * math.cos(self.phi0),
                math.sin(self.theta0) * math.sin(self.phi0),
                math.cos(self.theta0),
            ]
        )

    @property
    def is_z_rotation(self) -> bool:
        return self.theta0 == 0.0

    def describe(self) -> str:
        return f"(theta0={self.theta0:.10g}, phi0={self.phi0:.10g}, gamma_g={self.gamma_g:.10g})"


NAMED_GATES: Dict[str, GateTarget] = {
    "S": GateTarget(theta0=0.0, phi0=0.0, gamma_g=-math.pi / 4),
    "T": GateTarget(theta0=0.0, phi0=0.0, gamma_g=-math.pi / 8),
    "Z": GateTarget(theta0=0.0, phi0=0.0, gamma_g=-math.pi / 2),
    "X": GateTarget(theta0=math.pi / 2, phi0=0.0, gamma_g=math.pi / 2),
    "H": GateTarget(theta0=math.pi / 4, phi0=0.0, gamma_g=math.pi / 2),
}


def parse_target(text: str) -> GateTarget:
    """Parse ``"theta0,phi0,gamma_g"`` (radians) or a name from :data:`NAMED_GATES`."""
    key = text.strip()
    if key.upper() in NAMED_GATES:
        return NAMED_GATES[key.upper()]
    parts = [item.strip() for item in key.split(",")]
    if len(parts) != 3:
        raise ValueError(f"El objetivo '{text}' debe tener el formato theta0,phi0,gamma_g (en radianes).")
    try:
        theta0, phi0, gamma_g = (float(item) for item in parts)
    except ValueError as exc:
        raise ValueError(f"El objetivo '{text}' contiene valores no numéricos.") from exc
    return GateTarget(theta0=theta0, phi0=phi0, gamma_g=gamma_g)
