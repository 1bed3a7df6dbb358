"""Reference values for the S gate used by ``report --assert``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

from .error_geometry import ErrorChannel
from .pulses import PulseSequence
from .robustness import SchemeComparison
from .targets import NAMED_GATES

SQRT2 = math.sqrt(2.0)

LEVEL1_DISTANCES = {
    ErrorChannel.DETUNING: 2 * math.sqrt(2 + SQRT2),
    ErrorChannel.RABI: math.pi * math.sqrt(2 - SQRT2),
}
EXPECTED_ORDERS = {"ngqc-level1": 2.0, "udog-level3": 4.0, "udog-level5": 6.0}
EXPECTED_COEFFICIENTS = {
    "ngqc-level1": {ErrorChannel.DETUNING: 1 + 1 / SQRT2, ErrorChannel.RABI: (2 - SQRT2) * math.pi**2 / 8},
    "udog-level3": {ErrorChannel.DETUNING: 1 - 1 / SQRT2, ErrorChannel.RABI: (2 - SQRT2) * math.pi**4 / 32},
    "udog-level5": {ErrorChannel.DETUNING: 1 + 1 / SQRT2, ErrorChannel.RABI: (2 - SQRT2) * math.pi**6 / 128},
}
SLOPE_TOLERANCE = {"ngqc-level1": 0.05, "udog-level3": 0.05, "udog-level5": 0.1}
COEFFICIENT_TOLERANCE = {"ngqc-level1": 0.02, "udog-level3": 0.05, "udog-level5": 0.05}
DISTANCE_TOLERANCE = 0.01
CLOSED_DISTANCE = 1e-7


@dataclass
class AcceptanceCheck:
    scheme: str
    channel: ErrorChannel
    quantity: str
    observed: Optional[float]
    expected: float
    passed: bool

    def describe(self) -> str:
        observed = "n/d" if self.observed is None else f"{self.observed:.6g}"
        state = "OK" if self.passed else "FALLO"
        return f"[{state}] {self.scheme} {self.channel.value} {self.quantity}: {observed} (esperado {self.expected:.6g})"


def _is_s_gate(sequence: PulseSequence) -> bool:
    target, reference = sequence.target, NAMED_GATES["S"]
    if target is None:
        return False
    return all(
        math.isclose(getattr(target, name), getattr(reference, name), abs_tol=1e-9)
        for name in ("theta0", "phi0", "gamma_g")
    )


def s_gate_checks(sequence: PulseSequence, comparison: SchemeComparison) -> List[AcceptanceCheck]:
    """Distances and scaling fits compared against the S-gate reference table."""
    scheme = sequence.scheme
    if not _is_s_gate(sequence) or scheme not in EXPECTED_ORDERS:
        return []
    checks: List[AcceptanceCheck] = []
    for channel in (ErrorChannel.RABI, ErrorChannel.DETUNING):
        distance = comparison.distances[channel]
        if scheme == "ngqc-level1":
            expected = LEVEL1_DISTANCES[channel]
            passed = abs(distance - expected) <= DISTANCE_TOLERANCE
        else:
            expected = 0.0
            passed = distance < CLOSED_DISTANCE
        checks.append(AcceptanceCheck(scheme, channel, "distancia", distance, expected, passed))

        fit = comparison.fits.get(channel)
        order = EXPECTED_ORDERS[scheme]
        slope = fit.slope if fit else None
        checks.append(
            AcceptanceCheck(
                scheme,
                channel,
                "pendiente",
                slope,
                order,
                slope is not None and abs(slope - order) <= SLOPE_TOLERANCE[scheme],
            )
        )
        coefficient = fit.coefficient if fit else None
        reference = EXPECTED_COEFFICIENTS[scheme][channel]
        checks.append(
            AcceptanceCheck(
                scheme,
                channel,
                "coeficiente",
                coefficient,
                reference,
                coefficient is not None
                and abs(coefficient - reference) <= COEFFICIENT_TOLERANCE[scheme] * reference,
            )
        )
    return checks
