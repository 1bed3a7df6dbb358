"""Exact 2x2 unitary algebra used by every other module."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt

logger = logging.getLogger(__name__)

Mat2 = npt.NDArray[np.complex128]

IDENTITY: Mat2 = np.eye(2, dtype=complex)
SIGMA_X: Mat2 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y: Mat2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z: Mat2 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS: tuple[Mat2, Mat2, Mat2] = (SIGMA_X, SIGMA_Y, SIGMA_Z)


class InvalidArgumentError(ValueError):
    """Raised when an operation receives an argument outside its domain."""


@dataclass(frozen=True)
class NumericTolerances:
    unitary: float = 1e-12
    hermitian: float = 1e-12
    axis: float = 1e-12


DEFAULT_TOLERANCES = NumericTolerances()


def configure_tolerances(tolerances: NumericTolerances) -> NumericTolerances:
    """Install process-wide defaults for the unitary, Hermitian and axis checks; returns the previous ones."""
    global DEFAULT_TOLERANCES
    previous = DEFAULT_TOLERANCES
    DEFAULT_TOLERANCES = tolerances
    logger.debug("Tolerancias numéricas: %s", tolerances)
    return previous


@dataclass(frozen=True)
class PauliVec:
    """Coefficients of ``identity * I + x * sx + y * sy + z * sz``."""

    x: float
    y: float
    z: float
    identity: float = 0.0

    @property
    def vector(self) -> npt.NDArray[np.float64]:
        return np.array([self.x, self.y, self.z], dtype=float)

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def is_unitary(matrix: Mat2, tol: Optional[float] = None) -> bool:
    tol = DEFAULT_TOLERANCES.unitary if tol is None else tol
    deviation = matrix.conj().T @ matrix - IDENTITY
    return bool(np.max(np.abs(deviation)) < tol)


def is_hermitian(matrix: Mat2, tol: Optional[float] = None) -> bool:
    tol = DEFAULT_TOLERANCES.hermitian if tol is None else tol
    return bool(np.max(np.abs(matrix - matrix.conj().T)) < tol)


def expm_su2(axis: npt.ArrayLike, angle: float, tol: Optional[float] = None) -> Mat2:
    """Closed-form ``exp(-i * angle * axis.sigma / 2)``."""
    tol = DEFAULT_TOLERANCES.axis if tol is None else tol
    n = np.asarray(axis, dtype=float)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) >= tol:
        raise InvalidArgumentError(f"El eje de rotación debe ser un vector unitario de 3 componentes: {axis!r}")
    half = 0.5 * angle
    generator = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
    return np.cos(half) * IDENTITY - 1j * np.sin(half) * generator


def xy_rotation(area: float, phase: float) -> Mat2:
    """Elementary drive rotation ``exp(-i area (cos phase sx + sin phase sy) / 2)``."""
    return expm_su2((np.cos(phase), np.sin(phase), 0.0), area)


def pauli_decompose(matrix: Mat2, tol: Optional[float] = None) -> PauliVec:
    if not is_hermitian(matrix, tol):
        raise InvalidArgumentError("La matriz no es hermítica; no admite descomposición real de Pauli.")
    return PauliVec(
        x=float(np.real(matrix[0, 1] + matrix[1, 0]) / 2),
        y=float(np.imag(matrix[1, 0] - matrix[0, 1]) / 2),
        z=float(np.real(matrix[0, 0] - matrix[1, 1]) / 2),
        identity=float(np.real(matrix[0, 0] + matrix[1, 1]) / 2),
    )


def pauli_recompose(vec: PauliVec) -> Mat2:
    return vec.identity * IDENTITY + vec.x * SIGMA_X + vec.y * SIGMA_Y + vec.z * SIGMA_Z


def vector_to_operator(vector: npt.ArrayLike) -> Mat2:
    x, y, z = np.asarray(vector, dtype=float)
    return x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z


def _check_unitary(*matrices: Mat2, tol: Optional[float] = None) -> None:
    for matrix in matrices:
        if not is_unitary(matrix, tol):
            raise InvalidArgumentError("Se esperaba una matriz unitaria.")


def trace_fidelity(u_ideal: Mat2, u_actual: Mat2, tol: Optional[float] = None) -> float:
    """Global-phase invariant overlap ``|Tr(U_ideal^dagger U_actual)| / 2``."""
    _check_unitary(u_ideal, u_actual, tol=tol)
    value = abs(np.trace(u_ideal.conj().T @ u_actual)) / 2
    return float(min(value, 1.0))


def trace_infidelity(u_ideal: Mat2, u_actual: Mat2, tol: Optional[float] = None) -> float:
    """``1 - trace_fidelity`` evaluated without cancellation.

    Writing ``V = U_ideal^dagger U_actual = c0 I + c.sigma`` gives
    ``1 - |c0| = |c|^2 / (1 + |c0|)`` for any unitary ``V``.
    """
    _check_unitary(u_ideal, u_actual, tol=tol)
    overlap = u_ideal.conj().T @ u_actual
    c0 = abs(np.trace(overlap)) / 2
    off = sum(abs(np.trace(overlap @ pauli)) ** 2 for pauli in PAULIS) / 4
    return float(off / (1.0 + c0))


def rotation_matrix(unitary: Mat2) -> npt.NDArray[np.float64]:
    """SO(3) image ``R_ij = Tr(s_i U s_j U^dagger) / 2`` (Bloch vectors map as ``v -> R v``)."""
    result = np.empty((3, 3), dtype=float)
    for i, si in enumerate(PAULIS):
        for j, sj in enumerate(PAULIS):
            result[i, j] = np.real(np.trace(si @ unitary @ sj @ unitary.conj().T)) / 2
    return result


def spinor(theta: float, phi: float) -> npt.NDArray[np.complex128]:
    """State ``cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>``."""
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], dtype=complex)
