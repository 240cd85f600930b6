"""
Qutrit linear algebra and Hamiltonians.

Everything works in units with hbar = 1, so energies are angular frequencies
in rad/s. ``to_micro_ev`` converts to the μeV scale used in reports.

States are plain numpy arrays: a pure state is a complex 3-vector, a density
matrix a complex 3x3 array. The ``as_*`` helpers validate and normalise input.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateEigensystemError, InvalidInputError

HBAR_EV_S = 6.582119569e-16
TWO_PI = 2.0 * math.pi

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
NORM_TOL = 1e-12


def to_micro_ev(energy):
    """Convert an energy in rad/s (hbar = 1) to μeV."""
    scaled = np.asarray(energy, dtype=float) * (HBAR_EV_S * 1e6)
    return float(scaled) if scaled.ndim == 0 else scaled


def from_micro_ev(energy_uev):
    return energy_uev / (HBAR_EV_S * 1e6)


@dataclass(frozen=True)
class BatteryLevels:
    """Transition frequencies (rad/s) of the three lowest transmon levels."""

    omega01: float
    omega12: float

    def __post_init__(self):
        for name in ("omega01", "omega12"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} must be a positive finite frequency, got {value!r}")

    @classmethod
    def transmon_device(cls) -> "BatteryLevels":
        """The measured device: 6.266 GHz and 6.011 GHz transitions."""
        return cls(omega01=TWO_PI * 6.266e9, omega12=TWO_PI * 6.011e9)

    @property
    def energies(self) -> np.ndarray:
        # cumulative: level n sits at the sum of the transitions below it
        return np.array([0.0, self.omega01, self.omega01 + self.omega12])

    @property
    def e_max(self) -> float:
        return self.omega01 + self.omega12


class EigenSystem(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, paired with eigenvalues


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise InvalidInputError(f"non-finite input {v!r}")


def is_hermitian(h, tol=HERMITIAN_TOL) -> bool:
    h = np.asarray(h)
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    return h.shape == (3, 3) and float(np.max(np.abs(h - h.conj().T))) <= tol * scale


def as_hermitian(h) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.shape != (3, 3):
        raise InvalidInputError(f"expected a 3x3 operator, got shape {h.shape}")
    _check_finite(h)
    if not is_hermitian(h):
        raise InvalidInputError("operator is not Hermitian")
    return h


def as_pure_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (3,):
        raise InvalidInputError(f"expected a 3-vector, got shape {psi.shape}")
    _check_finite(psi)
    if abs(np.vdot(psi, psi).real - 1.0) > NORM_TOL:
        raise InvalidInputError("pure state is not normalised")
    return psi


def as_density_matrix(state) -> np.ndarray:
    """Return a validated density matrix; pure 3-vectors are promoted to projectors."""
    state = np.asarray(state, dtype=complex)
    if state.shape == (3,):
        psi = as_pure_state(state)
        return np.outer(psi, psi.conj())
    if state.shape != (3, 3):
        raise InvalidInputError(f"expected a 3-vector or 3x3 matrix, got shape {state.shape}")
    _check_finite(state)
    if float(np.max(np.abs(state - state.conj().T))) > HERMITIAN_TOL:
        raise InvalidInputError("density matrix is not Hermitian")
    if abs(np.trace(state).real - 1.0) > TRACE_TOL:
        raise InvalidInputError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(state).min() < -PSD_TOL:
        raise InvalidInputError("density matrix has a negative eigenvalue")
    return state


def basis_state(n: int) -> np.ndarray:
    psi = np.zeros(3, dtype=complex)
    psi[n] = 1.0
    return psi


def projector(n: int) -> np.ndarray:
    rho = np.zeros((3, 3), dtype=complex)
    rho[n, n] = 1.0
    return rho


def build_bare_hamiltonian(levels: BatteryLevels) -> np.ndarray:
    return np.diag(levels.energies).astype(complex)


def build_drive_hamiltonian(omega1: float, omega2: float) -> np.ndarray:
    """Resonant two-tone drive coupling |0>-|1> with omega1 and |1>-|2> with omega2."""
    _check_finite(omega1, omega2)
    h = np.zeros((3, 3), dtype=complex)
    h[0, 1] = h[1, 0] = omega1
    h[1, 2] = h[2, 1] = omega2
    return h


def _fix_phase(v: np.ndarray) -> np.ndarray:
    for k in range(v.shape[1]):
        col = v[:, k]
        big = col[int(np.argmax(np.abs(col)))]
        v[:, k] = col * (abs(big) / big)
    return v


def eig_hermitian(h, tol: float = 1e-14, max_sweeps: int = 100) -> EigenSystem:
    """
    Diagonalise a 3x3 Hermitian matrix with cyclic complex Jacobi rotations.

    Each rotation first removes the phase of the pivot element, then applies
    the real symmetric Jacobi rotation. Sweeps stop once the off-diagonal
    Frobenius norm falls below ``tol`` times the largest entry.

    Returns eigenvalues in ascending order and unit eigenvectors as columns,
    each with its largest-magnitude component made real and positive.
    """
    a = as_hermitian(h).copy()
    a = 0.5 * (a + a.conj().T)
    v = np.eye(3, dtype=complex)
    scale = float(np.max(np.abs(a))) or 1.0

    for _ in range(max_sweeps):
        off = math.sqrt(sum(abs(a[p, q]) ** 2 for p in range(3) for q in range(3) if p != q))
        if off <= tol * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[p, q]
            r = abs(apq)
            if r <= 1e-300:
                continue
            phase = apq / r
            theta = (a[q, q].real - a[p, p].real) / (2.0 * r)
            t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.hypot(theta, 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            j = np.eye(3, dtype=complex)
            j[q, q] = c * phase.conjugate()
            j[p, p] = c
            j[p, q] = s
            j[q, p] = -s * phase.conjugate()
            a = j.conj().T @ a @ j
            v = v @ j
    else:
        raise InvalidInputError("Jacobi iteration did not converge")

    w = a.diagonal().real
    order = np.argsort(w, kind="stable")
    return EigenSystem(w[order], _fix_phase(v[:, order]))


def dark_bright_states(omega1: float, omega2: float):
    """
    Instantaneous eigenstates of the drive Hamiltonian.

    Returns ``(dark, bright_plus, bright_minus)`` with energies 0, +gap, -gap,
    where gap = sqrt(omega1**2 + omega2**2). The dark state has no |1>
    component.
    """
    _check_finite(omega1, omega2)
    gap = math.hypot(omega1, omega2)
    if gap == 0.0:
        raise DegenerateEigensystemError("zero drive: dark and bright states are undefined")
    dark = np.array([omega2, 0.0, -omega1], dtype=complex) / gap
    norm = math.sqrt(2.0) * gap
    bright_plus = np.array([omega1, gap, omega2], dtype=complex) / norm
    bright_minus = np.array([omega1, -gap, omega2], dtype=complex) / norm
    return dark, bright_plus, bright_minus
