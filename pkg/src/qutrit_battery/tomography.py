"""
Nine-rotation state tomography of a qutrit.

Each rotation U_i carries a measurement basis state |psi_i> to |0>. Reading
out the populations of U_i rho U_i^dagger for all nine rotations yields 27
probabilities, which a linear least-squares inversion maps back to rho.

Subspace pulses are written (theta)_{x|y}^{ab} = exp(-i theta sigma^{ab} / 2),
with sigma^{ab} the Pauli matrix on levels a, b. A two-pulse entry such as
(pi)_x^{01} (pi)_x^{12} is a matrix product, so the right pulse acts first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import as_density_matrix
from .errors import InvalidInputError, TomographyConstructionError

_SQ = 1.0 / math.sqrt(2.0)

# (pulses as written, left to right; target basis state)
ROTATION_TABLE = (
    ((), (1, 0, 0)),
    ((("x", math.pi, 0, 1),), (0, 1, 0)),
    ((("x", math.pi, 0, 1), ("x", math.pi, 1, 2)), (0, 0, 1)),
    ((("y", math.pi / 2, 0, 1),), (_SQ, -_SQ, 0)),
    ((("x", math.pi / 2, 0, 1),), (_SQ, 1j * _SQ, 0)),
    ((("x", math.pi, 0, 1), ("y", math.pi / 2, 1, 2)), (0, _SQ, -_SQ)),
    ((("x", math.pi, 0, 1), ("x", math.pi / 2, 1, 2)), (0, _SQ, 1j * _SQ)),
    ((("x", math.pi / 2, 0, 1), ("x", math.pi, 1, 2)), (_SQ, 0, -_SQ)),
    # the only target this pulse pair sends to |0> has a minus sign on |2>
    ((("y", math.pi / 2, 0, 1), ("x", math.pi, 1, 2)), (_SQ, 0, -1j * _SQ)),
)

CONDITION_LIMIT = 1e3


def subspace_rotation(axis: str, theta: float, a: int, b: int) -> np.ndarray:
    """exp(-i theta sigma_axis / 2) on levels (a, b), identity on the third level."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    u = np.eye(3, dtype=complex)
    u[a, a] = u[b, b] = c
    if axis == "x":
        u[a, b] = u[b, a] = -1j * s
    elif axis == "y":
        u[a, b], u[b, a] = -s, s
    else:
        raise InvalidInputError(f"axis must be 'x' or 'y', got {axis!r}")
    return u


@dataclass(frozen=True, eq=False)
class TomographyRotation:
    label: int
    unitary: np.ndarray
    target_basis: np.ndarray
    order: str  # "as written" or "reversed": which composition met the contract


def _maps_to_ground(u, target, tol=1e-10) -> bool:
    image = u @ target
    return abs(abs(image[0]) - 1.0) <= tol and float(np.max(np.abs(image[1:]))) <= tol


def _compose(pulses):
    u = np.eye(3, dtype=complex)
    for p in pulses:
        u = u @ subspace_rotation(*p)
    return u


@lru_cache(maxsize=1)
def _build_set():
    rotations = []
    for label, (pulses, target) in enumerate(ROTATION_TABLE, start=1):
        target = np.array(target, dtype=complex)
        for order, seq in (("as written", pulses), ("reversed", pulses[::-1])):
            u = _compose(seq)
            if _maps_to_ground(u, target):
                break
        else:
            raise TomographyConstructionError(f"rotation {label} does not map its basis state to |0>")
        if np.max(np.abs(u.conj().T @ u - np.eye(3))) > 1e-12:
            raise TomographyConstructionError(f"rotation {label} is not unitary")
        u.setflags(write=False)
        target.setflags(write=False)
        rotations.append(TomographyRotation(label, u, target, order))
    return tuple(rotations)


def tomography_set() -> list[TomographyRotation]:
    """The nine verified measurement rotations."""
    return list(_build_set())


def _hermitian_basis():
    basis = []
    for k in range(3):
        m = np.zeros((3, 3), dtype=complex)
        m[k, k] = 1.0
        basis.append(m)
    for a, b in ((0, 1), (0, 2), (1, 2)):
        m = np.zeros((3, 3), dtype=complex)
        m[a, b] = m[b, a] = 1.0
        basis.append(m)
        m = np.zeros((3, 3), dtype=complex)
        m[a, b], m[b, a] = -1j, 1j
        basis.append(m)
    return basis


@lru_cache(maxsize=1)
def design_matrix() -> np.ndarray:
    """
    27x9 real matrix mapping Hermitian-basis coefficients to outcome probabilities.

    Row 3(i-1)+k is the probability of outcome k after rotation i.
    """
    basis = _hermitian_basis()
    rows = []
    for rot in _build_set():
        for k in range(3):
            effect = np.outer(rot.unitary[k].conj(), rot.unitary[k])  # U^dag |k><k| U
            rows.append([np.trace(effect @ m).real for m in basis])
    a = np.array(rows)
    cond = np.linalg.cond(a)
    if not cond < CONDITION_LIMIT:
        raise TomographyConstructionError(f"rotation set is not informationally complete (cond {cond:.3g})")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    """Outcome frequencies, one row per rotation; ``shots`` is None for exact probabilities."""

    probabilities: np.ndarray
    shots: int | None = None

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        if p.shape != (9, 3):
            raise InvalidInputError(f"expected 9x3 probabilities, got shape {p.shape}")
        if np.any(~np.isfinite(p)) or np.any(p < -1e-12):
            raise InvalidInputError("probabilities must be finite and non-negative")
        if np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-12:
            raise InvalidInputError("each row of probabilities must sum to 1")
        if self.shots is not None and not (isinstance(self.shots, (int, np.integer)) and self.shots > 0):
            raise InvalidInputError(f"shots must be a positive integer, got {self.shots!r}")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)


def simulate_measurements(state, shots: int | None = None, seed=None) -> MeasurementRecord:
    """
    Outcome distribution of each rotation, exact or sampled.

    With ``shots`` each row is a multinomial draw from a generator seeded
    with ``seed``; a seed is then mandatory so that runs are reproducible.
    """
    rho = as_density_matrix(state)
    probs = np.empty((9, 3))
    for i, rot in enumerate(_build_set()):
        u = rot.unitary
        probs[i] = np.clip(np.diagonal(u @ rho @ u.conj().T).real, 0.0, None)
    probs /= probs.sum(axis=1, keepdims=True)
    if shots is None:
        return MeasurementRecord(probs)
    if isinstance(shots, bool) or not isinstance(shots, (int, np.integer)) or shots <= 0:
        raise InvalidInputError(f"shots must be a positive integer, got {shots!r}")
    if seed is None:
        raise InvalidInputError("sampled measurements need an explicit seed")
    rng = np.random.default_rng(seed)
    counts = np.array([rng.multinomial(int(shots), row) for row in probs])
    return MeasurementRecord(counts / shots, int(shots))


def project_to_density_matrix(h) -> np.ndarray:
    """Clip negative eigenvalues of a Hermitian matrix and renormalise the trace."""
    h = 0.5 * (np.asarray(h, dtype=complex) + np.asarray(h, dtype=complex).conj().T)
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        return np.eye(3, dtype=complex) / 3.0
    rho = (v * (w / w.sum())) @ v.conj().T
    return 0.5 * (rho + rho.conj().T)


def reconstruct(record: MeasurementRecord) -> np.ndarray:
    """Least-squares inversion of the 27 probabilities, projected onto valid density matrices."""
    a = design_matrix()
    coeffs, *_ = np.linalg.lstsq(a, record.probabilities.reshape(27), rcond=None)
    raw = sum(c * m for c, m in zip(coeffs, _hermitian_basis()))
    return project_to_density_matrix(raw)


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2."""
    rho, sigma = as_density_matrix(rho), as_density_matrix(sigma)
    w, v = np.linalg.eigh(rho)
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    inner = np.linalg.eigvalsh(root @ sigma @ root)
    return float(min(1.0, np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2))


def trace_distance(rho, sigma) -> float:
    rho, sigma = as_density_matrix(rho), as_density_matrix(sigma)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(rho - sigma))))
