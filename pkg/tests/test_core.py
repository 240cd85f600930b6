import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qutrit_battery.core import (
    TWO_PI,
    BatteryLevels,
    as_density_matrix,
    basis_state,
    build_bare_hamiltonian,
    build_drive_hamiltonian,
    dark_bright_states,
    eig_hermitian,
    from_micro_ev,
    is_hermitian,
    to_micro_ev,
)
from qutrit_battery.errors import DegenerateEigensystemError, InvalidInputError


def cubic_roots_hermitian(h):
    """Eigenvalues from the characteristic polynomial, trigonometric form (all roots real)."""
    h = np.asarray(h, dtype=complex)
    c2 = -np.trace(h).real
    c1 = (
        (h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0])
        + (h[0, 0] * h[2, 2] - h[0, 2] * h[2, 0])
        + (h[1, 1] * h[2, 2] - h[1, 2] * h[2, 1])
    ).real
    c0 = -np.linalg.det(h).real
    # depressed cubic x^3 + p x + q after lambda = x - c2/3
    p = c1 - c2**2 / 3
    q = 2 * c2**3 / 27 - c2 * c1 / 3 + c0
    if abs(p) < 1e-300:
        return np.sort(np.full(3, -c2 / 3 + np.cbrt(-q)))
    r = 2 * math.sqrt(-p / 3)
    arg = max(-1.0, min(1.0, 3 * q / (p * r)))
    phi = math.acos(arg) / 3
    roots = [r * math.cos(phi - 2 * math.pi * k / 3) - c2 / 3 for k in range(3)]
    return np.sort(roots)


def random_hermitian(rng, scale=1.0):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    return scale * (a + a.conj().T) / 2


def test_device_levels_and_emax():
    levels = BatteryLevels.transmon_device()
    h0 = build_bare_hamiltonian(levels)
    expected = np.diag([0.0, TWO_PI * 6.266e9, TWO_PI * 12.277e9])
    np.testing.assert_allclose(h0.real, expected, rtol=1e-15)
    assert to_micro_ev(levels.e_max) == pytest.approx(50.78, abs=0.01)
    assert abs(to_micro_ev(levels.e_max) - 51) / 51 < 0.01


def test_unit_spectrum():
    h0 = build_bare_hamiltonian(BatteryLevels(1.0, 1.0))
    np.testing.assert_array_equal(np.diag(h0).real, [0.0, 1.0, 2.0])


def test_micro_ev_roundtrip():
    assert from_micro_ev(to_micro_ev(1.234e10)) == pytest.approx(1.234e10, rel=1e-15)
    assert isinstance(to_micro_ev(1.0), float)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan, math.inf])
def test_levels_reject_nonpositive(bad):
    with pytest.raises(InvalidInputError):
        BatteryLevels(bad, 1.0)


def test_drive_examples():
    assert np.all(build_drive_hamiltonian(0, 0) == 0)
    w = eig_hermitian(build_drive_hamiltonian(2.0, 0.0)).eigenvalues
    np.testing.assert_allclose(w, [-2.0, 0.0, 2.0], atol=1e-14)
    w = eig_hermitian(build_drive_hamiltonian(3.0, 4.0)).eigenvalues
    np.testing.assert_allclose(w, [-5.0, 0.0, 5.0], atol=1e-13)


def test_identity_eigenvalues():
    w = eig_hermitian(np.eye(3)).eigenvalues
    np.testing.assert_array_equal(w, [1.0, 1.0, 1.0])


def test_eigenvalues_match_cubic_oracle():
    rng = np.random.default_rng(11)
    for _ in range(100):
        h = random_hermitian(rng)
        w = eig_hermitian(h).eigenvalues
        np.testing.assert_allclose(w, cubic_roots_hermitian(h), atol=1e-8)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-6, 1e10))
def test_eigensystem_reconstructs(seed, scale):
    h = random_hermitian(np.random.default_rng(seed), scale)
    w, v = eig_hermitian(h)
    hmax = np.max(np.abs(h))
    assert np.max(np.abs(h - v @ np.diag(w) @ v.conj().T)) <= 1e-10 * hmax
    assert np.max(np.abs(v.conj().T @ v - np.eye(3))) <= 1e-10
    assert np.all(np.diff(w) >= 0)
    for k in range(3):
        big = v[np.argmax(np.abs(v[:, k])), k]
        assert abs(big.imag) <= 1e-12 and big.real > 0


def test_eig_rejects_non_hermitian():
    with pytest.raises(InvalidInputError):
        eig_hermitian(np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]]))


def test_dark_state_boundaries():
    om = TWO_PI * 10e6
    dark, _, _ = dark_bright_states(0.0, om)
    np.testing.assert_allclose(dark, basis_state(0), atol=1e-15)
    dark, _, _ = dark_bright_states(om, 0.0)
    np.testing.assert_allclose(dark, -basis_state(2), atol=1e-15)
    dark, _, _ = dark_bright_states(1.0, 1.0)
    np.testing.assert_allclose(dark, np.array([1, 0, -1]) / math.sqrt(2), atol=1e-15)
    h = build_drive_hamiltonian(1.0, 1.0)
    assert abs(np.vdot(dark, h @ dark)) < 1e-15


def test_dark_state_zero_drive():
    with pytest.raises(DegenerateEigensystemError):
        dark_bright_states(0.0, 0.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e9, 1e9), st.floats(-1e9, 1e9))
def test_drive_spectrum_and_eigenstates(o1, o2):
    gap = math.hypot(o1, o2)
    if gap < 1e-3:
        return
    h = build_drive_hamiltonian(o1, o2)
    w = eig_hermitian(h).eigenvalues
    np.testing.assert_allclose(w, [-gap, 0.0, gap], atol=1e-10 * gap)
    states = dark_bright_states(o1, o2)
    for psi, energy in zip(states, (0.0, gap, -gap)):
        assert np.max(np.abs(h @ psi - energy * psi)) <= 1e-10 * gap
    gram = np.array([[np.vdot(a, b) for b in states] for a in states])
    assert np.max(np.abs(gram - np.eye(3))) <= 1e-10


def test_bare_energies_ascending():
    e = build_bare_hamiltonian(BatteryLevels.transmon_device()).diagonal().real
    assert e[0] == 0 < e[1] < e[2]


def test_density_matrix_validation():
    assert is_hermitian(np.eye(3) / 3)
    with pytest.raises(InvalidInputError):
        as_density_matrix(np.eye(3))  # trace 3
    with pytest.raises(InvalidInputError):
        as_density_matrix(np.diag([1.5, -0.5, 0.0]))
    with pytest.raises(InvalidInputError):
        as_density_matrix(np.array([1.0, 1.0, 0.0]))  # unnormalised vector
    rho = as_density_matrix(basis_state(1))
    assert rho[1, 1] == 1
