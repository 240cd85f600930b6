import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from qutrit_battery.errors import InvalidInputError
from qutrit_battery.tomography import (
    MeasurementRecord,
    design_matrix,
    fidelity,
    project_to_density_matrix,
    reconstruct,
    simulate_measurements,
    subspace_rotation,
    tomography_set,
    trace_distance,
)

SQ = 1 / math.sqrt(2)


def random_state(rng, rank=3):
    g = rng.normal(size=(3, rank)) + 1j * rng.normal(size=(3, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def test_rotation_contract():
    rots = tomography_set()
    assert [r.label for r in rots] == list(range(1, 10))
    for r in rots:
        u = r.unitary
        assert np.max(np.abs(u.conj().T @ u - np.eye(3))) <= 1e-12
        image = u @ r.target_basis
        assert abs(abs(image[0]) - 1) <= 1e-10 and np.max(np.abs(image[1:])) <= 1e-10


def test_table_examples():
    rots = tomography_set()
    np.testing.assert_array_equal(rots[0].unitary, np.eye(3))
    np.testing.assert_array_equal(rots[0].target_basis, [1, 0, 0])
    image = rots[1].unitary @ np.array([0, 1, 0])
    assert abs(abs(image[0]) - 1) < 1e-15
    # (pi/2)_y on {0,1} is [[c, -s], [s, c]] with c = s = 1/sqrt(2); it takes (1, -1)/sqrt(2) to (1, 0)
    by_hand = np.array([[SQ, -SQ, 0], [SQ, SQ, 0], [0, 0, 1]])
    np.testing.assert_allclose(subspace_rotation("y", math.pi / 2, 0, 1), by_hand, atol=1e-15)
    np.testing.assert_allclose(by_hand @ np.array([SQ, -SQ, 0]), [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(rots[3].target_basis, [SQ, -SQ, 0])


def test_two_pulse_rows_compose_as_matrix_products():
    rots = tomography_set()
    assert {r.order for r in rots} == {"as written"}
    x01, x12 = subspace_rotation("x", math.pi, 0, 1), subspace_rotation("x", math.pi, 1, 2)
    np.testing.assert_allclose(rots[2].unitary, x01 @ x12, atol=1e-15)


def test_subspace_rotation_rejects_bad_axis():
    with pytest.raises(InvalidInputError):
        subspace_rotation("z", 1.0, 0, 1)


def test_design_matrix_is_informationally_complete():
    a = design_matrix()
    assert a.shape == (27, 9)
    assert np.linalg.matrix_rank(a) == 9
    assert np.linalg.cond(a) < 1e3


def test_measurement_examples():
    ground = simulate_measurements(np.diag([1.0, 0, 0]))
    np.testing.assert_allclose(ground.probabilities[0], [1, 0, 0], atol=1e-15)
    mixed = simulate_measurements(np.eye(3) / 3)
    np.testing.assert_allclose(mixed.probabilities, np.full((9, 3), 1 / 3), atol=1e-15)
    psi4 = tomography_set()[3].target_basis
    np.testing.assert_allclose(simulate_measurements(psi4).probabilities[3], [1, 0, 0], atol=1e-15)


def test_sampling_needs_seed_and_positive_shots():
    with pytest.raises(InvalidInputError):
        simulate_measurements(np.eye(3) / 3, shots=0, seed=1)
    with pytest.raises(InvalidInputError):
        simulate_measurements(np.eye(3) / 3, shots=100)
    a = simulate_measurements(np.eye(3) / 3, shots=1000, seed=5)
    b = simulate_measurements(np.eye(3) / 3, shots=1000, seed=5)
    np.testing.assert_array_equal(a.probabilities, b.probabilities)
    assert a.shots == 1000
    np.testing.assert_array_equal(a.probabilities.sum(axis=1), np.ones(9))


def test_record_validation():
    with pytest.raises(InvalidInputError):
        MeasurementRecord(np.full((8, 3), 1 / 3))
    with pytest.raises(InvalidInputError):
        MeasurementRecord(np.full((9, 3), 0.3))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_exact_round_trip(seed, rank):
    rho = random_state(np.random.default_rng(seed), rank)
    assert trace_distance(reconstruct(simulate_measurements(rho)), rho) <= 1e-10


def test_maximally_mixed_round_trip():
    np.testing.assert_allclose(reconstruct(simulate_measurements(np.eye(3) / 3)), np.eye(3) / 3, atol=1e-12)


def test_sampled_reconstruction_fidelity():
    worst = 1.0
    for seed in range(100):
        psi = unitary_group.rvs(3, random_state=seed)[:, 0]
        rho = np.outer(psi, psi.conj())
        est = reconstruct(simulate_measurements(rho, shots=100_000, seed=seed))
        worst = min(worst, fidelity(est, rho))
    assert worst >= 0.99


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(10, 200))
def test_noisy_records_give_valid_states(seed, shots):
    rho = random_state(np.random.default_rng(seed), 1)
    est = reconstruct(simulate_measurements(rho, shots=shots, seed=seed))
    assert np.max(np.abs(est - est.conj().T)) <= 1e-12
    assert abs(np.trace(est).real - 1) <= 1e-12
    assert np.min(np.linalg.eigvalsh(est)) >= -1e-12


def test_projection_is_idempotent():
    h = np.diag([0.7, 0.5, -0.2]).astype(complex)
    once = project_to_density_matrix(h)
    np.testing.assert_allclose(project_to_density_matrix(once), once, atol=1e-15)
    np.testing.assert_allclose(np.diag(once).real, [0.7 / 1.2, 0.5 / 1.2, 0.0], atol=1e-15)


def test_fidelity_and_distance_basics():
    rho = random_state(np.random.default_rng(1))
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-12)
    assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-14)
    assert fidelity(np.diag([1.0, 0, 0]), np.diag([0, 1.0, 0])) == pytest.approx(0.0, abs=1e-14)
