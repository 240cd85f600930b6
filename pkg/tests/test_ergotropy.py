import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from qutrit_battery.core import BatteryLevels, build_bare_hamiltonian, projector, to_micro_ev
from qutrit_battery.dynamics import DecayRates, analytic_populations
from qutrit_battery.ergotropy import (
    ChargingMetrics,
    ErgotropyTrace,
    charging_metrics,
    crossing_times,
    diagonal_ergotropy,
    ergotropy,
    ergotropy_double_sum,
    ergotropy_trace,
    passive_state,
    power_improvement,
    self_discharge_ergotropy,
)
from qutrit_battery.errors import InvalidInputError, NoCrossingError, NotChargedError, RangeError

LEVELS = BatteryLevels.transmon_device()
H0 = build_bare_hamiltonian(LEVELS)
EPS = LEVELS.energies
DEVICE = DecayRates.transmon_device()


def random_state(rng, rank=3):
    g = rng.normal(size=(3, rank)) + 1j * rng.normal(size=(3, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def brute_force_ergotropy(rho):
    """Mean energy minus the smallest energy over all 6 pairings of eigenvalues with levels."""
    r = np.linalg.eigvalsh(rho)
    mean = np.trace(rho @ H0).real
    return mean - min(float(np.dot(perm, EPS)) for perm in itertools.permutations(r))


def test_fully_charged_state():
    assert to_micro_ev(ergotropy(projector(2), H0)) == pytest.approx(50.78, abs=0.01)
    np.testing.assert_allclose(passive_state(projector(2), H0), projector(0), atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=3).filter(lambda v: sum(v) > 1e-3))
def test_passive_diagonal_states_have_no_ergotropy(v):
    p = np.sort(np.array(v) / sum(v))[::-1]
    assert ergotropy(np.diag(p), H0) == 0.0


def test_maximally_mixed_is_passive():
    mixed = np.eye(3) / 3
    np.testing.assert_allclose(passive_state(mixed, H0), mixed, atol=1e-15)
    assert ergotropy(mixed, H0) == 0.0


def test_random_states_against_permutation_oracle():
    rng = np.random.default_rng(2024)
    scale = LEVELS.e_max
    for k in range(1000):
        rho = random_state(rng, rank=1 + k % 3)
        e = ergotropy(rho, H0)
        assert abs(e - brute_force_ergotropy(rho)) <= 1e-10 * scale
        assert abs(ergotropy_double_sum(rho, H0) - e) <= 1e-10 * scale
        passive = passive_state(rho, H0)
        assert abs(np.trace(passive @ H0).real - (np.trace(rho @ H0).real - e)) <= 1e-10 * scale
        assert ergotropy(passive, H0) <= 1e-10 * scale
        np.testing.assert_allclose(np.sort(np.diag(passive).real), np.linalg.eigvalsh(rho), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ergotropy_bounds_and_unitary_orbit(seed):
    rng = np.random.default_rng(seed)
    rho = random_state(rng)
    e = ergotropy(rho, H0)
    assert 0.0 <= e <= np.trace(rho @ H0).real - EPS[0] + 1e-6
    # rotating rho onto its passive arrangement removes all ergotropy
    r, v = np.linalg.eigh(rho)
    u = v[:, ::-1].conj().T  # largest eigenvalue to |0>
    assert ergotropy(u @ rho @ u.conj().T, H0) <= 1e-10 * LEVELS.e_max
    # any unitary keeps the spectrum, hence the passive energy
    w = unitary_group.rvs(3, random_state=rng)
    moved = w @ rho @ w.conj().T
    passive_energy = np.trace(rho @ H0).real - e
    assert np.trace(moved @ H0).real - ergotropy(moved, H0) == pytest.approx(passive_energy, abs=1e-10 * LEVELS.e_max)


def test_ties_are_continuous():
    for tied in ([0.4, 0.4, 0.2], [0.2, 0.4, 0.4], [0.4, 0.2, 0.4], [1 / 3] * 3):
        d = np.diag(tied)
        assert ergotropy(d, H0) == pytest.approx(brute_force_ergotropy(d), abs=1e-12 * LEVELS.e_max)
        assert diagonal_ergotropy(*tied, LEVELS) == pytest.approx(ergotropy(d, H0), abs=1e-12 * LEVELS.e_max)


def test_requires_diagonal_ascending_h0():
    with pytest.raises(InvalidInputError):
        ergotropy(projector(2), np.diag([2.0, 1.0, 0.0]))
    with pytest.raises(InvalidInputError):
        ergotropy(projector(2), np.ones((3, 3)))


def test_six_orderings_match_general_ergotropy():
    rng = np.random.default_rng(7)
    for _ in range(500):
        p = rng.dirichlet(np.ones(3))
        assert diagonal_ergotropy(*p, LEVELS) == pytest.approx(ergotropy(np.diag(p), H0), abs=1e-10 * LEVELS.e_max)


def test_self_discharge_matches_general_ergotropy():
    t = np.linspace(0, 60e-6, 6001)
    closed = self_discharge_ergotropy(t, DEVICE, LEVELS)
    pops = np.array(analytic_populations(t, DEVICE)).T
    general = np.array([ergotropy(np.diag(p), H0) for p in pops])
    assert np.max(np.abs(closed - general)) <= 1e-10 * LEVELS.e_max
    assert closed[0] == pytest.approx(LEVELS.e_max, rel=1e-15)
    assert self_discharge_ergotropy(math.inf, DEVICE, LEVELS) == 0.0
    with pytest.raises(RangeError):
        self_discharge_ergotropy(-1.0, DEVICE, LEVELS)


def test_crossing_times_against_dense_sampling():
    tc = crossing_times(DEVICE)
    assert tc[0] < tc[1] < tc[2]
    t = np.linspace(1e-9, 60e-6, 600001)
    p0, p1, p2 = analytic_populations(t, DEVICE)
    step = t[1] - t[0]
    for a, b in ((p2, p1), (p2, p0), (p1, p0)):
        first = t[np.flatnonzero(np.diff(np.sign(a - b)))[0]]
        assert min(abs(first - x) for x in tc) <= step
    # first crossing: e^{-gamma21 t} = rho11(t)
    q0, q1, q2 = analytic_populations(tc[0], DEVICE)
    assert q2 == pytest.approx(math.exp(-DEVICE.gamma_21 * tc[0]), rel=1e-15)
    assert q2 == pytest.approx(q1, rel=1e-10)


@pytest.mark.parametrize("c", [0.1, 3.0, 1e3])
def test_crossing_times_scale_inversely_with_rates(c):
    base = np.array(crossing_times(DEVICE))
    scaled = np.array(crossing_times(DecayRates(DEVICE.gamma_10 * c, DEVICE.gamma_21 * c)))
    np.testing.assert_allclose(scaled, base / c, rtol=1e-10)


def test_crossing_errors():
    # when |1> empties much faster than it fills it never outgrows |2>
    with pytest.raises(NoCrossingError) as info:
        crossing_times(DecayRates(3e5, 1e5))
    assert info.value.pair == (2, 1)
    with pytest.raises(InvalidInputError):
        crossing_times(DecayRates(5e4, 5e4))


def test_ergotropy_trace_validation():
    with pytest.raises(InvalidInputError):
        ErgotropyTrace(np.array([0.0, 1.0]), np.array([0.0, 60.0]), 50.0)
    with pytest.raises(InvalidInputError):
        ErgotropyTrace(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 50.0)
    trace = ergotropy_trace([0.0, 1.0], [projector(0), projector(2)], LEVELS)
    np.testing.assert_allclose(trace.fraction, [0.0, 1.0], atol=1e-12)


def test_charging_metrics_interpolates():
    trace = ErgotropyTrace(np.array([0.0, 1e-7, 2e-7]), np.array([0.0, 25.0, 50.0]), 50.0)
    m = charging_metrics(trace, 0.75)
    assert m.tau_c == pytest.approx(1.5e-7, rel=1e-12)
    assert m.mean_power == pytest.approx(0.75 * 50.0 / m.tau_c, rel=1e-12)


def test_charging_metrics_constant_full_trace():
    times = np.array([5e-9, 1e-8, 2e-8])
    m = charging_metrics(ErgotropyTrace(times, np.full(3, 50.0), 50.0), 0.99)
    assert m.tau_c == times[0]


def test_charging_metrics_errors():
    trace = ErgotropyTrace(np.array([0.0, 1.0]), np.array([0.0, 40.0]), 50.0)
    with pytest.raises(NotChargedError):
        charging_metrics(trace, 0.99)
    with pytest.raises(InvalidInputError):
        charging_metrics(trace, 0.0)
    with pytest.raises(InvalidInputError):
        charging_metrics(trace, 1.5)


def test_power_improvement():
    assert power_improvement(ChargingMetrics(200e-9, 1.0, 0.99), ChargingMetrics(100e-9, 2.0, 0.99)) == 100.0
