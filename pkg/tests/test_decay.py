import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qutrit_battery.core import BatteryLevels, to_micro_ev
from qutrit_battery.decay import classify, fit_double_exp, fit_single_exp
from qutrit_battery.dynamics import DecayRates
from qutrit_battery.ergotropy import ErgotropyTrace, self_discharge_ergotropy
from qutrit_battery.errors import InvalidInputError

LEVELS = BatteryLevels.transmon_device()
E_MAX = to_micro_ev(LEVELS.e_max)


def trace_of(t, y, norm=None):
    return ErgotropyTrace(t, y, norm if norm is not None else max(float(np.max(y)), 1e-300))


def device_trace(n=601):
    t = np.linspace(0, 60e-6, n)
    return trace_of(t, to_micro_ev(self_discharge_ergotropy(t, DecayRates.transmon_device(), LEVELS)), E_MAX)


def objective(fit, t, y, params):
    """rss as a function of (a_k, tau_k) for finite differences."""
    model = sum(a * np.exp(-t / tau) for a, tau in zip(params[0::2], params[1::2]))
    return float(np.sum((model - y) ** 2))


def test_single_exponential_recovered():
    t = np.linspace(0, 10e-6, 50)
    fit = fit_single_exp(trace_of(t, 5 * np.exp(-t / 2e-6)))
    assert fit.amplitudes[0] == pytest.approx(5, rel=1e-8)
    assert fit.time_constants[0] == pytest.approx(2e-6, rel=1e-8)
    assert fit.n_params == 2 and not fit.degenerate


def test_constant_trace_is_degenerate():
    t = np.linspace(0, 10e-6, 30)
    fit = fit_single_exp(trace_of(t, np.full(30, 3.0)))
    assert fit.degenerate
    assert fit.time_constants[0] >= 1e3 * (t[-1] - t[0])


def test_double_exponential_recovered():
    t = np.linspace(0, 50e-6, 200)
    fit = fit_double_exp(trace_of(t, 3 * np.exp(-t / 1e-6) + 2 * np.exp(-t / 10e-6)))
    np.testing.assert_allclose(fit.amplitudes, (3, 2), rtol=1e-6)
    np.testing.assert_allclose(fit.time_constants, (1e-6, 10e-6), rtol=1e-6)
    assert fit.time_constants[0] < fit.time_constants[1]


def test_equal_time_constants():
    t = np.linspace(0, 20e-6, 100)
    trace = trace_of(t, 4 * np.exp(-t / 3e-6))
    single, double = fit_single_exp(trace), fit_double_exp(trace)
    assert double.rss <= single.rss + 1e-9
    tau1, tau2 = double.time_constants
    assert double.ill_conditioned or abs(tau1 - tau2) <= 1e-3 * tau2 or min(abs(a) for a in double.amplitudes) < 1e-6


def test_device_trace_prefers_two_time_constants():
    trace = device_trace()
    single, double = fit_single_exp(trace), fit_double_exp(trace)
    assert double.rss < single.rss
    verdict = classify(trace)
    assert verdict.model == "Supercapacitor"
    assert verdict.evidence >= 10


def test_single_exponential_data_is_ohmic():
    t = np.linspace(0, 60e-6, 601)
    verdict = classify(trace_of(t, 50 * np.exp(-t / 8e-6)))
    assert verdict.model == "Ohmic"


def test_noisy_device_trace_verdict_is_stable():
    clean = device_trace()
    verdicts = set()
    for seed in range(100):
        rng = np.random.default_rng(seed)
        noisy = np.clip(clean.ergotropy * (1 + 0.01 * rng.standard_normal(clean.times.size)), 0, E_MAX)
        verdicts.add(classify(trace_of(clean.times, noisy, E_MAX)).model)
    assert verdicts == {"Supercapacitor"}


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 20), st.floats(0.3e-6, 3e-6), st.floats(0.5, 20), st.floats(5e-6, 30e-6), st.integers(0, 1000))
def test_nested_models(a1, tau1, a2, tau2, seed):
    t = np.linspace(0, 60e-6, 120)
    rng = np.random.default_rng(seed)
    y = np.abs((a1 * np.exp(-t / tau1) + a2 * np.exp(-t / tau2)) * (1 + 0.02 * rng.standard_normal(t.size)))
    trace = trace_of(t, y)
    assert fit_double_exp(trace).rss <= fit_single_exp(trace).rss + 1e-9


@pytest.mark.parametrize("kind", ["single", "double"])
def test_first_order_optimality(kind):
    t = np.linspace(0, 40e-6, 150)
    rng = np.random.default_rng(11)
    y = (3 * np.exp(-t / 1.5e-6) + 2 * np.exp(-t / 12e-6)) * (1 + 0.01 * rng.standard_normal(t.size))
    fit = (fit_single_exp if kind == "single" else fit_double_exp)(trace_of(t, y))
    params = np.array([v for pair in zip(fit.amplitudes, fit.time_constants) for v in pair])
    grad = np.empty_like(params)
    for k in range(params.size):
        h = 1e-6 * abs(params[k])
        up, down = params.copy(), params.copy()
        up[k] += h
        down[k] -= h
        # derivative with respect to the relative change of each parameter
        grad[k] = (objective(fit, t, y, up) - objective(fit, t, y, down)) / (2e-6)
    assert np.linalg.norm(grad) < 1e-8 * max(fit.rss, np.sum(y**2) * 1e-6) + 1e-8 * np.sum(y**2)


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_scale_equivariance(c):
    trace = device_trace(301)
    scaled = trace_of(trace.times, c * trace.ergotropy, c * E_MAX)
    for fitter in (fit_single_exp, fit_double_exp):
        base, other = fitter(trace), fitter(scaled)
        np.testing.assert_allclose(other.amplitudes, c * np.array(base.amplitudes), rtol=1e-9)
        np.testing.assert_allclose(other.time_constants, base.time_constants, rtol=1e-9)


def test_input_validation():
    t = np.linspace(0, 1e-6, 7)
    with pytest.raises(InvalidInputError):
        fit_single_exp(trace_of(t, np.exp(-t / 1e-7)))
    t = np.linspace(0, 1e-6, 10)
    with pytest.raises(InvalidInputError):
        fit_double_exp(trace_of(t, np.exp(-t / 1e-7)))
    with pytest.raises(InvalidInputError):
        fit_single_exp(trace_of(np.linspace(0, 1, 10), np.zeros(10), 1.0))


def test_fit_is_callable():
    t = np.linspace(0, 10e-6, 40)
    fit = fit_single_exp(trace_of(t, 5 * np.exp(-t / 2e-6)))
    np.testing.assert_allclose(fit(t), 5 * np.exp(-t / 2e-6), rtol=1e-7)
    assert math.isclose(fit(0.0), 5.0, rel_tol=1e-8)
