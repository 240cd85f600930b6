"""
Exponential fits to an ergotropy decay and the Ohmic / supercapacitor verdict.

An Ohmic cell loses charge with a single time constant; a supercapacitor-like
cell needs two. Both models are fitted by damped Gauss-Newton
(Levenberg-Marquardt) iterations in the parameters (a, log tau), and the
Akaike information criterion decides between them.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .ergotropy import ErgotropyTrace
from .errors import FitError, InvalidInputError

log = logging.getLogger(__name__)

MAX_ITER = 200
STEP_TOL = 1e-10
AIC_THRESHOLD = 10.0
TAU_MAX_FACTOR = 1e4  # time constants are capped at this multiple of the sampled span
RSS_FLOOR = 1e-12  # relative resolution of the data; rss below (RSS_FLOOR * max|y|)**2 * n is noise-free


@dataclass(frozen=True)
class ExpFit:
    """
    Fitted sum of exponentials a_k exp(-t / tau_k), amplitudes in μeV, time constants in s.

    ``degenerate`` marks a time constant pinned at its upper bound (a trace
    with no visible decay). ``ill_conditioned`` marks a double fit whose
    iterations stalled without meeting the step tolerance, typically because
    the two time constants coincide.
    """

    amplitudes: tuple
    time_constants: tuple
    rss: float
    n_params: int
    iterations: int = 0
    degenerate: bool = False
    ill_conditioned: bool = False

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return sum(a * np.exp(-t / tau) for a, tau in zip(self.amplitudes, self.time_constants))


@dataclass(frozen=True)
class DischargeVerdict:
    model: str  # "Ohmic" or "Supercapacitor"
    evidence: float  # AIC(single) - AIC(double)
    single: ExpFit = field(repr=False)
    double: ExpFit = field(repr=False)


def _model(p, t):
    """Sum of exponentials and its Jacobian for p = (a1, log tau1, a2, log tau2, ...)."""
    value = np.zeros_like(t)
    jac = np.empty((t.size, p.size))
    for k in range(0, p.size, 2):
        a, rate = p[k], math.exp(-p[k + 1])
        e = np.exp(-t * rate)
        value += a * e
        jac[:, k] = e
        jac[:, k + 1] = a * e * t * rate
    return value, jac


def _levenberg_marquardt(p, t, y, log_tau_max):
    """
    Minimise ||model(p) - y||^2. Returns (p, rss, iterations, converged).

    Steps are accepted only when they lower the residual, so the result is
    never worse than the starting point.
    """
    # a time constant shorter than the sample spacing cannot be resolved
    log_tau_min = math.log(float(np.min(np.diff(t))))
    p = p.astype(float).copy()
    p[1::2] = np.clip(p[1::2], log_tau_min, log_tau_max)
    value, jac = _model(p, t)
    res = value - y
    rss = float(res @ res)
    lam = 1e-3
    for it in range(1, MAX_ITER + 1):
        jtj = jac.T @ jac
        grad = jac.T @ res
        damping = lam * np.maximum(np.diag(jtj), 1e-12 * max(1.0, float(np.max(np.diag(jtj)))))
        # time constants pinned at either bound and pushed outward stay fixed
        free = np.ones(p.size, dtype=bool)
        at_cap = (p[1::2] >= log_tau_max) & (grad[1::2] < 0)
        at_floor = (p[1::2] <= log_tau_min) & (grad[1::2] > 0)
        free[1::2] = ~(at_cap | at_floor)
        step = np.zeros_like(p)
        try:
            sub = (jtj + np.diag(damping))[np.ix_(free, free)]
            step[free] = np.linalg.solve(sub, -grad[free])
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        trial = p + step
        trial[1::2] = np.clip(trial[1::2], log_tau_min, log_tau_max)
        t_value, t_jac = _model(trial, t)
        t_res = t_value - y
        t_rss = float(t_res @ t_res)
        if np.isfinite(t_rss) and t_rss <= rss:
            moved = np.max(np.abs(trial - p) / np.maximum(np.abs(p), 1.0))
            p, res, jac, rss = trial, t_res, t_jac, t_rss
            lam = max(lam / 3.0, 1e-12)
            if moved < STEP_TOL:
                return p, rss, it, True
        else:
            lam *= 4.0
            if lam > 1e16:
                # no descent left at working precision: a stationary point
                return p, rss, it, True
    return p, rss, MAX_ITER, False


def _prepare(trace: ErgotropyTrace, min_samples: int):
    t = np.asarray(trace.times, dtype=float)
    y = np.asarray(trace.ergotropy, dtype=float)
    if t.size < min_samples:
        raise InvalidInputError(f"need at least {min_samples} samples, got {t.size}")
    if np.any(y < 0) or not np.any(y > 0):
        raise InvalidInputError("decay trace must be non-negative with some positive samples")
    t_scale = float(t[-1] - t[0]) or 1.0
    y_scale = float(np.max(np.abs(y)))
    return (t - t[0]) / t_scale, y / y_scale, t[0], t_scale, y_scale


def _log_linear_start(t, y, log_tau_max):
    pos = y > 0
    slope, intercept = np.polyfit(t[pos], np.log(y[pos]), 1)
    log_tau = math.log(-1.0 / slope) if slope < 0 else log_tau_max
    return np.array([math.exp(intercept), min(log_tau, log_tau_max)])


def _to_fit(p, rss, n_params, iterations, t0, t_scale, y_scale, log_tau_max, ill=False):
    amps, taus = [], []
    for k in range(0, p.size, 2):
        taus.append(math.exp(p[k + 1]) * t_scale)
        # amplitudes refer to t = 0 even when the trace starts later
        amps.append(p[k] * y_scale * math.exp(t0 / taus[-1]))
    degenerate = bool(np.any(p[1::2] >= log_tau_max - 1e-12))
    order = np.argsort(taus)
    return ExpFit(
        tuple(float(amps[i]) for i in order),
        tuple(float(taus[i]) for i in order),
        float(rss * y_scale**2),
        n_params,
        iterations,
        degenerate,
        ill,
    )


def fit_single_exp(trace: ErgotropyTrace) -> ExpFit:
    """
    Least-squares fit of a exp(-t / tau), started from a log-linear regression.

    Raises
    ------
    FitError
        If the iteration does not converge within 200 steps.
    """
    t, y, t0, t_scale, y_scale = _prepare(trace, 8)
    log_tau_max = math.log(TAU_MAX_FACTOR)
    start = _log_linear_start(t, y, log_tau_max)
    p, rss, its, ok = _levenberg_marquardt(start, t, y, log_tau_max)
    if not ok:
        raise FitError("single-exponential fit did not converge", state=p)
    return _to_fit(p, rss, 2, its, t0, t_scale, y_scale, log_tau_max)


_START_FACTORS = ((1 / 3, 3.0), (1 / 10, 1.0), (1.0, 10.0), (1 / 3, 1.0), (1.0, 3.0), (1 / 30, 3.0))


def fit_double_exp(trace: ErgotropyTrace) -> ExpFit:
    """
    Least-squares fit of a1 exp(-t / tau1) + a2 exp(-t / tau2) with tau1 < tau2.

    Starts are a fixed grid of (tau1, tau2) around the single-exponential time
    constant, plus the single fit itself with a vanishing second term, so the
    best result never has a larger rss than the single fit.

    Raises
    ------
    FitError
        If no start yields a finite fit.
    """
    t, y, t0, t_scale, y_scale = _prepare(trace, 12)
    log_tau_max = math.log(TAU_MAX_FACTOR)
    single = _log_linear_start(t, y, log_tau_max)
    single, *_ = _levenberg_marquardt(single, t, y, log_tau_max)
    a_s, tau_s = single[0], math.exp(single[1])

    starts = [np.array([a_s, single[1], 0.0, min(math.log(3 * tau_s), log_tau_max)])]
    for f1, f2 in _START_FACTORS:
        starts.append(np.array([a_s / 2, math.log(f1 * tau_s), a_s / 2, min(math.log(f2 * tau_s), log_tau_max)]))

    best = None
    for start in starts:
        p, rss, its, ok = _levenberg_marquardt(start, t, y, log_tau_max)
        if not np.isfinite(rss):
            continue
        log.debug("double start %s -> rss %.3e (converged=%s)", start, rss, ok)
        if best is None or rss < best[1] or (rss == best[1] and ok and not best[3]):
            best = (p, rss, its, ok)
    if best is None:
        raise FitError("every double-exponential start failed", state=starts[-1])
    p, rss, its, ok = best
    return _to_fit(p, rss, 4, its, t0, t_scale, y_scale, log_tau_max, ill=not ok)


def aic(fit: ExpFit, n: int, y_max: float) -> float:
    """Akaike information criterion for Gaussian residuals, n ln(rss/n) + 2k."""
    floor = (RSS_FLOOR * y_max) ** 2 * n
    return n * math.log(max(fit.rss, floor) / n) + 2 * fit.n_params


def classify(trace: ErgotropyTrace, threshold: float = AIC_THRESHOLD) -> DischargeVerdict:
    """Supercapacitor if the double-exponential AIC beats the single one by at least ``threshold``."""
    single = fit_single_exp(trace)
    double = fit_double_exp(trace)
    n = trace.times.size
    y_max = float(np.max(np.abs(trace.ergotropy)))
    evidence = aic(single, n, y_max) - aic(double, n, y_max)
    model = "Supercapacitor" if evidence >= threshold else "Ohmic"
    return DischargeVerdict(model, float(evidence), single, double)
