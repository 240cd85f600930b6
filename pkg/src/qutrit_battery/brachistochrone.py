"""
Adiabatic-time functional and its variational machinery.

The Lagrangian of a charging path Omega(t) = (Omega1, Omega2) is

    L = (dOmega1**2 + dOmega2**2) / (Omega1**2 + Omega2**2)**2

i.e. ||dH/dt||**2 / gap**4 for the three-level drive. Its Euler-Lagrange
equations, multiplied through by -R**3/2 with R = Omega1**2 + Omega2**2, read

    R ddOmega1 - 2 [2 Omega2 dOmega1 dOmega2 + Omega1 (dOmega1**2 - dOmega2**2)] = 0
    R ddOmega2 - 2 [2 Omega1 dOmega1 dOmega2 - Omega2 (dOmega1**2 - dOmega2**2)] = 0

Constrained families are critical only along their constraint surface, so
criticality checks project the residual onto the constraint tangent.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .errors import InvalidInputError, NoConvergenceError, NotCriticalError, SingularGapError
from .protocols import ChargeMode, Family, ProtocolFamily, PulseSchedule, ShapeSamples, discretize

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-4  # dimensionless constrained residual accepted as "critical"


def lagrangian(omega1, omega2, domega1, domega2):
    r = np.square(omega1) + np.square(omega2)
    if np.any(r == 0):
        raise SingularGapError("gap closes: omega1 = omega2 = 0")
    return (np.square(domega1) + np.square(domega2)) / np.square(r)


@dataclass(frozen=True, eq=False)
class AdiabaticFunctional:
    value: float
    schedule: PulseSchedule


def _second_derivative(f, h):
    dd = np.empty_like(f)
    dd[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h**2
    if f.size >= 4:
        dd[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h**2
        dd[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h**2
    else:
        dd[0], dd[-1] = dd[1], dd[-2]
    return dd


def _velocities(schedule: PulseSchedule):
    h = schedule.dt
    d1 = np.gradient(schedule.omega1, h, edge_order=2)
    d2 = np.gradient(schedule.omega2, h, edge_order=2)
    return d1, d2


def functional_time(schedule: PulseSchedule) -> AdiabaticFunctional:
    """Trapezoidal quadrature of the Lagrangian; velocities by central differences."""
    gap2 = schedule.omega1**2 + schedule.omega2**2
    bad = np.flatnonzero(gap2 == 0)
    if bad.size:
        raise SingularGapError(f"gap closes at sample {bad[0]}", index=int(bad[0]))
    d1, d2 = _velocities(schedule)
    integrand = lagrangian(schedule.omega1, schedule.omega2, d1, d2)
    return AdiabaticFunctional(float(np.trapezoid(integrand, schedule.times)), schedule)


def _residuals(f1, f2, d1, d2, dd1, dd2):
    r = f1**2 + f2**2
    cross = d1**2 - d2**2
    r1 = r * dd1 - 2.0 * (2.0 * f2 * d1 * d2 + f1 * cross)
    r2 = r * dd2 - 2.0 * (2.0 * f1 * d1 * d2 - f2 * cross)
    return r1, r2


def el_residual(schedule: PulseSchedule):
    """Pointwise residuals (r1, r2) of the Euler-Lagrange system, in physical units."""
    h = schedule.dt
    d1, d2 = _velocities(schedule)
    dd1 = _second_derivative(schedule.omega1, h)
    dd2 = _second_derivative(schedule.omega2, h)
    return _residuals(schedule.omega1, schedule.omega2, d1, d2, dd1, dd2)


def constrained_residual(schedule: PulseSchedule) -> np.ndarray:
    """
    Dimensionless residual at interior points, projected on the family's constraint.

    Fields are scaled by omega_max and time by tau, so the result is O(1) for a
    non-critical path and O(h**2) for a discretised critical one.
    """
    fam = schedule.family
    unit = PulseSchedule(schedule.times / fam.tau, schedule.omega1 / fam.omega_max,
                         schedule.omega2 / fam.omega_max,
                         ProtocolFamily(fam.family, 1.0, 1.0, fam.mode, fam.shape))
    r1, r2 = el_residual(unit)
    f1, f2 = unit.omega1, unit.omega2
    if fam.family in (Family.LINEAR_RAMP, Family.CYCLOID_LINEAR):
        res = r1 - r2
    elif fam.family is Family.QAB_QUADRATIC:
        res = f2 * r1 - f1 * r2
    else:
        res = np.maximum(np.abs(r1), np.abs(r2))
    return np.abs(res[1:-1])


def _collocation_system(x, h, left, right):
    m = x.size // 2
    f1 = np.concatenate(([left[0]], x[:m], [right[0]]))
    f2 = np.concatenate(([left[1]], x[m:], [right[1]]))
    d1 = (f1[2:] - f1[:-2]) / (2 * h)
    d2 = (f2[2:] - f2[:-2]) / (2 * h)
    dd1 = (f1[2:] - 2 * f1[1:-1] + f1[:-2]) / h**2
    dd2 = (f2[2:] - 2 * f2[1:-1] + f2[:-2]) / h**2
    u1, u2 = f1[1:-1], f2[1:-1]
    r1, r2 = _residuals(u1, u2, d1, d2, dd1, dd2)

    rr = u1**2 + u2**2
    cross = d1**2 - d2**2
    # partials of (r1, r2) with respect to (f, d, dd) at each node
    p = {
        (0, "f", 0): 2 * u1 * dd1 - 2 * cross,
        (0, "f", 1): 2 * u2 * dd1 - 4 * d1 * d2,
        (0, "d", 0): -4 * (u2 * d2 + u1 * d1),
        (0, "d", 1): -4 * (u2 * d1 - u1 * d2),
        (0, "dd", 0): rr,
        (0, "dd", 1): np.zeros(m),
        (1, "f", 0): 2 * u1 * dd2 - 4 * d1 * d2,
        (1, "f", 1): 2 * u2 * dd2 + 2 * cross,
        (1, "d", 0): -4 * (u1 * d2 - u2 * d1),
        (1, "d", 1): -4 * (u1 * d1 + u2 * d2),
        (1, "dd", 0): np.zeros(m),
        (1, "dd", 1): rr,
    }
    idx = np.arange(m)
    rows, cols, vals = [], [], []
    for eq in (0, 1):
        for var in (0, 1):
            diag = p[(eq, "f", var)] - 2 * p[(eq, "dd", var)] / h**2
            up = p[(eq, "d", var)] / (2 * h) + p[(eq, "dd", var)] / h**2
            down = -p[(eq, "d", var)] / (2 * h) + p[(eq, "dd", var)] / h**2
            rows += [eq * m + idx, eq * m + idx[:-1], eq * m + idx[1:]]
            cols += [var * m + idx, var * m + idx[1:], var * m + idx[:-1]]
            vals += [diag, up[:-1], down[1:]]
    jac = sparse.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(2 * m, 2 * m)
    )
    return np.concatenate((r1, r2)), jac


def solve_unconstrained(
    mode: ChargeMode,
    tau: float,
    omega_max: float,
    n_grid: int = 4001,
    bc: tuple[float, float] = (1.0, 1.0),
    tol: float = 1e-9,
    max_iter: int = 60,
) -> PulseSchedule:
    """
    Solve the Euler-Lagrange boundary-value problem without a field constraint.

    Collocation with second-order central differences on a uniform grid in
    s = t/tau, solved by damped Newton iteration. ``bc`` gives the magnitudes
    of the two non-zero boundary fields (start field, end field) before the
    solution is rescaled so that its peak amplitude equals ``omega_max``.
    """
    mode = ChargeMode(mode)
    if n_grid < 51:
        raise InvalidInputError("n_grid must be at least 51")
    a, b = bc
    if a <= 0 or b <= 0:
        raise InvalidInputError("boundary field magnitudes must be positive")
    if mode is ChargeMode.STABLE:
        left, right = (0.0, a), (b, 0.0)
    else:
        left, right = (a, 0.0), (0.0, b)

    s = np.linspace(0.0, 1.0, n_grid)
    h = s[1] - s[0]
    # quarter-arc initial guess through the boundary values
    rising, falling = np.sin(0.5 * math.pi * s[1:-1]), np.cos(0.5 * math.pi * s[1:-1])
    if mode is ChargeMode.STABLE:
        x = np.concatenate((b * rising, a * falling))
    else:
        x = np.concatenate((a * falling, b * rising))

    # central differences lose ~eps/h**2 to roundoff; never ask for less
    tol = max(tol, 100 * np.finfo(float).eps / h**2)
    history = []
    res, jac = _collocation_system(x, h, left, right)
    merit = float(res @ res)
    norm = float(np.max(np.abs(res)))
    history.append(norm)
    for it in range(max_iter):
        if norm <= tol:
            break
        step = spsolve(jac, -res)
        alpha = 1.0
        while True:
            trial = x + alpha * step
            res_t, jac_t = _collocation_system(trial, h, left, right)
            merit_t = float(res_t @ res_t)
            # Armijo on 0.5*|F|^2, for which the Newton step is a descent direction
            if merit_t <= (1 - 1e-4 * alpha) * merit or alpha < 1e-6:
                break
            alpha *= 0.5
        x, res, jac, merit = trial, res_t, jac_t, merit_t
        norm = float(np.max(np.abs(res)))
        history.append(norm)
        log.debug("newton iter %d: alpha=%g residual=%.3e", it + 1, alpha, norm)
    if norm > tol:
        raise NoConvergenceError(f"Newton iteration stalled at residual {norm:.3e}", residual_norm=norm)

    m = n_grid - 2
    f1 = np.concatenate(([left[0]], x[:m], [right[0]]))
    f2 = np.concatenate(([left[1]], x[m:], [right[1]]))
    peak = float(np.max(np.hypot(f1, f2)))
    shape = ShapeSamples(s, f1 / peak, f2 / peak, mode, tuple(history))
    return discretize(ProtocolFamily(Family.NUMERICAL_UNCONSTRAINED, omega_max, tau, mode, shape), n_grid)


def _default_profile(s):
    return np.sin(math.pi * s) + 0.5 * np.sin(2 * math.pi * s)


def perturb(schedule: PulseSchedule, eps: float, profile=None) -> PulseSchedule:
    """
    Move a schedule by eps along an admissible direction that keeps its constraint.

    The direction vanishes at both ends. QAB paths are perturbed in their mixing
    angle, linear-constraint paths along (1, -1), unconstrained paths in both
    fields independently.
    """
    fam = schedule.family
    s = schedule.times / fam.tau
    profile = profile or _default_profile
    eta = profile(s)
    o1, o2 = schedule.omega1, schedule.omega2
    if fam.family is Family.QAB_QUADRATIC:
        amp = np.hypot(o1, o2)
        angle = np.arctan2(o1, o2) + eps * eta
        o1, o2 = amp * np.sin(angle), amp * np.cos(angle)
    elif fam.family in (Family.LINEAR_RAMP, Family.CYCLOID_LINEAR):
        o1, o2 = o1 + eps * fam.omega_max * eta, o2 - eps * fam.omega_max * eta
    else:
        eta2 = np.sin(math.pi * s) * (1.0 - 0.7 * s)
        o1, o2 = o1 + eps * fam.omega_max * eta, o2 + eps * fam.omega_max * eta2
    return PulseSchedule(schedule.times, o1, o2, fam)


def gateaux_derivative(schedule: PulseSchedule, eps: float = 1e-5, profile=None) -> float:
    """
    Relative directional derivative (dA/deps) / A of the functional by central finite differences.

    Perturbations have unit peak in units of omega_max (radians for QAB angles),
    so a non-critical path gives a value of order one.
    """
    plus = functional_time(perturb(schedule, eps, profile)).value
    minus = functional_time(perturb(schedule, -eps, profile)).value
    base = functional_time(schedule).value
    return (plus - minus) / (2 * eps) / base


@dataclass(frozen=True, eq=False)
class CriticalityVerdict:
    lambda_terms: np.ndarray  # shape (2, n_modes): coordinate j, Fourier mode n = 1..n_modes
    verdict: str
    residual: float


def _hessian_terms(o1, o2, d1, d2, q_step, v_step):
    """Second partials of L in (Omega_j, dOmega_j) for j = 1, 2, by central differences."""
    out = []
    for j in (0, 1):
        def L(dq=0.0, dv=0.0):
            q = [o1, o2]
            v = [d1, d2]
            q[j] = q[j] + dq
            v[j] = v[j] + dv
            return lagrangian(q[0], q[1], v[0], v[1])

        base = L()
        l_qq = (L(dq=q_step) - 2 * base + L(dq=-q_step)) / q_step**2
        l_vv = (L(dv=v_step) - 2 * base + L(dv=-v_step)) / v_step**2
        l_qv = (L(q_step, v_step) - L(q_step, -v_step) - L(-q_step, v_step) + L(-q_step, -v_step)) / (
            4 * q_step * v_step
        )
        out.append((l_qq, l_qv, l_vv))
    return out


def second_derivative_test(
    schedule: PulseSchedule,
    n_modes: int = 50,
    residual_tol: float = RESIDUAL_TOL,
    rel_step: float = 1e-4,
) -> CriticalityVerdict:
    """
    Classify a critical path by the sign of the second variation per Fourier mode.

    For each field j and mode n the perturbation eta_j = sin(n pi t / tau)
    gives

        Lambda[j, n] = integral of  L_qq eta**2 + 2 L_qv eta deta + L_vv deta**2  dt

    with the partial derivatives of L taken numerically along the path.
    """
    if n_modes < 1:
        raise InvalidInputError("n_modes must be >= 1")
    residual = float(np.max(constrained_residual(schedule)))
    if residual > residual_tol:
        raise NotCriticalError(
            f"schedule is not an Euler-Lagrange solution (residual {residual:.3e} > {residual_tol:.1e})",
            residual=residual,
        )
    fam = schedule.family
    o1, o2 = schedule.omega1, schedule.omega2
    d1, d2 = _velocities(schedule)
    q_step = rel_step * fam.omega_max
    v_step = rel_step * float(np.max(np.hypot(d1, d2)))
    terms = _hessian_terms(o1, o2, d1, d2, q_step, v_step)

    t = schedule.times
    lam = np.empty((2, n_modes))
    for n in range(1, n_modes + 1):
        k = n * math.pi / fam.tau
        eta, deta = np.sin(k * t), k * np.cos(k * t)
        for j, (l_qq, l_qv, l_vv) in enumerate(terms):
            integrand = l_qq * eta**2 + 2 * l_qv * eta * deta + l_vv * deta**2
            lam[j, n - 1] = np.trapezoid(integrand, t)

    cut = 1e-9 * float(np.max(np.abs(lam)))
    if np.all(lam > cut):
        verdict = "Minimum"
    elif np.all(lam < -cut):
        verdict = "Maximum"
    elif np.any(lam > cut) and np.any(lam < -cut):
        verdict = "Saddle"
    else:
        verdict = "Inconclusive"
    return CriticalityVerdict(lam, verdict, residual)
