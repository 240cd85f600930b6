"""
Closed-form charging envelopes and their discretisation.

Four families of (Omega1, Omega2) envelopes over [0, tau]:

* linear ramp            Omega1 + Omega2 = Omega_max, linear in t
* cycloid                Omega1 + Omega2 = Omega_max, brachistochrone on that line
* QAB quadratic          Omega1**2 + Omega2**2 = Omega_max**2, sin/cos
* numerical unconstrained, solved in :mod:`qutrit_battery.brachistochrone`

Stable charging starts with Omega1 = 0 and ends with Omega2 = 0 (the ground
state is the dark state). Unstable charging uses the opposite boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidInputError, MissingSolutionError, RangeError

DEFAULT_SAMPLES = 2001
BOUNDARY_TOL = 1e-12


class ChargeMode(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


class Family(str, Enum):
    LINEAR_RAMP = "linear_ramp"
    CYCLOID_LINEAR = "cycloid_linear"
    QAB_QUADRATIC = "qab_quadratic"
    NUMERICAL_UNCONSTRAINED = "numerical_unconstrained"


@dataclass(frozen=True, eq=False)
class ShapeSamples:
    """
    Dimensionless envelope samples on s = t/tau in [0, 1], peak field 1.

    The Euler-Lagrange equations are invariant under rescaling of the fields
    and of time, so one solved shape serves every (tau, omega_max).
    """

    s: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    mode: ChargeMode
    history: tuple = ()

    def __post_init__(self):
        for name in ("s", "omega1", "omega2"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        splines = (CubicSpline(self.s, self.omega1), CubicSpline(self.s, self.omega2))
        object.__setattr__(self, "_splines", splines)

    def __call__(self, s):
        f1, f2 = self._splines
        return f1(s), f2(s)


@dataclass(frozen=True, eq=False)
class ProtocolFamily:
    family: Family
    omega_max: float
    tau: float
    mode: ChargeMode = ChargeMode.STABLE
    shape: ShapeSamples | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "mode", ChargeMode(self.mode))
        if not (np.isfinite(self.omega_max) and self.omega_max > 0):
            raise InvalidInputError(f"omega_max must be positive, got {self.omega_max!r}")
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise InvalidInputError(f"tau must be positive, got {self.tau!r}")

    def with_tau(self, tau: float) -> "ProtocolFamily":
        return ProtocolFamily(self.family, self.omega_max, tau, self.mode, self.shape)

    def envelope(self, t):
        return envelope(self, t)


@dataclass(frozen=True, eq=False)
class PulseSchedule:
    times: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    family: ProtocolFamily

    def __post_init__(self):
        arrays = []
        for name in ("times", "omega1", "omega2"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            arrays.append(arr)
        t = arrays[0]
        if any(a.ndim != 1 or a.size != t.size for a in arrays) or t.size < 2:
            raise InvalidInputError("schedule arrays must be 1-D, equal length and have at least 2 samples")
        if np.any(np.diff(t) <= 0):
            raise InvalidInputError("schedule times must be strictly increasing")
        if t[0] != 0.0 or not math.isclose(t[-1], self.family.tau, rel_tol=1e-12):
            raise InvalidInputError("schedule must span [0, tau]")
        spacing = np.diff(t)
        if np.max(np.abs(spacing - spacing[0])) > 1e-9 * spacing[0]:
            raise InvalidInputError("only uniform time grids are supported")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def gap(self) -> np.ndarray:
        return np.hypot(self.omega1, self.omega2)


def _unit_time(t, tau):
    t = np.asarray(t, dtype=float)
    slack = 1e-12 * tau
    if np.any(t < -slack) or np.any(t > tau + slack):
        raise RangeError(f"time outside [0, {tau!r}]")
    return np.clip(t / tau, 0.0, 1.0)


def _finish(a, b, omega_max, mode):
    if ChargeMode(mode) is ChargeMode.UNSTABLE:
        a, b = b, a
    a, b = omega_max * a, omega_max * b
    if np.ndim(a) == 0:
        return float(a), float(b)
    return a, b


def eval_linear_ramp(t, tau, omega_max, mode=ChargeMode.STABLE):
    s = _unit_time(t, tau)
    return _finish(s, 1.0 - s, omega_max, mode)


def eval_cycloid(t, tau, omega_max, mode=ChargeMode.STABLE):
    s = _unit_time(t, tau)
    tangent = np.tan(math.pi * (1.0 - 2.0 * s) / 4.0)
    rising = 0.5 * (1.0 - tangent)
    # the unstable branch flips the sign of the tangent, i.e. Omega_max - Omega1
    return _finish(rising, 1.0 - rising, omega_max, mode)


def eval_qab_quadratic(t, tau, omega_max, mode=ChargeMode.STABLE):
    s = _unit_time(t, tau)
    return _finish(np.sin(0.5 * math.pi * s), np.cos(0.5 * math.pi * s), omega_max, mode)


_CLOSED_FORMS = {
    Family.LINEAR_RAMP: eval_linear_ramp,
    Family.CYCLOID_LINEAR: eval_cycloid,
    Family.QAB_QUADRATIC: eval_qab_quadratic,
}


def envelope(protocol: ProtocolFamily, t):
    """Evaluate (Omega1, Omega2) of a protocol at time(s) t."""
    if protocol.family is Family.NUMERICAL_UNCONSTRAINED:
        if protocol.shape is None:
            raise MissingSolutionError("numerical protocol has no solver output attached")
        if protocol.shape.mode is not protocol.mode:
            raise InvalidInputError("attached solution was solved for the other charge mode")
        s = _unit_time(t, protocol.tau)
        a, b = protocol.shape(s)
        a, b = protocol.omega_max * a, protocol.omega_max * b
        return (float(a), float(b)) if np.ndim(a) == 0 else (a, b)
    return _CLOSED_FORMS[protocol.family](t, protocol.tau, protocol.omega_max, protocol.mode)


def discretize(protocol: ProtocolFamily, n_samples: int = DEFAULT_SAMPLES) -> PulseSchedule:
    if n_samples < 2:
        raise InvalidInputError("need at least two samples")
    times = np.linspace(0.0, protocol.tau, n_samples)
    omega1, omega2 = envelope(protocol, times)
    return PulseSchedule(times, omega1, omega2, protocol)


def boundary_violation(schedule: PulseSchedule) -> float:
    """Largest boundary-condition violation of the schedule's charge mode, in units of omega_max."""
    o1, o2 = schedule.omega1, schedule.omega2
    if schedule.family.mode is ChargeMode.STABLE:
        worst = max(abs(o1[0]), abs(o2[-1]))
    else:
        worst = max(abs(o1[-1]), abs(o2[0]))
    return worst / schedule.family.omega_max


def check_boundaries(schedule: PulseSchedule, tol: float = BOUNDARY_TOL) -> None:
    violation = boundary_violation(schedule)
    if violation > tol:
        raise InvalidInputError(
            f"{schedule.family.mode.value} boundary conditions violated by {violation:.3e} * omega_max"
        )
