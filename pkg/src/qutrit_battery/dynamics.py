"""
Coherent charging and dissipative self-discharge of the qutrit.

Both integrators are fixed-step classical Runge-Kutta (RK4). The drive is
given in the interaction picture, so the bare level splitting never enters
the equations of motion; it only sets the energies used to score a state.

The dissipator follows the sequential-decay model: collapse operators
|0><1| (rate gamma_10) and |1><2| (rate gamma_21), plus pure dephasing
gamma_j (P_j rho P_j - {P_j, rho}/2) on the two excited levels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import as_density_matrix, as_hermitian, as_pure_state, projector
from .errors import InvalidInputError, RangeError, StepSizeError
from .protocols import ProtocolFamily, PulseSchedule

STABILITY_BOUND = 0.05  # max dt * (largest rate or field) accepted
DRIFT_LIMIT = 1e-6  # norm / trace drift that aborts a run


@dataclass(frozen=True)
class DecayRates:
    """Relaxation and pure-dephasing rates in 1/s."""

    gamma_10: float
    gamma_21: float
    deph_1: float = 0.0
    deph_2: float = 0.0

    def __post_init__(self):
        for name in ("gamma_10", "gamma_21", "deph_1", "deph_2"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise InvalidInputError(f"{name} must be a finite non-negative rate, got {value!r}")

    @classmethod
    def transmon_device(cls) -> "DecayRates":
        """Sequential decay rates fitted to the measured self-discharge (no dephasing)."""
        return cls(gamma_10=51.4e3, gamma_21=79.7e3)

    @classmethod
    def from_coherence_times(cls, t1_01, t1_12, t2_01=None, t2_12=None) -> "DecayRates":
        """
        Build rates from relaxation (T1) and coherence (T2) times in seconds.

        Pure dephasing is 1/T2 - 1/(2 T1), clamped at zero. Missing T2 values
        mean no pure dephasing on that level.
        """
        times = [t for t in (t1_01, t1_12, t2_01, t2_12) if t is not None]
        if any(not (np.isfinite(t) and t > 0) for t in times):
            raise InvalidInputError("relaxation and coherence times must be positive")

        def deph(t2, t1):
            return 0.0 if t2 is None else max(0.0, 1.0 / t2 - 0.5 / t1)

        return cls(1.0 / t1_01, 1.0 / t1_12, deph(t2_01, t1_01), deph(t2_12, t1_12))

    @property
    def fastest(self) -> float:
        return max(self.gamma_10, self.gamma_21, self.deph_1, self.deph_2)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Sampled states of a run.

    ``states`` has shape (n, 3) for pure-state runs and (n, 3, 3) for density
    matrices. Stored states are renormalised copies; ``drift`` records the
    largest raw deviation of the norm (or trace) from one.
    """

    times: np.ndarray
    states: np.ndarray
    drift: float = 0.0

    @property
    def is_pure(self) -> bool:
        return self.states.ndim == 2

    def density_matrices(self) -> np.ndarray:
        if self.is_pure:
            return np.einsum("ni,nj->nij", self.states, self.states.conj())
        return self.states

    def populations(self) -> np.ndarray:
        if self.is_pure:
            return np.abs(self.states) ** 2
        return np.einsum("nii->ni", self.states).real

    def __len__(self):
        return self.times.size


def _step_count(duration, dt):
    if not (np.isfinite(dt) and dt > 0):
        raise InvalidInputError(f"dt must be positive, got {dt!r}")
    n = max(1, math.ceil(duration / dt - 1e-9))
    return n, duration / n


def _drive_at(schedule: PulseSchedule, t):
    """Envelope linearly interpolated between schedule samples."""
    return np.interp(t, schedule.times, schedule.omega1), np.interp(t, schedule.times, schedule.omega2)


def _apply_drive(o1, o2, psi):
    # H psi for the tridiagonal drive, cheaper than building the matrix
    return np.array([o1 * psi[1], o1 * psi[0] + o2 * psi[2], o2 * psi[1]])


def _check_schedule_step(schedule: PulseSchedule, dt):
    if dt > schedule.dt * (1 + 1e-9):
        raise StepSizeError(f"dt = {dt:.3e} s exceeds the schedule spacing {schedule.dt:.3e} s")
    peak = float(np.max(schedule.gap))
    if dt * peak > STABILITY_BOUND:
        raise StepSizeError(
            f"dt * Omega_max = {dt * peak:.3g} exceeds {STABILITY_BOUND}; use dt <= {STABILITY_BOUND / peak:.3e} s"
        )


def evolve_schrodinger(initial, schedule: PulseSchedule, dt: float, store_every: int = 1) -> Trajectory:
    """
    RK4 integration of i d|psi>/dt = H(t)|psi> over the schedule's span.

    The step is shrunk (never grown) so that an integer number of steps
    covers [0, tau]. Every ``store_every``-th step is recorded, plus the end.

    Raises
    ------
    StepSizeError
        If dt violates the stability bound, exceeds the schedule spacing, or
        the norm drifts by more than 1e-6.
    """
    psi = as_pure_state(initial).copy()
    _check_schedule_step(schedule, dt)
    tau = schedule.family.tau
    n, h = _step_count(tau, dt)
    grid = np.linspace(0.0, tau, 2 * n + 1)  # full and half steps
    o1, o2 = _drive_at(schedule, grid)

    keep = sorted(set(range(0, n + 1, store_every)) | {n})
    states = np.empty((len(keep), 3), dtype=complex)
    states[0] = psi
    slot, drift = 1, 0.0
    for k in range(n):
        a, b, c = 2 * k, 2 * k + 1, 2 * k + 2
        k1 = -1j * _apply_drive(o1[a], o2[a], psi)
        k2 = -1j * _apply_drive(o1[b], o2[b], psi + 0.5 * h * k1)
        k3 = -1j * _apply_drive(o1[b], o2[b], psi + 0.5 * h * k2)
        k4 = -1j * _apply_drive(o1[c], o2[c], psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if slot < len(keep) and keep[slot] == k + 1:
            norm = math.sqrt(float(np.vdot(psi, psi).real))
            drift = max(drift, abs(norm * norm - 1.0))
            if drift > DRIFT_LIMIT:
                raise StepSizeError(f"norm drifted by {drift:.2e} at t = {(k + 1) * h:.3e} s; reduce dt")
            states[slot] = psi / norm
            slot += 1
    return Trajectory(np.array(keep) * h, states, drift)


def sweep_final_states(protocol: ProtocolFamily, taus, dt: float, initial=None) -> np.ndarray:
    """
    Final states of one protocol family for many durations at once.

    All durations are integrated together in the unit time s = t/tau with a
    common number of steps, chosen so that the physical step never exceeds
    ``dt``. The envelope is evaluated exactly at each stage rather than
    interpolated from samples.

    Returns an array of shape (len(taus), 3).
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if taus.ndim != 1 or np.any(~np.isfinite(taus)) or np.any(taus <= 0):
        raise InvalidInputError("taus must be positive and finite")
    if dt * protocol.omega_max > STABILITY_BOUND:
        raise StepSizeError(f"dt * Omega_max = {dt * protocol.omega_max:.3g} exceeds {STABILITY_BOUND}")
    n, _ = _step_count(float(taus.max()), dt)
    ds = 1.0 / n
    unit = protocol.with_tau(1.0)
    s_grid = np.linspace(0.0, 1.0, 2 * n + 1)
    o1, o2 = unit.envelope(s_grid)

    psi = np.zeros((taus.size, 3), dtype=complex)
    psi[:, :] = as_pure_state(initial) if initial is not None else (1.0, 0.0, 0.0)
    scale = -1j * taus[:, None]

    def rhs(idx, state):
        out = np.empty_like(state)
        out[:, 0] = o1[idx] * state[:, 1]
        out[:, 1] = o1[idx] * state[:, 0] + o2[idx] * state[:, 2]
        out[:, 2] = o2[idx] * state[:, 1]
        return scale * out

    for k in range(n):
        a, b, c = 2 * k, 2 * k + 1, 2 * k + 2
        k1 = rhs(a, psi)
        k2 = rhs(b, psi + 0.5 * ds * k1)
        k3 = rhs(b, psi + 0.5 * ds * k2)
        k4 = rhs(c, psi + ds * k3)
        psi = psi + (ds / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    norms = np.linalg.norm(psi, axis=1)
    drift = float(np.max(np.abs(norms**2 - 1.0)))
    if drift > DRIFT_LIMIT:
        raise StepSizeError(f"norm drifted by {drift:.2e} in the sweep; reduce dt")
    return psi / norms[:, None]


def _sigma(k, j):
    op = np.zeros((3, 3), dtype=complex)
    op[k, j] = 1.0
    return op


def _dissipator(c, rate):
    # row-major vectorisation: vec(A rho B) = kron(A, B.T) vec(rho)
    eye = np.eye(3)
    cdc = c.conj().T @ c
    return rate * (np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T))


def lindblad_generator(rates: DecayRates, hamiltonian=None) -> np.ndarray:
    """9x9 matrix of the Lindblad generator acting on row-major vec(rho)."""
    gen = np.zeros((9, 9), dtype=complex)
    if hamiltonian is not None:
        h = as_hermitian(hamiltonian)
        gen += -1j * (np.kron(h, np.eye(3)) - np.kron(np.eye(3), h.T))
    for c, rate in (
        (_sigma(0, 1), rates.gamma_10),
        (_sigma(1, 2), rates.gamma_21),
        (projector(1), rates.deph_1),
        (projector(2), rates.deph_2),
    ):
        if rate:
            gen += _dissipator(c, rate)
    return gen


def _drive_generator(o1, o2):
    h = np.zeros((3, 3))
    h[0, 1] = h[1, 0] = o1
    h[1, 2] = h[2, 1] = o2
    return -1j * (np.kron(h, np.eye(3)) - np.kron(np.eye(3), h))


def evolve_lindblad(
    initial,
    rates: DecayRates,
    schedule: PulseSchedule | None = None,
    dt: float = 1e-9,
    t_final: float | None = None,
    store_every: int = 1,
) -> Trajectory:
    """
    RK4 integration of the Lindblad master equation.

    Parameters
    ----------
    initial : array_like
        Density matrix or pure 3-vector.
    rates : DecayRates
    schedule : PulseSchedule, optional
        Drive applied during [0, tau]; without one the qutrit decays freely.
    dt : float
        Step in seconds, shrunk to fit the run length exactly.
    t_final : float, optional
        Run length. Defaults to the schedule's tau; required without a schedule.
    store_every : int
        Record every n-th step (the last step is always recorded).
    """
    rho = as_density_matrix(initial).copy()
    if t_final is None:
        if schedule is None:
            raise InvalidInputError("t_final is required when no schedule is given")
        t_final = schedule.family.tau
    if not (np.isfinite(t_final) and t_final > 0):
        raise InvalidInputError(f"t_final must be positive, got {t_final!r}")
    if schedule is not None:
        _check_schedule_step(schedule, dt)
    if dt * rates.fastest > STABILITY_BOUND:
        raise StepSizeError(f"dt * rate = {dt * rates.fastest:.3g} exceeds {STABILITY_BOUND}")
    n, h = _step_count(t_final, dt)

    static = lindblad_generator(rates)
    if schedule is None:
        gens = None
    else:
        grid = np.linspace(0.0, t_final, 2 * n + 1)
        inside = grid <= schedule.family.tau
        o1, o2 = _drive_at(schedule, np.minimum(grid, schedule.family.tau))
        o1, o2 = np.where(inside, o1, 0.0), np.where(inside, o2, 0.0)

    def generator(idx):
        if schedule is None:
            return static
        return static + _drive_generator(o1[idx], o2[idx])

    if schedule is None:
        # constant generator: one RK4 propagator matrix serves every step
        g = h * static
        g2 = g @ g
        prop = np.eye(9) + g + g2 / 2 + g2 @ g / 6 + g2 @ g2 / 24

    keep = sorted(set(range(0, n + 1, store_every)) | {n})
    states = np.empty((len(keep), 3, 3), dtype=complex)
    states[0] = rho
    vec = rho.reshape(9)
    slot, drift = 1, 0.0
    for k in range(n):
        if schedule is None:
            vec = prop @ vec
        else:
            a, b, c = 2 * k, 2 * k + 1, 2 * k + 2
            ga, gb, gc = generator(a), generator(b), generator(c)
            k1 = ga @ vec
            k2 = gb @ (vec + 0.5 * h * k1)
            k3 = gb @ (vec + 0.5 * h * k2)
            k4 = gc @ (vec + h * k3)
            vec = vec + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if slot < len(keep) and keep[slot] == k + 1:
            mat = vec.reshape(3, 3)
            trace = np.trace(mat).real
            drift = max(drift, abs(trace - 1.0))
            if drift > DRIFT_LIMIT:
                raise StepSizeError(f"trace drifted by {drift:.2e} at t = {(k + 1) * h:.3e} s; reduce dt")
            states[slot] = mat / trace
            slot += 1
    return Trajectory(np.array(keep) * h, states, drift)


def analytic_populations(t, rates: DecayRates):
    """
    Closed-form populations (rho00, rho11, rho22) of a freely decaying, fully charged qutrit.

    Uses expm1 so that nearly equal rates do not lose precision; equal rates
    reduce to rho11 = gamma t exp(-gamma t).
    """
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)) or np.any(t < 0):
        raise RangeError("time must be non-negative")
    g10, g21 = rates.gamma_10, rates.gamma_21
    delta = g10 - g21
    finite = np.where(np.isfinite(t), t, 0.0)
    p2 = np.exp(-g21 * finite)
    if delta == 0.0:
        p1 = g21 * finite * p2
    else:
        # g21 e^{-min(g) t} (1 - e^{-|delta| t}) / |delta|, no overflow for either sign
        slow = np.exp(-min(g10, g21) * finite)
        p1 = g21 * slow * (-np.expm1(-abs(delta) * finite)) / abs(delta)
    if np.any(np.isinf(t)):
        if g10 == 0.0 or g21 == 0.0:
            raise RangeError("infinite time needs both decay rates positive")
        p1 = np.where(np.isinf(t), 0.0, p1)
        p2 = np.where(np.isinf(t), 0.0, p2)
    p0 = 1.0 - p1 - p2
    if t.ndim == 0:
        return float(p0), float(p1), float(p2)
    return p0, p1, p2


def instantaneous_energy(state, h0) -> float:
    """Mean energy Tr[rho H0] in rad/s; pure states are accepted."""
    rho = as_density_matrix(state)
    h0 = as_hermitian(h0)
    value = np.trace(rho @ h0)
    scale = max(1.0, float(np.max(np.abs(h0))))
    if abs(value.imag) > 1e-10 * scale:
        raise InvalidInputError(f"energy has an imaginary part {value.imag:.3e}")
    return float(value.real)
