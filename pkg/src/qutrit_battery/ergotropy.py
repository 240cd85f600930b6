"""
Ergotropy, passive states and charging figures of merit.

The ergotropy of rho under a Hamiltonian H0 with ascending energies e_n is

    E(rho) = Tr[rho H0] - sum_n r_n e_n

where r_n are the eigenvalues of rho in descending order. The subtracted
term is the energy of the passive state, the lowest energy reachable from
rho by a unitary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import BatteryLevels, as_density_matrix, as_hermitian, to_micro_ev
from .dynamics import DecayRates, analytic_populations
from .errors import InvalidInputError, NoCrossingError, NotChargedError

DEFAULT_THRESHOLD = 0.99


def _diagonal_energies(h0) -> np.ndarray:
    h0 = as_hermitian(h0)
    if np.max(np.abs(h0 - np.diag(np.diag(h0)))) > 0:
        raise InvalidInputError("H0 must be diagonal in the computational basis")
    energies = np.diag(h0).real
    if np.any(np.diff(energies) < 0):
        raise InvalidInputError("H0 energies must be ascending")
    return energies


def ergotropy(state, h0) -> float:
    """
    Extractable work of ``state`` under the diagonal Hamiltonian ``h0``, in the units of h0.

    Roundoff can push a passive state a hair below zero; such values are
    returned as zero.
    """
    rho = as_density_matrix(state)
    energies = _diagonal_energies(h0)
    spectrum = np.sort(np.linalg.eigvalsh(rho))[::-1]
    value = float(np.real(np.trace(rho @ np.diag(energies)))) - float(spectrum @ energies)
    return max(value, 0.0)


def ergotropy_double_sum(state, h0) -> float:
    """
    Same quantity written as a double sum over eigenpairs,

        E = sum_{k,n} r_k e_n (|<r_k|e_n>|**2 - delta_kn)

    with r_k descending and e_n ascending. Useful as an independent check.
    """
    rho = as_density_matrix(state)
    energies = _diagonal_energies(h0)
    r, vecs = np.linalg.eigh(rho)
    order = np.argsort(-r, kind="stable")
    r, vecs = r[order], vecs[:, order]
    overlap = np.abs(vecs.T) ** 2  # overlap[k, n] = |<r_k|e_n>|^2
    return float(np.einsum("k,n,kn->", r, energies, overlap - np.eye(3)))


def passive_state(state, h0) -> np.ndarray:
    """Diagonal state with the spectrum of ``state`` arranged in descending order over ascending energies."""
    rho = as_density_matrix(state)
    _diagonal_energies(h0)
    spectrum = np.sort(np.clip(np.linalg.eigvalsh(rho), 0.0, None))[::-1]
    return np.diag(spectrum / spectrum.sum()).astype(complex)


def diagonal_ergotropy(p0, p1, p2, levels: BatteryLevels):
    """
    Ergotropy of a diagonal state by its six population orderings (vectorised).

    With e1 = omega01 and e2 = omega01 + omega12:

    ============  =====================================
    ordering      ergotropy
    ============  =====================================
    p2 > p1 > p0  e2 (p2 - p0)
    p2 > p0 > p1  e1 (p1 - p0) + e2 (p2 - p1)
    p1 > p2 > p0  e1 (p1 - p2) + e2 (p2 - p0)
    p1 > p0 > p2  e1 (p1 - p0)
    p0 > p2 > p1  (e2 - e1) (p2 - p1)
    p0 > p1 > p2  0
    ============  =====================================
    """
    p0, p1, p2 = (np.asarray(p, dtype=float) for p in (p0, p1, p2))
    e1, e2 = levels.energies[1], levels.energies[2]
    branches = [
        ((p2 >= p1) & (p1 >= p0), e2 * (p2 - p0)),
        ((p2 >= p0) & (p0 >= p1), e1 * (p1 - p0) + e2 * (p2 - p1)),
        ((p1 >= p2) & (p2 >= p0), e1 * (p1 - p2) + e2 * (p2 - p0)),
        ((p1 >= p0) & (p0 >= p2), e1 * (p1 - p0)),
        ((p0 >= p2) & (p2 >= p1), (e2 - e1) * (p2 - p1)),
    ]
    value = np.select([c for c, _ in branches], [v for _, v in branches], default=0.0)
    return float(value) if value.ndim == 0 else value


def self_discharge_ergotropy(t, rates: DecayRates, levels: BatteryLevels):
    """Ergotropy (rad/s) of a freely decaying, initially fully charged qutrit at time(s) t."""
    p0, p1, p2 = analytic_populations(t, rates)
    return diagonal_ergotropy(p0, p1, p2, levels)


_PAIRS = (("rho22", "rho11", 2, 1), ("rho22", "rho00", 2, 0), ("rho11", "rho00", 1, 0))


def crossing_times(rates: DecayRates, rtol: float = 1e-12):
    """
    Times at which pairs of decaying populations become equal.

    Solves rho22 = rho11, rho22 = rho00 and rho11 = rho00 by bracketed root
    finding on (0, 10 / min(gamma)] and returns the roots in increasing time,
    the order in which the ordering of the populations switches.

    Raises
    ------
    NoCrossingError
        If a pair never crosses inside the window.
    """
    if rates.gamma_10 == rates.gamma_21:
        raise InvalidInputError("crossing times need gamma_10 != gamma_21")
    slow = min(rates.gamma_10, rates.gamma_21)
    if slow <= 0:
        raise InvalidInputError("both decay rates must be positive")
    t_max = 10.0 / slow
    grid = np.linspace(0.0, t_max, 4001)[1:]
    pops = np.array(analytic_populations(grid, rates))

    roots = []
    for name_a, name_b, a, b in _PAIRS:
        diff = pops[a] - pops[b]
        flips = np.flatnonzero(np.sign(diff[:-1]) != np.sign(diff[1:]))
        if flips.size == 0:
            raise NoCrossingError(f"{name_a} and {name_b} never cross before {t_max:.3e} s", pair=(a, b))

        def gap(t, a=a, b=b):
            p = analytic_populations(t, rates)
            return p[a] - p[b]

        i = flips[0]
        roots.append(brentq(gap, grid[i], grid[i + 1], xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps)))
    return tuple(sorted(roots))


@dataclass(frozen=True, eq=False)
class ErgotropyTrace:
    """Ergotropy samples in μeV against time (or against charging duration in a sweep)."""

    times: np.ndarray
    ergotropy: np.ndarray
    normalization: float

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        e = np.array(self.ergotropy, dtype=float)
        if t.ndim != 1 or t.shape != e.shape or t.size == 0:
            raise InvalidInputError("times and ergotropy must be equal-length, non-empty 1-D arrays")
        if np.any(np.diff(t) <= 0):
            raise InvalidInputError("times must be strictly increasing")
        if not self.normalization > 0:
            raise InvalidInputError("normalization must be positive")
        if np.any(e < 0) or np.any(e > self.normalization * (1 + 1e-9)):
            raise InvalidInputError("ergotropy samples must lie in [0, E_max]")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "ergotropy", e)

    @property
    def fraction(self) -> np.ndarray:
        return self.ergotropy / self.normalization


def ergotropy_trace(times, states, levels: BatteryLevels) -> ErgotropyTrace:
    """Score a sequence of states (vectors or density matrices) in μeV."""
    h0 = np.diag(levels.energies)
    values = [to_micro_ev(ergotropy(s, h0)) for s in states]
    e_max = to_micro_ev(levels.e_max)
    return ErgotropyTrace(np.asarray(times), np.minimum(values, e_max), e_max)


@dataclass(frozen=True)
class ChargingMetrics:
    tau_c: float  # s
    mean_power: float  # μeV/s
    threshold: float


def charging_metrics(trace: ErgotropyTrace, threshold: float = DEFAULT_THRESHOLD) -> ChargingMetrics:
    """
    First time the ergotropy reaches ``threshold * E_max``, linearly interpolated.

    Raises
    ------
    NotChargedError
        If the trace never reaches the threshold.
    """
    if not (0.0 < threshold <= 1.0):
        raise InvalidInputError(f"threshold must lie in (0, 1], got {threshold!r}")
    target = threshold * trace.normalization
    above = np.flatnonzero(trace.ergotropy >= target)
    if above.size == 0:
        raise NotChargedError(
            f"ergotropy peaks at {trace.fraction.max():.4f} of E_max, below the threshold {threshold}"
        )
    i = int(above[0])
    if i == 0:
        tau_c = float(trace.times[0])
    else:
        t0, t1 = trace.times[i - 1], trace.times[i]
        e0, e1 = trace.ergotropy[i - 1], trace.ergotropy[i]
        tau_c = float(t0 + (target - e0) * (t1 - t0) / (e1 - e0))
    if tau_c <= 0:
        raise NotChargedError("trace is charged at t = 0; tau_c is undefined")
    return ChargingMetrics(tau_c, target / tau_c, threshold)


def power_improvement(stable: ChargingMetrics, unstable: ChargingMetrics) -> float:
    """Relative gain in mean charging power of the unstable over the stable mode, in percent."""
    return 100.0 * (unstable.mean_power / stable.mean_power - 1.0)


__all__ = [
    "ChargingMetrics",
    "ErgotropyTrace",
    "charging_metrics",
    "crossing_times",
    "diagonal_ergotropy",
    "ergotropy",
    "ergotropy_double_sum",
    "ergotropy_trace",
    "passive_state",
    "power_improvement",
    "self_discharge_ergotropy",
]
