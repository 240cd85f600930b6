"""Compare the two common Rabi-frequency conventions for the drive.

The package couples adjacent levels with Omega itself. Writing the coupling
as Omega / 2 instead is the same physics at half the peak field, so the
comparison only needs Omega_max halved.

    python3 scripts/drive_convention.py
"""
import numpy as np

from qutrit_battery.config import load_config
from qutrit_battery.core import TWO_PI, basis_state
from qutrit_battery.dynamics import evolve_schrodinger
from qutrit_battery.experiments import tau_c_sweep
from qutrit_battery.protocols import ChargeMode, Family, ProtocolFamily, discretize


def adiabatic_run(omega_max_hz):
    schedule = discretize(ProtocolFamily(Family.QAB_QUADRATIC, TWO_PI * omega_max_hz, 600e-9, ChargeMode.STABLE), 6001)
    traj = evolve_schrodinger(basis_state(0), schedule, 0.1e-9)
    o1 = np.interp(traj.times, schedule.times, schedule.omega1)
    o2 = np.interp(traj.times, schedule.times, schedule.omega2)
    dark = np.stack([o2, np.zeros_like(o2), -o1], axis=1) / np.hypot(o1, o2)[:, None]
    overlap = np.min(np.abs(np.einsum("ni,ni->n", dark, traj.states)))
    return abs(traj.states[-1, 2]) ** 2, overlap


def main():
    for label, hz in (("Omega couples levels", 10e6), ("Omega / 2 couples levels", 5e6)):
        p2, overlap = adiabatic_run(hz)
        times = tau_c_sweep(load_config(overrides={"drive.omega_max_hz": hz}))
        stable = {f: times[f, ChargeMode.STABLE] for f in Family}
        unstable_ramp = times[Family.LINEAR_RAMP, ChargeMode.UNSTABLE]
        print(f"{label}:")
        print(f"  600 ns QAB charge: p2 = {p2:.6f}, min dark-state overlap = {overlap:.5f}")
        print("  stable tau_c ns: " + ", ".join(f"{f.value} {m.tau_c * 1e9:.1f}" for f, m in stable.items()))
        print(f"  unstable ramp tau_c: {unstable_ramp.tau_c * 1e9:.1f} ns")


if __name__ == "__main__":
    main()
