"""Charging time tau_c of every protocol family in both modes.

    python3 scripts/sweep_tau_c.py [--threshold F] [--omega-max-hz F] [--step-ns F]

Prints tau_c in ns and the mean-power gain of the unstable over the stable mode.
"""
import argparse

from qutrit_battery.config import load_config
from qutrit_battery.ergotropy import power_improvement
from qutrit_battery.experiments import tau_c_sweep
from qutrit_battery.protocols import ChargeMode, Family


def fmt(metrics):
    return f"{metrics.tau_c * 1e9:8.1f}" if metrics else "     n/a"


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--threshold", type=float, default=0.99)
    parser.add_argument("--omega-max-hz", type=float, default=10e6)
    parser.add_argument("--step-ns", type=float, default=2.5)
    args = parser.parse_args(argv)
    config = load_config(overrides={
        "charge.threshold": args.threshold,
        "drive.omega_max_hz": args.omega_max_hz,
        "sweep.fine_step_s": args.step_ns * 1e-9,
    })
    times = tau_c_sweep(config)
    print(f"threshold {args.threshold}, Omega_max = 2 pi x {args.omega_max_hz / 1e6:g} MHz")
    print(f"{'family':<26}{'stable ns':>10}{'unstable ns':>13}{'gain %':>9}")
    for family in Family:
        stable, unstable = times[family, ChargeMode.STABLE], times[family, ChargeMode.UNSTABLE]
        gain = f"{power_improvement(stable, unstable):9.0f}" if stable and unstable else "      n/a"
        print(f"{family.value:<26}{fmt(stable):>10}{fmt(unstable):>13}{gain}")


if __name__ == "__main__":
    main()
