"""Stability of the discharge verdict under 1% multiplicative noise.

    python3 scripts/noisy_discharge.py [--seeds N]

Classifies noisy replicas of the closed-form decay at the device rates and of a
single-exponential decay with the same window and sampling.
"""
import argparse
from collections import Counter

import numpy as np

from qutrit_battery.core import BatteryLevels, to_micro_ev
from qutrit_battery.decay import classify
from qutrit_battery.dynamics import DecayRates
from qutrit_battery.ergotropy import ErgotropyTrace, self_discharge_ergotropy


def replicas(clean, e_max, seeds):
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        noisy = np.clip(clean * (1 + 0.01 * rng.standard_normal(clean.size)), 0, e_max)
        yield noisy


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=100)
    args = parser.parse_args(argv)
    levels = BatteryLevels.transmon_device()
    e_max = to_micro_ev(levels.e_max)
    t = np.linspace(0, 60e-6, 601)
    traces = {
        "device rates": to_micro_ev(self_discharge_ergotropy(t, DecayRates.transmon_device(), levels)),
        "single exponential": e_max * np.exp(-t / 10e-6),
    }
    for name, clean in traces.items():
        verdicts, evidence = Counter(), []
        for noisy in replicas(clean, e_max, args.seeds):
            v = classify(ErgotropyTrace(t, noisy, e_max))
            verdicts[v.model] += 1
            evidence.append(v.evidence)
        print(f"{name:<20} {dict(verdicts)}  AIC gain min {min(evidence):.1f} median {np.median(evidence):.1f}")


if __name__ == "__main__":
    main()
