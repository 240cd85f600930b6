"""
Experiment configuration as flat dotted keys.

A config file is a JSON object whose keys are the dotted names below; any
subset may be given and the rest fall back to the device defaults. The same
keys can be overridden on the command line with ``--set key=value``.

=========================  ==========================================  =======================
key                        meaning                                     default
=========================  ==========================================  =======================
levels.f01_hz              |0>-|1> transition frequency (Hz)           6.266e9
levels.f12_hz              |1>-|2> transition frequency (Hz)           6.011e9
drive.omega_max_hz         peak off-diagonal drive coupling / 2 pi     10e6
rates.gamma_10             |1> -> |0> decay rate (1/s)                 51.4e3
rates.gamma_21             |2> -> |1> decay rate (1/s)                 79.7e3
rates.deph_1               pure dephasing of |1> (1/s)                 0
rates.deph_2               pure dephasing of |2> (1/s)                 0
protocol.family            family used by ``tomography``               qab_quadratic
protocol.mode              stable | unstable                           stable
protocol.tau_s             duration used by ``tomography``             600e-9
sweep.tau_s                list of charging durations (s)              50 ns .. 800 ns, 50 ns
sweep.fine_step_s          step of the tau_c sweep (s)                 2.5e-9
charge.dt_s                integration step (s)                        0.1e-9
charge.threshold           charged fraction of E_max                   0.99
charge.samples             schedule samples per protocol               2001
charge.store_every         keep every n-th integration step            50
discharge.t_final_s        self-discharge window (s)                   60e-6
discharge.dt_s             Lindblad step (s)                           10e-9
discharge.store_every      keep every n-th Lindblad step               10
brachistochrone.n_grid     collocation points                          4001
brachistochrone.n_modes    Fourier modes in the second-variation test  50
tomography.shots           shots per rotation, null for exact          100000
tomography.fraction        point of the charge to sample (0..1)        0.5
run.seed                   integer seed for sampled measurements       null
run.output_dir             output directory                            out
=========================  ==========================================  =======================
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import TWO_PI, BatteryLevels
from .dynamics import DecayRates
from .errors import ConfigError, InvalidInputError
from .protocols import ChargeMode, Family, ProtocolFamily

DEFAULTS = {
    "levels.f01_hz": 6.266e9,
    "levels.f12_hz": 6.011e9,
    "drive.omega_max_hz": 10e6,
    "rates.gamma_10": 51.4e3,
    "rates.gamma_21": 79.7e3,
    "rates.deph_1": 0.0,
    "rates.deph_2": 0.0,
    "protocol.family": "qab_quadratic",
    "protocol.mode": "stable",
    "protocol.tau_s": 600e-9,
    "sweep.tau_s": [round(50e-9 * k, 12) for k in range(1, 17)],
    "sweep.fine_step_s": 2.5e-9,
    "charge.dt_s": 0.1e-9,
    "charge.threshold": 0.99,
    "charge.samples": 2001,
    "charge.store_every": 50,
    "discharge.t_final_s": 60e-6,
    "discharge.dt_s": 10e-9,
    "discharge.store_every": 10,
    "brachistochrone.n_grid": 4001,
    "brachistochrone.n_modes": 50,
    "tomography.shots": 100000,
    "tomography.fraction": 0.5,
    "run.seed": None,
    "run.output_dir": "out",
}

_INT_KEYS = {"charge.samples", "charge.store_every", "discharge.store_every", "brachistochrone.n_grid",
             "brachistochrone.n_modes"}


@dataclass(frozen=True)
class ExperimentConfig:
    levels: BatteryLevels
    omega_max: float  # rad/s
    rates: DecayRates
    protocol: ProtocolFamily
    tau_sweep: np.ndarray  # s
    dt: float  # s
    threshold: float
    seed: int | None
    output_dir: Path
    raw: dict  # the flat key snapshot this config was built from

    def get(self, key):
        return self.raw[key]


def parse_value(text: str):
    """Interpret a command-line override: JSON where it parses, else a bare string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path=None, overrides=None) -> ExperimentConfig:
    """Merge defaults, an optional JSON file and overrides, then validate."""
    flat = dict(DEFAULTS)
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object of dotted keys")
        flat.update(data)
    flat.update(overrides or {})
    return build_config(flat)


def build_config(flat: dict) -> ExperimentConfig:
    unknown = sorted(set(flat) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        for key in _INT_KEYS:
            if not isinstance(flat[key], int) or isinstance(flat[key], bool) or flat[key] < 1:
                raise ConfigError(f"{key} must be a positive integer")
        levels = BatteryLevels(TWO_PI * float(flat["levels.f01_hz"]), TWO_PI * float(flat["levels.f12_hz"]))
        omega_max = TWO_PI * float(flat["drive.omega_max_hz"])
        rates = DecayRates(*(float(flat[f"rates.{k}"]) for k in ("gamma_10", "gamma_21", "deph_1", "deph_2")))
        try:
            family, mode = Family(flat["protocol.family"]), ChargeMode(flat["protocol.mode"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        protocol = ProtocolFamily(family, omega_max, float(flat["protocol.tau_s"]), mode)
        taus = np.asarray(flat["sweep.tau_s"], dtype=float)
        if taus.ndim != 1 or taus.size == 0:
            raise ConfigError("sweep.tau_s must be a non-empty list")
        if np.any(~np.isfinite(taus)) or np.any(taus <= 0) or np.any(np.diff(taus) <= 0):
            raise ConfigError("sweep.tau_s must be positive and strictly ascending")
        dt = float(flat["charge.dt_s"])
        if not dt > 0:
            raise ConfigError("charge.dt_s must be positive")
        threshold = float(flat["charge.threshold"])
        if not 0 < threshold <= 1:
            raise ConfigError("charge.threshold must lie in (0, 1]")
        for key in ("sweep.fine_step_s", "discharge.t_final_s", "discharge.dt_s"):
            if not float(flat[key]) > 0:
                raise ConfigError(f"{key} must be positive")
        if not 0 <= float(flat["tomography.fraction"]) <= 1:
            raise ConfigError("tomography.fraction must lie in [0, 1]")
        shots = flat["tomography.shots"]
        if shots is not None and (not isinstance(shots, int) or isinstance(shots, bool) or shots < 1):
            raise ConfigError("tomography.shots must be a positive integer or null")
        seed = flat["run.seed"]
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or seed < 0):
            raise ConfigError("run.seed must be a non-negative integer or null")
    except ConfigError:
        raise
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc
    snapshot = {k: flat[k] for k in sorted(flat)}
    return ExperimentConfig(levels, omega_max, rates, protocol, taus, dt, threshold, seed,
                            Path(flat["run.output_dir"]), snapshot)
