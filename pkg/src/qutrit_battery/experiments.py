"""
Runners behind the command-line subcommands.

Each runner takes an :class:`ExperimentConfig`, writes its data files under
``output_dir/<command>/`` and finishes with a ``manifest.json`` listing
every output and its SHA-256 digest. Apart from the manifest timestamps the
output is a pure function of the config.
"""
from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np

from . import __version__
from .brachistochrone import (
    constrained_residual,
    el_residual,
    functional_time,
    gateaux_derivative,
    second_derivative_test,
    solve_unconstrained,
)
from .config import ExperimentConfig
from .core import basis_state, projector, to_micro_ev
from .decay import aic, classify
from .dynamics import evolve_lindblad, evolve_schrodinger, sweep_final_states
from .ergotropy import (
    ErgotropyTrace,
    charging_metrics,
    crossing_times,
    ergotropy_trace,
    power_improvement,
    self_discharge_ergotropy,
)
from .errors import ConfigError, InvalidInputError, NotChargedError, NotCriticalError, StepSizeError
from .protocols import ChargeMode, Family, ProtocolFamily, check_boundaries, discretize
from .storage import (
    RunManifest,
    read_schedule,
    write_csv,
    write_ergotropy_trace,
    write_iterations,
    write_json,
    write_measurement_record,
    write_schedule,
    write_trajectory,
)
from .tomography import fidelity, reconstruct, simulate_measurements, trace_distance

log = logging.getLogger(__name__)

SUMMARY_HEADER = ("family", "mode", "tau_s", "final_fraction", "tau_c_s", "mean_power")
TIMES_HEADER = ("family", "mode", "tau_c_s", "mean_power_ueV_per_s", "improvement_pct")


class _Run:
    """Output directory plus the manifest that tracks what lands in it."""

    def __init__(self, config: ExperimentConfig, command: str):
        self.root = Path(config.output_dir) / command
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(command, config.raw, __version__)
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        return self.root / name

    def track(self, path: Path) -> Path:
        self.manifest.add(self.root, path)
        self.files.append(path)
        return path

    def close(self) -> list[Path]:
        self.manifest.write(self.root)
        return self.files


def _protocols(config: ExperimentConfig, tau: float, n_grid: int):
    """Every (family, mode) protocol at duration tau; unconstrained shapes are solved once per mode."""
    out = {}
    for mode in ChargeMode:
        for family in Family:
            if family is Family.NUMERICAL_UNCONSTRAINED:
                proto = solve_unconstrained(mode, tau, config.omega_max, n_grid=n_grid).family
            else:
                proto = ProtocolFamily(family, config.omega_max, tau, mode)
            out[family, mode] = proto
    return out


def _tag(family, mode) -> str:
    return f"{family.value}_{mode.value}"


def cmd_protocol(config: ExperimentConfig) -> list[Path]:
    """Write one schedule CSV per family and mode, then re-read each file to check it."""
    run = _Run(config, "protocol")
    n = config.get("charge.samples")
    protocols = _protocols(config, config.protocol.tau, config.get("brachistochrone.n_grid"))
    for (family, mode), proto in protocols.items():
        schedule = discretize(proto, n)
        check_boundaries(schedule)
        path = write_schedule(run.path(f"schedule_{_tag(family, mode)}.csv"), schedule)
        t, o1, o2 = read_schedule(path)
        if not (np.array_equal(t, schedule.times) and np.array_equal(o1, schedule.omega1)):
            raise OSError(f"{path} did not read back identically")
        if family in (Family.LINEAR_RAMP, Family.CYCLOID_LINEAR):
            if np.max(np.abs(o1 + o2 - config.omega_max)) > 1e-9 * config.omega_max:
                raise InvalidInputError(f"{path}: fields violate omega1 + omega2 = omega_max")
        run.track(path)
    return run.close()


def tau_c_sweep(config: ExperimentConfig, protocols=None):
    """
    Charging time of every family and mode from a fine sweep of durations.

    For each duration the final state is scored; tau_c is where the final
    ergotropy first reaches the threshold, linearly interpolated in tau.
    Returns {(family, mode): ChargingMetrics or None}.
    """
    step = float(config.get("sweep.fine_step_s"))
    taus = np.arange(step, float(config.tau_sweep[-1]) + 0.5 * step, step)
    if protocols is None:
        protocols = _protocols(config, 1.0, config.get("brachistochrone.n_grid"))
    e_max = to_micro_ev(config.levels.e_max)
    energies = config.levels.energies
    out = {}
    for key, proto in protocols.items():
        try:
            psi = sweep_final_states(proto, taus, config.dt)
        except StepSizeError as exc:
            family, mode = key
            raise StepSizeError(f"{family.value}/{mode.value} sweep at tau up to {taus[-1]:.4g} s: {exc}") from exc
        values = to_micro_ev(np.abs(psi) ** 2 @ energies)  # pure final state: ergotropy = energy
        trace = ErgotropyTrace(taus, np.minimum(values, e_max), e_max)
        try:
            out[key] = charging_metrics(trace, config.threshold)
        except NotChargedError:
            out[key] = None
    return out


def cmd_charge(config: ExperimentConfig) -> list[Path]:
    """Coherent charging runs over the duration sweep, their ergotropy traces and a summary."""
    run = _Run(config, "charge")
    n_grid = config.get("brachistochrone.n_grid")
    samples = config.get("charge.samples")
    store = config.get("charge.store_every")
    shapes = _protocols(config, 1.0, n_grid)
    ground = basis_state(0)
    summary = []
    for tau in config.tau_sweep:
        for (family, mode), proto in shapes.items():
            schedule = discretize(proto.with_tau(float(tau)), samples)
            try:
                traj = evolve_schrodinger(ground, schedule, min(config.dt, schedule.dt), store_every=store)
            except StepSizeError as exc:
                raise StepSizeError(f"{family.value}/{mode.value} at tau = {tau:.4g} s: {exc}") from exc
            trace = ergotropy_trace(traj.times, traj.states, config.levels)
            name = f"trace_{_tag(family, mode)}_{tau * 1e9:.6g}ns.csv"
            run.track(write_ergotropy_trace(run.path(name), trace))
            try:
                metrics = charging_metrics(trace, config.threshold)
                tau_c, power = metrics.tau_c, metrics.mean_power
            except NotChargedError:
                tau_c = power = math.nan
            summary.append((family.value, mode.value, float(tau), float(trace.fraction[-1]), tau_c, power))
    run.track(write_csv(run.path("charge_summary.csv"), SUMMARY_HEADER, summary))

    times = tau_c_sweep(config, shapes)
    rows = []
    for family in Family:
        stable, unstable = times[family, ChargeMode.STABLE], times[family, ChargeMode.UNSTABLE]
        gain = power_improvement(stable, unstable) if stable and unstable else math.nan
        for mode, m in ((ChargeMode.STABLE, stable), (ChargeMode.UNSTABLE, unstable)):
            rows.append((family.value, mode.value, m.tau_c if m else math.nan, m.mean_power if m else math.nan,
                         gain if mode is ChargeMode.UNSTABLE else math.nan))
    run.track(write_csv(run.path("charging_times.csv"), TIMES_HEADER, rows))
    return run.close()


def cmd_discharge(config: ExperimentConfig) -> list[Path]:
    """Free decay from the fully charged state: numeric and closed-form traces, crossings, verdict."""
    run = _Run(config, "discharge")
    traj = evolve_lindblad(projector(2), config.rates, dt=float(config.get("discharge.dt_s")),
                           t_final=float(config.get("discharge.t_final_s")),
                           store_every=config.get("discharge.store_every"))
    run.track(write_trajectory(run.path("discharge_trajectory.csv"), traj, config.levels))
    numeric = ergotropy_trace(traj.times, traj.states, config.levels)
    e_max = numeric.normalization
    analytic = ErgotropyTrace(
        traj.times, np.minimum(to_micro_ev(self_discharge_ergotropy(traj.times, config.rates, config.levels)), e_max),
        e_max,
    )
    run.track(write_ergotropy_trace(run.path("ergotropy_numeric.csv"), numeric))
    run.track(write_ergotropy_trace(run.path("ergotropy_analytic.csv"), analytic))

    try:
        crossings = list(crossing_times(config.rates))
    except InvalidInputError as exc:
        crossings, note = None, str(exc)
    else:
        note = None
    run.track(write_json(run.path("crossing_times.json"), {"crossing_times_s": crossings, "note": note}))

    verdict = classify(numeric)
    n, y_max = numeric.times.size, float(numeric.ergotropy.max())
    report = {
        "model": verdict.model,
        "aic_difference": verdict.evidence,
        "single": {**_fit_dict(verdict.single), "aic": aic(verdict.single, n, y_max)},
        "double": {**_fit_dict(verdict.double), "aic": aic(verdict.double, n, y_max)},
        "max_fraction_deviation_numeric_vs_analytic": float(np.max(np.abs(numeric.fraction - analytic.fraction))),
        "trace_drift": traj.drift,
    }
    run.track(write_json(run.path("discharge_verdict.json"), report))
    return run.close()


def _fit_dict(fit):
    return {
        "amplitudes_ueV": list(fit.amplitudes),
        "time_constants_s": list(fit.time_constants),
        "rss": fit.rss,
        "degenerate": fit.degenerate,
        "ill_conditioned": fit.ill_conditioned,
    }


def cmd_brachistochrone(config: ExperimentConfig) -> list[Path]:
    """Unconstrained Euler-Lagrange solutions, functional values and second-variation verdicts."""
    run = _Run(config, "brachistochrone")
    tau, n_grid = config.protocol.tau, config.get("brachistochrone.n_grid")
    n_modes = config.get("brachistochrone.n_modes")
    functional, verdicts = {}, {}
    for mode in ChargeMode:
        solution = solve_unconstrained(mode, tau, config.omega_max, n_grid=n_grid)
        check_boundaries(solution)
        run.track(write_schedule(run.path(f"unconstrained_{mode.value}.csv"), solution))
        run.track(write_iterations(run.path(f"solver_iterations_{mode.value}.csv"), solution.family.shape.history))
        r1, r2 = el_residual(solution)
        run.track(write_csv(run.path(f"el_residual_{mode.value}.csv"), ("t_s", "r1", "r2"),
                            zip(solution.times, r1, r2)))
        for family in Family:
            if family is Family.NUMERICAL_UNCONSTRAINED:
                schedule = solution
            else:
                schedule = discretize(ProtocolFamily(family, config.omega_max, tau, mode), n_grid)
            value = functional_time(schedule).value
            tag = _tag(family, mode)
            functional[tag] = {"value_s": value, "value_times_omega_max2_tau": value * config.omega_max**2 * tau}
            entry = {"gateaux_relative": gateaux_derivative(schedule)}
            try:
                test = second_derivative_test(schedule, n_modes=n_modes)
            except NotCriticalError as exc:
                entry.update(verdict="NotCritical", residual=exc.residual)
            else:
                entry.update(verdict=test.verdict, residual=test.residual,
                             min_lambda=float(test.lambda_terms.min()), lambda_terms=test.lambda_terms)
            verdicts[tag] = entry
    run.track(write_json(run.path("functional.json"), functional))
    run.track(write_json(run.path("criticality.json"), verdicts))
    return run.close()


def cmd_tomography(config: ExperimentConfig) -> list[Path]:
    """Tomography of the state halfway (by default) through the configured charge."""
    shots = config.get("tomography.shots")
    if shots is not None and config.seed is None:
        raise ConfigError("sampled tomography needs run.seed (or --seed) for reproducibility")
    run = _Run(config, "tomography")
    proto = config.protocol
    if proto.family is Family.NUMERICAL_UNCONSTRAINED:
        proto = solve_unconstrained(proto.mode, proto.tau, proto.omega_max,
                                    n_grid=config.get("brachistochrone.n_grid")).family
    schedule = discretize(proto, config.get("charge.samples"))
    traj = evolve_schrodinger(basis_state(0), schedule, min(config.dt, schedule.dt))
    at = config.get("tomography.fraction") * proto.tau
    k = int(np.argmin(np.abs(traj.times - at)))
    psi = traj.states[k]
    truth = np.outer(psi, psi.conj())

    exact = simulate_measurements(truth)
    run.track(write_measurement_record(run.path("measurements_exact.csv"), exact))
    rho = reconstruct(exact)
    report = {
        "sample_time_s": float(traj.times[k]),
        "state": psi,
        "exact": {"fidelity": fidelity(rho, truth), "trace_distance": trace_distance(rho, truth)},
    }
    if shots is not None:
        sampled = simulate_measurements(truth, shots, seed=config.seed)
        run.track(write_measurement_record(run.path("measurements_sampled.csv"), sampled))
        rho_s = reconstruct(sampled)
        report["sampled"] = {
            "shots": shots,
            "seed": config.seed,
            "fidelity": fidelity(rho_s, truth),
            "trace_distance": trace_distance(rho_s, truth),
            "reconstruction": rho_s,
        }
    run.track(write_json(run.path("tomography_report.json"), report))
    return run.close()


COMMANDS = {
    "protocol": cmd_protocol,
    "charge": cmd_charge,
    "discharge": cmd_discharge,
    "brachistochrone": cmd_brachistochrone,
    "tomography": cmd_tomography,
}
