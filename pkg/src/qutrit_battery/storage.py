"""
CSV and JSON persistence with lossless floats, plus run manifests.

Floats are written with ``repr``, the shortest decimal string that parses
back to the same double, so every file round-trips exactly and identical
runs produce identical bytes.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .core import to_micro_ev
from .errors import InvalidInputError

SCHEDULE_HEADER = ("t_s", "omega1_rad_s", "omega2_rad_s")
TRAJECTORY_HEADER = (
    "t_s", "p0", "p1", "p2", "re_r01", "im_r01", "re_r02", "im_r02", "re_r12", "im_r12", "energy_ueV",
)
ERGOTROPY_HEADER = ("t_s", "ergotropy_ueV", "fraction_of_max")
RECORD_HEADER = ("rotation_index", "p0", "p1", "p2")
ITERATION_HEADER = ("iter", "residual_norm")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return repr(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return path


def read_csv(path, header=None):
    """Read a numeric CSV; returns (header, 2-D float array). Checks the header when given."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        found = tuple(next(reader))
        if header is not None and found != tuple(header):
            raise InvalidInputError(f"{path}: expected header {','.join(header)}, found {','.join(found)}")
        rows = [[float(v) for v in row] for row in reader]
    return found, np.array(rows, dtype=float).reshape(len(rows), len(found))


def write_schedule(path, schedule) -> Path:
    return write_csv(path, SCHEDULE_HEADER, zip(schedule.times, schedule.omega1, schedule.omega2))


def read_schedule(path):
    """Returns (times, omega1, omega2)."""
    _, data = read_csv(path, SCHEDULE_HEADER)
    return data[:, 0], data[:, 1], data[:, 2]


def write_trajectory(path, trajectory, levels) -> Path:
    rhos = trajectory.density_matrices()
    energies = levels.energies

    def rows():
        for t, rho in zip(trajectory.times, rhos):
            p = np.diagonal(rho).real
            yield (
                t, p[0], p[1], p[2],
                rho[0, 1].real, rho[0, 1].imag, rho[0, 2].real, rho[0, 2].imag, rho[1, 2].real, rho[1, 2].imag,
                to_micro_ev(float(p @ energies)),
            )

    return write_csv(path, TRAJECTORY_HEADER, rows())


def read_trajectory(path):
    """Returns (times, density matrices of shape (n, 3, 3), energies in μeV)."""
    _, d = read_csv(path, TRAJECTORY_HEADER)
    rho = np.zeros((d.shape[0], 3, 3), dtype=complex)
    for k in range(3):
        rho[:, k, k] = d[:, 1 + k]
    for col, (a, b) in zip((4, 6, 8), ((0, 1), (0, 2), (1, 2))):
        rho[:, a, b] = d[:, col] + 1j * d[:, col + 1]
        rho[:, b, a] = rho[:, a, b].conj()
    return d[:, 0], rho, d[:, 10]


def write_ergotropy_trace(path, trace) -> Path:
    return write_csv(path, ERGOTROPY_HEADER, zip(trace.times, trace.ergotropy, trace.fraction))


def read_ergotropy_trace(path, normalization):
    from .ergotropy import ErgotropyTrace

    _, d = read_csv(path, ERGOTROPY_HEADER)
    return ErgotropyTrace(d[:, 0], d[:, 1], normalization)


def write_measurement_record(path, record) -> Path:
    return write_csv(path, RECORD_HEADER, ((i + 1, *row) for i, row in enumerate(record.probabilities)))


def read_measurement_record(path, shots=None):
    from .tomography import MeasurementRecord

    _, d = read_csv(path, RECORD_HEADER)
    if not np.array_equal(d[:, 0], np.arange(1, d.shape[0] + 1)):
        raise InvalidInputError(f"{path}: rotation indices must run 1..9 in order")
    return MeasurementRecord(d[:, 1:], shots)


def write_iterations(path, history) -> Path:
    return write_csv(path, ITERATION_HEADER, enumerate(history))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """
    Record of one CLI run: configuration, tool version, timing and output digests.

    The manifest itself carries wall-clock timestamps, so it is the one file
    that differs between otherwise identical runs.
    """

    command: str
    config: dict
    version: str
    started: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    finished: str | None = None
    outputs: dict = field(default_factory=dict)  # relative path -> sha256

    def add(self, root, path) -> None:
        path = Path(path)
        self.outputs[str(path.relative_to(root))] = sha256_file(path)

    def write(self, root) -> Path:
        self.finished = datetime.now(timezone.utc).isoformat()
        payload = {
            "command": self.command,
            "config": self.config,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "outputs": dict(sorted(self.outputs.items())),
        }
        return write_json(Path(root) / "manifest.json", payload)


def verify_manifest(root) -> list[str]:
    """Paths whose current digest differs from the manifest (empty when all match)."""
    root = Path(root)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    bad = []
    for rel, digest in manifest["outputs"].items():
        target = root / rel
        if not target.exists() or sha256_file(target) != digest:
            bad.append(rel)
    return bad
