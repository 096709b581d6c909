"""CSV, pulse-file and run-manifest I/O.

Floats are written with 12 significant digits so that identical runs give
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import platform
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .propagation import ControlPulse

__all__ = ["fmt", "write_csv", "read_pulse_csv", "write_pulse_csv", "write_manifest", "format_matrix"]

PULSE_HEADER = ["step", "dt_ns", "omega1", "omega2"]
PHASE_HEADER = ["theta1_deg", "theta2_deg"]


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if v == 0.0:
            v = 0.0  # drop the sign of negative zero
        return f"{v:.12g}"
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_pulse_csv(path: Path, pulse: ControlPulse) -> Path:
    amp, phase = pulse.polar()
    if amp.shape[1] == 1:
        amp = np.concatenate([amp, np.zeros_like(amp)], axis=1)
    header = PULSE_HEADER + (PHASE_HEADER if phase is not None else [])
    rows = []
    for k in range(pulse.n_steps):
        row = [k, pulse.dt_ns, amp[k, 0], amp[k, 1]]
        if phase is not None:
            row += [phase[k, 0], phase[k, 1]]
        rows.append(row)
    return write_csv(path, header, rows)


def read_pulse_csv(path: Path) -> ControlPulse:
    """Amplitude-only pulse, or an IQ pulse when phase columns are present."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if header[:4] != PULSE_HEADER or header[4:] not in ([], PHASE_HEADER):
            raise ValueError(f"{path}: header must be {','.join(PULSE_HEADER)}[,{','.join(PHASE_HEADER)}]")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: pulse file has no steps")
    dts = {float(r["dt_ns"]) for r in rows}
    if len(dts) != 1:
        raise ValueError(f"{path}: dt_ns must be the same on every row")
    steps = [int(r["step"]) for r in rows]
    if steps != list(range(len(rows))):
        raise ValueError(f"{path}: steps must run 0..n-1 in order")
    amp = np.array([[float(r["omega1"]), float(r["omega2"])] for r in rows])
    dt = dts.pop()
    if len(header) == 6:
        phase = np.array([[float(r["theta1_deg"]), float(r["theta2_deg"])] for r in rows])
        return ControlPulse.from_polar(dt, amp, phase)
    return ControlPulse(dt, amp, "amplitude")


def write_manifest(path: Path, *, subcommand: str, config_sha256: str | None, seed: int | None,
                   wall_time_s: float, outputs: Sequence[str], extra: dict | None = None) -> Path:
    import scipy

    from . import __version__

    doc = {
        "subcommand": subcommand,
        "config_sha256": config_sha256,
        "seed": seed,
        "versions": {
            "nvensemble": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "outputs": list(outputs),
        "wall_time_s": round(float(wall_time_s), 6),
    }
    if extra:
        doc.update(extra)
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def format_matrix(m) -> list[str]:
    """Rows of ``m`` with 12 significant digits in fixed-width columns."""
    return ["".join(f"{fmt(float(v)):>20}" for v in row) for row in np.asarray(m)]
