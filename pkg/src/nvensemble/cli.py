"""Command-line entry point: ``nvensemble <subcommand> --config job.yaml --out dir``.

Exit codes: 0 success (including non-converged optimisations), 2 config
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import experiments, fields, geometry, grape, jobs, spin
from .config import ConfigError, JobConfig, load_config
from .fileio import format_matrix, read_pulse_csv, write_csv, write_manifest, write_pulse_csv
from .propagation import bloch_array, populations, propagate

__all__ = ["main", "build_parser"]

log = logging.getLogger("nvensemble")

_LEVELS = {"+1": 1, "0": 0, "-1": -1}
TRAJ_HEADER = ["step", "t_ns", "member_id", "xp", "yp", "zp", "xm", "ym", "zm", "pop0", "pop+1", "pop-1"]


class Run:
    """Per-invocation context: config, output directory, executor, manifest bookkeeping."""

    def __init__(self, args):
        self.args = args
        self.started = time.perf_counter()
        if args.config:
            try:
                self.cfg, self.sha = load_config(args.config)
            except FileNotFoundError as exc:
                raise ConfigError(f"config file not found: {args.config}") from exc
            self.base_dir = Path(args.config).resolve().parent
        else:
            self.cfg, self.sha, self.base_dir = JobConfig(), None, Path.cwd()
        self.seed = args.seed if args.seed is not None else self.cfg.optimizer.seed
        self.out = Path(args.out)
        self.outputs: list[str] = []

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs.append(name)
        return self.out / name

    @contextmanager
    def executor(self):
        n = self.args.threads
        if n == 0:
            n = os.cpu_count() or 1
        if n <= 1:
            yield None
            return
        with ThreadPoolExecutor(max_workers=n) as pool:
            yield pool

    def finish(self, subcommand: str, extra: dict | None = None) -> int:
        write_manifest(
            self.path("manifest.json"),
            subcommand=subcommand,
            config_sha256=self.sha,
            seed=self.seed,
            wall_time_s=time.perf_counter() - self.started,
            outputs=[o for o in self.outputs if o != "manifest.json"],
            extra=extra,
        )
        return 0


def cmd_rotations(run: Run) -> int:
    cut = run.args.cut or run.cfg.crystal.cut
    rots = geometry.all_pas_rotations(cut)
    rows = []
    print(f"lab -> PAS rotations, ({cut}) cut")
    for o, r in rots.items():
        print(f"NV {o.label}  det={np.linalg.det(r.matrix):.12g}")
        for line in format_matrix(r.matrix):
            print(line)
        for i, row in enumerate(r.matrix):
            rows.append([o.label, "xyz"[i], *row])
    write_csv(run.path("rotations.csv"), ["orientation", "pas_axis", "lab_x", "lab_y", "lab_z"], rows)
    return run.finish("rotations", {"cut": cut})


def cmd_fields(run: Run) -> int:
    cfg = run.cfg
    geom = jobs.microstrip(cfg)
    g = cfg.fields.grid
    xs = np.linspace(g.x_min_um, g.x_max_um, g.nx)
    zs = np.linspace(g.z_min_um, g.z_max_um, g.nz)
    with run.executor() as pool:
        if pool is None:
            rows = fields.field_grid(geom, xs, zs)
        else:
            chunks = pool.map(lambda z: fields.field_grid(geom, xs, [z]), zs)
            rows = [r for chunk in chunks for r in chunk]
    cols = ["x", "z", "wx1", "wz1", "wx2", "wz2", "eta_deg"]
    write_csv(run.path("fields.csv"), cols, ([r[c] for c in cols] for r in rows))
    extra = {}
    try:
        x, z, _ = jobs.focal_fields(cfg)
        extra = {"focal_x_um": round(x, 9), "focal_z_um": z}
        print(f"focal point: x = {x:.6f} um, z = {z:g} um")
    except ConfigError as exc:
        log.warning("%s", exc)
    return run.finish("fields", extra)


def cmd_optimize(run: Run) -> int:
    job = jobs.optimization_job(run.cfg, run.seed)
    doubling = run.cfg.optimizer.doubling
    attempts = None
    with run.executor() as pool:
        if doubling is not None:
            _, result, attempts = grape.doubling_search(
                job, start=doubling.start, max_steps=doubling.max_steps, executor=pool
            )
        else:
            result = grape.optimize(job, executor=pool)
    final_job = job.with_steps(result.pulse.n_steps)
    write_pulse_csv(run.path("pulse.csv"), result.pulse)
    write_csv(
        run.path("fidelities.csv"),
        ["member_id", "group", "weight", "fidelity"],
        ([m.name, m.group, m.weight, result.fidelities[m.name]] for m in final_job.members),
    )
    write_csv(run.path("iterations.csv"), ["iteration", "objective"], enumerate(result.history))
    report = {
        "converged": result.converged,
        "min_fidelity": round(result.min_fidelity, 12),
        "n_steps": result.pulse.n_steps,
        "dt_ns": result.pulse.dt_ns,
        "iterations": result.iterations,
        "stop_reason": result.stop_reason,
        "goal": job.goal,
    }
    if attempts is not None:
        report["doubling_attempts"] = [[n, round(f, 12)] for n, f in attempts]
    run.path("report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"converged={str(result.converged).lower()} min_fidelity={result.min_fidelity:.6f} N={result.pulse.n_steps}")
    return run.finish("optimize")


def _load_pulse(run: Run):
    p = run.cfg.pulse
    if p is None or p.file is None:
        raise ConfigError("pulse.file: a pulse CSV is required for this subcommand")
    path = Path(p.file)
    if not path.is_absolute():
        path = run.base_dir / path
    try:
        return read_pulse_csv(path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _trajectories(run: Run, initial_level: str):
    pulse = _load_pulse(run)
    members = jobs.ensemble(run.cfg, pulse.mode)
    rho0 = spin.projector(_LEVELS[initial_level])
    with run.executor() as pool:
        try:
            trajs = propagate(members, pulse, rho0, executor=pool)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return pulse, trajs


def cmd_simulate(run: Run) -> int:
    pulse, trajs = _trajectories(run, run.cfg.simulate.initial)
    rows = []
    for tr in trajs:
        bloch = bloch_array(tr.matrices)
        pops = populations(tr.matrices)
        for k in range(len(tr.times_us)):
            rows.append([k, k * pulse.dt_ns, tr.member, *bloch[k], pops[k, 1], pops[k, 0], pops[k, 2]])
    write_csv(run.path("trajectory.csv"), TRAJ_HEADER, rows)
    return run.finish("simulate")


def cmd_bloch_export(run: Run) -> int:
    header = ["step", "t_ns", "member_id", "initial", "xp", "yp", "zp", "xm", "ym", "zm"]
    rows = []
    for level in run.cfg.simulate.bloch_initials:
        pulse, trajs = _trajectories(run, level)
        for tr in trajs:
            bloch = bloch_array(tr.matrices)
            for k in range(len(tr.times_us)):
                rows.append([k, k * pulse.dt_ns, tr.member, level, *bloch[k]])
    write_csv(run.path("bloch.csv"), header, rows)
    return run.finish("bloch-export")


def cmd_rabi_scan(run: Run) -> int:
    r = run.cfg.rabi
    members = jobs.base_members(run.cfg, "iq")
    dthetas = r.dtheta_deg.values()
    with run.executor() as pool:
        pts = experiments.rabi_scan(members, dthetas, scan_duration_us=r.scan_duration_us, dt_ns=r.dt_ns, executor=pool)
    write_csv(
        run.path("rabi_scan.csv"),
        ["member_id", "dtheta_deg", "freq_mhz", "width_mhz", "periods", "flagged"],
        ([p.member, p.dtheta_deg, p.freq_mhz, p.width_mhz, p.periods, p.flagged] for p in pts),
    )
    fit_rows = []
    for m in members:
        mine = [p for p in pts if p.member == m.name]
        fit = experiments.fit_cos_squared([p.dtheta_deg for p in mine], [p.freq_mhz for p in mine])
        fit_rows.append([m.name, m.group, fit.a, fit.b, fit.delta0_deg, fit.r2])
    write_csv(run.path("rabi_fit.csv"), ["member_id", "group", "a_mhz", "b_mhz", "delta0_deg", "r2"], fit_rows)
    if any(p.flagged for p in pts):
        log.warning("some scan points cover fewer than three periods (see 'flagged')")
    return run.finish("rabi-scan")


def cmd_spinlock(run: Run) -> int:
    s = run.cfg.spinlock
    members = jobs.base_members(run.cfg, "iq")
    times = s.evolve_times_us.values()
    try:
        sig = experiments.spin_locking(members, s.lock_group, times, lock_amplitude=s.lock_amplitude)
    except KeyError as exc:
        raise ConfigError(f"spinlock.lock_group: {exc.args[0]}") from exc
    rows = [[t, name, vals[i]] for name, vals in sig.items() for i, t in enumerate(times)]
    write_csv(run.path("spinlock.csv"), ["evolve_time_us", "member_id", "pop0"], rows)
    write_csv(
        run.path("spinlock_summary.csv"),
        ["member_id", "group", "locked", "band_width"],
        ([m.name, m.group, m.group == s.lock_group, float(np.ptp(sig[m.name]))] for m in members),
    )
    return run.finish("spinlock")


COMMANDS = {
    "rotations": (cmd_rotations, "print and save the lab -> PAS rotation matrices"),
    "fields": (cmd_fields, "microstrip field grid and inter-channel angle"),
    "optimize": (cmd_optimize, "GRAPE pulse optimisation"),
    "simulate": (cmd_simulate, "propagate a pulse file through the ensemble"),
    "rabi-scan": (cmd_rabi_scan, "dual-channel Rabi frequency vs relative phase"),
    "spinlock": (cmd_spinlock, "orientation-selective spin-locking sequence"),
    "bloch-export": (cmd_bloch_export, "Bloch-sphere trajectories from each basis state"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nvensemble", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="YAML job file")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, default=None, help="override optimizer.seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = one per CPU")
        if name == "rotations":
            p.add_argument("--cut", choices=["100", "110", "111"], default=None)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command != "rotations" and args.config is None:
        print("error: --config is required", file=sys.stderr)
        return 2
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return 2
    try:
        run = Run(args)
        return args.func(run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
