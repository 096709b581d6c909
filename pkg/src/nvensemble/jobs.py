"""Turn a :class:`~nvensemble.config.JobConfig` into library objects."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import spin
from .config import ConfigError, JobConfig, TargetEntry
from .fields import FieldDomainError, MicrostripGeometry, find_focal_x, strip_field
from .geometry import NvOrientation, pas_rotation
from .grape import OptimizationJob, TargetSpec
from .hamiltonians import (
    EnsembleMember,
    PhenomenologicalParams,
    apriori_member,
    apriori_subensembles,
    mhz,
    phenomenological_member,
    robustness_ensemble,
)

__all__ = [
    "microstrip",
    "focal_fields",
    "control_mode",
    "base_members",
    "ensemble",
    "target_spec",
    "member_targets",
    "optimization_job",
]

_LEVELS = {"+1": 1, "0": 0, "-1": -1}


def microstrip(cfg: JobConfig) -> MicrostripGeometry:
    g = cfg.fields.geometry
    kw = dict(
        strip_width_um=g.strip_width_um,
        gap_um=g.gap_um,
        thickness_um=g.thickness_um,
        current1_a=g.current1_a,
        current2_a=g.current2_a,
        edge_eps_um=g.edge_eps_um,
    )
    if g.gamma_rad_per_us_per_t is not None:
        kw["gamma"] = g.gamma_rad_per_us_per_t
    return MicrostripGeometry(**kw)


def focal_fields(cfg: JobConfig) -> tuple[float, float, list[np.ndarray]]:
    """Focal point ``(x, z)`` and both channel fields there, in rad/us."""
    geom = microstrip(cfg)
    fp = cfg.fields.focal_point
    try:
        x = fp.x_um if fp.x_um is not None else find_focal_x(geom, fp.z_um, fp.eta_deg, side=fp.side)
        vecs = [strip_field(geom, c, (x, fp.z_um)).as_array() * geom.rabi_scale() for c in (1, 2)]
    except (FieldDomainError, ValueError) as exc:
        raise ConfigError(f"fields.focal_point: {exc}") from exc
    return float(x), float(fp.z_um), vecs


def control_mode(cfg: JobConfig) -> str:
    h = cfg.hamiltonian
    if h.control_mode is not None:
        return h.control_mode
    return "amplitude" if h.mode == "phenomenological" else "iq"


def base_members(cfg: JobConfig, mode: str | None = None) -> list[EnsembleMember]:
    """Members before robustness expansion."""
    mode = mode or control_mode(cfg)
    h = cfg.hamiltonian
    zfs, omega_t = mhz(h.zfs_mhz), mhz(h.omega_t_mhz)
    if h.mode == "phenomenological":
        names = h.groups or [chr(ord("A") + i) for i in range(len(h.omega_nv_mhz))]
        out = []
        for name, w in zip(names, h.omega_nv_mhz):
            p = PhenomenologicalParams(mhz(w), h.eta_deg, h.dtheta_deg, zfs, omega_t)
            out.append(phenomenological_member(name, p, weight=1.0 / len(names), mode=mode))
        return out
    _, _, vecs = focal_fields(cfg)
    cut = cfg.crystal.cut
    if cfg.crystal.orientations is None and cfg.crystal.group_degenerate:
        return apriori_subensembles(cut, vecs, mode=mode, dtheta_deg=h.dtheta_deg, residual=zfs - omega_t)
    try:
        orients = [NvOrientation.parse(o) for o in (cfg.crystal.orientations or [o.value for o in NvOrientation])]
    except ValueError as exc:
        raise ConfigError(f"crystal.orientations: {exc}") from exc
    out = []
    for o in orients:
        m = apriori_member(
            o.label, pas_rotation(cut, o), vecs, mode=mode, dtheta_deg=h.dtheta_deg,
            residual=zfs - omega_t, weight=1.0 / len(orients),
        )
        out.append(replace(m, group=o.label, meta={"mode": mode, "orientations": [o.value]}))
    return out


def ensemble(cfg: JobConfig, mode: str | None = None) -> list[EnsembleMember]:
    r = cfg.robustness
    return robustness_ensemble(
        base_members(cfg, mode),
        [mhz(d) for d in r.zfs_offsets_mhz],
        r.hyperfine,
        hyperfine=mhz(r.hyperfine_mhz),
    )


def target_spec(entry: TargetEntry) -> TargetSpec:
    if entry.kind == "state":
        return TargetSpec.state(
            spin.projector(_LEVELS[entry.initial]),
            spin.projector(_LEVELS[entry.final]),
            label=f"{entry.initial}->{entry.final}",
        )
    if entry.identity:
        return TargetSpec.map(np.eye(3), label="identity")
    axis = np.asarray(entry.axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0:
        raise ConfigError("target.axis must be nonzero")
    spec = spin.RotationSpec(np.radians(entry.alpha_deg), tuple(axis / norm))
    return TargetSpec.map(spin.target_unitary(spec, entry.sign), label=f"{entry.alpha_deg:g}deg/{entry.sign}")


def member_targets(cfg: JobConfig, members) -> list[TargetSpec]:
    t = cfg.target
    if t is None:
        raise ConfigError("target: section is required for this subcommand")
    shared = target_spec(t)
    out = []
    for m in members:
        entry = None
        if t.per_group:
            entry = t.per_group.get(m.group)
        out.append(target_spec(entry) if entry is not None else shared)
    if t.per_group:
        known = {m.group for m in members}
        unknown = sorted(set(t.per_group) - known)
        if unknown:
            raise ConfigError(f"target.per_group: unknown groups {unknown}; available {sorted(known)}")
    return out


def optimization_job(cfg: JobConfig, seed: int | None = None) -> OptimizationJob:
    if cfg.pulse is None:
        raise ConfigError("pulse: section is required for this subcommand")
    mode = control_mode(cfg)
    members = ensemble(cfg, mode)
    o = cfg.optimizer
    bounds = cfg.pulse.bounds or ((0.0, 1.0) if mode == "amplitude" else (-1.0, 1.0))
    try:
        return OptimizationJob(
            members=members,
            targets=member_targets(cfg, members),
            n_steps=cfg.pulse.n_steps,
            dt_ns=cfg.pulse.dt_ns,
            bounds=bounds,
            goal=o.goal,
            max_iter=o.max_iter,
            smooth_lambda=o.smooth_lambda,
            seed=o.seed if seed is None else seed,
            init_scale=o.init_scale,
            init_center=o.init_center,
            grad_floor=o.grad_floor,
            mode=mode,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
