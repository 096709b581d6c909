"""Job configuration schema and loader.

A job is a single YAML document.  Every section is optional at load time;
each subcommand checks for the sections it needs.  Unknown keys are
rejected, and validation errors carry the dotted field path together with
the line in the source file.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

__all__ = [
    "ConfigError",
    "JobConfig",
    "load_config",
    "parse_config",
]


class ConfigError(Exception):
    """Schema or content problem in a job file (CLI exit code 2)."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CrystalSection(_Model):
    cut: Literal["100", "110", "111"] = "100"
    orientations: Optional[list[str]] = None
    group_degenerate: bool = True

    @field_validator("cut", mode="before")
    @classmethod
    def _cut_str(cls, v):
        return str(v)


class GeometrySection(_Model):
    strip_width_um: float = Field(127.0, gt=0)
    gap_um: float = Field(150.0, ge=0)
    thickness_um: float = Field(17.5, gt=0)
    current1_a: float = 0.02
    current2_a: float = 0.02
    gamma_rad_per_us_per_t: Optional[float] = None
    edge_eps_um: float = Field(0.01, gt=0)


class FocalPointSection(_Model):
    x_um: Optional[float] = None
    z_um: float = 70.0
    eta_deg: float = 115.0
    side: Literal[1, 2] = 1


class GridSection(_Model):
    x_min_um: float = -50.0
    x_max_um: float = 454.0
    nx: int = Field(101, ge=1)
    z_min_um: float = 10.0
    z_max_um: float = 300.0
    nz: int = Field(30, ge=1)


class FieldsSection(_Model):
    geometry: GeometrySection = GeometrySection()
    focal_point: FocalPointSection = FocalPointSection()
    grid: GridSection = GridSection()


class HamiltonianSection(_Model):
    mode: Literal["apriori", "phenomenological"] = "phenomenological"
    control_mode: Optional[Literal["amplitude", "iq"]] = None
    zfs_mhz: float = 2870.0
    omega_t_mhz: float = 2870.0
    eta_deg: float = 115.0
    dtheta_deg: float = 270.0
    omega_nv_mhz: list[float] = Field(default_factory=lambda: [2.64, 1.03])
    groups: Optional[list[str]] = None

    @model_validator(mode="after")
    def _check(self):
        if any(w <= 0 for w in self.omega_nv_mhz):
            raise ValueError("omega_nv_mhz entries must be positive")
        if self.groups is not None and len(self.groups) != len(self.omega_nv_mhz):
            raise ValueError("groups must have one name per omega_nv_mhz entry")
        return self


class RobustnessSection(_Model):
    zfs_offsets_mhz: list[float] = Field(default_factory=lambda: [0.0])
    hyperfine: bool = False
    hyperfine_mhz: float = 2.16


class PulseSection(_Model):
    n_steps: int = Field(250, ge=1)
    dt_ns: float = Field(gt=0)
    bounds: Optional[tuple[float, float]] = None
    file: Optional[str] = None


class TargetEntry(_Model):
    kind: Literal["map", "state"] = "map"
    identity: bool = False
    alpha_deg: float = 180.0
    axis: tuple[float, float, float] = (0.0, 1.0, 0.0)
    sign: Literal["plus", "minus"] = "plus"
    initial: Literal["0", "+1", "-1"] = "0"
    final: Literal["0", "+1", "-1"] = "0"

    @field_validator("initial", "final", mode="before")
    @classmethod
    def _level(cls, v):
        return {1: "+1", 0: "0", -1: "-1", "1": "+1"}.get(v, v)


class TargetSection(TargetEntry):
    per_group: Optional[dict[str, TargetEntry]] = None


class DoublingSection(_Model):
    start: int = Field(32, ge=1)
    max_steps: int = Field(4096, ge=1)


class OptimizerSection(_Model):
    goal: float = Field(0.99, gt=0, le=1)
    max_iter: int = Field(2000, ge=0)
    smooth_lambda: float = Field(0.0, ge=0)
    seed: int = Field(0, ge=0)
    init_scale: float = Field(1.0, ge=0)
    init_center: Optional[float] = None
    grad_floor: float = Field(1e-9, ge=0)
    doubling: Optional[DoublingSection] = None


class RangeSpec(_Model):
    start: float
    stop: float
    step: Optional[float] = Field(None, gt=0)
    num: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _one_of(self):
        if (self.step is None) == (self.num is None):
            raise ValueError("give exactly one of step or num")
        return self

    def values(self):
        import numpy as np

        if self.num is not None:
            return np.linspace(self.start, self.stop, self.num)
        n = int(np.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(max(n, 0))


class RabiSection(_Model):
    dtheta_deg: RangeSpec = RangeSpec(start=0.0, stop=355.0, step=5.0)
    scan_duration_us: float = Field(20.0, gt=0)
    dt_ns: float = Field(10.0, gt=0)


class SpinlockSection(_Model):
    lock_group: str = "A"
    evolve_times_us: RangeSpec = RangeSpec(start=0.0, stop=10.0, num=201)
    lock_amplitude: float = Field(1.0, ge=0, le=1)


class SimulateSection(_Model):
    initial: Literal["0", "+1", "-1"] = "0"
    bloch_initials: list[Literal["0", "+1", "-1"]] = Field(default_factory=lambda: ["0", "+1", "-1"])

    @field_validator("initial", mode="before")
    @classmethod
    def _level(cls, v):
        return {1: "+1", 0: "0", -1: "-1", "1": "+1"}.get(v, v)


class JobConfig(_Model):
    crystal: CrystalSection = CrystalSection()
    fields: FieldsSection = FieldsSection()
    hamiltonian: HamiltonianSection = HamiltonianSection()
    robustness: RobustnessSection = RobustnessSection()
    pulse: Optional[PulseSection] = None
    target: Optional[TargetSection] = None
    optimizer: OptimizerSection = OptimizerSection()
    rabi: RabiSection = RabiSection()
    spinlock: SpinlockSection = SpinlockSection()
    simulate: SimulateSection = SimulateSection()


def _node_line(root, loc) -> int | None:
    """1-based line of the YAML node addressed by a pydantic ``loc`` tuple."""
    node = root
    line = None if node is None else node.start_mark.line + 1
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == str(key):
                    nxt = v
                    line = k.start_mark.line + 1
                    break
            if nxt is None:
                return line
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def parse_config(text: str, source: str = "<config>") -> JobConfig:
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        return JobConfig.model_validate(data)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            loc = tuple(p for p in err["loc"] if not (isinstance(p, str) and p.startswith("function-")))
            path = ".".join(str(p) for p in loc) or "<root>"
            where = _node_line(root, loc)
            at = f" (line {where})" if where else ""
            lines.append(f"{source}: {path}{at}: {err['msg']}")
        raise ConfigError("\n".join(lines)) from None


def load_config(path: str | Path) -> tuple[JobConfig, str]:
    """Parse ``path``; returns the config and the sha256 of its bytes."""
    raw = Path(path).read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 text") from exc
    return parse_config(text, str(path)), digest
