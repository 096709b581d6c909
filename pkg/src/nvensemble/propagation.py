"""Piecewise-constant propagation and Bloch-sphere readout."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import spin
from .hamiltonians import EnsembleMember
from .linalg import dagger, expm_hermitian

__all__ = [
    "ControlPulse",
    "Trajectory",
    "BlochPoint",
    "step_unitaries",
    "propagate",
    "propagate_member",
    "bloch_coordinates",
    "populations",
    "check_density_matrix",
]

_PLUS = spin.pseudo_spin_operators(spin.SubspaceSign.PLUS)
_MINUS = spin.pseudo_spin_operators(spin.SubspaceSign.MINUS)
_BLOCH_OPS = np.stack(
    [_PLUS["Sx"], _PLUS["Sy"], _PLUS["Sz"], _MINUS["Sx"], _MINUS["Sy"], _MINUS["Sz"]]
)


@dataclass(frozen=True, eq=False)
class ControlPulse:
    """Piecewise-constant controls with a fixed step.

    ``values`` has shape ``(n_steps, n_controls)``.  In ``"amplitude"`` mode the
    columns are channel amplitudes (Omega1, Omega2); in ``"iq"`` mode they are
    (I1, Q1, I2, Q2).
    """

    dt_ns: float
    values: np.ndarray
    mode: str = "amplitude"
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("pulse needs at least one step")
        if not self.dt_ns > 0:
            raise ValueError("dt_ns must be positive")
        if self.mode not in ("amplitude", "iq"):
            raise ValueError(f"unknown pulse mode {self.mode!r}")
        if not np.all(np.isfinite(v)):
            raise ValueError("pulse values must be finite")
        bounds = self.bounds if self.bounds is not None else ((0.0, 1.0) if self.mode == "amplitude" else (-1.0, 1.0))
        lo, hi = bounds
        if np.any(v < lo) or np.any(v > hi):
            raise ValueError(f"pulse values outside bounds [{lo}, {hi}]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "bounds", (float(lo), float(hi)))

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def dt_us(self) -> float:
        return self.dt_ns * 1e-3

    @property
    def duration_us(self) -> float:
        return self.n_steps * self.dt_us

    @classmethod
    def from_polar(cls, dt_ns: float, omega, theta_deg) -> "ControlPulse":
        """IQ pulse from per-step amplitudes and phases, both shaped (n, 2)."""
        omega = np.asarray(omega, dtype=float)
        th = np.radians(np.asarray(theta_deg, dtype=float))
        iq = np.stack([omega[:, 0] * np.cos(th[:, 0]), omega[:, 0] * np.sin(th[:, 0]),
                       omega[:, 1] * np.cos(th[:, 1]), omega[:, 1] * np.sin(th[:, 1])], axis=1)
        peak = max(1.0, float(np.max(np.abs(iq))))
        return cls(dt_ns, iq, "iq", (-peak, peak))

    def polar(self) -> tuple[np.ndarray, np.ndarray | None]:
        """Per-channel (amplitude, phase in degrees); phase is None in amplitude mode."""
        if self.mode == "amplitude":
            return self.values.copy(), None
        i = self.values[:, 0::2]
        q = self.values[:, 1::2]
        return np.hypot(i, q), np.degrees(np.arctan2(q, i))


class Trajectory(NamedTuple):
    """Per-step states (``kind == "state"``) or cumulative unitaries (``"map"``); index 0 is t = 0."""

    member: str
    kind: str
    times_us: np.ndarray
    matrices: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.matrices[-1]


class BlochPoint(NamedTuple):
    xp: float
    yp: float
    zp: float
    xm: float
    ym: float
    zm: float


def check_density_matrix(rho: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (3, 3):
        raise ValueError("density matrix must be 3x3")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-12:
        raise ValueError("density matrix trace is not 1")
    if np.min(np.linalg.eigvalsh(rho)) < -atol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def step_unitaries(member: EnsembleMember, controls: np.ndarray, dt_us: float) -> np.ndarray:
    """``exp(-i H_k dt)`` for every step, shape (n, 3, 3)."""
    controls = np.asarray(controls, dtype=float)
    if controls.shape[1] != member.n_controls:
        raise ValueError(
            f"pulse has {controls.shape[1]} controls but member {member.name!r} expects {member.n_controls}"
        )
    return expm_hermitian(member.hamiltonian(controls), dt_us)


def propagate_member(member: EnsembleMember, pulse: ControlPulse, initial=None) -> Trajectory:
    """Trajectory of one member; ``initial=None`` propagates the map from the identity."""
    us = step_unitaries(member, pulse.values, pulse.dt_us)
    n = us.shape[0]
    out = np.empty((n + 1, 3, 3), dtype=complex)
    if initial is None:
        kind = "map"
        out[0] = spin.IDENTITY
        for k in range(n):
            out[k + 1] = us[k] @ out[k]
    else:
        kind = "state"
        rho = check_density_matrix(initial)
        out[0] = rho
        cur = spin.IDENTITY
        cum = np.empty_like(us)
        for k in range(n):
            cur = us[k] @ cur
            cum[k] = cur
        out[1:] = cum @ rho @ dagger(cum)
    return Trajectory(member.name, kind, np.arange(n + 1) * pulse.dt_us, out)


def propagate(members: Sequence[EnsembleMember], pulse: ControlPulse, initial=None, *, executor=None) -> list[Trajectory]:
    """Propagate every member; ``executor`` (``concurrent.futures``) is optional, output order is fixed."""
    if executor is None:
        return [propagate_member(m, pulse, initial) for m in members]
    return list(executor.map(lambda m: propagate_member(m, pulse, initial), members))


def bloch_coordinates(rho) -> BlochPoint:
    """``Tr(S^± rho)`` for the plus and minus pseudo-spheres."""
    rho = np.asarray(rho, dtype=complex)
    vals = np.einsum("kij,ji->k", _BLOCH_OPS, rho).real
    return BlochPoint(*(float(v) for v in vals))


def bloch_array(rhos: np.ndarray) -> np.ndarray:
    """Vectorised :func:`bloch_coordinates`, shape (n, 6)."""
    return np.einsum("kij,nji->nk", _BLOCH_OPS, np.asarray(rhos)).real


def populations(rho) -> np.ndarray:
    """Diagonal in basis order (+1, 0, -1)."""
    return np.real(np.diagonal(np.asarray(rho), axis1=-2, axis2=-1)).copy()
