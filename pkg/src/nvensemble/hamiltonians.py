"""Internal, a priori, pseudo-spin and phenomenological NV Hamiltonians.

Units: every Hamiltonian is an angular frequency in rad/us.  User-facing
frequencies are MHz; convert with :func:`mhz` at the boundary.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import spin
from .geometry import PasRotation
from .linalg import chain_product, expm_hermitian

__all__ = [
    "mhz",
    "ZFS_MHZ",
    "HYPERFINE_N14_MHZ",
    "ControlValues",
    "AprioriCoefficients",
    "PseudoCoefficients",
    "PhenomenologicalParams",
    "EnsembleMember",
    "internal_hamiltonian",
    "apriori_coefficients",
    "control_coefficient_matrix",
    "apriori_hamiltonian",
    "pseudo_coefficients",
    "pseudo_hamiltonian",
    "phenomenological_hamiltonian",
    "phenomenological_controls",
    "phenomenological_member",
    "apriori_member",
    "apriori_subensembles",
    "robustness_ensemble",
    "lab_frame_propagator",
    "effective_propagator",
]

ZFS_MHZ = 2870.0
HYPERFINE_N14_MHZ = 2.16

_S = spin.spin1_basis()
_T = spin.twisted_operators()
SX, SY, SZ, SZ2 = _S["Sx"], _S["Sy"], _S["Sz"], _S["Sz2"]
SX_T, SY_T = _T["Sx_t"], _T["Sy_t"]


def mhz(f):
    """MHz -> rad/us."""
    return 2 * np.pi * np.asarray(f, dtype=float) if np.ndim(f) else 2 * np.pi * float(f)


@dataclass(frozen=True)
class ControlValues:
    """Envelope values for the two channels in Cartesian (I, Q) form."""

    i1: float = 0.0
    q1: float = 0.0
    i2: float = 0.0
    q2: float = 0.0

    @classmethod
    def from_polar(cls, omega1: float, theta1: float, omega2: float, theta2: float) -> "ControlValues":
        """Amplitudes and phases (radians) -> I = omega cos(theta), Q = omega sin(theta)."""
        if omega1 < 0 or omega2 < 0:
            raise ValueError("polar amplitudes must be non-negative")
        return cls(
            omega1 * np.cos(theta1), omega1 * np.sin(theta1), omega2 * np.cos(theta2), omega2 * np.sin(theta2)
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.i1, self.q1, self.i2, self.q2], dtype=float)

    @property
    def dtheta(self) -> float:
        return float(np.arctan2(self.q2, self.i2) - np.arctan2(self.q1, self.i1))


class AprioriCoefficients(NamedTuple):
    A: float
    B: float
    C: float
    D: float


class PseudoCoefficients(NamedTuple):
    """Weights of Sx+, Sy+, Sx-, Sy-."""

    A: float
    B: float
    C: float
    D: float


def internal_hamiltonian(delta: float) -> np.ndarray:
    """``delta * Sz^2`` (use delta = Delta - omega_T for the rotating-frame residual)."""
    return float(delta) * SZ2


def apriori_coefficients(rot: PasRotation, f1, f2, u: ControlValues) -> AprioriCoefficients:
    """Letter coefficients of ``A Sx + B Sy_t + C Sy + D Sx_t``.

    With ``R[i, j]`` the lab-axis-i / PAS-axis-j element (the transpose of
    ``rot.matrix``)::

        A =  1/2 sum_i R[i, x] (I1 w_i1 + I2 w_i2)
        B = -1/2 sum_i R[i, x] (Q1 w_i1 + Q2 w_i2)
        C =  1/2 sum_i R[i, y] (I1 w_i1 + I2 w_i2)
        D = -1/2 sum_i R[i, y] (Q1 w_i1 + Q2 w_i2)

    The y field components are kept even though the microstrips give zero.
    """
    w1 = _as_vec(f1)
    w2 = _as_vec(f2)
    r = np.asarray(rot.matrix).T
    field_i = u.i1 * w1 + u.i2 * w2
    field_q = u.q1 * w1 + u.q2 * w2
    return AprioriCoefficients(
        float(0.5 * (r[0, 0] * field_i[0] + r[1, 0] * field_i[1] + r[2, 0] * field_i[2])),
        float(-0.5 * (r[0, 0] * field_q[0] + r[1, 0] * field_q[1] + r[2, 0] * field_q[2])),
        float(0.5 * (r[0, 1] * field_i[0] + r[1, 1] * field_i[1] + r[2, 1] * field_i[2])),
        float(-0.5 * (r[0, 1] * field_q[0] + r[1, 1] * field_q[1] + r[2, 1] * field_q[2])),
    )


def control_coefficient_matrix(rot: PasRotation, fields: Sequence) -> np.ndarray:
    """4x4 map from (I1, Q1, I2, Q2) to (A, B, C, D); rows are the controls.

    A single-channel ``fields`` list is padded with a zero second channel.
    """
    fields = list(fields)
    if len(fields) == 1:
        fields.append(np.zeros(3))
    f1, f2 = fields
    rows = []
    for k in range(4):
        unit = np.zeros(4)
        unit[k] = 1.0
        rows.append(apriori_coefficients(rot, f1, f2, ControlValues(*unit)))
    return np.array(rows, dtype=float)


def apriori_hamiltonian(coeffs) -> np.ndarray:
    a, b, c, d = coeffs
    return a * SX + b * SY_T + c * SY + d * SX_T


def pseudo_coefficients(coeffs) -> PseudoCoefficients:
    """Rewrite ``A Sx + B Sy_t + C Sy + D Sx_t`` over Sx+, Sy+, Sx-, Sy-."""
    a, b, c, d = coeffs
    r = 1 / np.sqrt(2.0)
    return PseudoCoefficients(r * (a - d), -r * (b + c), r * (a + d), r * (c - b))


def pseudo_hamiltonian(pc) -> np.ndarray:
    p = spin.pseudo_spin_operators(spin.SubspaceSign.PLUS)
    m = spin.pseudo_spin_operators(spin.SubspaceSign.MINUS)
    a, b, c, d = pc
    return a * p["Sx"] + b * p["Sy"] + c * m["Sx"] + d * m["Sy"]


@dataclass(frozen=True)
class PhenomenologicalParams:
    """Measured control parameters of one sub-ensemble (angles in degrees)."""

    omega_nv: float  # rad/us
    eta_deg: float = 115.0
    dtheta_deg: float = 270.0
    zfs: float = mhz(ZFS_MHZ)
    omega_t: float = mhz(ZFS_MHZ)

    def __post_init__(self):
        if not self.omega_nv > 0:
            raise ValueError("omega_nv must be positive")

    @classmethod
    def from_mhz(cls, omega_nv_mhz: float, eta_deg: float = 115.0, dtheta_deg: float = 270.0, **kw):
        return cls(mhz(omega_nv_mhz), eta_deg, dtheta_deg, **kw)


def phenomenological_controls(
    p: PhenomenologicalParams, theta1_deg: float = 0.0, *, mode: str = "amplitude"
) -> np.ndarray:
    """Control operators of the measured-parameter model.

    ``"iq"`` mode returns the four operators multiplying (I1, Q1, I2, Q2)
    with channel 1 along ``Sx`` / ``Sy_t`` and channel 2 rotated by ``eta``.
    ``"amplitude"`` mode returns the two operators multiplying (Omega1,
    Omega2) at channel phases ``theta1_deg`` and ``dtheta_deg``.
    """
    eta = np.radians(p.eta_deg)
    iq = 0.5 * p.omega_nv * np.stack(
        [
            SX,
            SY_T,
            np.cos(eta) * SX + np.sin(eta) * SY,
            np.sin(eta) * SX_T + np.cos(eta) * SY_T,
        ]
    )
    if mode == "iq":
        return iq
    if mode != "amplitude":
        raise ValueError(f"unknown control mode {mode!r}")
    th1 = np.radians(theta1_deg)
    th2 = np.radians(p.dtheta_deg)
    return np.stack([np.cos(th1) * iq[0] + np.sin(th1) * iq[1], np.cos(th2) * iq[2] + np.sin(th2) * iq[3]])


def phenomenological_hamiltonian(
    p: PhenomenologicalParams, omega1: float, omega2: float, *, theta1_deg: float = 0.0
) -> np.ndarray:
    """Measured-parameter control Hamiltonian.

    ``theta1_deg`` rotates channel 1 into the twisted quadrature; the default
    of 0 reproduces the fixed-phase model used for pulse design.
    """
    for name, val in (("omega1", omega1), ("omega2", omega2)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name}={val} outside [0, 1]")
    g = phenomenological_controls(p, theta1_deg)
    return omega1 * g[0] + omega2 * g[1]


@dataclass(frozen=True, eq=False)
class EnsembleMember:
    """One element of the incoherent Hamiltonian distribution.

    ``H(u) = drift + sum_k u[k] * controls[k]`` with ``drift`` holding the
    ZFS residual, any detuning ``delta * Sz^2`` and hyperfine
    ``m * A_N * Sz``.
    """

    name: str
    controls: np.ndarray
    group: str = ""
    drift: np.ndarray = field(default_factory=lambda: np.zeros((3, 3), dtype=complex))
    weight: float = 1.0
    delta: float = 0.0
    hyperfine_m: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ctrl = np.asarray(self.controls, dtype=complex)
        if ctrl.ndim != 3 or ctrl.shape[1:] != (3, 3):
            raise ValueError("controls must have shape (k, 3, 3)")
        object.__setattr__(self, "controls", ctrl)
        object.__setattr__(self, "drift", np.asarray(self.drift, dtype=complex))
        if not self.weight >= 0:
            raise ValueError("member weight must be non-negative")
        if not self.group:
            object.__setattr__(self, "group", self.name)

    @property
    def n_controls(self) -> int:
        return self.controls.shape[0]

    def hamiltonian(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.drift + np.tensordot(u, self.controls, axes=(-1, 0))


def phenomenological_member(
    name: str,
    p: PhenomenologicalParams,
    *,
    weight: float = 1.0,
    theta1_deg: float = 0.0,
    mode: str = "amplitude",
) -> EnsembleMember:
    drift = internal_hamiltonian(p.zfs - p.omega_t)
    return EnsembleMember(
        name=name,
        controls=phenomenological_controls(p, theta1_deg, mode=mode),
        drift=drift,
        weight=weight,
        meta={"omega_nv": p.omega_nv, "eta_deg": p.eta_deg, "dtheta_deg": p.dtheta_deg, "mode": mode},
    )


def apriori_member(
    name: str,
    rot: PasRotation,
    fields: Sequence,
    *,
    mode: str = "iq",
    dtheta_deg: float = 0.0,
    residual: float = 0.0,
    weight: float = 1.0,
) -> EnsembleMember:
    """Member driven by the a priori Hamiltonian.

    ``fields`` are lab-frame field vectors already scaled to rad/us.  In
    ``"iq"`` mode the controls are (I1, Q1, I2, Q2); in ``"amplitude"`` mode
    they are (Omega1, Omega2) with channel 1 at phase 0 and channel 2 at
    ``dtheta_deg``.
    """
    coef = control_coefficient_matrix(rot, fields)
    ops = np.array([apriori_hamiltonian(row) for row in coef])
    if mode == "amplitude":
        dth = np.radians(dtheta_deg)
        ops = np.stack([ops[0], np.cos(dth) * ops[2] + np.sin(dth) * ops[3]])
    elif mode != "iq":
        raise ValueError(f"unknown control mode {mode!r}")
    return EnsembleMember(
        name=name, controls=ops, drift=internal_hamiltonian(residual), weight=weight, meta={"mode": mode}
    )


def apriori_subensembles(
    cut,
    fields: Sequence,
    *,
    mode: str = "iq",
    dtheta_deg: float = 0.0,
    residual: float = 0.0,
    rtol: float = 1e-9,
) -> list[EnsembleMember]:
    """One a priori member per degenerate orientation group of ``cut``.

    Groups are lettered A, B, ... in canonical order; each member's weight is
    the fraction of orientations it represents.
    """
    from .geometry import pas_rotation, subensemble_partition

    groups = subensemble_partition(cut, fields, rtol=rtol)
    out = []
    for letter, group in zip("ABCD", groups):
        out.append(
            replace(
                apriori_member(
                    "&".join(o.label for o in group),
                    pas_rotation(cut, group[0]),
                    fields,
                    mode=mode,
                    dtheta_deg=dtheta_deg,
                    residual=residual,
                    weight=len(group) / 4.0,
                ),
                group=letter,
                meta={"mode": mode, "orientations": [o.value for o in group]},
            )
        )
    return out


def robustness_ensemble(
    base: Sequence[EnsembleMember],
    zfs_offsets: Sequence[float] = (0.0,),
    hyperfine_levels: bool = False,
    *,
    hyperfine: float = mhz(HYPERFINE_N14_MHZ),
) -> list[EnsembleMember]:
    """Cartesian product of members x ZFS offsets x (optional) nitrogen m_I branches.

    Weights are the base weight times a uniform weight over offsets and
    branches, renormalised to sum to one.
    """
    base = list(base)
    if not base:
        raise ValueError("robustness_ensemble needs at least one base member")
    offsets = list(zfs_offsets) or [0.0]
    branches = (-1, 0, 1) if hyperfine_levels else (0,)
    out = []
    for member, delta, m in itertools.product(base, offsets, branches):
        drift = member.drift + delta * SZ2 + m * hyperfine * SZ
        suffix = []
        if len(offsets) > 1 or delta != 0.0:
            suffix.append(f"d{delta / (2 * np.pi) * 1e3:+.0f}kHz")
        if hyperfine_levels:
            suffix.append(f"m{m:+d}")
        out.append(
            replace(
                member,
                name=member.name + ("[" + ",".join(suffix) + "]" if suffix else ""),
                drift=drift,
                weight=member.weight / (len(offsets) * len(branches)),
                delta=member.delta + delta,
                hyperfine_m=m,
            )
        )
    total = sum(m.weight for m in out)
    if total <= 0:
        raise ValueError("ensemble weights sum to zero")
    return [replace(m, weight=m.weight / total) for m in out]


def effective_propagator(coeffs, duration: float, residual: float = 0.0) -> np.ndarray:
    h = apriori_hamiltonian(coeffs) + internal_hamiltonian(residual)
    return expm_hermitian(h, duration)


def lab_frame_propagator(
    rot: PasRotation,
    f1,
    f2,
    u: ControlValues,
    duration: float,
    *,
    zfs: float,
    omega_t: float,
    max_step: float | None = None,
    chunk: int = 200_000,
) -> np.ndarray:
    """Fine-step propagator of the full lab-frame Hamiltonian, returned in the rotating frame.

    ``H(t) = zfs Sz^2 + sum_j c_j(t) S_j`` with the PAS field
    ``c(t) = R (w1 C1(t) + w2 C2(t))`` and ``C_k(t) = I_k cos(wt) + Q_k sin(wt)``.
    The result ``exp(i omega_t Sz^2 T) U_lab(T)`` is directly comparable with
    the effective (rotating-wave) propagator.  Midpoint exponentials with
    step ``max_step`` (default ``1 / (200 omega_t)``).
    """
    if max_step is None:
        max_step = 1.0 / (200.0 * omega_t)
    n = int(np.ceil(duration / max_step))
    dt = duration / n
    w1 = _as_vec(f1)
    w2 = _as_vec(f2)
    m = np.asarray(rot.matrix)
    pas_i = m @ (u.i1 * w1 + u.i2 * w2)
    pas_q = m @ (u.q1 * w1 + u.q2 * w2)
    ops = np.stack([SX, SY, SZ])
    h_i = np.tensordot(pas_i, ops, axes=1)
    h_q = np.tensordot(pas_q, ops, axes=1)
    h0 = zfs * SZ2
    total = np.eye(3, dtype=complex)
    for start in range(0, n, chunk):
        k = np.arange(start, min(n, start + chunk))
        t = (k + 0.5) * dt
        h = h0 + np.cos(omega_t * t)[:, None, None] * h_i + np.sin(omega_t * t)[:, None, None] * h_q
        total = chain_product(expm_hermitian(h, dt)) @ total
    frame = expm_hermitian(-omega_t * SZ2, duration)
    return frame @ total


def _as_vec(f) -> np.ndarray:
    if hasattr(f, "as_array"):
        return f.as_array()
    v = np.asarray(f, dtype=float)
    if v.shape != (3,):
        raise ValueError("field vector must have 3 components")
    return v
