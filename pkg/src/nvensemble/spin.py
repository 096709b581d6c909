"""Spin-1 operator algebra for the NV ground-state triplet.

All matrices are 3x3 complex numpy arrays in the basis ordered
(|+1>, |0>, |-1>), so ``Sz = diag(1, 0, -1)``.

The pseudo spin-1/2 operators are defined by their action on the two
two-level subspaces that share |0>:

* ``PLUS``  couples |0> <-> |+1>
* ``MINUS`` couples |0> <-> |-1>

On both Bloch spheres the +z pole is |0>, +x is (|0> + |±1>)/sqrt(2) and +y
is (|0> + i|±1>)/sqrt(2).  In this convention the spin-1 operators decompose
as::

    Sx   = ( Sx+ + Sx-) / sqrt(2)        Sy   = (-Sy+ + Sy-) / sqrt(2)
    Sx_t = (-Sx+ + Sx-) / sqrt(2)        Sy_t = -( Sy+ + Sy-) / sqrt(2)

where ``Sx_t = i[Sy, Sz^2]`` and ``Sy_t = i[Sx, Sz^2]`` are the twisted
operators.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "KET_P1",
    "KET_0",
    "KET_M1",
    "IDENTITY",
    "SubspaceSign",
    "RotationSpec",
    "spin1_basis",
    "twisted_operators",
    "pseudo_spin_operators",
    "subspace_projector",
    "target_unitary",
    "commutator",
    "ket",
    "projector",
]

_SQ2 = np.sqrt(2.0)

KET_P1 = np.array([1.0, 0.0, 0.0], dtype=complex)
KET_0 = np.array([0.0, 1.0, 0.0], dtype=complex)
KET_M1 = np.array([0.0, 0.0, 1.0], dtype=complex)
IDENTITY = np.eye(3, dtype=complex)

_KETS = {+1: KET_P1, 0: KET_0, -1: KET_M1}


class SubspaceSign(enum.Enum):
    PLUS = +1
    MINUS = -1

    @classmethod
    def parse(cls, value) -> "SubspaceSign":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        if key in ("+", "plus", "+1", "1"):
            return cls.PLUS
        if key in ("-", "minus", "-1"):
            return cls.MINUS
        raise ValueError(f"unknown subspace sign {value!r}")


@dataclass(frozen=True)
class RotationSpec:
    """Rotation by ``alpha`` radians about the unit vector ``axis``."""

    alpha: float
    axis: tuple[float, float, float]

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if axis.shape != (3,) or not np.all(np.isfinite(axis)):
            raise ValueError("rotation axis must be a finite 3-vector")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ValueError(f"rotation axis must have unit norm, got |n| = {np.linalg.norm(axis)!r}")
        if not np.isfinite(self.alpha):
            raise ValueError("rotation angle must be finite")
        object.__setattr__(self, "axis", tuple(float(a) for a in axis))


def ket(m: int) -> np.ndarray:
    return _KETS[m].copy()


def projector(m: int) -> np.ndarray:
    v = _KETS[m]
    return np.outer(v, v.conj())


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def spin1_basis() -> dict[str, np.ndarray]:
    """Canonical spin-1 matrices ``Sx, Sy, Sz, Sz2``."""
    sx = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _SQ2
    sy = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _SQ2
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return {"Sx": sx, "Sy": sy, "Sz": sz, "Sz2": sz @ sz}


def twisted_operators() -> dict[str, np.ndarray]:
    """``Sx_t = i[Sy, Sz^2]`` and ``Sy_t = i[Sx, Sz^2]``."""
    s = spin1_basis()
    return {
        "Sx_t": 1j * commutator(s["Sy"], s["Sz2"]),
        "Sy_t": 1j * commutator(s["Sx"], s["Sz2"]),
    }


def pseudo_spin_operators(sign: SubspaceSign) -> dict[str, np.ndarray]:
    """Pauli-like operators on the {|0>, |±1>} subspace selected by ``sign``.

    The row and column of the untouched level are identically zero.
    """
    sign = SubspaceSign.parse(sign)
    zero = KET_0
    other = KET_P1 if sign is SubspaceSign.PLUS else KET_M1
    up_down = np.outer(zero, other.conj())  # |0><±1|
    down_up = up_down.conj().T
    return {
        "Sx": up_down + down_up,
        "Sy": -1j * up_down + 1j * down_up,
        "Sz": np.outer(zero, zero.conj()) - np.outer(other, other.conj()),
    }


def subspace_projector(sign: SubspaceSign) -> np.ndarray:
    """Projector onto {|0>, |±1>}."""
    sign = SubspaceSign.parse(sign)
    return projector(0) + projector(int(sign.value))


def target_unitary(spec: RotationSpec, sign: SubspaceSign) -> np.ndarray:
    """Spin-1/2 rotation inside one pseudo-subspace, identity on the other level.

    ``U = 1 - P + cos(alpha/2) P - i sin(alpha/2) (n . S^±)``
    """
    sign = SubspaceSign.parse(sign)
    ops = pseudo_spin_operators(sign)
    p = subspace_projector(sign)
    nx, ny, nz = spec.axis
    n_dot_s = nx * ops["Sx"] + ny * ops["Sy"] + nz * ops["Sz"]
    half = 0.5 * spec.alpha
    return IDENTITY - p + np.cos(half) * p - 1j * np.sin(half) * n_dot_s
