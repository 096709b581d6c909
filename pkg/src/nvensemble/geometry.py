"""Lab, crystal and NV principal-axis frames.

Conventions
-----------
* Crystal frame: cubic axes [100], [010], [001].
* Lab frame: z is the optical axis, taken as the outward normal of the cut.
  The crystal-to-lab rotation is the minimal (Rodrigues) rotation taking the
  cut normal onto lab z.
* PAS frame of one NV: z along the NV axis.  The azimuth of PAS x is fixed by
  projecting lab x onto the plane normal to the NV axis (lab y is used when
  the NV axis is parallel to lab x).  With this gauge, orientations related
  by a 180 degree turn about lab y see identical control coefficients for any
  field lying in the lab xz-plane.

A :class:`PasRotation` maps lab-frame vectors into PAS coordinates, so its
rows are the PAS axes written in lab coordinates and ``R @ n_lab = z``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "NvOrientation",
    "CrystalCut",
    "PasRotation",
    "ORIENTATIONS",
    "rotation_between",
    "crystal_to_lab",
    "nv_axis_lab",
    "pas_rotation",
    "all_pas_rotations",
    "subensemble_partition",
    "TETRAHEDRAL_ANGLE",
]

TETRAHEDRAL_ANGLE = float(np.arccos(-1.0 / 3.0))


class NvOrientation(enum.Enum):
    PPP = (1, 1, 1)
    MMP = (-1, -1, 1)
    MPM = (-1, 1, -1)
    PMM = (1, -1, -1)

    @property
    def triple(self) -> tuple[int, int, int]:
        return self.value

    @property
    def label(self) -> str:
        return "({},{},{})".format(*self.value)

    def unit(self) -> np.ndarray:
        return np.asarray(self.value, dtype=float) / np.sqrt(3.0)

    @classmethod
    def parse(cls, value) -> "NvOrientation":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            parts = value.replace("(", "").replace(")", "").replace(" ", "").split(",")
            value = tuple(int(p) for p in parts)
        triple = tuple(int(v) for v in value)
        for member in cls:
            if member.value == triple:
                return member
        raise ValueError(f"{triple} is not one of the four NV orientations")


ORIENTATIONS: tuple[NvOrientation, ...] = tuple(NvOrientation)


class CrystalCut(enum.Enum):
    C100 = "100"
    C110 = "110"
    C111 = "111"

    @property
    def normal(self) -> np.ndarray:
        v = np.array([int(c) for c in self.value], dtype=float)
        return v / np.linalg.norm(v)

    @classmethod
    def parse(cls, value) -> "CrystalCut":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().lstrip("c").strip("()")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown crystal cut {value!r}; expected 100, 110 or 111")


@dataclass(frozen=True, eq=False)
class PasRotation:
    """Proper rotation taking lab-frame vectors to NV PAS coordinates."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not np.allclose(m.T @ m, np.eye(3), atol=1e-10, rtol=0):
            raise ValueError("rotation matrix is not orthogonal")
        if abs(np.linalg.det(m) - 1.0) > 1e-10:
            raise ValueError("rotation matrix is not proper (det != +1)")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other):
        if isinstance(other, PasRotation):
            return PasRotation(self.matrix @ other.matrix)
        return self.matrix @ np.asarray(other)

    @property
    def T(self) -> "PasRotation":
        return PasRotation(self.matrix.T)

    @property
    def nv_axis(self) -> np.ndarray:
        """PAS z-axis in lab coordinates (third row)."""
        return self.matrix[2].copy()

    def to_pas(self, v_lab) -> np.ndarray:
        return self.matrix @ np.asarray(v_lab, dtype=float)


def _skew(k: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])


def rotation_between(a, b) -> PasRotation:
    """Rodrigues rotation taking the direction of ``a`` onto that of ``b``.

    The axis is ``a x b`` and the angle ``arccos(a . b)`` for the normalised
    vectors.  Antiparallel inputs are turned by pi about the coordinate axis
    most orthogonal to ``a``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if not (na > 0 and nb > 0) or not (np.isfinite(na) and np.isfinite(nb)):
        raise ValueError("rotation_between needs two nonzero finite vectors")
    a = a / na
    b = b / nb
    axis = np.cross(a, b)
    s = np.linalg.norm(axis)
    c = float(np.clip(a @ b, -1.0, 1.0))
    if s < 1e-14:
        if c > 0:
            return PasRotation(np.eye(3))
        ref = np.zeros(3)
        ref[int(np.argmin(np.abs(a)))] = 1.0
        k = ref - (ref @ a) * a
        k /= np.linalg.norm(k)
        return PasRotation(2.0 * np.outer(k, k) - np.eye(3))
    k = axis / s
    kx = _skew(k)
    return PasRotation(np.eye(3) + s * kx + (1.0 - c) * (kx @ kx))


def crystal_to_lab(cut: CrystalCut) -> PasRotation:
    """Rotation taking crystal coordinates to lab coordinates for ``cut``."""
    cut = CrystalCut.parse(cut)
    return rotation_between(cut.normal, [0.0, 0.0, 1.0])


def nv_axis_lab(cut: CrystalCut, orientation: NvOrientation) -> np.ndarray:
    cut = CrystalCut.parse(cut)
    orientation = NvOrientation.parse(orientation)
    return crystal_to_lab(cut) @ orientation.unit()


def _pas_from_axis(n_lab: np.ndarray) -> PasRotation:
    tilt = rotation_between(n_lab, [0.0, 0.0, 1.0])
    ref = np.array([1.0, 0.0, 0.0])
    if np.linalg.norm(np.cross(n_lab, ref)) < 1e-9:
        ref = np.array([0.0, 1.0, 0.0])
    ref_perp = ref - (ref @ n_lab) * n_lab
    twist = rotation_between(tilt @ ref_perp, [1.0, 0.0, 0.0])
    return twist @ tilt


def pas_rotation(cut: CrystalCut, orientation: NvOrientation) -> PasRotation:
    """Lab -> PAS rotation for one NV orientation in one crystal cut."""
    return _pas_from_axis(nv_axis_lab(cut, orientation))


def all_pas_rotations(cut: CrystalCut) -> dict[NvOrientation, PasRotation]:
    return {o: pas_rotation(cut, o) for o in ORIENTATIONS}


def subensemble_partition(
    cut: CrystalCut,
    fields: Sequence,
    *,
    rtol: float = 1e-9,
    coefficient_map: Callable | None = None,
    orientations: Iterable[NvOrientation] = ORIENTATIONS,
) -> list[list[NvOrientation]]:
    """Group orientations that see the same control Hamiltonian.

    Two orientations are degenerate when their letter coefficients agree for
    every unit control (I or Q on each channel).  ``fields`` holds one lab
    field 3-vector per channel.

    ``coefficient_map(R, fields)`` may override how the comparison vector is
    built; the default stacks the coefficients from
    :func:`nvensemble.hamiltonians.control_coefficient_matrix`.
    """
    if coefficient_map is None:
        from .hamiltonians import control_coefficient_matrix

        def coefficient_map(rot, flds):
            return control_coefficient_matrix(rot, flds).ravel()

    fields = [np.asarray(f, dtype=float) for f in fields]
    for f in fields:
        if f.shape != (3,) or not np.all(np.isfinite(f)):
            raise ValueError("field vectors must be finite 3-vectors")
    ordered = sorted((NvOrientation.parse(o) for o in orientations), key=lambda o: o.value)
    vectors = {o: np.asarray(coefficient_map(pas_rotation(cut, o), fields)) for o in ordered}
    scale = max((np.max(np.abs(v)) for v in vectors.values()), default=0.0)
    tol = rtol * max(scale, 1e-300)

    groups: list[list[NvOrientation]] = []
    for o in ordered:
        for g in groups:
            if np.max(np.abs(vectors[g[0]] - vectors[o])) <= tol:
                g.append(o)
                break
        else:
            groups.append([o])
    for g in groups:
        g.sort(key=lambda o: o.value)
    groups.sort(key=lambda g: g[0].value)
    return groups
