"""Microstrip microwave fields and the optical focal volume.

Two parallel strips of width ``L`` and thickness ``h`` sit below the diamond,
separated by a gap ``w``.  Strip 1 spans ``0 <= x <= L`` and strip 2 spans
``L + w <= x <= 2L + w``; ``z`` is the height above the top face of the strips.
Each strip is modelled as a pair of current sheets at ``z = 0`` and
``z = -h``, giving the closed arctan/log forms below.  The strips are
infinite along y, so ``wy = 0`` everywhere.

Lengths are in micrometres.  Raw fields are in tesla for the given current;
:meth:`MicrostripGeometry.rabi_scale` converts them to an angular Rabi
frequency in rad/us.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MU0",
    "GAMMA_E",
    "MicrostripGeometry",
    "FieldVector",
    "GaussianBeam",
    "strip_field",
    "field_orthogonality",
    "beam_intensity",
    "field_grid",
    "find_focal_x",
    "FieldDomainError",
]

MU0 = 4e-7 * np.pi  # T m / A
GAMMA_E = 2 * np.pi * 28024.9514  # electron gyromagnetic ratio, rad/us per tesla


class FieldDomainError(ValueError):
    """Point lies on or inside a conductor, or a field vector vanishes."""


@dataclass(frozen=True)
class MicrostripGeometry:
    strip_width_um: float = 127.0  # L in the closed forms
    gap_um: float = 150.0
    thickness_um: float = 17.5
    current1_a: float = 0.02
    current2_a: float = 0.02
    mu0: float = MU0
    gamma: float = GAMMA_E
    edge_eps_um: float = 0.01

    def __post_init__(self):
        if not self.strip_width_um > 0:
            raise ValueError("strip width must be positive")
        if not self.gap_um >= 0:
            raise ValueError("gap must be non-negative")
        if not self.thickness_um > 0:
            raise ValueError("thickness must be positive")

    @property
    def midplane_x(self) -> float:
        return self.strip_width_um + 0.5 * self.gap_um

    def prefactor(self, channel: int) -> float:
        current = self.current1_a if channel == 1 else self.current2_a
        return self.mu0 * current / (2 * np.pi * self.strip_width_um * 1e-6)

    def rabi_scale(self) -> float:
        """rad/us per tesla."""
        return self.gamma

    def strip_span(self, channel: int) -> tuple[float, float]:
        L, w = self.strip_width_um, self.gap_um
        return (0.0, L) if channel == 1 else (L + w, 2 * L + w)


@dataclass(frozen=True)
class FieldVector:
    wx: float
    wy: float
    wz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.wx, self.wy, self.wz], dtype=float)

    def __mul__(self, k: float) -> "FieldVector":
        return FieldVector(self.wx * k, self.wy * k, self.wz * k)

    __rmul__ = __mul__


@dataclass(frozen=True)
class GaussianBeam:
    waist_radius_um: float = 0.295
    rayleigh_range_um: float = 1.255

    def __post_init__(self):
        if not (self.waist_radius_um > 0 and self.rayleigh_range_um > 0):
            raise ValueError("beam waist and Rayleigh range must be positive")


def _check_point(geom: MicrostripGeometry, x: float, z: float) -> None:
    eps = geom.edge_eps_um
    h = geom.thickness_um
    if not (np.isfinite(x) and np.isfinite(z)):
        raise FieldDomainError("point must be finite")
    for ch in (1, 2):
        x0, x1 = geom.strip_span(ch)
        inside_x = x0 - eps <= x <= x1 + eps
        if inside_x and -h - eps <= z <= eps:
            raise FieldDomainError(f"point ({x}, {z}) um touches conductor {ch}")


def strip_field(geom: MicrostripGeometry, channel: int, point) -> FieldVector:
    """Closed-form field of one strip at ``point = (x, z)`` in micrometres."""
    if channel not in (1, 2):
        raise ValueError("channel must be 1 or 2")
    x, z = (np.float64(p) for p in point)
    _check_point(geom, x, z)
    L, w, h = geom.strip_width_um, geom.gap_um, geom.thickness_um
    k = geom.prefactor(channel)
    zh = z + h
    with np.errstate(divide="ignore"):  # z = 0 or z = -h beside a strip: arctan(+-inf)
        return _closed_form(channel, x, z, zh, L, w, k)


def _closed_form(channel, x, z, zh, L, w, k) -> FieldVector:
    if channel == 1:
        wx = k * (np.arctan((x - L) / z) - np.arctan(x / z) + np.arctan((x - L) / zh) - np.arctan(x / zh))
        wz = 0.5 * k * (
            np.log((z * z + x * x) / (z * z + (x - L) ** 2))
            + np.log((zh * zh + x * x) / (zh * zh + (x - L) ** 2))
        )
    else:
        a = L + w - x
        b = 2 * L + w - x
        wx = k * (np.arctan(a / z) - np.arctan(b / z) + np.arctan(a / zh) - np.arctan(b / zh))
        wz = 0.5 * k * (
            np.log((z * z + a * a) / (z * z + b * b)) + np.log((zh * zh + a * a) / (zh * zh + b * b))
        )
    return FieldVector(float(wx), 0.0, float(wz))


def field_orthogonality(geom: MicrostripGeometry, point) -> float:
    """Angle eta in degrees between the channel-1 and channel-2 fields."""
    f1 = strip_field(geom, 1, point).as_array()
    f2 = strip_field(geom, 2, point).as_array()
    n1, n2 = np.linalg.norm(f1), np.linalg.norm(f2)
    if n1 == 0 or n2 == 0:
        raise FieldDomainError("a channel field vanishes at this point")
    cos_eta = np.clip(f1 @ f2 / (n1 * n2), -1.0, 1.0)
    return float(np.degrees(np.arccos(cos_eta)))


def beam_intensity(beam: GaussianBeam, point) -> float:
    """TEM00 intensity at radial offset ``r`` and axial offset ``z``, 1 at focus."""
    r, z = (float(p) for p in point)
    w0, zr = beam.waist_radius_um, beam.rayleigh_range_um
    wz2 = w0**2 * (1.0 + (z / zr) ** 2)
    return float(w0**2 / wz2 * np.exp(-2.0 * r * r / wz2))


def field_grid(geom: MicrostripGeometry, xs, zs) -> list[dict]:
    """Evaluate both channels and eta on a grid; conductor points are skipped."""
    rows = []
    for z in zs:
        for x in xs:
            try:
                f1 = strip_field(geom, 1, (x, z))
                f2 = strip_field(geom, 2, (x, z))
                eta = field_orthogonality(geom, (x, z))
            except FieldDomainError:
                continue
            rows.append(
                {"x": float(x), "z": float(z), "wx1": f1.wx, "wz1": f1.wz, "wx2": f2.wx, "wz2": f2.wz, "eta_deg": eta}
            )
    return rows


def find_focal_x(geom: MicrostripGeometry, z_um: float, eta_deg: float, *, side: int = 1) -> float:
    """x on the line of height ``z_um`` where the inter-channel angle equals ``eta_deg``.

    ``side=1`` searches between strip 1's centre and the midplane, ``side=2``
    between the midplane and strip 2's centre.
    """
    from scipy.optimize import brentq

    mid = geom.midplane_x
    lo, hi = (0.5 * geom.strip_width_um, mid) if side == 1 else (mid, mid + 0.5 * geom.gap_um + 0.5 * geom.strip_width_um)

    def g(x):
        return field_orthogonality(geom, (x, z_um)) - eta_deg

    if g(lo) * g(hi) > 0:
        raise ValueError(f"eta = {eta_deg} deg is not reached at z = {z_um} um on side {side}")
    return float(brentq(g, lo, hi, xtol=1e-10))
