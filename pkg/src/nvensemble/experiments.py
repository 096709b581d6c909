"""Simulated experiments: dual-channel Rabi scans, spin locking and fluorescence.

Rabi and spin-locking simulations take members in ``"iq"`` mode, i.e. with
four control operators multiplying (I1, Q1, I2, Q2), so that channel phases
can be set per segment.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple, Sequence

import numpy as np

from . import spin
from .geometry import ORIENTATIONS, CrystalCut, NvOrientation, nv_axis_lab
from .hamiltonians import EnsembleMember
from .linalg import expm_hermitian_eig

__all__ = [
    "OpticalAngles",
    "RabiPoint",
    "CosSquaredFit",
    "EqualizationResult",
    "iq_controls",
    "zero_population_series",
    "dominant_frequency",
    "rabi_frequency",
    "rabi_scan",
    "fit_cos_squared",
    "spin_locking",
    "fluorescence",
    "optical_angles",
    "equalize_polarization",
    "polarization_spread",
]

_RHO0 = spin.projector(0)


class OpticalAngles(NamedTuple):
    theta: float  # NV axis vs optical axis, radians
    phi: float  # in-plane NV direction vs polarisation, radians


class RabiPoint(NamedTuple):
    member: str
    dtheta_deg: float
    freq_mhz: float
    width_mhz: float
    periods: float
    flagged: bool


class CosSquaredFit(NamedTuple):
    """``a + b cos^2(x - delta0)`` least-squares fit (angles in degrees)."""

    a: float
    b: float
    delta0_deg: float
    r2: float


class EqualizationResult(NamedTuple):
    phi_star_deg: float
    spread: float
    intensities: dict


def iq_controls(omega1: float, theta1_deg: float, omega2: float, theta2_deg: float) -> np.ndarray:
    t1, t2 = np.radians(theta1_deg), np.radians(theta2_deg)
    return np.array([omega1 * np.cos(t1), omega1 * np.sin(t1), omega2 * np.cos(t2), omega2 * np.sin(t2)])


def _require_iq(member: EnsembleMember) -> None:
    if member.n_controls != 4:
        raise ValueError(f"member {member.name!r} must expose four (I1, Q1, I2, Q2) controls")


def zero_population_series(member: EnsembleMember, controls, times_us, rho0=_RHO0) -> np.ndarray:
    """|0> population under a constant drive, sampled at ``times_us``."""
    h = member.hamiltonian(np.asarray(controls, dtype=float))
    us = expm_hermitian_eig(np.broadcast_to(h, (len(times_us), 3, 3)), np.asarray(times_us))[0]
    rhos = us @ rho0 @ np.conj(np.swapaxes(us, -1, -2))
    return np.real(rhos[:, 1, 1])


def dominant_frequency(signal, dt_us: float, *, pad: int = 8) -> tuple[float, float]:
    """Strongest non-DC frequency (MHz) and its FWHM from a Hann-windowed FFT.

    The peak position is refined by a parabola through the three bins around
    the maximum.
    """
    x = np.asarray(signal, dtype=float)
    n = x.size
    if n < 4:
        raise ValueError("need at least four samples")
    x = (x - x.mean()) * np.hanning(n)
    nfft = pad * n
    spec = np.abs(np.fft.rfft(x, nfft))
    freqs = np.fft.rfftfreq(nfft, dt_us)
    first = pad  # skip the DC lobe
    k = first + int(np.argmax(spec[first:-1]))
    a, b, c = spec[k - 1], spec[k], spec[k + 1]
    denom = a - 2 * b + c
    shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
    df = freqs[1] - freqs[0]
    peak = freqs[k] + shift * df
    half = 0.5 * b
    lo = k
    while lo > 0 and spec[lo] > half:
        lo -= 1
    hi = k
    while hi < spec.size - 1 and spec[hi] > half:
        hi += 1
    return float(peak), float((hi - lo) * df)


def rabi_frequency(member: EnsembleMember, controls, *, scan_duration_us: float = 20.0, dt_ns: float = 10.0):
    """|0>-population oscillation frequency (MHz) for a constant drive."""
    times = np.arange(int(round(scan_duration_us * 1e3 / dt_ns))) * dt_ns * 1e-3
    series = zero_population_series(member, controls, times)
    return dominant_frequency(series, dt_ns * 1e-3)


def rabi_scan(
    members: Sequence[EnsembleMember],
    dtheta_values: Sequence[float],
    *,
    scan_duration_us: float = 20.0,
    dt_ns: float = 10.0,
    executor=None,
) -> list[RabiPoint]:
    """Dual-channel Rabi scan at Omega1 = Omega2 = 1, theta1 = 0, theta2 = dtheta.

    Points whose scan covers fewer than three oscillation periods are flagged.
    """
    for m in members:
        _require_iq(m)
    jobs = list(itertools.product(members, dtheta_values))

    def run(job):
        m, d = job
        f, w = rabi_frequency(m, iq_controls(1.0, 0.0, 1.0, d), scan_duration_us=scan_duration_us, dt_ns=dt_ns)
        periods = f * scan_duration_us
        return RabiPoint(m.name, float(d), f, w, periods, bool(periods < 3.0))

    return list(map(run, jobs)) if executor is None else list(executor.map(run, jobs))


def fit_cos_squared(dtheta_deg, values) -> CosSquaredFit:
    """Linear least squares for ``a + b cos^2(x - delta0)``.

    Uses ``a + b/2 + (b/2) cos(2x - 2 delta0)``; ``b`` is reported non-negative.
    """
    x = np.radians(np.asarray(dtheta_deg, dtype=float))
    y = np.asarray(values, dtype=float)
    design = np.stack([np.ones_like(x), np.cos(2 * x), np.sin(2 * x)], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    c0, c1, c2 = coef
    amp = np.hypot(c1, c2)
    b = 2 * amp
    a = c0 - amp
    delta0 = 0.5 * np.degrees(np.arctan2(c2, c1)) if amp > 0 else 0.0
    resid = y - design @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return CosSquaredFit(float(a), float(b), float(delta0 % 180.0), r2)


def spin_locking(
    members: Sequence[EnsembleMember],
    lock_target: str,
    evolve_times_us: Sequence[float],
    *,
    lock_amplitude: float = 1.0,
    pulse_amplitude: float = 1.0,
) -> dict[str, np.ndarray]:
    """Final |0> population after pi/2 (Sy_t) - lock (Sx) - pi/2 (Sy_t) on channel 1.

    The pi/2 length is a quarter of the simulated Rabi period of the first
    member whose group is ``lock_target``.
    """
    for m in members:
        _require_iq(m)
    target = next((m for m in members if m.group == lock_target), None)
    if target is None:
        groups = sorted({m.group for m in members})
        raise KeyError(f"unknown group {lock_target!r}; available: {groups}")
    flip = iq_controls(pulse_amplitude, 90.0, 0.0, 0.0)
    lock = iq_controls(lock_amplitude, 0.0, 0.0, 0.0)
    freq, _ = rabi_frequency(target, flip)
    t_half = 0.25 / freq
    out = {}
    times = np.asarray(evolve_times_us, dtype=float)
    for m in members:
        u_flip = expm_hermitian_eig(m.hamiltonian(flip), t_half)[0]
        u_lock = expm_hermitian_eig(np.broadcast_to(m.hamiltonian(lock), (times.size, 3, 3)), times)[0]
        total = u_flip @ u_lock @ u_flip
        rho = total @ _RHO0 @ np.conj(np.swapaxes(total, -1, -2))
        out[m.name] = np.real(rho[:, 1, 1])
    return out


def fluorescence(angles: OpticalAngles) -> float:
    """``sin^2 phi + cos^2 theta cos^2 phi``."""
    th, ph = angles
    return float(np.sin(ph) ** 2 + np.cos(th) ** 2 * np.cos(ph) ** 2)


def optical_angles(cut: CrystalCut, orientation: NvOrientation, polarization_deg: float) -> OpticalAngles:
    """theta from the NV axis vs lab z; phi from the in-plane NV direction vs the polarisation."""
    n = nv_axis_lab(cut, orientation)
    theta = float(np.arccos(np.clip(n[2], -1.0, 1.0)))
    azimuth = float(np.arctan2(n[1], n[0])) if np.hypot(n[0], n[1]) > 1e-12 else 0.0
    return OpticalAngles(theta, np.radians(polarization_deg) - azimuth)


def _intensity_terms(cut: CrystalCut):
    """Each intensity as ``c + a cos(2 psi) + b sin(2 psi)``."""
    terms = {}
    for o in ORIENTATIONS:
        th, ph0 = optical_angles(cut, o, 0.0)
        beta = -ph0
        s2 = np.sin(th) ** 2
        # 1 - sin^2(theta) cos^2(psi - beta)
        terms[o] = (1.0 - 0.5 * s2, -0.5 * s2 * np.cos(2 * beta), -0.5 * s2 * np.sin(2 * beta))
    return terms


def polarization_spread(cut: CrystalCut, polarization_deg: float) -> float:
    vals = [fluorescence(optical_angles(cut, o, polarization_deg)) for o in ORIENTATIONS]
    return float(max(vals) - min(vals))


def equalize_polarization(cut: CrystalCut) -> EqualizationResult:
    """Polarisation angle in [0, 180) minimising the spread of the four intensities.

    Candidates are every crossing and every stationary point of the pairwise
    intensity differences (each a sinusoid in ``2 psi``), so the minimum is
    exact rather than grid-limited.
    """
    cut = CrystalCut.parse(cut)
    terms = _intensity_terms(cut)
    candidates = [0.0]
    for (c1, a1, b1), (c2, a2, b2) in itertools.combinations(terms.values(), 2):
        c, a, b = c1 - c2, a1 - a2, b1 - b2
        amp = np.hypot(a, b)
        if amp < 1e-15:
            continue
        phase = np.arctan2(b, a)  # a cos2x + b sin2x = amp cos(2x - phase)
        candidates += [0.5 * phase, 0.5 * phase + 0.5 * np.pi]
        if abs(c) <= amp:
            r = np.arccos(-c / amp)
            candidates += [0.5 * (phase + r), 0.5 * (phase - r)]
    cand = np.unique(np.round(np.degrees(candidates) % 180.0, 12))
    spreads = [polarization_spread(cut, p) for p in cand]
    best = int(np.argmin(spreads))
    phi = float(cand[best])
    ints = {o.label: fluorescence(optical_angles(cut, o, phi)) for o in ORIENTATIONS}
    return EqualizationResult(phi, float(spreads[best]), ints)
