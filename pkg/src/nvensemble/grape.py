"""Gradient ascent pulse engineering over an incoherent ensemble of Hamiltonians.

Each member sees the same piecewise-constant controls ``u[k, c]`` through its
own Hamiltonian ``H_m(u) = drift_m + sum_c u[k, c] C_mc``.  The objective is
the weighted mean of the member fidelities minus a quadratic smoothness
penalty ``lam * sum_k sum_c (u[k+1, c] - u[k, c])**2``.

Gradients are exact: the derivative of each step exponential is taken in the
eigenbasis of ``H_k`` (divided differences of ``exp(-i x dt)``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hamiltonians import EnsembleMember
from .linalg import dagger, dexpm_hermitian, expm_hermitian_eig
from .propagation import ControlPulse, check_density_matrix

__all__ = [
    "TargetSpec",
    "OptimizationJob",
    "OptimizedPulse",
    "fidelity_map",
    "fidelity_state",
    "member_fidelities",
    "objective",
    "gradient",
    "initial_guess",
    "optimize",
    "doubling_search",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TargetSpec:
    """A map target (``unitary`` + ``mask``) or a state target (``initial`` -> ``final``)."""

    kind: str
    unitary: np.ndarray | None = None
    mask: np.ndarray | None = None
    initial: np.ndarray | None = None
    final: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind == "map":
            u = np.asarray(self.unitary, dtype=complex)
            if u.shape != (3, 3) or np.max(np.abs(u.conj().T @ u - np.eye(3))) > 1e-10:
                raise ValueError("map target must be a 3x3 unitary")
            mask = np.eye(3, dtype=complex) if self.mask is None else np.asarray(self.mask, dtype=complex)
            if abs(np.trace(mask)) == 0:
                raise ValueError("mask has zero trace")
            object.__setattr__(self, "unitary", u)
            object.__setattr__(self, "mask", mask)
        elif self.kind == "state":
            object.__setattr__(self, "initial", check_density_matrix(self.initial))
            object.__setattr__(self, "final", check_density_matrix(self.final))
        else:
            raise ValueError(f"target kind must be 'map' or 'state', got {self.kind!r}")

    @classmethod
    def map(cls, unitary, mask=None, label: str = "") -> "TargetSpec":
        return cls("map", unitary=unitary, mask=mask, label=label)

    @classmethod
    def state(cls, initial, final, label: str = "") -> "TargetSpec":
        return cls("state", initial=initial, final=final, label=label)


@dataclass(frozen=True, eq=False)
class OptimizationJob:
    members: Sequence[EnsembleMember]
    targets: Sequence[TargetSpec]
    n_steps: int
    dt_ns: float
    bounds: tuple[float, float] = (0.0, 1.0)
    goal: float = 0.99
    max_iter: int = 2000
    smooth_lambda: float = 0.0
    seed: int = 0
    init_scale: float = 1.0
    init_center: float | None = None
    grad_floor: float = 1e-9
    mode: str = "amplitude"

    def __post_init__(self):
        members = tuple(self.members)
        targets = tuple(self.targets)
        if not members:
            raise ValueError("job needs at least one ensemble member")
        if len(targets) == 1 and len(members) > 1:
            targets = targets * len(members)
        if len(targets) != len(members):
            raise ValueError("need one target per member (or a single shared target)")
        if len({m.n_controls for m in members}) != 1:
            raise ValueError("all members must share the same number of controls")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not self.dt_ns > 0:
            raise ValueError("dt_ns must be positive")
        if not 0.0 < self.goal <= 1.0:
            raise ValueError("goal must lie in (0, 1]")
        if self.smooth_lambda < 0:
            raise ValueError("smooth_lambda must be >= 0")
        lo, hi = self.bounds
        if not lo < hi:
            raise ValueError("bounds must satisfy lo < hi")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "bounds", (float(lo), float(hi)))

    @property
    def n_controls(self) -> int:
        return self.members[0].n_controls

    @property
    def dt_us(self) -> float:
        return self.dt_ns * 1e-3

    @property
    def weights(self) -> np.ndarray:
        w = np.array([m.weight for m in self.members], dtype=float)
        return w / w.sum()

    def with_steps(self, n_steps: int) -> "OptimizationJob":
        from dataclasses import replace

        return replace(self, n_steps=n_steps)


@dataclass(frozen=True, eq=False)
class OptimizedPulse:
    pulse: ControlPulse
    fidelities: dict[str, float]
    history: np.ndarray
    converged: bool
    iterations: int
    stop_reason: str
    extra: dict = field(default_factory=dict)

    @property
    def min_fidelity(self) -> float:
        return min(self.fidelities.values())


def fidelity_map(u, u_target, mask=None) -> float:
    """``|Tr(P U_t^dag U)|^2 / |Tr P|^2``; insensitive to a global phase."""
    p = np.eye(3) if mask is None else np.asarray(mask)
    norm = abs(np.trace(p))
    if norm == 0:
        raise ValueError("mask has zero trace")
    g = np.trace(p @ dagger(np.asarray(u_target)) @ np.asarray(u))
    return float(abs(g) ** 2 / norm**2)


def fidelity_state(rho_final, rho_target) -> float:
    """``Tr(rho_target rho_final)``."""
    return float(np.real(np.trace(np.asarray(rho_target) @ np.asarray(rho_final))))


def _as_controls(job: OptimizationJob, u) -> np.ndarray:
    if isinstance(u, ControlPulse):
        u = u.values
    u = np.asarray(u, dtype=float)
    if u.shape != (job.n_steps, job.n_controls):
        raise ValueError(f"controls shape {u.shape} != ({job.n_steps}, {job.n_controls})")
    return u


def _forward(member: EnsembleMember, u: np.ndarray, dt: float):
    us, evals, evecs, phases = expm_hermitian_eig(member.hamiltonian(u), dt)
    n = us.shape[0]
    fwd = np.empty((n + 1, 3, 3), dtype=complex)
    fwd[0] = np.eye(3)
    for k in range(n):
        fwd[k + 1] = us[k] @ fwd[k]
    return us, evals, evecs, phases, fwd


def _member_value(target: TargetSpec, total: np.ndarray) -> float:
    if target.kind == "map":
        return fidelity_map(total, target.unitary, target.mask)
    return fidelity_state(total @ target.initial @ dagger(total), target.final)


def _member_eval(member: EnsembleMember, target: TargetSpec, u: np.ndarray, dt: float, want_grad: bool):
    us, evals, evecs, phases, fwd = _forward(member, u, dt)
    total = fwd[-1]
    fid = _member_value(target, total)
    if not want_grad:
        return fid, None
    n = us.shape[0]
    # costate X_k so that d(overlap) = Tr(fwd[k] @ X_k @ dU_k)
    if target.kind == "map":
        norm = abs(np.trace(target.mask)) ** 2
        g = np.trace(target.mask @ dagger(target.unitary) @ total)
        tail = target.mask @ dagger(target.unitary)
        scale = 2.0 * np.conj(g) / norm
        head = np.eye(3)
    else:
        tail = target.final
        scale = 2.0
        head = target.initial @ dagger(total)
    back = np.empty((n, 3, 3), dtype=complex)
    cur = tail
    for k in range(n - 1, -1, -1):
        back[k] = cur
        cur = cur @ us[k]
    lam = fwd[:-1] @ head @ back
    dus = dexpm_hermitian(evals, evecs, phases, dt, np.broadcast_to(member.controls, (n,) + member.controls.shape))
    grad = np.real(scale * np.einsum("kij,kcji->kc", lam, dus))
    return fid, grad


def _evaluate(job: OptimizationJob, u: np.ndarray, want_grad: bool, executor=None):
    dt = job.dt_us
    tasks = list(zip(job.members, job.targets))
    if executor is None:
        results = [_member_eval(m, t, u, dt, want_grad) for m, t in tasks]
    else:
        results = list(executor.map(lambda mt: _member_eval(mt[0], mt[1], u, dt, want_grad), tasks))
    fids = np.array([r[0] for r in results])
    w = job.weights
    value = float(w @ fids)
    diff = np.diff(u, axis=0)
    value -= job.smooth_lambda * float(np.sum(diff * diff))
    if not want_grad:
        return value, fids, None
    grad = np.zeros_like(u)
    for wi, r in zip(w, results):  # fixed reduction order
        grad += wi * r[1]
    if job.smooth_lambda and u.shape[0] > 1:
        pen = np.zeros_like(u)
        pen[:-1] -= diff
        pen[1:] += diff
        grad -= 2.0 * job.smooth_lambda * pen
    return value, fids, grad


def member_fidelities(job: OptimizationJob, u) -> dict[str, float]:
    u = _as_controls(job, u)
    _, fids, _ = _evaluate(job, u, False)
    return {m.name: float(f) for m, f in zip(job.members, fids)}


def objective(job: OptimizationJob, u) -> float:
    return _evaluate(job, _as_controls(job, u), False)[0]


def gradient(job: OptimizationJob, u) -> np.ndarray:
    return _evaluate(job, _as_controls(job, u), True)[2]


def initial_guess(job: OptimizationJob) -> np.ndarray:
    """Seeded, smoothed uniform noise of half-width ``init_scale * (hi - lo) / 2``.

    The noise is centred on ``init_center`` (default: the middle of the bounds).
    Small ``init_scale`` gives the classic low-amplitude start.
    """
    lo, hi = job.bounds
    rng = np.random.default_rng(job.seed)
    raw = rng.uniform(-1.0, 1.0, size=(job.n_steps, job.n_controls))
    width = max(1, job.n_steps // 25)
    if width > 1:
        kernel = np.ones(width) / width
        pad = np.pad(raw, ((width, width), (0, 0)), mode="reflect")
        raw = np.stack([np.convolve(pad[:, c], kernel, mode="same")[width:-width] for c in range(raw.shape[1])], 1)
    peak = np.max(np.abs(raw))
    if peak > 0:
        raw = raw / peak
    half = 0.5 * job.init_scale * (hi - lo)
    center = job.init_center
    if center is None:
        center = 0.5 * (lo + hi)
    return np.clip(center + half * raw, lo, hi)


def optimize(job: OptimizationJob, *, initial=None, executor=None, callback=None) -> OptimizedPulse:
    """Projected gradient ascent with Barzilai-Borwein trial steps and Armijo backtracking.

    Every accepted step increases the objective, and controls are clipped to
    ``job.bounds`` after each step.  Stops when every member reaches
    ``job.goal``, when the projected gradient falls below ``job.grad_floor``,
    when the line search cannot make progress, or after ``job.max_iter``
    iterations.
    """
    lo, hi = job.bounds
    u = initial_guess(job) if initial is None else np.clip(_as_controls(job, initial), lo, hi)
    value, fids, grad = _evaluate(job, u, True, executor)
    history = [value]
    step = 1.0 / max(float(np.max(np.abs(grad))), 1e-12) * 0.1 * (hi - lo)
    prev_u = prev_g = None
    reason = "max_iter"
    it = 0
    for it in range(1, job.max_iter + 1):
        if np.min(fids) >= job.goal:
            reason = "goal"
            it -= 1
            break
        proj = np.clip(u + grad, lo, hi) - u
        if float(np.sqrt(np.sum(proj * proj))) < job.grad_floor:
            reason = "grad_floor"
            it -= 1
            break
        if prev_u is not None:
            s = (u - prev_u).ravel()
            y = (grad - prev_g).ravel()
            sy = float(s @ y)
            if sy < 0:
                step = float(s @ s) / -sy
            else:
                step *= 2.0
        accepted = False
        for _ in range(40):
            trial = np.clip(u + step * grad, lo, hi)
            delta = trial - u
            if not np.any(delta):
                break
            t_value, t_fids, _ = _evaluate(job, trial, False, executor)
            if t_value >= value + 1e-4 * float(np.sum(grad * delta)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            reason = "line_search"
            it -= 1
            break
        prev_u, prev_g = u, grad
        u = trial
        value, fids, grad = _evaluate(job, u, True, executor)
        history.append(value)
        if callback is not None:
            callback(it, value, fids)
    else:
        it = job.max_iter
    final_fids = {m.name: float(f) for m, f in zip(job.members, fids)}
    converged = bool(min(final_fids.values()) >= job.goal)
    log.info("optimize: %s after %d iterations, min fidelity %.6f", reason, it, min(final_fids.values()))
    pulse = ControlPulse(job.dt_ns, u, job.mode, job.bounds)
    return OptimizedPulse(pulse, final_fids, np.asarray(history), converged, it, reason)


def doubling_search(job: OptimizationJob, *, start: int | None = None, max_steps: int = 4096, executor=None):
    """Double ``n_steps`` from ``start`` until the optimiser converges.

    Returns ``(n_steps, result, attempts)`` where ``attempts`` lists
    ``(n_steps, min_fidelity)`` for every try.  ``result.converged`` is False
    when ``max_steps`` is exhausted.
    """
    n = start or job.n_steps
    attempts = []
    result = None
    while n <= max_steps:
        result = optimize(job.with_steps(n), executor=executor)
        attempts.append((n, result.min_fidelity))
        log.info("doubling search: N=%d min fidelity %.5f", n, result.min_fidelity)
        if result.converged:
            return n, result, attempts
        n *= 2
    return attempts[-1][0] if attempts else n, result, attempts

