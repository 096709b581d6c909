"""Batched small-matrix helpers: spectral exponentials and their derivatives."""

from __future__ import annotations

import numpy as np

__all__ = ["expm_hermitian", "expm_hermitian_eig", "dexpm_hermitian", "chain_product", "dagger"]


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def expm_hermitian_eig(h: np.ndarray, t: float | np.ndarray):
    """exp(-i h t) for a stack of Hermitian ``h``; also returns the eigensystem.

    Returns ``(U, evals, evecs, phases)`` with ``phases = exp(-i evals t)``.
    """
    h = np.asarray(h)
    evals, evecs = np.linalg.eigh(h)
    t = np.asarray(t, dtype=float)
    if t.ndim:
        t = t[..., None]
    phases = np.exp(-1j * evals * t)
    u = (evecs * phases[..., None, :]) @ dagger(evecs)
    return u, evals, evecs, phases


def expm_hermitian(h: np.ndarray, t: float | np.ndarray = 1.0) -> np.ndarray:
    return expm_hermitian_eig(h, t)[0]


def dexpm_hermitian(evals, evecs, phases, t, directions) -> np.ndarray:
    """Exact derivative of exp(-i (H + s D) t) at s = 0 for each direction D.

    ``evals, evecs, phases`` come from :func:`expm_hermitian_eig` for a stack of
    shape ``(..., 3, 3)``; ``directions`` has shape ``(..., k, 3, 3)`` and the
    result has the same shape.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim:
        t = t[..., None, None]
    lam_a = evals[..., :, None]
    lam_b = evals[..., None, :]
    diff = lam_a - lam_b
    ph_a = phases[..., :, None]
    ph_b = phases[..., None, :]
    degenerate = np.abs(diff * t) < 1e-8
    safe = np.where(degenerate, 1.0, diff)
    # divided difference of f(x) = exp(-i x t), including the -i t factor
    gamma = np.where(degenerate, -1j * t * ph_a, (ph_a - ph_b) / safe)
    v = evecs[..., None, :, :]
    d_eig = dagger(v) @ directions @ v
    return v @ (d_eig * gamma[..., None, :, :]) @ dagger(v)


def chain_product(mats: np.ndarray) -> np.ndarray:
    """Ordered product ``M[n-1] @ ... @ M[1] @ M[0]`` over the leading-but-last axis.

    ``mats`` has shape ``(n, ..., d, d)``; the reduction is a pairwise tree so
    it vectorises well for long chains.
    """
    mats = np.asarray(mats)
    while mats.shape[0] > 1:
        n = mats.shape[0]
        if n % 2:
            tail = mats[-1:]
            mats = mats[:-1]
        else:
            tail = None
        mats = mats[1::2] @ mats[0::2]
        if tail is not None:
            mats = np.concatenate([mats, tail], axis=0)
    return mats[0]
