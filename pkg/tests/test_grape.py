import numpy as np
import pytest

from nvensemble import grape, hamiltonians as ham, spin
from nvensemble.linalg import expm_hermitian

S = spin.spin1_basis()
RHO0 = spin.projector(0)
RHOP = spin.projector(1)


def _random_member(rng, name, k=2):
    def herm():
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        return 0.5 * (a + a.conj().T)

    return ham.EnsembleMember(name, controls=np.stack([herm() for _ in range(k)]), drift=0.3 * herm(),
                              weight=float(rng.uniform(0.2, 1.0)))


def _random_job(rng, kind, n=7, k=2):
    members = [_random_member(rng, f"m{i}", k) for i in range(3)]
    if kind == "map":
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        q, _ = np.linalg.qr(a)
        target = grape.TargetSpec.map(q)
    else:
        target = grape.TargetSpec.state(RHO0, RHOP)
    return grape.OptimizationJob(members, [target], n_steps=n, dt_ns=150.0, bounds=(-1.0, 1.0),
                                 smooth_lambda=float(rng.uniform(0, 0.05)))


def test_fidelity_map_examples():
    assert grape.fidelity_map(np.eye(3), np.eye(3)) == pytest.approx(1.0)
    assert grape.fidelity_map(np.exp(0.7j) * np.eye(3), np.eye(3)) == pytest.approx(1.0)
    flip = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]], dtype=complex)
    assert grape.fidelity_map(flip, np.eye(3)) == pytest.approx(1 / 9)
    assert grape.fidelity_map(np.diag([1, 1, -1]), np.eye(3)) == pytest.approx(1 / 9)
    mask = spin.subspace_projector(spin.SubspaceSign.PLUS)
    assert grape.fidelity_map(np.diag([1, 1, -1]), np.eye(3), mask) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        grape.fidelity_map(np.eye(3), np.eye(3), np.zeros((3, 3)))


def test_fidelity_state_examples():
    assert grape.fidelity_state(RHO0, RHO0) == pytest.approx(1.0)
    assert grape.fidelity_state(RHO0, RHOP) == pytest.approx(0.0)
    assert grape.fidelity_state(np.eye(3) / 3, RHOP) == pytest.approx(1 / 3)


def test_objective_with_zero_controls_is_identity_overlap(pheno_members):
    job = grape.OptimizationJob(pheno_members, [grape.TargetSpec.map(np.eye(3))], n_steps=5, dt_ns=10.0)
    assert grape.objective(job, np.zeros((5, 2))) == pytest.approx(1.0)
    assert all(f == pytest.approx(1.0) for f in grape.member_fidelities(job, np.zeros((5, 2))).values())


def test_smoothness_penalty_value(pheno_members):
    job = grape.OptimizationJob(pheno_members, [grape.TargetSpec.map(np.eye(3))], n_steps=3, dt_ns=1e-6,
                                smooth_lambda=0.5)
    u = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    assert grape.objective(job, u) == pytest.approx(1.0 - 0.5 * 2.0, abs=1e-9)


@pytest.mark.parametrize("trial", range(10))
def test_gradient_matches_finite_differences(trial):
    rng = np.random.default_rng(1000 + trial)
    job = _random_job(rng, "map" if trial % 2 == 0 else "state")
    u = rng.uniform(-1, 1, size=(job.n_steps, job.n_controls))
    g = grape.gradient(job, u)
    h = 1e-6
    fd = np.zeros_like(u)
    for idx in np.ndindex(u.shape):
        up, dn = u.copy(), u.copy()
        up[idx] += h
        dn[idx] -= h
        fd[idx] = (grape.objective(job, up) - grape.objective(job, dn)) / (2 * h)
    assert np.max(np.abs(g - fd)) <= 1e-5 * max(1.0, np.max(np.abs(fd)))


def test_gradient_vanishes_at_exact_target():
    rng = np.random.default_rng(7)
    m = _random_member(rng, "m")
    u = rng.uniform(-1, 1, size=(4, 2))
    job0 = grape.OptimizationJob([m], [grape.TargetSpec.map(np.eye(3))], n_steps=4, dt_ns=100.0, bounds=(-1, 1))
    h = m.hamiltonian(u)
    total = np.eye(3)
    for hk in h:
        total = expm_hermitian(hk, job0.dt_us) @ total
    job = grape.OptimizationJob([m], [grape.TargetSpec.map(total)], n_steps=4, dt_ns=100.0, bounds=(-1, 1))
    assert grape.objective(job, u) == pytest.approx(1.0)
    assert np.max(np.abs(grape.gradient(job, u))) < 1e-9


def test_single_step_gradient_sign():
    # U = exp(-i u Sx dt), target exp(-i tau Sx): fidelity grows as u dt approaches tau from below
    dt_us = 0.1
    tau = 0.8 * dt_us
    m = ham.EnsembleMember("x", controls=S["Sx"][None])
    job = grape.OptimizationJob([m], [grape.TargetSpec.map(expm_hermitian(S["Sx"], tau))], n_steps=1,
                                dt_ns=dt_us * 1e3, bounds=(-1, 1))
    assert grape.gradient(job, [[0.5]])[0, 0] > 0
    assert grape.gradient(job, [[0.95]])[0, 0] < 0
    assert abs(grape.gradient(job, [[0.8]])[0, 0]) < 1e-10


def test_optimizer_respects_bounds_and_is_monotone(pheno_members):
    job = grape.OptimizationJob(pheno_members, [grape.TargetSpec.state(RHO0, RHOP)], n_steps=60, dt_ns=10.0,
                                bounds=(0.0, 1.0), max_iter=40, goal=1.0)
    res = grape.optimize(job)
    assert np.all(res.pulse.values >= 0.0) and np.all(res.pulse.values <= 1.0)
    assert np.all(np.diff(res.history) >= 0)
    assert res.iterations <= 40


def test_optimizer_is_deterministic(pheno_members):
    job = grape.OptimizationJob(pheno_members, [grape.TargetSpec.state(RHO0, RHOP)], n_steps=50, dt_ns=10.0,
                                max_iter=15, seed=3)
    a, b = grape.optimize(job), grape.optimize(job)
    assert np.array_equal(a.pulse.values, b.pulse.values)
    assert np.array_equal(a.history, b.history)
    c = grape.optimize(job, executor=None)
    assert np.array_equal(a.pulse.values, c.pulse.values)


def test_objective_is_permutation_invariant(rng):
    job = _random_job(rng, "map")
    u = rng.uniform(-1, 1, size=(job.n_steps, job.n_controls))
    rev = grape.OptimizationJob(job.members[::-1], job.targets[::-1], job.n_steps, job.dt_ns, job.bounds,
                                smooth_lambda=job.smooth_lambda)
    assert grape.objective(job, u) == pytest.approx(grape.objective(rev, u), abs=1e-13)
    assert np.allclose(grape.gradient(job, u), grape.gradient(rev, u), atol=1e-12)


def test_non_convergence_is_reported(pheno_members):
    job = grape.OptimizationJob(pheno_members, [grape.TargetSpec.map(np.diag([1, -1, 1]))], n_steps=4,
                                dt_ns=5.0, max_iter=5, goal=0.999)
    res = grape.optimize(job)
    assert res.converged is False
    assert res.min_fidelity < 0.999
    assert res.stop_reason in {"max_iter", "line_search", "grad_floor"}


def test_state_transfer_converges(pheno_members):
    job = grape.OptimizationJob(pheno_members, [grape.TargetSpec.state(RHO0, RHOP)], n_steps=250, dt_ns=10.0,
                                goal=0.99, max_iter=500, seed=1)
    res = grape.optimize(job)
    assert res.converged and res.stop_reason == "goal"
    assert res.min_fidelity >= 0.99


def test_initial_guess_within_bounds_and_seeded(pheno_members):
    job = grape.OptimizationJob(pheno_members, [grape.TargetSpec.map(np.eye(3))], n_steps=100, dt_ns=10.0)
    a = grape.initial_guess(job)
    assert a.shape == (100, 2) and a.min() >= 0 and a.max() <= 1
    assert np.array_equal(a, grape.initial_guess(job))
    other = grape.initial_guess(job.with_steps(100).__class__(**{**job.__dict__, "seed": 9}))
    assert not np.array_equal(a, other)


def test_job_validation(pheno_members):
    t = grape.TargetSpec.map(np.eye(3))
    with pytest.raises(ValueError):
        grape.OptimizationJob([], [t], 5, 10.0)
    with pytest.raises(ValueError):
        grape.OptimizationJob(pheno_members, [t], 5, 0.0)
    with pytest.raises(ValueError):
        grape.OptimizationJob(pheno_members, [t, t, t], 5, 10.0)
    with pytest.raises(ValueError):
        grape.TargetSpec.map(np.ones((3, 3)))
    with pytest.raises(ValueError):
        grape.TargetSpec.state(np.eye(3), RHO0)


def test_doubling_search_reports_attempts(pheno_members):
    job = grape.OptimizationJob(pheno_members, [grape.TargetSpec.state(RHO0, RHOP)], n_steps=8, dt_ns=10.0,
                                goal=0.99, max_iter=300, seed=1)
    n, res, attempts = grape.doubling_search(job, start=8, max_steps=512)
    assert res.converged
    assert [a[0] for a in attempts] == [8 * 2**i for i in range(len(attempts))]
    assert attempts[-1][0] == n and all(f < 0.99 for _, f in attempts[:-1])
