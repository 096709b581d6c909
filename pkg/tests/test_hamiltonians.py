import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm
from scipy.spatial.transform import Rotation

from nvensemble import geometry as geo, hamiltonians as ham, spin
from nvensemble.geometry import PasRotation

S = spin.spin1_basis()
T = spin.twisted_operators()


def _interaction_frame_average(rot, f1, f2, u, n_samples=256):
    """Average of exp(i w t Sz^2) H_lab(t) exp(-i w t Sz^2) over one carrier period (w = 1)."""
    m = rot.matrix
    ops = [S["Sx"], S["Sy"], S["Sz"]]
    total = np.zeros((3, 3), dtype=complex)
    for t in np.arange(n_samples) * 2 * np.pi / n_samples:
        c1 = u.i1 * np.cos(t) + u.q1 * np.sin(t)
        c2 = u.i2 * np.cos(t) + u.q2 * np.sin(t)
        pas = m @ (c1 * np.asarray(f1) + c2 * np.asarray(f2))
        h_lab = sum(p * o for p, o in zip(pas, ops))
        frame = expm(1j * t * S["Sz2"])
        total += frame @ h_lab @ frame.conj().T
    return total / n_samples


def _random_rotation(rng):
    return PasRotation(Rotation.random(random_state=int(rng.integers(1 << 31))).as_matrix())


def test_internal_hamiltonian():
    assert np.allclose(ham.internal_hamiltonian(0.0), 0)
    d = ham.mhz(2870.0)
    assert np.allclose(np.linalg.eigvalsh(ham.internal_hamiltonian(d)), [0, d, d])
    assert np.allclose(ham.internal_hamiltonian(ham.mhz(2870.0) - ham.mhz(2870.0)), 0)


def test_apriori_coefficients_examples():
    u = ham.ControlValues(i1=1.0)
    c = ham.apriori_coefficients(PasRotation(np.eye(3)), [1, 0, 0], [0, 0, 0], u)
    assert c == pytest.approx((0.5, 0, 0, 0))
    assert np.allclose(ham.apriori_hamiltonian(c), 0.5 * S["Sx"])
    c = ham.apriori_coefficients(PasRotation(np.eye(3)), [0.3, 0.2, 1.0], [0.4, -1.0, 0.1], ham.ControlValues(1.0, 0, 0.5, 0))
    assert c.B == 0 and c.D == 0


def test_apriori_coefficients_match_interaction_frame_average(rng):
    for _ in range(10):
        rot = _random_rotation(rng)
        f1, f2 = rng.normal(size=3), rng.normal(size=3)
        u = ham.ControlValues(*rng.normal(size=4))
        h_avg = _interaction_frame_average(rot, f1, f2, u)
        h_eff = ham.apriori_hamiltonian(ham.apriori_coefficients(rot, f1, f2, u))
        # the average keeps a static Sz-free part; Sz terms oscillate and vanish
        assert np.max(np.abs(h_avg - h_eff)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(
    u=st.lists(st.floats(-3, 3), min_size=4, max_size=4),
    v=st.lists(st.floats(-3, 3), min_size=4, max_size=4),
    k=st.floats(-2, 2),
)
def test_apriori_linearity(u, v, k):
    rot = geo.pas_rotation("110", geo.NvOrientation.MPM)
    f1, f2 = np.array([0.4, 0.1, -1.2]), np.array([-0.3, 0.0, 0.8])

    def h(x):
        return ham.apriori_hamiltonian(ham.apriori_coefficients(rot, f1, f2, ham.ControlValues(*x)))

    lhs = h(np.asarray(u) + k * np.asarray(v))
    assert np.allclose(lhs, h(u) + k * h(v), atol=1e-12)
    assert np.allclose(lhs, lhs.conj().T)


def test_control_matrix_rows_are_unit_controls():
    rot = geo.pas_rotation("100", geo.NvOrientation.PPP)
    f = [np.array([1.0, 0, 2.0]), np.array([0.5, 0, -1.0])]
    m = ham.control_coefficient_matrix(rot, f)
    u = ham.ControlValues(0.3, -0.4, 0.7, 0.2)
    assert np.allclose(u.as_array() @ m, ham.apriori_coefficients(rot, *f, u))
    assert ham.control_coefficient_matrix(rot, f[:1]).shape == (4, 4)


def test_degenerate_pairs_have_equal_coefficients(focal_fields):
    for a, b in [(geo.NvOrientation.MMP, geo.NvOrientation.PMM), (geo.NvOrientation.PPP, geo.NvOrientation.MPM)]:
        ma = ham.control_coefficient_matrix(geo.pas_rotation("100", a), focal_fields)
        mb = ham.control_coefficient_matrix(geo.pas_rotation("100", b), focal_fields)
        assert np.max(np.abs(ma - mb)) <= 1e-9 * np.max(np.abs(ma))


def test_apriori_hamiltonian_examples():
    assert np.allclose(ham.apriori_hamiltonian((0, 0, 0, 0)), 0)
    assert np.allclose(ham.apriori_hamiltonian((1, 0, 0, 0)), S["Sx"])


def test_pseudo_coefficients_round_trip(rng):
    for _ in range(20):
        c = rng.normal(size=4)
        lhs = ham.pseudo_hamiltonian(ham.pseudo_coefficients(c))
        assert np.max(np.abs(lhs - ham.apriori_hamiltonian(c))) < 1e-12
    assert ham.pseudo_coefficients((0, 0, 0, 0)) == (0, 0, 0, 0)


def test_pseudo_coefficients_no_q_drive():
    a, c = 0.7, -0.3
    pc = ham.pseudo_coefficients((a, 0.0, c, 0.0))
    r = 1 / np.sqrt(2)
    assert pc == pytest.approx((r * a, -r * c, r * a, r * c))


def test_single_transition_condition():
    # C~ = D~ = 0  <=>  A = -D and B = C
    h = ham.apriori_hamiltonian((0.4, 0.9, 0.9, -0.4))
    pc = ham.pseudo_coefficients((0.4, 0.9, 0.9, -0.4))
    assert pc.C == pytest.approx(0) and pc.D == pytest.approx(0)
    p_minus = spin.subspace_projector("minus")
    assert np.allclose(p_minus @ h @ p_minus, 0)


def test_phenomenological_examples(measured_params):
    pa, _ = measured_params
    assert np.allclose(ham.phenomenological_hamiltonian(pa, 0.6, 0.0), pa.omega_nv * 0.3 * S["Sx"])
    p = ham.PhenomenologicalParams(1.0, eta_deg=90.0, dtheta_deg=0.0)
    assert np.allclose(ham.phenomenological_hamiltonian(p, 1.0, 1.0), 0.5 * S["Sx"] + 0.5 * S["Sy"])
    h = ham.phenomenological_hamiltonian(pa, 1.0, 1.0)
    assert np.allclose(h, h.conj().T)
    twisted = [np.real(np.trace(h @ T[k])) for k in ("Sx_t", "Sy_t")]
    assert max(abs(v) for v in twisted) > 1.0
    with pytest.raises(ValueError):
        ham.phenomenological_hamiltonian(pa, 1.2, 0.0)
    with pytest.raises(ValueError):
        ham.PhenomenologicalParams(0.0)


def test_phenomenological_iq_matches_amplitude(measured_params):
    pa, _ = measured_params
    amp = ham.phenomenological_controls(pa)
    iq = ham.phenomenological_controls(pa, mode="iq")
    d = np.radians(pa.dtheta_deg)
    assert np.allclose(amp[0], iq[0])
    assert np.allclose(amp[1], np.cos(d) * iq[2] + np.sin(d) * iq[3])


def test_phenomenological_is_apriori_with_flipped_quadrature():
    # fields along PAS x (ch1) and at eta in the PAS xy-plane (ch2)
    eta = np.radians(115.0)
    f1, f2 = np.array([1.0, 0, 0]), np.array([np.cos(eta), np.sin(eta), 0])
    p = ham.PhenomenologicalParams(1.0, eta_deg=115.0, dtheta_deg=0.0)
    iq = ham.phenomenological_controls(p, mode="iq")
    apri = np.array([ham.apriori_hamiltonian(r) for r in ham.control_coefficient_matrix(PasRotation(np.eye(3)), [f1, f2])])
    assert np.allclose(iq[[0, 2]], apri[[0, 2]])
    assert np.allclose(iq[[1, 3]], -apri[[1, 3]])


def test_robustness_ensemble(pheno_members):
    e = ham.robustness_ensemble(pheno_members, [-1.0, 0.0, 1.0])
    assert len(e) == 6
    assert sum(m.weight for m in e) == pytest.approx(1.0, abs=1e-12)
    e = ham.robustness_ensemble(pheno_members, [-1.0, 0.0, 1.0], True)
    assert len(e) == 18
    assert sum(m.weight for m in e) == pytest.approx(1.0, abs=1e-12)
    m = next(x for x in e if x.delta == 1.0 and x.hyperfine_m == -1)
    expected = 1.0 * S["Sz2"] - ham.mhz(2.16) * S["Sz"]
    assert np.allclose(m.drift, expected)
    assert {x.group for x in e} == {"A", "B"}
    deltas = sorted({x.delta for x in ham.robustness_ensemble(pheno_members, list(ham.mhz([-0.1, 0, 0.1])))})
    assert deltas == pytest.approx([-2 * np.pi * 0.1, 0.0, 2 * np.pi * 0.1])
    with pytest.raises(ValueError):
        ham.robustness_ensemble([], [0.0])


def test_subensembles(focal_fields):
    subs = ham.apriori_subensembles("100", focal_fields)
    assert [m.group for m in subs] == ["A", "B"]
    assert subs[0].name == "(-1,-1,1)&(1,-1,-1)"
    assert len(ham.apriori_subensembles("110", focal_fields)) == 4


def test_control_values_polar():
    u = ham.ControlValues.from_polar(1.0, 0.0, 1.0, np.radians(270))
    assert u.as_array() == pytest.approx([1, 0, 0, -1], abs=1e-15)
    with pytest.raises(ValueError):
        ham.ControlValues.from_polar(-1.0, 0, 0, 0)


def test_lab_frame_propagator_short_run():
    # strong drive, short time: still close to the effective propagator
    rot = geo.pas_rotation("100", geo.NvOrientation.PPP)
    f1 = np.array([-2.0, 0.0, 3.0])
    f2 = np.array([-1.5, 0.0, -2.5])
    u = ham.ControlValues.from_polar(1.0, 0.0, 1.0, np.radians(270))
    zfs = ham.mhz(2870.0)
    lab = ham.lab_frame_propagator(rot, f1, f2, u, 0.05, zfs=zfs, omega_t=zfs)
    eff = ham.effective_propagator(ham.apriori_coefficients(rot, f1, f2, u), 0.05)
    assert np.linalg.norm(lab - eff, 2) < 1e-2
    assert np.allclose(lab.conj().T @ lab, np.eye(3), atol=1e-9)
