import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvensemble import spin

S = spin.spin1_basis()
T = spin.twisted_operators()
EPS = {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1, (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}


def test_basis_definitions():
    assert np.allclose(S["Sz"] @ spin.KET_P1, spin.KET_P1)
    assert np.allclose(S["Sz2"], np.diag([1, 0, 1]))
    assert np.allclose(spin.commutator(S["Sx"], S["Sy"]), 1j * S["Sz"], atol=1e-14)
    casimir = S["Sx"] @ S["Sx"] + S["Sy"] @ S["Sy"] + S["Sz"] @ S["Sz"]
    assert np.allclose(casimir, 2 * np.eye(3))


def test_twisted_entries_match_hand_products():
    sx, sy, sz2 = S["Sx"], S["Sy"], S["Sz2"]
    # written out by hand from the canonical matrices
    r = 1 / np.sqrt(2)
    sx_t = np.array([[0, -r, 0], [-r, 0, r], [0, r, 0]], dtype=complex)
    sy_t = np.array([[0, -1j * r, 0], [1j * r, 0, 1j * r], [0, -1j * r, 0]], dtype=complex)
    assert np.allclose(T["Sx_t"], 1j * (sy @ sz2 - sz2 @ sy))
    assert np.allclose(T["Sx_t"], sx_t, atol=1e-15)
    assert np.allclose(T["Sy_t"], sy_t, atol=1e-15)
    for op in T.values():
        assert np.allclose(op, op.conj().T)
        assert abs(np.trace(op)) < 1e-15
        assert np.allclose(np.diag(op), 0)


@pytest.mark.parametrize("sign", list(spin.SubspaceSign))
def test_pseudo_spin_commutators(sign):
    ops = spin.pseudo_spin_operators(sign)
    keys = ["Sx", "Sy", "Sz"]
    for (i, j, k), e in EPS.items():
        lhs = spin.commutator(ops[keys[i]], ops[keys[j]])
        assert np.max(np.abs(lhs - 2j * e * ops[keys[k]])) < 1e-12


def test_pseudo_spin_support():
    plus = spin.pseudo_spin_operators("plus")
    minus = spin.pseudo_spin_operators("minus")
    assert np.allclose(plus["Sz"] @ spin.KET_M1, 0)
    for op in plus.values():
        assert np.allclose(op[2, :], 0) and np.allclose(op[:, 2], 0)
    for op in minus.values():
        assert np.allclose(op[0, :], 0) and np.allclose(op[:, 0], 0)
    total = sum(op @ op for op in minus.values())
    assert np.allclose(total, 3 * spin.subspace_projector("minus"))


def test_recombination_identities():
    p = spin.pseudo_spin_operators("plus")
    m = spin.pseudo_spin_operators("minus")
    r = 1 / np.sqrt(2)
    assert np.max(np.abs(S["Sx"] - r * (p["Sx"] + m["Sx"]))) < 1e-12
    assert np.max(np.abs(S["Sy"] - r * (-p["Sy"] + m["Sy"]))) < 1e-12
    assert np.max(np.abs(T["Sx_t"] - r * (-p["Sx"] + m["Sx"]))) < 1e-12
    assert np.max(np.abs(T["Sy_t"] + r * (p["Sy"] + m["Sy"]))) < 1e-12


@pytest.mark.parametrize("s", [+1, -1])
def test_twisted_combinations_isolate_single_transitions(s):
    # (Sx - s Sx_t)/sqrt(2) couples only |0> <-> |s>
    op = (S["Sx"] - s * T["Sx_t"]) / np.sqrt(2)
    sign = spin.SubspaceSign(s)
    assert np.allclose(op, spin.pseudo_spin_operators(sign)["Sx"], atol=1e-12)
    assert np.linalg.matrix_rank(op) == 2


def test_target_unitary_examples():
    assert np.allclose(spin.target_unitary(spin.RotationSpec(0.0, (0, 0, 1)), "plus"), np.eye(3))
    u = spin.target_unitary(spin.RotationSpec(np.pi, (0.0, 1.0, 0.0)), "plus")
    # block on (|+1>, |0>), untouched |-1>
    assert np.allclose(u[np.ix_([0, 1], [0, 1])], [[0, 1], [-1, 0]])
    assert u[2, 2] == pytest.approx(1.0)
    assert np.allclose(u[2, :2], 0) and np.allclose(u[:2, 2], 0)


def test_rotation_spec_rejects_bad_axis():
    with pytest.raises(ValueError):
        spin.RotationSpec(1.0, (1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        spin.RotationSpec(float("nan"), (1.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        spin.SubspaceSign.parse("sideways")


unit_axes = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3).filter(lambda v: np.linalg.norm(v) > 1e-3)


@settings(max_examples=60, deadline=None)
@given(axis=unit_axes, a=st.floats(-7, 7), b=st.floats(-7, 7), sign=st.sampled_from(list(spin.SubspaceSign)))
def test_target_unitary_properties(axis, a, b, sign):
    n = np.asarray(axis) / np.linalg.norm(axis)
    ua = spin.target_unitary(spin.RotationSpec(a, tuple(n)), sign)
    ub = spin.target_unitary(spin.RotationSpec(b, tuple(n)), sign)
    uab = spin.target_unitary(spin.RotationSpec(a + b, tuple(n)), sign)
    assert np.max(np.abs(ua.conj().T @ ua - np.eye(3))) < 1e-12
    untouched = spin.projector(-int(sign.value))
    assert np.max(np.abs(ua @ untouched - untouched @ ua)) < 1e-12
    assert np.allclose(ua @ ub, uab, atol=1e-12)
