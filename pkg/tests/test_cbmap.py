import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gunitary import cbmap, matcore
from gunitary.errors import ContractViolation
from gunitary.opspace import LevelElement, full_matrix_space, matrix_unit, span_space

# brute-force ascent values for random maps drawn with default_rng(11),
# computed once without any SDP and frozen here
BRUTE_FORCE = {(2, 2): 5.138070380303517, (3, 2): 8.073122707394216, (2, 3): 6.4075505843791305}


def test_identity_choi_acts_as_identity():
    rng = np.random.default_rng(0)
    a = matcore.random_cmat(2, 2, rng)
    idm = cbmap.identity_map(2)
    assert np.abs(idm.apply(a) - a).max() < 1e-15
    b = matcore.random_cmat(4, 4, rng)
    assert np.abs(idm.apply(b, 2) - b).max() < 1e-15


def test_trace_map():
    tr = cbmap.from_map(lambda a: np.trace(a) * np.eye(1), 2)
    assert abs(tr.apply(matrix_unit(2, 0, 0))[0, 0] - 1) < 1e-15
    assert cbmap.is_cp(tr)


def test_choi_convention():
    rng = np.random.default_rng(1)
    k = matcore.random_cmat(3, 2, rng)
    ch = cbmap.compression_map(k)
    for i in range(3):
        for j in range(3):
            assert np.abs(ch.image(i, j) - k.conj().T @ matrix_unit(3, i, j) @ k).max() < 1e-14


def test_is_cp_examples():
    assert cbmap.is_cp(cbmap.identity_map(2))
    assert not cbmap.is_cp(cbmap.transpose_map(2))
    assert abs(np.linalg.eigvalsh(cbmap.transpose_map(2).C)[0] + 1) < 1e-12
    assert cbmap.is_cp(cbmap.from_map(lambda a: np.diag(np.diag(a)), 3))


def test_cb_norm_examples():
    assert abs(cbmap.cb_norm(cbmap.identity_map(2)).value - 1) < 1e-6
    assert abs(cbmap.cb_norm(cbmap.transpose_map(2)).value - 2) < 1e-6
    assert abs(cbmap.brute_force_cb(cbmap.transpose_map(2)) - 2) < 1e-9
    three = cbmap.from_map(lambda a: 3 * a, 2)
    res = cbmap.cb_norm(three)
    assert res.verified and abs(res.value - 3) < 1e-6


@pytest.mark.parametrize("dims", list(BRUTE_FORCE))
def test_cb_norm_matches_frozen_brute_force(dims):
    rng = np.random.default_rng(11)
    for key in BRUTE_FORCE:  # draw order matters
        d, n = key
        c = cbmap.ChoiMatrix(d, n, matcore.random_cmat(d * n, d * n, rng))
        if key == dims:
            break
    assert abs(cbmap.cb_norm(c).value - BRUTE_FORCE[dims]) < 1e-3


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_cb_norm_identity_all_sizes(d):
    assert abs(cbmap.cb_norm(cbmap.identity_map(d)).value - 1) < 1e-6


def test_cb_norm_unitary_invariance():
    rng = np.random.default_rng(2)
    c = cbmap.ChoiMatrix(2, 2, matcore.random_cmat(4, 4, rng))
    u, v = matcore.random_unitary(2, rng), matcore.random_unitary(2, rng)
    rot = cbmap.from_map(lambda a: v.conj().T @ c.apply(u @ a @ u.conj().T) @ v, 2)
    assert abs(cbmap.cb_norm(c).value - cbmap.cb_norm(rot).value) < 1e-6


def test_cb_norm_slack_certifies():
    res = cbmap.cb_norm(cbmap.transpose_map(2))
    half = cbmap.ChoiMatrix(2, 2, cbmap.transpose_map(2).C / res.value,
                            slack=tuple(s / res.value for s in res.slack))
    assert cbmap.contraction_residual(half) < 1e-6


def test_sn_membership_examples():
    m2 = full_matrix_space(2)
    w = cbmap.sn_membership(m2, m2.basis)
    assert isinstance(w, cbmap.SnWitness) and w.valid

    line = span_space([np.diag([1, 0.5])], np.diag([1, 0.5]))
    w = cbmap.sn_membership(line, np.ones((1, 1, 1)))
    assert isinstance(w, cbmap.SnWitness) and w.valid
    x = LevelElement(np.random.default_rng(3).standard_normal((2, 2, 1)))
    # level norms on the line are |a|*||u||, and the functional reproduces them
    assert abs(w.value(line, x) - matcore.spec_norm(x.coeffs[:, :, 0])) < 1e-6

    targets = m2.basis.copy()
    targets[1] = 2 * matrix_unit(2, 0, 1)
    sol = cbmap.sn_membership(m2, targets)
    assert not isinstance(sol, cbmap.SnWitness)
    assert sol.status == "infeasible"
    assert cbmap.cb_norm(cbmap.from_map(
        lambda a: a + a[0, 1] * matrix_unit(2, 0, 1), 2)).value > 1 + 1e-3


def test_sn_membership_validation():
    m2 = full_matrix_space(2)
    with pytest.raises(ContractViolation):
        cbmap.sn_membership(m2, m2.basis[:2])
    with pytest.raises(ContractViolation):
        cbmap.sn_membership(m2.with_u(None), m2.basis)


def test_compression_element_examples():
    m2 = full_matrix_space(2)
    w = cbmap.compression_element(m2, np.eye(2))
    assert w.valid and np.abs(w.choi.C - cbmap.identity_map(2).C).max() < 1e-15
    state = cbmap.compression_element(m2, np.array([[1.0], [0.0]]))
    a = np.array([[3, 1], [2, 5]])
    assert abs(state.choi.apply(a)[0, 0] - 3) < 1e-15
    with pytest.raises(ContractViolation):
        cbmap.compression_element(m2, np.array([[2.0], [0.0]]))


def test_compression_element_agrees_with_sdp():
    m3 = full_matrix_space(3)
    w = matcore.random_isometry(3, 2, np.random.default_rng(4))
    wit = cbmap.compression_element(m3, w)
    assert wit.valid
    check = cbmap.sn_membership(m3, wit.choi.on_space(m3))
    assert isinstance(check, cbmap.SnWitness) and check.valid


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31))
def test_brute_force_never_exceeds_sdp(d, n, seed):
    c = cbmap.ChoiMatrix(d, n, matcore.random_cmat(d * n, d * n, np.random.default_rng(seed)))
    val = cbmap.cb_norm(c).value
    brute = cbmap.brute_force_cb(c, restarts=10, seed=seed)
    assert brute <= val * (1 + 1e-6)
    assert brute >= val - 1e-3 * max(1, val)
