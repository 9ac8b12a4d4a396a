import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gunitary import cbmap, matcore, ossys
from gunitary.errors import NoUnitalRealization
from gunitary.opspace import LevelElement, full_matrix_space, matrix_unit, span_space

M2 = full_matrix_space(2)
E12 = matrix_unit(2, 0, 1)


def _elem(space, a):
    return LevelElement.from_matrix(space, a)


def test_exact_membership_examples():
    assert ossys.cone_membership_exact(M2, _elem(M2, np.diag([1, 0]))).member
    assert not ossys.cone_membership_exact(M2, _elem(M2, E12)).member
    u = np.diag([1, np.exp(1j * np.pi / 3)])
    v = full_matrix_space(2, u=u)
    verdict = ossys.cone_membership_exact(v, _elem(v, u @ np.diag([1, 2])))
    assert verdict.member and verdict.exact


def test_exact_membership_needs_unitary():
    v = full_matrix_space(2, u=np.diag([1, 0.5]))
    with pytest.raises(NoUnitalRealization, match="sampled"):
        ossys.cone_membership_exact(v, _elem(v, np.eye(2)))


def test_sampled_membership_examples():
    rng = np.random.default_rng(0)
    g = matcore.random_cmat(2, 2, rng)
    psd = g @ g.conj().T
    assert ossys.cone_membership_sampled(M2, _elem(M2, psd)).member
    a = np.diag([1.0, -0.3])
    v = ossys.cone_membership_sampled(M2, _elem(M2, a), stop_below=None)
    assert not v.member and abs(v.margin + 0.3) < 1e-6
    v = ossys.cone_membership_sampled(M2, _elem(M2, E12), n_max=1)
    assert not v.member and v.n == 1 and v.margin < -1e-6


def test_operator_system_examples():
    assert ossys.check_operator_system(M2).passed
    rep = ossys.check_operator_system(span_space([np.eye(2), E12], np.eye(2)))
    assert not rep.passed and not rep.span_ok and rep.hermitian_dim == 1
    e21 = matrix_unit(2, 1, 0)
    full = span_space([np.eye(2), E12, e21, np.diag([1, -1])], np.eye(2))
    rep = ossys.check_operator_system(full)
    assert rep.passed and rep.hermitian_dim == 4


def test_hermitian_subspace_of_twisted_unit():
    u = matcore.random_unitary(2, np.random.default_rng(1))
    v = full_matrix_space(2, u=u)
    herm, _ = ossys.hermitian_subspace(v)
    assert herm.shape[0] == 4
    for h in herm:
        assert matcore.is_hermitian(u.conj().T @ v.realize(h), 1e-10)


def test_splus_membership_examples():
    cones = ossys.psd_cones(M2)
    w = ossys.splus_membership(M2, cones, M2.basis)
    assert isinstance(w, cbmap.SnWitness) and w.restriction_residual < 1e-6
    tr = np.array([[[np.trace(g) / 2]] for g in M2.basis])
    w = ossys.splus_membership(M2, cones, tr)
    assert isinstance(w, cbmap.SnWitness)
    transposed = np.array([g.T for g in M2.basis])
    sol = ossys.splus_membership(M2, cones, transposed)
    assert not isinstance(sol, cbmap.SnWitness)


def test_declared_cone_membership():
    psd = ossys.psd_cones(M2)
    diag = ossys.diagonal_cones(M2)
    x = _elem(M2, np.array([[1, 0.5], [0.5, 1]]))
    assert ossys.in_declared_cone(M2, psd, x)[0]
    inside, sol = ossys.in_declared_cone(M2, diag, x)
    assert not inside and sol.status == "infeasible"
    assert ossys.in_declared_cone(M2, diag, _elem(M2, np.diag([1, 2])))[0]
    # boundary element of the level-2 cone
    j = psd.generators[0].element
    assert ossys.in_declared_cone(M2, psd, j)[0]


def test_k_n_outer():
    cones = ossys.psd_cones(M2)
    assert ossys.k_n_outer(M2, cones, _elem(M2, np.diag([1, 0]))).member
    v = ossys.k_n_outer(M2, cones, _elem(M2, np.diag([1, -0.5])))
    assert not v.member and v.margin < -1e-6


def test_ncb_plus_on_psd_cones():
    est = ossys.ncb_plus_estimate(M2, ossys.psd_cones(M2), k_max=1, n_max=2)
    assert est.value >= 0.999


def test_zero_cones_vacuous():
    v = span_space([E12])
    cones = ossys.ConeSpec([])
    assert cones.declared_levels == 0
    assert ossys.in_declared_cone(v, cones, LevelElement(np.zeros(1)))[0]
    assert not ossys.in_declared_cone(v, cones, LevelElement(np.ones(1)))[0]


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**31))
def test_exact_and_sampled_agree(seed):
    rng = np.random.default_rng(seed)
    a = matcore.random_hermitian(2, rng)
    x = _elem(M2, a)
    exact = ossys.cone_membership_exact(M2, x)
    sampled = ossys.cone_membership_sampled(M2, x, restarts=2, seed=seed)
    if exact.member:
        assert sampled.margin >= -1e-6
    elif exact.margin < -1e-4:
        assert sampled.margin <= -1e-6


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31))
def test_cone_closed_under_positive_combinations(k, seed):
    rng = np.random.default_rng(seed)
    u = matcore.random_unitary(2, rng)
    v = full_matrix_space(2, u=u)
    total = np.zeros((2 * k, 2 * k), dtype=complex)
    for _ in range(3):
        g = matcore.random_cmat(2 * k, 2 * k, rng)
        total += rng.uniform() * np.kron(np.eye(k), u) @ g @ g.conj().T
    verdict = ossys.cone_membership_exact(v, LevelElement.from_matrix(v, total))
    assert verdict.member and verdict.margin >= -1e-9
