import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gunitary import matcore
from gunitary.errors import ContractViolation


def test_herm_eig_diagonal():
    w, v = matcore.herm_eig(np.diag([2.0, 1.0]))
    assert np.abs(w - [2, 1]).max() < 1e-12
    assert np.abs(np.abs(v) - np.eye(2)).max() < 1e-12


def test_herm_eig_swap():
    w, _ = matcore.herm_eig(np.array([[0, 1], [1, 0]]))
    assert np.abs(w - [1, -1]).max() < 1e-12


def test_herm_eig_reconstruction():
    a = matcore.random_hermitian(5, np.random.default_rng(1))
    w, v = matcore.herm_eig(a)
    assert np.abs(v @ np.diag(w) @ v.conj().T - a).max() <= 1e-10
    assert np.all(np.diff(w) <= 0)


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(ContractViolation):
        matcore.herm_eig(np.array([[0, 1], [0, 0]]))


def test_spec_norm_examples():
    e12 = np.array([[0, 1], [0, 0]])
    assert abs(matcore.spec_norm(e12) - 1) < 1e-12
    assert abs(matcore.spec_norm(np.eye(3)) - 1) < 1e-12
    golden = (1 + np.sqrt(5)) / 2
    assert abs(matcore.spec_norm([[1, 1], [0, 1]]) - golden) < 1e-10 * golden


def test_top_singular_pair():
    a = matcore.random_cmat(3, 4, np.random.default_rng(2))
    s, xi, eta = matcore.top_singular_pair(a)
    assert np.abs(a @ eta - s * xi).max() < 1e-10
    assert abs(np.linalg.norm(xi) - 1) < 1e-12 and abs(np.linalg.norm(eta) - 1) < 1e-12


def test_kron_and_partial_trace():
    assert np.abs(matcore.kron(np.eye(2), np.eye(2)) - np.eye(4)).max() == 0
    rng = np.random.default_rng(3)
    a = matcore.random_cmat(2, 2, rng)
    assert np.abs(matcore.partial_trace(np.kron(a, np.eye(3)), (2, 3), 1) - 3 * a).max() < 1e-12
    assert np.abs(matcore.partial_trace(np.kron(np.eye(3), a), (3, 2), 0) - 3 * a).max() < 1e-12
    b = matcore.random_cmat(6, 6, rng)
    for side in (0, 1):
        assert abs(np.trace(matcore.partial_trace(b, (2, 3), side)) - np.trace(b)) < 1e-12


def test_partial_trace_dimension_mismatch():
    with pytest.raises(ContractViolation):
        matcore.partial_trace(np.eye(5), (2, 3), 0)


def test_psd_check_examples():
    ok, lam = matcore.psd_check(np.diag([1.0, 0.0]))
    assert ok and abs(lam) < 1e-15
    ok, lam = matcore.psd_check(np.diag([1.0, -0.5]))
    assert not ok and abs(lam + 0.5) < 1e-15
    g = matcore.random_cmat(4, 4, np.random.default_rng(4))
    assert matcore.psd_check(g.conj().T @ g)[0]
    with pytest.raises(ContractViolation):
        matcore.psd_check(np.array([[0, 1], [0, 0]]))


def test_positivity_margin_sign():
    assert matcore.positivity_margin(np.diag([1.0, 2.0])) >= 0
    assert matcore.positivity_margin(np.array([[1, 1], [0, 1]])) < 0


def test_orth_complement_and_null_space():
    rng = np.random.default_rng(5)
    cols = matcore.random_cmat(4, 2, rng)
    comp = matcore.orth_complement(cols, 4)
    assert comp.shape == (4, 2)
    assert np.abs(comp.conj().T @ cols).max() < 1e-12
    ns, _ = matcore.null_space(cols.conj().T)
    assert ns.shape[1] == 2 and np.abs(cols.conj().T @ ns).max() < 1e-12


def test_random_unitary_and_isometry():
    rng = np.random.default_rng(6)
    u = matcore.random_unitary(4, rng)
    assert np.abs(u.conj().T @ u - np.eye(4)).max() < 1e-12
    w = matcore.random_isometry(5, 2, rng)
    assert np.abs(w.conj().T @ w - np.eye(2)).max() < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31))
def test_spec_norm_adjoint_invariant(r, c, seed):
    a = matcore.random_cmat(r, c, np.random.default_rng(seed))
    assert abs(matcore.spec_norm(a) - matcore.spec_norm(a.conj().T)) < 1e-12 * max(1, matcore.spec_norm(a))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31))
def test_spec_norm_hermitian_is_extreme_eigenvalue(n, seed):
    a = matcore.random_hermitian(n, np.random.default_rng(seed))
    w = matcore.eigvalsh_desc(a)
    assert abs(matcore.spec_norm(a) - max(abs(w[0]), abs(w[-1]))) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31))
def test_compression_by_projection_never_increases_norm(d, n, seed):
    rng = np.random.default_rng(seed)
    a = matcore.random_cmat(n * d, n * d, rng)
    full = np.kron(np.eye(d), np.eye(n))
    assert abs(matcore.spec_norm(full @ a @ full) - matcore.spec_norm(a)) == 0
    basis = matcore.random_unitary(d, rng)
    prev = 0.0
    for r in range(1, d + 1):
        p = basis[:, :r] @ basis[:, :r].conj().T
        pk = np.kron(p, np.eye(n))
        val = matcore.spec_norm(pk @ a @ pk)
        assert val <= matcore.spec_norm(a) + 1e-12
        assert val >= prev - 1e-12
        prev = val
