import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gunitary import matcore
from gunitary.errors import ContractViolation, NoUnitalRealization
from gunitary.opspace import (
    LevelElement,
    OperatorSpace,
    conjugate_embedding,
    diagonal_space,
    direct_sum_1,
    direct_sum_inf,
    ell_inf,
    full_matrix_space,
    level_norm,
    matrix_unit,
    min_quantization,
    normed_direct_sum_inf,
    polytope,
    random_element,
    ruan_residuals,
    span_space,
    sup_over_points,
    u_multiple,
    unitary_realization,
)


def test_level_norm_examples():
    m2 = full_matrix_space(2)
    assert abs(level_norm(m2, LevelElement(m2.coefficients(np.eye(2)))) - 1) < 1e-12
    assert abs(level_norm(m2, LevelElement(m2.coefficients(matrix_unit(2, 0, 1)))) - 1) < 1e-12
    block = np.zeros((4, 4))
    block[:2, 2:] = np.eye(2)
    x = LevelElement.from_matrix(m2, block)
    assert x.k == 2
    assert abs(level_norm(m2, x) - matcore.spec_norm(block)) < 1e-12
    assert abs(level_norm(m2, x) - 1) < 1e-12


def test_realize_roundtrip():
    m2 = full_matrix_space(2)
    rng = np.random.default_rng(0)
    x = random_element(m2, 3, rng)
    y = LevelElement.from_matrix(m2, x.realize(m2))
    assert np.abs(x.coeffs - y.coeffs).max() < 1e-12


def test_space_validation():
    with pytest.raises(ContractViolation):
        OperatorSpace(np.array([np.eye(2), 2 * np.eye(2)]))
    with pytest.raises(ContractViolation):
        OperatorSpace(np.array([np.eye(2)]), u=[2.0])
    sp = span_space([np.eye(2), matrix_unit(2, 0, 1)])
    with pytest.raises(ContractViolation):
        sp.coefficients(matrix_unit(2, 1, 0))
    with pytest.raises(ContractViolation):
        sp.u_matrix


def test_min_quantization_examples():
    x = ell_inf(2)
    v = min_quantization(x)
    assert np.abs(v.realize([1, -1]) - np.diag([1, -1])).max() == 0
    assert abs(level_norm(v, LevelElement(np.array([1.0, -1.0]))) - 1) < 1e-12
    vals = np.array([[1, 2], [1, -1], [1, 0.5]])
    w = min_quantization(sup_over_points(vals))
    assert np.abs(w.realize([1, 0]) - np.eye(3)).max() == 0
    assert abs(level_norm(w, LevelElement(np.array([1.0, 0.0]))) - 1) < 1e-12
    with pytest.raises(ContractViolation):
        sup_over_points(np.zeros((0, 2)))


def test_min_quantization_level2_two_ways():
    rng = np.random.default_rng(1)
    vals = rng.standard_normal((5, 3))
    v = min_quantization(sup_over_points(vals))
    x = random_element(v, 2, rng, unit=False)
    per_point = max(matcore.spec_norm(x.coeffs @ vals[w]) for w in range(5))
    assert abs(level_norm(v, x) - per_point) < 1e-12


def test_direct_sum_inf_examples():
    one = OperatorSpace(np.ones((1, 1, 1)), [1.0])
    s = direct_sum_inf(one, one)
    assert np.abs(s.realize([1, 0.5]) - np.diag([1, 0.5])).max() == 0
    assert abs(level_norm(s, LevelElement(np.array([1, 0.5]))) - 1) < 1e-12
    m2 = full_matrix_space(2)
    both = direct_sum_inf(m2, m2)
    assert abs(matcore.spec_norm(both.u_matrix) - 1) < 1e-12
    rng = np.random.default_rng(2)
    for k in (1, 2):
        a, b = random_element(m2, k, rng), random_element(m2, k, rng, unit=False)
        x = LevelElement(np.concatenate([a.coeffs, b.coeffs], axis=2))
        assert abs(level_norm(both, x) - max(level_norm(m2, a), level_norm(m2, b))) < 1e-12


def test_conjugate_embedding_examples():
    theta = 0.7
    v = full_matrix_space(2, u=np.diag([1, np.exp(1j * theta)]))
    c, um = conjugate_embedding(v)
    assert np.abs(c.u_matrix - np.eye(2)).max() < 1e-12
    rng = np.random.default_rng(3)
    for k in (1, 2, 3):
        x = random_element(v, k, rng)
        assert abs(level_norm(c, x) - level_norm(v, x)) < 1e-12
    u = matcore.random_unitary(3, rng)
    line = span_space([u], u)
    c, _ = conjugate_embedding(line)
    assert np.abs(c.basis[0] - np.eye(3)).max() < 1e-12


def test_conjugate_embedding_rejects_non_unitary():
    v = full_matrix_space(2, u=np.diag([1, 0.5]))
    with pytest.raises(NoUnitalRealization, match="no exact unital realization"):
        conjugate_embedding(v)


def test_unitary_realization_via_support():
    # u = E_11 is unitary on the support of span{E_11}
    v = span_space([matrix_unit(3, 0, 0)], matrix_unit(3, 0, 0))
    r, info = unitary_realization(v)
    assert info["route"] == "support-compression"
    assert np.abs(r.u_matrix - np.eye(1)).max() < 1e-12
    with pytest.raises(NoUnitalRealization):
        unitary_realization(full_matrix_space(2, u=np.diag([1, 0.5])))


def test_u_multiple():
    m2 = full_matrix_space(2)
    a = np.array([[1, 2], [3, 4j]])
    assert np.abs(u_multiple(m2, LevelElement.scalar_tensor(a, m2.u)) - a).max() < 1e-12
    assert u_multiple(m2, LevelElement(m2.coefficients(matrix_unit(2, 0, 1)))) is None


def test_normed_spaces():
    x = polytope([[1, 1], [1, -1]], u=[1, 0])
    assert abs(x.norm([0.5, 0.5]) - 1) < 1e-12
    s = direct_sum_1(ell_inf(2), ell_inf(1), u=[1, 1, 0])
    assert abs(s.norm([1, -2, 3]) - 5) < 1e-12
    t = normed_direct_sum_inf(ell_inf(1), ell_inf(1))
    assert abs(t.norm([1, 0.5]) - 1) < 1e-12
    with pytest.raises(ContractViolation):
        polytope([[1, 0]])
    with pytest.raises(ContractViolation):
        ell_inf(2, u=[2, 0])


def test_diagonal_space_unit():
    v = diagonal_space(3)
    assert np.abs(v.u_matrix - np.eye(3)).max() == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31))
def test_ruan_axioms(k, l, seed):
    rng = np.random.default_rng(seed)
    v = span_space([np.eye(3), matcore.random_cmat(3, 3, rng), matcore.random_cmat(3, 3, rng)])
    x = random_element(v, k, rng, unit=False)
    y = random_element(v, l, rng, unit=False)
    alpha = matcore.random_cmat(2, k, rng)
    beta = matcore.random_cmat(k, 2, rng)
    err, excess = ruan_residuals(v, x, y, alpha, beta)
    scale = max(1.0, level_norm(v, x), level_norm(v, y))
    assert err <= 1e-12 * scale
    assert excess <= 1e-12 * scale * matcore.spec_norm(alpha) * matcore.spec_norm(beta)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31))
def test_min_quantization_level1_matches_norm(points, m, seed):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((points + m, m)) + 1j * rng.standard_normal((points + m, m))
    x = sup_over_points(vals)
    v = min_quantization(x)
    c = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    assert abs(level_norm(v, LevelElement(c)) - x.norm(c)) < 1e-12 * max(1, x.norm(c))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31))
def test_conjugate_embedding_is_complete_isometry(k, seed):
    rng = np.random.default_rng(seed)
    u = matcore.random_unitary(2, rng)
    v = full_matrix_space(2, u=u)
    c, _ = conjugate_embedding(v)
    x = random_element(v, k, rng)
    assert abs(level_norm(c, x) - level_norm(v, x)) < 1e-12
