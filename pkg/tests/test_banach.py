import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings, strategies as st

from gunitary import banach, matcore
from gunitary.errors import ContractViolation
from gunitary.opspace import (
    ell_inf,
    full_matrix_space,
    matrix_realized,
    matrix_unit,
    polytope,
    sup_over_points,
)

M2 = matrix_realized(full_matrix_space(2))
E12 = M2.data.coefficients(matrix_unit(2, 0, 1))


def _field_of_values_radius(a):
    # oracle: max over theta of lambda_max(Re(e^{i theta} a)) on a fine grid
    thetas = np.linspace(0, 2 * np.pi, 20001)
    return max(np.linalg.eigvalsh((np.exp(1j * t) * a + np.conj(np.exp(1j * t) * a).T) / 2)[-1] for t in thetas)


def test_gamma_matrix_unit_is_numerical_radius():
    val, f = banach.gamma_classic(M2, M2.u, E12)
    assert abs(val - 0.5) < 1e-9
    assert abs(val - _field_of_values_radius(matrix_unit(2, 0, 1))) < 1e-6
    assert f.valid() and abs(abs(f(E12)) - val) < 1e-9


def test_gamma_sdp_route_agrees():
    rng = np.random.default_rng(0)
    for _ in range(3):
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        fast, _ = banach.gamma_classic(M2, M2.u, v)
        slow, f = banach.gamma_classic(M2, M2.u, v, method="sdp")
        assert abs(fast - slow) < 1e-6
        assert f.valid(1e-7)


def test_gamma_linf():
    x = ell_inf(2, u=[1, 1])
    assert abs(banach.gamma_classic(x, x.u, x.u)[0] - 1) < 1e-12
    val, f = banach.gamma_classic(x, x.u, [1, -1])
    # LP oracle: probability vectors are S(l_inf^2; 1); maximize f.(1,-1)
    lp = scipy.optimize.linprog(-np.array([1, -1]), A_eq=[[1, 1]], b_eq=[1], bounds=[(0, None)] * 2)
    assert abs(val - (-lp.fun)) < 1e-9 and abs(val - 1) < 1e-12


def test_gamma_requires_unit():
    x = ell_inf(2)
    with pytest.raises(ContractViolation):
        banach.gamma_classic(x, [2, 0], [1, 0])
    with pytest.raises(ContractViolation):
        banach.gamma_classic(x, None, [1, 0])


def test_norming_functional():
    rng = np.random.default_rng(1)
    for x in (M2, polytope([[1, 0], [0, 1], [1, 1j]]), banach.direct_sum_1(ell_inf(2), M2)):
        v = rng.standard_normal(x.m) + 1j * rng.standard_normal(x.m)
        f = banach.norming_functional(x, v)
        assert abs(f(v) - x.norm(v)) < 1e-9 and f.dual_bound <= 1 + 1e-12


def test_numerical_radius_hermitian():
    a = matcore.random_hermitian(3, np.random.default_rng(2))
    w, _ = banach.numerical_radius(a)
    assert abs(w - matcore.spec_norm(a)) < 1e-9


def test_n_classic_commutative_and_matrix():
    assert abs(banach.n_classic(ell_inf(3, u=[1, 1, 1]), [1, 1, 1], restarts=5).value - 1) < 1e-6
    res = banach.n_classic(M2, M2.u, restarts=10)
    assert abs(res.value - 0.5) < 1e-3
    assert abs(banach.gamma_classic(M2, M2.u, res.witness)[0] - res.value) < 1e-9
    scalars = polytope([[1.0]], u=[1])
    assert abs(banach.n_classic(scalars, [1], restarts=3).value - 1) < 1e-12


def test_n_sum_linf():
    x = ell_inf(2, u=[1, 1])
    rep = banach.check_n_sum(x, x.u, ell_inf(2), pairs=10, restarts=5)
    assert rep["identity_max_error"] < 1e-6
    assert abs(rep["n_sum"] - 1) < 1e-6 and abs(rep["n_x"] - 1) < 1e-6


def test_scalars_l1_sum_with_matrix_space():
    c = polytope([[1.0]], u=[1])
    f = banach.direct_sum_1(c, M2, u=np.concatenate([[1], np.zeros(4)]))
    assert abs(banach.n_classic(f, f.u, restarts=5).value - 1) < 1e-6
    rep = banach.check_n_sum(c, [1], M2, pairs=5, restarts=3)
    assert rep["identity_max_error"] < 1e-6


def test_gu_sum_cases():
    one = polytope([[1.0]])
    strict = banach.check_gu_sum(one, one, [1], [0.5])
    assert strict["degenerate"] and strict["min_gamma"] < 1e-12 and strict["case"] == "strict"
    balanced = banach.check_gu_sum(one, one, [1], [1])
    assert not balanced["degenerate"] and abs(balanced["min_gamma"] - 1) < 1e-12
    w = 0.9 * full_matrix_space(2).coefficients(np.diag([1, -1]))
    rep = banach.check_gu_sum(M2, M2, M2.u, w, samples=4)
    assert rep["degenerate"]


def test_min_comparison_attainment():
    x = ell_inf(4, u=np.ones(4))
    rep = banach.min_comparison(x, x.u, k=3, samples=10)
    assert rep["max_attainment_error"] < 1e-8
    rep = banach.min_comparison(x, x.u, k=1, samples=5, n_estimate=1.0)
    assert rep["max_attainment_error"] < 1e-8 and rep["max_sup_violation"] <= 1e-9
    # constant diagonal element: e_1 compressions attain
    const = np.zeros((2, 2, 4), dtype=complex)
    const[0, 0] = 2
    pts = np.einsum("pqt,wt->wpq", const, x.data)
    assert abs(x.norm(const[0, 0]) - max(matcore.spec_norm(p) for p in pts)) < 1e-12
    with pytest.raises(ContractViolation):
        banach.min_comparison(M2, M2.u)


def test_evaluation_embedding():
    x = sup_over_points([[1, 0], [1, 1], [1, -1]], u=[1, 0])
    rep = banach.evaluation_embedding(x, x.u)
    assert rep["unit_error"] < 1e-12 and rep["max_shortfall"] < 1e-12


def test_face_sample_of_matrix_space_are_states():
    rng = np.random.default_rng(3)
    for f in banach.face_sample(M2, M2.u, rng, count=3):
        assert f.valid(1e-7)
        rho = np.array([[f.coeffs[0], f.coeffs[2]], [f.coeffs[1], f.coeffs[3]]])
        assert matcore.psd_check(matcore.hermitian_part(rho), 1e-6)[0]


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31))
def test_gamma_of_u_and_domination(m, seed):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((m + 2, m)) + 1j * rng.standard_normal((m + 2, m))
    x = polytope(f)
    u = rng.standard_normal(m)
    x = x.with_u(u / x.norm(u))
    assert abs(banach.gamma_classic(x, x.u, x.u)[0] - 1) < 1e-9
    v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    assert banach.gamma_classic(x, x.u, v)[0] <= x.norm(v) + 1e-9


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_state_space_is_convex(seed):
    rng = np.random.default_rng(seed)
    v1, v2 = (rng.standard_normal(4) + 1j * rng.standard_normal(4) for _ in range(2))
    _, f1 = banach.gamma_classic(M2, M2.u, v1)
    _, f2 = banach.gamma_classic(M2, M2.u, v2)
    mid = (f1.coeffs + f2.coeffs) / 2
    assert abs(mid @ M2.u - 1) < 1e-9
    # dual norm through the trace norm of the representing matrix
    rep = (f1.representation["F"] + f2.representation["F"]) / 2
    assert np.linalg.norm(rep, "nuc") <= 1 + 1e-9
