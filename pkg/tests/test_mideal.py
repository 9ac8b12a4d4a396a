import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gunitary import matcore, mideal
from gunitary.errors import ContractViolation
from gunitary.opspace import (
    LevelElement,
    direct_sum_inf,
    full_matrix_space,
    level_norm,
    random_element,
)

M2 = full_matrix_space(2)
SUM = direct_sum_inf(M2, M2)
P_SECOND = np.diag([0, 0, 0, 0, 1, 1, 1, 1]).astype(complex)
LIGHT = {"sphere_restarts": 1, "descent_steps": 1, "restarts": 1}


def _verified():
    return mideal.verify_complete_m_projection(SUM, P_SECOND, k_max=2, samples=40)


def test_block_projection_is_verified():
    mp = _verified()
    assert mp.verified and mp.max_residual <= 1e-10 and mp.worst is None


def test_corner_projection_fails_with_witness():
    p = np.diag([1, 0, 0, 0]).astype(complex)
    mp = mideal.verify_complete_m_projection(M2, p, k_max=1, samples=10)
    assert not mp.verified
    # the basis pair E11 + E12 already shows ||x|| = sqrt(2) against max(1, 1)
    assert abs(mp.max_residual - (np.sqrt(2) - 1)) < 1e-9
    assert mp.worst is not None


def test_identity_projection_is_verified():
    mp = mideal.verify_complete_m_projection(M2, np.eye(4), k_max=2, samples=10)
    assert mp.verified and mp.max_residual == 0


def test_projection_validation():
    with pytest.raises(ContractViolation):
        mideal.verify_complete_m_projection(M2, np.eye(3))
    with pytest.raises(ContractViolation, match="idempotent"):
        mideal.verify_complete_m_projection(M2, 2 * np.eye(4))


def test_quotient_is_first_block():
    q = mideal.quotient_by_msummand(SUM, _verified())
    assert q.Z.m == 4
    assert q.Z.u is not None and abs(matcore.spec_norm(q.Z.u_matrix) - 1) < 1e-12
    rng = np.random.default_rng(0)
    for k in (1, 2):
        x = random_element(SUM, k, rng)
        first = LevelElement(x.coeffs[:, :, :4])
        assert abs(level_norm(q.Z, q(x)) - level_norm(M2, first)) < 1e-12
    v = np.concatenate([M2.u, 0.5 * M2.u])
    assert abs(matcore.spec_norm(q.Z.realize(q(v))) - 1) < 1e-12


def test_quotient_errors():
    with pytest.raises(ContractViolation, match="quotient is zero"):
        mideal.quotient_by_msummand(SUM, mideal.verify_complete_m_projection(SUM, np.eye(8), 1, 5))
    bad = mideal.verify_complete_m_projection(M2, np.diag([1, 0, 0, 0]), 1, 5)
    with pytest.raises(ContractViolation, match="verified"):
        mideal.quotient_by_msummand(M2, bad)


def test_quotient_unitality_balanced_unit():
    rep = mideal.check_quotient_unitality(SUM, _verified(), samples=40, ncb_opts=LIGHT)
    assert rep.passed and rep.norm_Qv_ok and not rep.alarm
    assert abs(rep.norm_u - 1) < 1e-12 and abs(rep.norm_w - 1) < 1e-12
    assert rep.isometry_error <= 1e-6
    assert rep.ncb_V.value == 1.0 and rep.ncb_Z.value == 1.0
    assert not rep.gu_sum["degenerate"]


def test_quotient_unitality_degenerate_unit():
    v = np.concatenate([M2.u, 0.5 * M2.u])
    rep = mideal.check_quotient_unitality(SUM, _verified(), v=v, samples=20, ncb_opts=LIGHT)
    assert rep.norm_Qv_ok and abs(rep.norm_w - 0.5) < 1e-12
    assert rep.gu_sum["degenerate"] and rep.gu_sum["min_gamma"] <= 1e-6
    # the degenerate unit has no exact n_cb evidence, so there is no alarm
    assert rep.ncb_V.kind != "exact" and not rep.alarm


def test_quotient_unitality_unitary_pair():
    rng = np.random.default_rng(1)
    u1, u2 = matcore.random_unitary(2, rng), matcore.random_unitary(2, rng)
    v = np.concatenate([M2.coefficients(u1), M2.coefficients(u2)])
    rep = mideal.check_quotient_unitality(SUM, _verified(), v=v, samples=20, ncb_opts=LIGHT)
    assert rep.norm_Qv_ok and rep.passed


def test_quotient_operator_system():
    rep = mideal.check_quotient_ossys(SUM, _verified(), samples=10, ncb_opts=LIGHT)
    assert rep.exact and rep.images_ok and rep.image_margin >= -1e-8
    assert rep.span_ok and rep.span_rank == 4
    assert rep.quotient.passed and rep.passed


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31))
def test_verified_projection_splits_norm(k, seed):
    mp = _verified()
    x = random_element(SUM, k, np.random.default_rng(seed), unit=False)
    px = level_norm(SUM, mideal._apply(P_SECOND, x))
    qx = level_norm(SUM, mideal._apply(mp.complement(), x))
    assert abs(level_norm(SUM, x) - max(px, qx)) <= 1e-8 * max(1, level_norm(SUM, x))
    assert qx <= level_norm(SUM, x) + 1e-9
