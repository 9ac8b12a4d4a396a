"""Complete M-projections, quotients by complete M-summands, quotient unitality."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import matcore
from .banach import check_gu_sum, gamma_classic
from .errors import ContractViolation, NoUnitalRealization
from .gamma import ncb_estimate
from .opspace import (
    LevelElement,
    OperatorSpace,
    level_norm,
    matrix_realized,
    random_element,
    unitary_realization,
)
from .ossys import (
    check_operator_system,
    cone_membership_exact,
    cone_membership_sampled,
    hermitian_subspace,
)

IDEMPOTENT_TOL = 1e-10
MSUM_TOL = 1e-8
ISOMETRY_TOL = 1e-6


def _apply(mat, x: LevelElement) -> LevelElement:
    """Apply a coefficient-space linear map entrywise to ``x ∈ M_k(V)``."""
    return LevelElement(np.einsum("st,pqt->pqs", mat, x.coeffs))


@dataclass
class MProjection:
    P: np.ndarray
    verified_levels: int
    max_residual: float
    verified: bool
    samples: int
    worst: LevelElement | None = None
    note: str = "sample-based: a failure is conclusive, a pass is statistical"

    def complement(self) -> np.ndarray:
        return np.eye(self.P.shape[0]) - self.P


def _msum_residual(space, P, x):
    px = level_norm(space, _apply(P, x))
    qx = level_norm(space, _apply(np.eye(P.shape[0]) - P, x))
    return abs(level_norm(space, x) - max(px, qx))


def verify_complete_m_projection(space: OperatorSpace, P, k_max: int = 3, samples: int = 200,
                                 seed: int = 0, tol: float = MSUM_TOL) -> MProjection:
    """Test ``||x|| = max(||P_k x||, ||(I-P)_k x||)`` on random ``x``, ``k <= k_max``.

    Level 1 also tries the sums ``G_s + G_t`` of basis elements, which catch
    the usual off-diagonal failures deterministically.
    """
    P = np.asarray(P, dtype=complex)
    if P.shape != (space.m, space.m):
        raise ContractViolation(f"projection must be {space.m}x{space.m}, got {P.shape}")
    if np.abs(P @ P - P).max() > IDEMPOTENT_TOL:
        raise ContractViolation("P is not idempotent")
    rng = np.random.default_rng([seed, 83])
    worst, worst_x, count = 0.0, None, 0
    eye = np.eye(space.m)
    level1 = [LevelElement(eye[s] + eye[t]) for s in range(space.m) for t in range(s, space.m)]
    for k in range(1, k_max + 1):
        xs = level1 if k == 1 else []
        xs = xs + [random_element(space, k, rng) for _ in range(samples)]
        for x in xs:
            r = _msum_residual(space, P, x)
            count += 1
            if r > worst:
                worst, worst_x = r, x
    ok = worst <= tol
    return MProjection(P, k_max, float(worst), bool(ok), count, None if ok else worst_x)


@dataclass
class MQuotient:
    """``Z = (I-P)(V)`` with the quotient map in coefficient form."""

    Z: OperatorSpace
    Q: np.ndarray       # (Z.m, V.m): coefficients of (I-P)x in Z's basis
    lift: np.ndarray    # (V.m, Z.m): Z coordinates back to V coefficients
    projection: MProjection

    def __call__(self, x):
        if isinstance(x, LevelElement):
            return _apply(self.Q, x)
        return self.Q @ np.asarray(x, dtype=complex)


def _range_space(space: OperatorSpace, proj, label: str, tol: float = 1e-9):
    """``proj(V)`` as an operator space; returns ``(space', lift, coords)``.

    ``lift`` maps coordinates of the range to coefficients of ``V`` and
    ``coords`` maps coefficients of ``V`` to coordinates of ``proj(x)``.
    """
    # independent columns of proj span proj(V); their realizations are the new basis
    _, r, piv = scipy.linalg.qr(proj, pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int((diag > tol * max(diag[0], 1.0)).sum())
    lift = proj[:, np.sort(piv[:rank])]
    coords = np.linalg.lstsq(lift, proj, rcond=None)[0]
    basis = np.array([space.realize(c) for c in lift.T])
    return OperatorSpace(basis, None, label), lift, coords


def quotient_by_msummand(space: OperatorSpace, mp: MProjection, tol: float = 1e-9) -> MQuotient:
    """The quotient ``V/W`` realized as ``Z = (I-P)(V)``, with ``W = P(V)``.

    ``Z`` carries ``u = Q(v)`` when ``V`` has a distinguished ``v`` with
    ``||Q(v)|| = 1``.
    """
    if not mp.verified:
        raise ContractViolation("projection is not a verified complete M-projection")
    comp = mp.complement()
    if np.abs(comp).max() <= tol:
        raise ContractViolation("quotient is zero")
    z, lift, Q = _range_space(space, comp, f"{space.label}/W", tol)
    if space.u is not None:
        qu = Q @ space.u
        if abs(matcore.spec_norm(z.realize(qu)) - 1) <= 1e-8:
            z = z.with_u(qu)
    return MQuotient(z, Q, lift, mp)


@dataclass
class QuotientUnitalityReport:
    norm_Qv: float
    norm_Qv_ok: bool
    norm_u: float
    norm_w: float
    ncb_V: object
    ncb_Z: object
    alarm: bool
    functional: object
    isometry_error: float
    isometry_ok: bool
    gu_sum: dict
    ncb_consistent: bool
    passed: bool
    notes: list = field(default_factory=list)


def check_quotient_unitality(space: OperatorSpace, mp: MProjection, v=None, samples: int = 100,
                             k_max: int = 2, seed: int = 0, ncb_opts: dict | None = None
                             ) -> QuotientUnitalityReport:
    """Quotient of a unit ``v`` by a complete M-summand.

    Checks ``||Q(v)|| = 1``, splits ``v = (u, w)``, and tests that
    ``Ψ(x) = x + f(x) w`` is isometric on ``Z`` at levels up to ``k_max``,
    with ``f`` a norming functional of ``Z`` at ``u``.
    """
    v = np.asarray(space.u if v is None else v, dtype=complex)
    vs = space.with_u(v)
    quo = quotient_by_msummand(vs, mp)
    comp = mp.complement()
    u_v, w_v = comp @ v, mp.P @ v
    norm_u = matcore.spec_norm(space.realize(u_v))
    norm_w = matcore.spec_norm(space.realize(w_v))
    norm_qv = norm_u
    qv_ok = abs(norm_qv - 1) <= 1e-8
    opts = dict(ncb_opts or {})
    seed_opts = {"seed": seed, **opts}
    ncb_v = ncb_estimate(vs, **seed_opts)
    gu = {}
    if qv_ok and np.abs(mp.P).max() > 0:
        w_space, _, w_coords = _range_space(space, mp.P, "W")
        gu = check_gu_sum(matrix_realized(quo.Z.with_u(None)), matrix_realized(w_space),
                          quo.Q @ u_v, w_coords @ w_v, seed=seed)
    notes = []
    alarm = bool(ncb_v.kind == "exact" and ncb_v.value > 0 and (norm_u < 1 - 1e-8 or norm_w < 1 - 1e-8))
    if not qv_ok:
        return QuotientUnitalityReport(norm_qv, False, norm_u, norm_w, ncb_v, None, alarm, None,
                                       np.inf, False, gu, False, False, ["||Q(v)|| != 1"])

    z = quo.Z
    uz = quo.Q @ u_v
    zu = z.with_u(uz)
    ncb_z = ncb_estimate(zu, **seed_opts)
    _, f = gamma_classic(matrix_realized(zu), uz, uz)
    # Ψ in coefficient form: Z coordinates -> V coefficients
    rng = np.random.default_rng([seed, 89])
    err = 0.0
    per = max(1, samples // k_max)
    for k in range(1, k_max + 1):
        for _ in range(per):
            x = random_element(z, k, rng)
            fx = np.einsum("pqt,t->pq", x.coeffs, f.coeffs)
            psi = LevelElement(np.einsum("st,pqt->pqs", quo.lift, x.coeffs) + np.einsum("pq,s->pqs", fx, w_v))
            err = max(err, abs(level_norm(space, psi) - level_norm(z, x)))
    iso_ok = err <= ISOMETRY_TOL
    if norm_w < 1 - 1e-8:
        notes.append("||w|| < 1: v is degenerate in the W part")
    # n_cb(V; v) <= n_cb(Z; u), up to the heuristic's slack
    consistent = ncb_v.value <= ncb_z.value + 1e-6 or ncb_z.kind != "exact"
    passed = qv_ok and iso_ok and not alarm and consistent
    return QuotientUnitalityReport(norm_qv, qv_ok, norm_u, norm_w, ncb_v, ncb_z, alarm, f, float(err),
                                   iso_ok, gu, consistent, passed, notes)


@dataclass
class QuotientOssysReport:
    source: object
    image_margin: float
    images_ok: bool
    span_rank: int
    span_ok: bool
    quotient: object
    exact: bool
    passed: bool


def check_quotient_ossys(space: OperatorSpace, mp: MProjection, v=None, samples: int = 30,
                         seed: int = 0, ncb_opts: dict | None = None) -> QuotientOssysReport:
    """Images of ``K_v^1`` land in ``K_{Q(v)}^1`` and span ``V/W``; ``(Z, Q(v))`` is an operator system."""
    v = np.asarray(space.u if v is None else v, dtype=complex)
    vs = space.with_u(v)
    opts = {"seed": seed, **(ncb_opts or {})}
    src = check_operator_system(vs, **opts)
    quo = quotient_by_msummand(vs, mp)
    zu = quo.Z.with_u(quo.Q @ (mp.complement() @ v))
    herm, _ = hermitian_subspace(vs)
    rng = np.random.default_rng([seed, 97])
    members = [v] + [v + h / level_norm(vs, LevelElement(h)) for h in herm]
    for _ in range(samples):
        h = rng.standard_normal(len(herm)) @ herm
        members.append(v * level_norm(vs, LevelElement(h)) + h)
    try:
        unitary_realization(zu)
        exact = True
    except NoUnitalRealization:
        exact = False
    worst = np.inf
    images = []
    for x in members:
        qx = quo(x)
        images.append(qx)
        if exact:
            verdict = cone_membership_exact(zu, LevelElement(qx))
        else:
            verdict = cone_membership_sampled(zu, LevelElement(qx), seed=seed)
        worst = min(worst, verdict.margin)
    images_ok = worst >= -MSUM_TOL
    rank = int(np.linalg.matrix_rank(np.array(images).T, tol=1e-9))
    span_ok = rank == zu.m
    quot = check_operator_system(zu, **opts)
    passed = bool(src.passed and images_ok and span_ok and quot.passed)
    return QuotientOssysReport(src, float(worst), bool(images_ok), rank, bool(span_ok), quot, exact, passed)
