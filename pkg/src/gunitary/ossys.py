"""Matrix order induced by ``u``, and declared cones for non-unital systems.

``K_u^n`` is the set of ``x ∈ M_n(V)`` with ``φ_n(x) >= 0`` for every
witness ``φ``. When ``u`` is unitary in the realization this is plain
positivity of ``(I ⊗ u*) x``; otherwise it is probed adversarially.

A :class:`ConeSpec` declares ``M_m(V)_+`` by generators. A generator ``g``
at level ``m_g`` that feeds level ``m`` contributes every compression
``(Ψ ⊗ id)(g)`` with ``Ψ: M_{m_g} -> M_m`` completely positive, so the
declared cones are closed under CP compressions by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matcore, sdp
from .cbmap import SnWitness
from .errors import ContractViolation, NoUnitalRealization
from .gamma import NcbEstimate, WitnessFamily, ncb_estimate, seesaw, _fit
from .opspace import LevelElement, OperatorSpace, level_norm, unitary_realization

MEMBER_TOL = 1e-8
VIOLATION_TOL = 1e-6
CERTIFIED_MARGIN = -1e-2
CONE_SHIFT = 1e-6


@dataclass
class ConeVerdict:
    member: bool
    margin: float
    exact: bool
    witness: SnWitness | None = None
    n: int | None = None
    vector: np.ndarray | None = None
    note: str = ""


# ---------------------------------------------------------------------------
# exact and sampled tests for K_u^n


def _unital_view(space: OperatorSpace, x: LevelElement):
    conj, info = unitary_realization(space)
    return conj, LevelElement(x.coeffs).realize(conj)


def cone_membership_exact(space: OperatorSpace, x: LevelElement) -> ConeVerdict:
    """Membership in ``K_u^k`` via positivity of the realization with ``u -> I``."""
    try:
        _, xr = _unital_view(space, x)
    except NoUnitalRealization as exc:
        raise NoUnitalRealization(str(exc) + "; use cone_membership_sampled") from None
    margin = matcore.positivity_margin(xr)
    return ConeVerdict(margin >= -MEMBER_TOL, float(margin), True, note="exact")


def _margin_probes(xr: np.ndarray):
    """Matrices ``A`` whose top Hermitian eigenvalue under ``φ_k`` bounds the margin.

    ``-x`` probes ``λ_min(Re φ_k(x))``; ``∓ix`` probe the skew part.
    """
    return [("herm", -xr), ("skew+", -1j * xr), ("skew-", 1j * xr)]


def _probe_starts(a: np.ndarray, k: int, d: int, n: int, restarts: int, rng):
    w, v = np.linalg.eigh(matcore.hermitian_part(a))
    starts = []
    top = _fit(v[:, -1], k, d, n)
    if top is not None:
        starts.append(top)
    while len(starts) < restarts:
        starts.append(matcore.unit_vector(k * n, rng))
    return starts[:max(restarts, 1)]


def adversarial_margin(space: OperatorSpace, x: LevelElement, family: WitnessFamily,
                       n_max: int | None = None, restarts: int = 3, seed: int = 0,
                       max_iter: int = 30, stop_below: float | None = None) -> ConeVerdict:
    """Smallest positivity margin of ``φ_k(x)`` found over witnesses of size ``<= n_max``.

    A margin below ``-1e-6`` certifies non-membership (the witness is
    returned); otherwise the verdict is one-sided.
    """
    k = x.k
    xr = x.realize(space)
    n_max = n_max or space.d * k
    rng = np.random.default_rng([seed, k, 61])
    best, best_w, best_n, best_vec = np.inf, None, None, None
    for n in range(1, n_max + 1):
        for _, a in _margin_probes(xr):
            for xi in _probe_starts(a, k, space.d, n, restarts, rng):
                res = seesaw(family, n, a, k, xi, xi, "herm", max_iter)
                if res is None:
                    continue
                margin = matcore.positivity_margin(res.witness.choi.apply(xr, k))
                if margin < best:
                    best, best_w, best_n, best_vec = margin, res.witness, n, res.xi
            if stop_below is not None and best <= stop_below:
                break
        if stop_below is not None and best <= stop_below:
            break
    if best_w is None:
        # sup over an empty witness set is taken as 0
        return ConeVerdict(True, 0.0, False, note="no witnesses")
    member = best >= -VIOLATION_TOL
    note = "no violation found (one-sided)" if member else "violation certified by witness"
    return ConeVerdict(member, float(best), False, best_w, best_n, best_vec, note)


def cone_membership_sampled(space: OperatorSpace, x: LevelElement, n_max: int | None = None,
                            restarts: int = 3, seed: int = 0, family: WitnessFamily | None = None,
                            stop_below: float | None = CERTIFIED_MARGIN, **kw) -> ConeVerdict:
    """Adversarial test of ``x ∈ K_u^k`` over ``S_n(V;u)``, ``n <= n_max``.

    The search ends once the margin drops below ``stop_below``: the verdict
    is settled and only the depth of the violation could still change.
    """
    family = family or WitnessFamily(space)
    return adversarial_margin(space, x, family, n_max, restarts, seed, stop_below=stop_below, **kw)


# ---------------------------------------------------------------------------
# operator-system characterization


def hermitian_subspace(space: OperatorSpace):
    """Real basis (coefficient vectors) of ``{x ∈ V: u* x Hermitian}``, ``u`` unitary."""
    conj, _ = unitary_realization(space)
    m = space.m
    cols = []
    for t in range(m):
        for unit in (1.0, 1j):
            g = unit * conj.basis[t]
            a = g - g.conj().T
            cols.append(np.concatenate([a.real.ravel(), a.imag.ravel()]))
    mat = np.array(cols).T
    null, _ = matcore.null_space(mat, 1e-10)
    null = null.real if np.iscomplexobj(null) else null
    # unknowns are interleaved (a_0, b_0, a_1, b_1, ...) for coefficients a + i b
    basis = null[0::2].T + 1j * null[1::2].T
    return basis, conj


@dataclass
class OperatorSystemReport:
    ncb: NcbEstimate
    span_ok: bool
    cone_basis: list
    hermitian_dim: int
    approximate: bool
    passed: bool


def check_operator_system(space: OperatorSpace, seed: int = 0, samples: int = 20, **ncb_opts) -> OperatorSystemReport:
    """``n_cb(V,u) = 1`` and ``K_u^1`` spanning ``V``.

    With ``u`` unitary the span is exact: ``u* V`` contains ``I``, so every
    ``h`` with ``u* h`` Hermitian is a difference of members (``u + h/||h||``
    and ``u``), and ``K_u^1`` spans ``V`` iff that real subspace has real
    dimension ``m``.
    """
    ncb = ncb_estimate(space, seed=seed, **ncb_opts)
    try:
        herm, _ = hermitian_subspace(space)
    except NoUnitalRealization:
        return _check_operator_system_sampled(space, ncb, seed, samples)
    cone = [space.u]
    for h in herm:
        nrm = level_norm(space, LevelElement(h))
        cone.append(space.u + h / nrm)
    dim = herm.shape[0]
    rank = np.linalg.matrix_rank(np.array(cone).T, tol=1e-9)
    span_ok = bool(rank == space.m)
    passed = ncb.kind == "exact" and ncb.value == 1.0 and span_ok
    return OperatorSystemReport(ncb, span_ok, cone, dim, False, passed)


def _check_operator_system_sampled(space, ncb, seed, samples):
    rng = np.random.default_rng([seed, 67])
    cands = [space.u]
    for _ in range(samples):
        h = rng.standard_normal(space.m) + 1j * rng.standard_normal(space.m)
        h = h / level_norm(space, LevelElement(h))
        cands.append(space.u + 0.25 * h)
    members = []
    for c in cands:
        v = cone_membership_sampled(space, LevelElement(c), n_max=space.d, restarts=2, seed=seed)
        if v.member:
            members.append(c)
    rank = np.linalg.matrix_rank(np.array(members).T, tol=1e-9) if members else 0
    span_ok = bool(rank == space.m)
    return OperatorSystemReport(ncb, span_ok, members, -1, True, False)


# ---------------------------------------------------------------------------
# declared cones


@dataclass
class ConeGenerator:
    element: LevelElement
    feeds: tuple

    @property
    def level(self) -> int:
        return self.element.k


@dataclass
class ConeSpec:
    generators: list = field(default_factory=list)

    @property
    def declared_levels(self) -> int:
        return max((max(g.feeds) for g in self.generators if g.feeds), default=0)

    def feeding(self, m: int) -> list:
        return [g for g in self.generators if m in g.feeds]

    def validate(self, space: OperatorSpace):
        for g in self.generators:
            if np.abs(g.element.coeffs).max() == 0:
                raise ContractViolation("cone generators must be nonzero")
            if g.element.coeffs.shape[2] != space.m:
                raise ContractViolation("generator does not match the space")
        return self


def psd_cones(space: OperatorSpace, levels=(1, 2)) -> ConeSpec:
    """Cones of ``V = M_d`` (matrix-unit basis) inherited from ``M_{md}``.

    One generator: the Choi element ``J = sum E_ij ⊗ E_ij`` at level ``d``,
    whose CP compressions are all PSD elements of every level.
    """
    d = space.d
    c = np.zeros((d, d, space.m), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d))
            e[i, j] = 1
            c[i, j] = space.coefficients(e)
    return ConeSpec([ConeGenerator(LevelElement(c), tuple(levels))]).validate(space)


def diagonal_cones(space: OperatorSpace) -> ConeSpec:
    """Shrunk cones on ``M_d``: diagonal PSD at level 1, full PSD from level 2.

    Level 1 is generated by the ``E_ii`` only; the Choi element feeds level 2.
    """
    d = space.d
    gens = []
    for i in range(d):
        e = np.zeros((d, d))
        e[i, i] = 1
        gens.append(ConeGenerator(LevelElement(space.coefficients(e)), (1,)))
    full = psd_cones(space, (2,)).generators
    return ConeSpec(gens + full).validate(space)


def positive_family(space: OperatorSpace, cones: ConeSpec) -> WitnessFamily:
    """``S_n^+(V)``: complete contractions with ``φ_m(g) >= 0`` for every generator."""
    pos = [(g.element.realize(space), g.level) for g in cones.generators]
    return WitnessFamily(space, pos, unital=False)


def splus_membership(space: OperatorSpace, cones: ConeSpec, targets):
    """Does ``G_t -> targets[t]`` extend to an element of ``S_n^+(V)``?

    Returns an :class:`SnWitness` (no unit constraint) or the infeasible
    solution with its certificate.
    """
    from .cbmap import ContractionProgram, make_witness

    targets = np.asarray(targets, dtype=complex)
    if targets.ndim != 3 or targets.shape[0] != space.m:
        raise ContractViolation("need one square target matrix per basis element")
    prog = ContractionProgram(space.d, targets.shape[1])
    for g in cones.generators:
        prog.add_positivity(g.element.realize(space), g.level)
    for g, tgt in zip(space.basis, targets):
        prog.add_value(g, tgt)
    sol = sdp.feasibility(prog.problem())
    if sol.status == "infeasible" or not sol.feasible_within():
        return sol
    return make_witness(prog.extract(sol.blocks), OperatorSpace(space.basis, None, space.label), targets)


def in_declared_cone(space: OperatorSpace, cones: ConeSpec, x: LevelElement):
    """Is ``x`` a sum of CP compressions of the generators feeding its level?

    Returns ``(member, solution)``; infeasibility carries a certificate.
    Boundary elements leave the feasibility problem without interior, so the
    test is run on ``x + ε x0`` where ``x0`` is the image of ``J = I``.
    """
    m = x.k
    gens = cones.feeding(m)
    if not gens:
        zero = bool(np.abs(x.coeffs).max() <= MEMBER_TOL)
        return zero, None
    blocks = [(f"J{i}", g.level * m) for i, g in enumerate(gens)]
    tr = sum(np.einsum("ppt->t", g.element.coeffs) for g in gens)
    x0 = np.einsum("ab,t->abt", np.eye(m), tr)
    scale = max(np.abs(x.coeffs).max(), 1.0) / max(np.abs(x0).max(), 1e-300)
    target = x.coeffs + CONE_SHIFT * scale * x0
    cons = []
    for p2 in range(m):
        for q2 in range(m):
            for t in range(space.m):
                terms = {}
                for i, g in enumerate(gens):
                    mg = g.level
                    mat = np.zeros((mg * m, mg * m), dtype=complex)
                    for p in range(mg):
                        for q in range(mg):
                            mat[q * m + q2, p * m + p2] = g.element.coeffs[p, q, t]
                    terms[f"J{i}"] = mat
                cons += sdp.complex_equality(terms, target[p2, q2, t])
    sol = sdp.feasibility(sdp.SdpProblem(blocks, cons))
    if sol.status == "infeasible":
        return False, sol
    return bool(sol.feasible_within(1e-7)), sol


def k_n_outer(space: OperatorSpace, cones: ConeSpec, x: LevelElement, n_max: int = 2,
              restarts: int = 3, seed: int = 0, family: WitnessFamily | None = None) -> ConeVerdict:
    """Adversarial test of ``x ∈ K_n`` over ``S_k^+``, ``k <= n_max``."""
    family = family or positive_family(space, cones)
    return adversarial_margin(space, x, family, n_max, restarts, seed)


def ncb_plus_estimate(space: OperatorSpace, cones: ConeSpec, k_max: int = 2, n_max: int | None = 2,
                      seed: int = 0, family: WitnessFamily | None = None, **opts) -> NcbEstimate:
    """Heuristic ``n_cb^+``: the ``n_cb`` sphere search with ``S_n^+`` witnesses.

    No exact shortcut exists here, so the search is lighter than for ``n_cb``.
    """
    family = family or positive_family(space, cones)
    opts = {"sphere_restarts": 2, "descent_steps": 3, "restarts": 2, **opts}
    return ncb_estimate(space, k_max=k_max, n_max=n_max, seed=seed, family=family, **opts)


def _random_cp_compression(g: LevelElement, m: int, rng, kraus: int = 2) -> LevelElement:
    mg = g.k
    ops = [matcore.random_cmat(mg, m, rng) for _ in range(kraus)]
    c = sum(np.einsum("pa,pqt,qb->abt", a.conj(), g.coeffs, a) for a in ops)
    return LevelElement(c)


@dataclass
class NonunitalReport:
    ncb_plus: NcbEstimate
    ncb_ok: bool
    generator_margins: list
    generators_ok: bool
    counterexamples: list
    candidates_tested: int
    passed: bool
    note: str = "one-sided: positivity over witnesses of bounded size, cones truncated at declared levels"


def check_nonunital_ossys(space: OperatorSpace, cones: ConeSpec, n_max: int = 2, k_max: int = 2,
                          candidates: int = 4, restarts: int = 3, seed: int = 0,
                          ncb_opts: dict | None = None, max_counterexamples: int = 1) -> NonunitalReport:
    """Evidence for ``n_cb^+(V) = 1`` and ``M_m(V)_+ = K_m`` at the declared levels.

    The counterexample search stops after ``max_counterexamples`` hits.
    """
    family = positive_family(space, cones)
    ncb = ncb_plus_estimate(space, cones, k_max, n_max, seed, family, **(ncb_opts or {}))
    ncb_ok = ncb.value >= 1 - 1e-3

    gen_margins = []
    for g in cones.generators:
        v = k_n_outer(space, cones, g.element, n_max, restarts, seed, family)
        gen_margins.append(v.margin)
    gens_ok = all(mg >= -VIOLATION_TOL for mg in gen_margins)

    rng = np.random.default_rng([seed, 71])
    counter = []
    tested = 0
    for m in range(1, cones.declared_levels + 1):
        cands = []
        for g in cones.generators:
            cands += [_random_cp_compression(g.element, m, rng) for _ in range(candidates)]
        for x in cands:
            if len(counter) >= max_counterexamples:
                break
            if level_norm(space, x) < 1e-9:
                continue
            x = x.normalized(space)
            tested += 1
            inside, _ = in_declared_cone(space, cones, x)
            if inside:
                continue
            v = k_n_outer(space, cones, x, n_max, restarts, seed, family)
            if v.member:
                counter.append({"level": m, "element": x, "margin": v.margin})
    passed = ncb_ok and gens_ok and not counter
    return NonunitalReport(ncb, ncb_ok, gen_margins, gens_ok, counter, tested, passed)
