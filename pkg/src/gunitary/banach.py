"""Level-1 geometry: the face ``S(X;u)``, ``γ^u`` and ``n(X;u)``.

``S(X;u)`` is the set of norm-one functionals with ``f(u) = 1`` and
``γ^u(x) = sup |f(x)|`` over it. Functionals on ``X = C^m`` are stored as
coefficient vectors ``φ`` with ``f(x) = φ · x`` (no conjugation).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import matcore, sdp
from .errors import ContractViolation, NoUnitalRealization, SolverFailure
from .opspace import NormedSpace, normed_direct_sum_inf, direct_sum_1, sup_over_points, unitary_realization

FACE_TOL = 1e-9
GRID = 33


@dataclass
class DualWitness:
    coeffs: np.ndarray
    value_at_u: complex
    dual_bound: float
    representation: dict = field(default_factory=dict)

    def __call__(self, x) -> complex:
        return complex(self.coeffs @ np.asarray(x, dtype=complex))

    def valid(self, tol: float = 1e-9) -> bool:
        return self.dual_bound <= 1 + tol and abs(self.value_at_u - 1) <= tol


def _witness(coeffs, u, bound, **rep) -> DualWitness:
    coeffs = np.asarray(coeffs, dtype=complex)
    at_u = complex(coeffs @ u) if u is not None else complex("nan")
    return DualWitness(coeffs, at_u, float(bound), rep)


def _require_unit(x: NormedSpace, u):
    if u is None:
        raise ContractViolation("a distinguished element is required")
    u = np.asarray(u, dtype=complex)
    nrm = x.norm(u)
    if abs(nrm - 1) > 1e-9:
        raise ContractViolation(f"distinguished element must have norm 1, got {nrm:.12g}")
    return u


# ---------------------------------------------------------------------------
# norming functionals


def norming_functional(x: NormedSpace, v) -> DualWitness:
    """A functional of dual norm at most one with ``f(v) = ||v||``."""
    v = np.asarray(v, dtype=complex)
    if x.variant in ("polytope", "sup_over_points"):
        vals = x.data @ v
        j = int(np.argmax(np.abs(vals)))
        ph = np.conj(vals[j]) / abs(vals[j]) if abs(vals[j]) > 0 else 1.0
        return _witness(ph * x.data[j], x.u, 1.0, kind="vertex", index=j, phase=ph)
    if x.variant == "matrix_realized":
        sp = x.data
        sig, a, b = matcore.top_singular_pair(sp.realize(v))
        f = np.outer(b, a.conj())  # Tr(F y) = a* y b
        return _witness(np.einsum("ij,tji->t", f, sp.basis), x.u, 1.0, kind="trace_class", F=f)
    a, b = x.split(v)
    fa, fb = norming_functional(x.parts[0], a), norming_functional(x.parts[1], b)
    bound = max(fa.dual_bound, fb.dual_bound)
    return _witness(np.concatenate([fa.coeffs, fb.coeffs]), x.u, bound, kind="sum", parts=(fa, fb))


# ---------------------------------------------------------------------------
# γ^u


def numerical_radius(a: np.ndarray):
    """``w(a) = max_θ λ_max(Re(e^{-iθ} a))`` with its maximizing unit vector."""
    a = matcore.as_cmat(a)

    def h(theta):
        return float(np.linalg.eigvalsh(matcore.hermitian_part(np.exp(-1j * theta) * a))[-1])

    theta = _scan_max(h)
    w, v = np.linalg.eigh(matcore.hermitian_part(np.exp(-1j * theta) * a))
    xi = v[:, -1]
    return abs(np.vdot(xi, a @ xi)), xi


def _scan_max(h, grid: int = GRID) -> float:
    """Maximize a 2π-periodic function: grid scan, then golden-section refinement."""
    thetas = np.linspace(0, 2 * np.pi, grid, endpoint=False)
    vals = [h(t) for t in thetas]
    j = int(np.argmax(vals))
    step = 2 * np.pi / grid
    res = scipy.optimize.minimize_scalar(
        lambda t: -h(t), bounds=(thetas[j] - step, thetas[j] + step), method="bounded",
        options={"xatol": 1e-12},
    )
    return float(res.x) if -res.fun >= vals[j] else float(thetas[j])


def gamma_classic(x: NormedSpace, u, v, method: str = "auto"):
    """``γ^u(v)`` with an attaining functional in ``S(X;u)``.

    ``method="auto"`` uses a closed form when one exists (vertex faces,
    numerical radius for unitary ``u``, ``ℓ¹``-sums with ``u = (u, 0)``) and
    the face SDP otherwise; ``method="sdp"`` forces the SDP.
    Returns ``(value, DualWitness)``.
    """
    u = _require_unit(x, u)
    v = np.asarray(v, dtype=complex)
    if method == "sdp":
        return _gamma_sdp(x, u, v)
    if x.variant in ("polytope", "sup_over_points"):
        f = x.data
        fu = f @ u
        face = np.flatnonzero(np.abs(fu) >= 1 - FACE_TOL)
        g = f[face] / fu[face, None]
        vals = np.abs(g @ v)
        j = int(np.argmax(vals))
        return float(vals[j]), _witness(g[j], u, 1.0, kind="vertex", index=int(face[j]))
    if x.variant == "matrix_realized":
        sp = x.data.with_u(u)
        try:
            conj, info = unitary_realization(sp)
        except NoUnitalRealization:
            return _gamma_sdp(x, u, v)
        val, xi = numerical_radius(conj.realize(v))
        f = info["right"] @ np.outer(xi, xi.conj()) @ info["left"]
        coeffs = np.einsum("ij,tji->t", f, x.data.basis)
        return float(val), _witness(coeffs, u, np.linalg.norm(f, "nuc"), kind="trace_class", F=f)
    ua, ub = x.split(u)
    if x.parts[1].norm(ub) <= 1e-15:
        # the face is S(X;u) × Ball(Y*), so γ^{(u,0)}(a, b) = γ^u(a) + ||b||
        va, vb = x.split(v)
        ga, fa = gamma_classic(x.parts[0], ua, va)
        fb = norming_functional(x.parts[1], vb)
        z = fa(va)
        ph = z / abs(z) if abs(z) > 0 else 1.0
        coeffs = np.concatenate([fa.coeffs, ph * fb.coeffs])
        bound = max(fa.dual_bound, fb.dual_bound)
        return float(ga + x.parts[1].norm(vb)), _witness(coeffs, u, bound, kind="sum", parts=(fa, fb))
    return _gamma_sdp(x, u, v)


# ---------------------------------------------------------------------------
# face SDP


class _DualBall:
    """SDP description of the dual unit ball of a normed space.

    Polytope-type spaces use one 2x2 block per vertex, ``[[a, λ], [λ̄, b]]``
    (so ``|λ| <= (a + b) / 2``) with ``sum (a + b) / 2 <= 1``; matrix spaces use
    ``[[P, F], [F*, Q]] >= 0`` with ``(Tr P + Tr Q) / 2 <= 1`` (trace-norm
    ball); ``ℓ¹``-sums take the product of the parts' balls.
    """

    def __init__(self, x: NormedSpace, prefix: str = "b"):
        self.space = x
        self.blocks: list = []
        self.budgets: list = []  # (terms, index into parts for the weight)
        self.leaves: list = []
        self._build(x, prefix, 0)

    def _build(self, x, prefix, offset):
        if x.variant == "l1_sum":
            self._build(x.parts[0], prefix + "0", offset)
            self._build(x.parts[1], prefix + "1", offset + x.parts[0].m)
            return
        leaf = {"space": x, "offset": offset, "prefix": prefix}
        if x.variant == "matrix_realized":
            d = x.data.d
            name = prefix + "T"
            self.blocks.append((name, 2 * d))
            self.budgets.append({name: np.eye(2 * d) / 2})
            leaf["blocks"] = [name]
        else:
            names = [f"{prefix}L{j}" for j in range(x.data.shape[0])]
            self.blocks += [(b, 2) for b in names]
            self.budgets.append({b: np.eye(2) / 2 for b in names})
            leaf["blocks"] = names
        self.leaves.append(leaf)

    def functional_terms(self, v) -> dict:
        """Block terms of the complex functional ``f -> f(v)``."""
        v = np.asarray(v, dtype=complex)
        terms = {}
        for leaf in self.leaves:
            x = leaf["space"]
            part = v[leaf["offset"]: leaf["offset"] + x.m]
            if x.variant == "matrix_realized":
                d = x.data.d
                m = np.zeros((2 * d, 2 * d), dtype=complex)
                m[d:, :d] = x.data.realize(part)
                terms[leaf["blocks"][0]] = m
            else:
                vals = x.data @ part
                for b, val in zip(leaf["blocks"], vals):
                    terms[b] = val * sdp.entry_selector(2, 0, 1)
        return terms

    def extract(self, blocks):
        """Coefficient vector of the functional and a bound on its dual norm."""
        coeffs = np.zeros(self.space.m, dtype=complex)
        bound = 0.0
        for leaf in self.leaves:
            x = leaf["space"]
            sl = slice(leaf["offset"], leaf["offset"] + x.m)
            if x.variant == "matrix_realized":
                d = x.data.d
                f = blocks[leaf["blocks"][0]][:d, d:]
                coeffs[sl] = np.einsum("ij,tji->t", f, x.data.basis)
                bound = max(bound, float(np.linalg.norm(f, "nuc")))
            else:
                lam = np.array([blocks[b][0, 1] for b in leaf["blocks"]])
                coeffs[sl] = lam @ x.data
                bound = max(bound, float(np.abs(lam).sum()))
        return coeffs, bound

    def leaf_norms(self, v):
        return [leaf["space"].norm(np.asarray(v)[leaf["offset"]: leaf["offset"] + leaf["space"].m])
                for leaf in self.leaves]


class FaceProgram:
    """``S(X;u)`` as a compiled SDP, reduced to the face forced by ``f(u) = 1``.

    With ``w_p = ||u_p||`` the Hermitian combination
    ``Y = sum_p w_p budget_p - Re f(u)`` is PSD on every block and has zero
    trace against every feasible point, so the blocks are restricted to
    ``ker Y`` and the budgets with ``w_p > 0`` hold with equality.
    """

    def __init__(self, x: NormedSpace, u):
        self.ball = _DualBall(x)
        self.u = np.asarray(u, dtype=complex)
        weights = self.ball.leaf_norms(self.u)
        fu = self.ball.functional_terms(self.u)
        fu_re, _ = sdp.real_parts(fu)
        self.R = {}
        blocks = []
        for name, size in self.ball.blocks:
            y = np.zeros((size, size), dtype=complex)
            for w, budget in zip(weights, self.ball.budgets):
                if name in budget:
                    y += w * budget[name]
            y -= fu_re.get(name, 0)
            lam, vec = np.linalg.eigh(matcore.hermitian_part(y))
            if lam[0] < -1e-9:
                raise ContractViolation("distinguished element has norm above one")
            r = vec[:, lam <= 1e-9]
            if r.shape[1]:
                self.R[name] = r
                blocks.append((name, r.shape[1]))
        self.blocks = blocks
        cons = sdp.complex_equality(self._reduce(fu), 1.0)
        for w, budget in zip(weights, self.ball.budgets):
            red = self._reduce(budget)
            if red:
                cons.append(sdp.Constraint(red, 1.0, "eq" if w > 1e-12 else "le"))
        self.problem = sdp.SdpProblem(blocks, cons)
        self.compiled = sdp.CompiledSdp(self.problem)

    def _reduce(self, terms):
        return {b: self.R[b].conj().T @ np.asarray(a) @ self.R[b] for b, a in terms.items() if b in self.R}

    def _expand(self, blocks):
        full = {name: np.zeros((size, size), dtype=complex) for name, size in self.ball.blocks}
        for b, r in self.R.items():
            full[b] = r @ blocks[b] @ r.conj().T
        return full

    def support(self, v, theta: float):
        """``max Re(e^{-iθ} f(v))`` over the face, with the maximizer."""
        terms = {b: np.exp(-1j * theta) * a for b, a in self.ball.functional_terms(v).items()}
        obj = self._reduce(sdp.real_parts(terms)[0])
        sol = self.compiled.solve(obj, "max")
        if not sol.feasible_within():
            raise SolverFailure(f"face SDP failed ({sol.status})")
        coeffs, bound = self.ball.extract(self._expand(sol.blocks))
        return sol.primal, coeffs, bound


def _gamma_sdp(x: NormedSpace, u, v):
    prog = FaceProgram(x, u)
    cache = {}

    def h(theta):
        val, coeffs, bound = prog.support(v, theta)
        cache[theta] = (coeffs, bound)
        return val

    theta = _scan_max(h)
    if theta not in cache:
        h(theta)
    best = max(cache.items(), key=lambda kv: abs(kv[1][0] @ v))
    coeffs, bound = best[1]
    return float(abs(coeffs @ v)), _witness(coeffs, u, bound, kind="face_sdp", theta=best[0])


def face_sample(x: NormedSpace, u, rng, count: int = 8) -> list:
    """Points of ``S(X;u)`` exposed by random linear objectives."""
    u = _require_unit(x, u)
    if x.variant in ("polytope", "sup_over_points"):
        fu = x.data @ u
        face = np.flatnonzero(np.abs(fu) >= 1 - FACE_TOL)
        return [_witness(x.data[j] / fu[j], u, 1.0, kind="vertex", index=int(j)) for j in face]
    prog = FaceProgram(x, u)
    out = []
    for _ in range(count):
        v = rng.standard_normal(x.m) + 1j * rng.standard_normal(x.m)
        _, coeffs, bound = prog.support(v, float(rng.uniform(0, 2 * np.pi)))
        out.append(_witness(coeffs, u, bound, kind="face_sdp"))
    return out


# ---------------------------------------------------------------------------
# n(X;u)


@dataclass
class NClassic:
    value: float
    witness: np.ndarray
    gamma_at_witness: float
    functional: DualWitness
    restarts: int
    trace: list = field(default_factory=list)


def _ratio_and_grad(x: NormedSpace, u, z):
    m = x.m
    v = z[:m] + 1j * z[m:]
    g, fw = gamma_classic(x, u, v)
    nw = norming_functional(x, v)
    nrm = float(np.real(nw(v)))
    if nrm < 1e-14:
        return np.inf, np.zeros_like(z)

    def real_grad(coeffs):
        val = coeffs @ v
        ph = np.conj(val) / abs(val) if abs(val) > 1e-300 else 1.0
        c = ph * coeffs
        return np.concatenate([c.real, -c.imag])

    r = g / nrm
    grad = (real_grad(fw.coeffs) - r * real_grad(nw.coeffs)) / nrm
    return r, grad


def n_classic(x: NormedSpace, u, restarts: int = 50, seed: int = 0, maxiter: int = 200) -> NClassic:
    """Heuristic ``inf γ^u(v)`` over the unit sphere, with its witness.

    Random starts (plus the coordinate directions) followed by BFGS on
    ``γ^u(v) / ||v||`` with the attaining functionals as (sub)gradients.
    """
    u = _require_unit(x, u)
    rng = np.random.default_rng([seed, 31])
    m = x.m
    starts = [np.concatenate([np.eye(m)[t], np.zeros(m)]) for t in range(m)]
    starts += [rng.standard_normal(2 * m) for _ in range(restarts)]
    best = (np.inf, None)
    trace = []
    for z0 in starts:
        res = scipy.optimize.minimize(lambda z: _ratio_and_grad(x, u, z), z0, jac=True, method="BFGS",
                                      options={"maxiter": maxiter, "gtol": 1e-10})
        z = res.x
        r, _ = _ratio_and_grad(x, u, z)
        trace.append(float(r))
        if r < best[0]:
            best = (float(r), z)
    z = best[1]
    v = z[:m] + 1j * z[m:]
    v = v / x.norm(v)
    g, fw = gamma_classic(x, u, v)
    return NClassic(float(g), v, float(g), fw, len(starts), trace)


# ---------------------------------------------------------------------------
# sum checks


def check_n_sum(x: NormedSpace, u, y: NormedSpace, pairs: int = 50, restarts: int = 50, seed: int = 0) -> dict:
    """``X ⊕¹ Y`` at ``(u, 0)``: the ``γ`` identity on random pairs and ``n`` on both sides.

    The left side of the identity is evaluated by the face SDP of the sum;
    the right side by ``γ^u`` on ``X`` and the norm on ``Y``.
    """
    u = _require_unit(x, u)
    e = direct_sum_1(x, y)
    ue = np.concatenate([u, np.zeros(y.m)])
    e = e.with_u(ue)
    rng = np.random.default_rng([seed, 41])
    worst = 0.0
    samples = []
    for _ in range(pairs):
        a = rng.standard_normal(x.m) + 1j * rng.standard_normal(x.m)
        b = rng.standard_normal(y.m) + 1j * rng.standard_normal(y.m)
        lhs, _ = gamma_classic(e, ue, np.concatenate([a, b]), method="sdp")
        rhs = gamma_classic(x, u, a)[0] + y.norm(b)
        worst = max(worst, abs(lhs - rhs))
        samples.append((lhs, rhs))
    n_sum = n_classic(e, ue, restarts, seed)
    n_x = n_classic(x, u, restarts, seed)
    return {
        "identity_max_error": worst,
        "identity_samples": samples,
        "n_sum": n_sum.value,
        "n_x": n_x.value,
        "n_difference": abs(n_sum.value - n_x.value),
        "n_sum_witness": n_sum.witness,
        "n_x_witness": n_x.witness,
    }


def check_gu_sum(x: NormedSpace, y: NormedSpace, u, v, samples: int = 20, seed: int = 0) -> dict:
    """``X ⊕^∞ Y`` at ``(u, v)``: look for ``(0, y)`` on the unit sphere with ``γ = 0``."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    e = normed_direct_sum_inf(x, y)
    ue = np.concatenate([u, v])
    nu, nv = x.norm(u), y.norm(v)
    _require_unit(e, ue)
    rng = np.random.default_rng([seed, 43])
    cands = [np.eye(y.m)[t] for t in range(y.m)]
    cands += [rng.standard_normal(y.m) + 1j * rng.standard_normal(y.m) for _ in range(samples)]
    best, best_y = np.inf, None
    for c in cands:
        c = c / y.norm(c)
        val, _ = gamma_classic(e, ue, np.concatenate([np.zeros(x.m), c]))
        if val < best:
            best, best_y = val, c
    degenerate = best <= 1e-6
    return {
        "norm_u": nu,
        "norm_v": nv,
        "min_gamma": float(best),
        "witness_y": best_y,
        "degenerate": bool(degenerate),
        "case": "strict" if nu > nv + 1e-12 or nv > nu + 1e-12 else "balanced",
    }


def min_comparison(x: NormedSpace, u, k: int = 3, samples: int = 20, seed: int = 0,
                   n_estimate: float | None = None) -> dict:
    """Norm attainment in ``M_k(min X)`` through scalar compressions.

    For each random ``(x_ij)`` the maximizing point ``ω`` and the top singular
    pair ``c, d`` of ``x(ω)`` give ``||Σ c̄_i x_ij d_j|| = ||(x_ij)||``. With
    ``n_estimate`` the inequality ``n ||x|| <= sup_f ||f_k(x)||`` is also
    checked over the sampled face functionals plus the one attaining
    ``γ^u(Σ c̄_i x_ij d_j)``.
    """
    if x.variant not in ("sup_over_points", "polytope"):
        raise ContractViolation("min_comparison needs a sup_over_points space")
    vals = x.data
    rng = np.random.default_rng([seed, 47])
    face = face_sample(x, u, rng) if n_estimate is not None else []
    worst_attain, worst_sup = 0.0, -np.inf
    records = []
    for _ in range(samples):
        c = rng.standard_normal((k, k, x.m)) + 1j * rng.standard_normal((k, k, x.m))
        pts = np.einsum("pqt,wt->wpq", c, vals)
        norms = [matcore.spec_norm(p) for p in pts]
        w = int(np.argmax(norms))
        full = norms[w]
        _, cv, dv = matcore.top_singular_pair(pts[w])
        scalar = np.einsum("p,pqt,q->t", cv.conj(), c, dv)
        comp = x.norm(scalar)
        worst_attain = max(worst_attain, abs(comp - full))
        rec = {"norm": full, "compressed": comp, "omega": w}
        if n_estimate is not None:
            _, fw = gamma_classic(x, u, scalar)
            funcs = face + [fw]
            sup = max(matcore.spec_norm(np.einsum("pqt,t->pq", c, f.coeffs)) for f in funcs)
            rec["sup_f"] = sup
            worst_sup = max(worst_sup, n_estimate * full - sup)
        records.append(rec)
    out = {"max_attainment_error": worst_attain, "records": records}
    if n_estimate is not None:
        out["max_sup_violation"] = worst_sup
    return out


def evaluation_embedding(x: NormedSpace, u, count: int = 16, trials: int = 50, seed: int = 0) -> dict:
    """Evaluation of ``X`` on sampled points of ``S(X;u)``.

    Returns the resulting function space (``u`` maps to the constant one)
    and the largest relative shortfall ``(||v|| - max_f |f(v)|) / ||v||`` on
    random ``v``; zero shortfall on all samples is consistent with an
    isometric embedding, but a finite sample proves nothing either way.
    """
    rng = np.random.default_rng([seed, 53])
    funcs = face_sample(x, u, rng, count)
    table = np.array([f.coeffs for f in funcs])
    ones = table @ np.asarray(u, dtype=complex)
    worst = 0.0
    for _ in range(trials):
        v = rng.standard_normal(x.m) + 1j * rng.standard_normal(x.m)
        worst = max(worst, (x.norm(v) - np.abs(table @ v).max()) / x.norm(v))
    return {
        "space": sup_over_points(table, None, label=f"eval {x.label}"),
        "unit_error": float(np.abs(ones - 1).max()),
        "max_shortfall": float(worst),
    }
