"""Lower bounds for ``γ_k^u`` and heuristic estimates of ``n_cb(V;u)``.

``γ_k^u(x)`` is the supremum of ``||φ_k(x)||`` over ``φ ∈ S_n(V;u)`` and all
``n``. For fixed ``n`` it is approached by a seesaw: with unit vectors
``ξ, η`` fixed, ``Re <ξ, φ_k(x) η>`` is linear in the Choi matrix, so one SDP
gives the best ``φ``; with ``φ`` fixed the best pair is the top singular pair
of ``φ_k(x)``. Every returned value is attained by an explicit witness, so it
is a certified lower bound.
"""

from __future__ import annotations

import contextlib
import contextvars
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .cbmap import ContractionProgram, SnWitness, make_witness
from .errors import AmbiguousKernelWarning, ContractViolation, InconsistencyError, SolverFailure
from .opspace import (
    LevelElement,
    OperatorSpace,
    level_norm,
    random_element,
    u_multiple,
    unitary_realization,
)
from .errors import NoUnitalRealization

CLOSE_TOL = 1e-6
IMPROVE_TOL = 1e-9
KERNEL_TOL = 1e-6
RESTART_PATIENCE = 5

_AUDIT: contextvars.ContextVar = contextvars.ContextVar("gamma_audit", default=None)


@contextlib.contextmanager
def audit():
    """Collect every :class:`GammaEstimate` produced inside the block."""
    log: list = []
    token = _AUDIT.set(log)
    try:
        yield log
    finally:
        _AUDIT.reset(token)


def _record(est, x_is_u: bool):
    log = _AUDIT.get()
    if log is not None:
        log.append({"value": est.value, "level_norm": est.level_norm, "is_u": x_is_u, "kind": est.kind})


# ---------------------------------------------------------------------------
# witness families


class WitnessFamily:
    """Compiled SDP feasible sets ``S_n(V;u)`` (or ``S_n^+``) for each ``n``.

    ``positivity`` is a list of ``(g, m)`` pairs, ``g ∈ M_m(M_d)`` realized,
    each adding the constraint ``φ_m(g) >= 0``. With ``unital=False`` the
    constraint ``φ(u) = I_n`` is dropped.
    """

    def __init__(self, space: OperatorSpace, positivity=(), unital: bool = True):
        if unital and space.u is None:
            raise ContractViolation("a unital witness family needs a distinguished element")
        self.space = space
        self.positivity = [(np.asarray(g, dtype=complex), int(m)) for g, m in positivity]
        self.unital = unital
        self._bare = space if unital else OperatorSpace(space.basis, None, space.label)
        self._cache: dict = {}

    def at(self, n: int):
        if n not in self._cache:
            prog = ContractionProgram(self.space.d, n, unit=self.space.u_matrix if self.unital else None)
            for g, m in self.positivity:
                prog.add_positivity(g, m)
            self._cache[n] = (prog, prog.compile())
        return self._cache[n]

    def witness(self, choi) -> SnWitness:
        return make_witness(choi, self._bare)


def unital_family(space: OperatorSpace) -> WitnessFamily:
    return WitnessFamily(space)


# ---------------------------------------------------------------------------
# seesaw


@dataclass
class SeesawResult:
    value: float
    witness: SnWitness
    xi: np.ndarray
    eta: np.ndarray
    rounds: int


def seesaw(family: WitnessFamily, n: int, a: np.ndarray, k: int, xi, eta, mode: str = "norm",
           max_iter: int = 60, patience: int = 5, ceiling: float | None = None):
    """Alternate SDP and vector updates from one start.

    ``mode="norm"`` maximizes ``||φ_k(a)||``; ``mode="herm"`` maximizes
    ``λ_max(Re φ_k(a))`` (with ``ξ = η``). Returns ``None`` when the first
    SDP fails.
    """
    prog, comp = family.at(n)
    best = None
    prev = -np.inf
    stall = 0
    for it in range(max_iter):
        sol = comp.solve(prog.objective(a, k, xi, eta), "max")
        if not sol.feasible_within():
            break
        choi = prog.extract(sol.blocks)
        y = choi.apply(a, k)
        if mode == "norm":
            val, xi2, eta2 = matcore.top_singular_pair(y)
        else:
            w, v = np.linalg.eigh(matcore.hermitian_part(y))
            val, xi2 = float(w[-1]), v[:, -1]
            eta2 = xi2
        if best is None or val > best.value:
            best = SeesawResult(val, family.witness(choi), xi2, eta2, it + 1)
        same = np.abs(np.outer(xi2, eta2.conj()) - np.outer(xi, eta.conj())).max() < 1e-10
        stall = stall + 1 if val - prev < IMPROVE_TOL else 0
        prev = max(prev, val)
        xi, eta = xi2, eta2
        if same or stall >= patience or (ceiling is not None and val >= ceiling - IMPROVE_TOL):
            break
    return best


def _fit(v: np.ndarray, k: int, d_in: int, n: int) -> np.ndarray:
    """Reshape a vector of ``C^k ⊗ C^d_in`` into ``C^k ⊗ C^n`` by padding or truncation."""
    v = v.reshape(k, d_in)
    out = np.zeros((k, n), dtype=complex)
    r = min(d_in, n)
    out[:, :r] = v[:, :r]
    out = out.reshape(-1)
    nrm = np.linalg.norm(out)
    return out / nrm if nrm > 1e-12 else None


# ---------------------------------------------------------------------------
# γ estimates


@dataclass
class GammaEstimate:
    value: float
    kind: str  # exact | lower_bound | heuristic
    n: int
    witness: SnWitness | None
    xi: np.ndarray
    eta: np.ndarray
    history: list
    n_max: int
    level_norm: float
    k: int = 1

    def check(self, space: OperatorSpace, x: LevelElement) -> float:
        """``| |<ξ, φ_k(x) η>| - value |`` recomputed from the witness."""
        y = self.witness.choi.apply_element(space, x)
        return abs(abs(np.vdot(self.xi, y @ self.eta)) - self.value)


def _start_vectors(x_real: np.ndarray, k: int, d: int, n: int, restarts: int, rng, extra=()):
    starts = []
    _, a, b = matcore.top_singular_pair(x_real)
    fa, fb = _fit(a, k, d, n), _fit(b, k, d, n)
    if fa is not None and fb is not None:
        starts.append((fa, fb))
    starts.extend(extra)
    while len(starts) < restarts:
        starts.append((matcore.unit_vector(k * n, rng), matcore.unit_vector(k * n, rng)))
    return starts[:max(restarts, 1)]


def gamma_fixed_n(space: OperatorSpace, x: LevelElement, n: int, restarts: int = 20, seed: int = 0,
                  max_iter: int = 60, family: WitnessFamily | None = None, extra_starts=(),
                  patience: int = 5, restart_patience: int = RESTART_PATIENCE) -> GammaEstimate:
    """Best seesaw value of ``||φ_k(x)||`` over ``φ`` in the level-``n`` family.

    Restarts stop early once ``restart_patience`` consecutive starts fail to
    improve the best value.
    """
    if n < 1:
        raise ContractViolation("n must be at least 1")
    family = family or unital_family(space)
    xr = x.realize(space)
    k = x.k
    norm = matcore.spec_norm(xr)
    rng = np.random.default_rng([seed, n, k, 7])
    best = None
    stale = 0
    for xi, eta in _start_vectors(xr, k, space.d, n, restarts, rng, extra_starts):
        res = seesaw(family, n, xr, k, xi, eta, "norm", max_iter, patience, ceiling=norm)
        if res is not None and (best is None or res.value > best.value + IMPROVE_TOL):
            best, stale = res, 0
        else:
            stale += 1
        if best is not None and best.value >= norm - IMPROVE_TOL:
            break
        if stale >= restart_patience:
            break
    if best is None:
        raise SolverFailure(f"every seesaw restart failed at n={n}")
    return GammaEstimate(best.value, "lower_bound", n, best.witness, best.xi, best.eta,
                         [best.value], n, norm, k)


def gamma(space: OperatorSpace, x: LevelElement, n_max: int | None = None, restarts: int = 20,
          seed: int = 0, max_iter: int = 60, family: WitnessFamily | None = None) -> GammaEstimate:
    """Certified lower bound for ``γ_k^u(x)`` using witnesses with ``n <= n_max``.

    ``n_max`` defaults to ``d k``. ``history[n-1]`` is the best value with
    witnesses of size at most ``n``; a map ``φ ∈ S_n`` lifts to
    ``φ ⊕ f ∈ S_{n+1}`` so the per-``n`` suprema are non-decreasing.
    """
    family = family or unital_family(space)
    k = x.k
    if n_max is None:
        n_max = space.d * k
    if n_max < 1:
        raise ContractViolation("n_max must be at least 1")
    norm = level_norm(space, x)

    a = u_multiple(space, x) if family.unital else None
    if a is not None:
        est = _gamma_u_multiple(space, x, a, n_max, family, norm)
        _record(est, bool(np.abs(a - np.eye(k)).max() < 1e-12))
        return est

    history: list = []
    best = None
    for n in range(1, n_max + 1):
        extra = []
        if best is not None:
            # warm start: the previous optimum lifted by a zero coordinate
            fx, fe = _fit(best.xi, k, best.n, n), _fit(best.eta, k, best.n, n)
            if fx is not None and fe is not None:
                extra.append((fx, fe))
        est = gamma_fixed_n(space, x, n, restarts, seed, max_iter, family, extra)
        if best is None or est.value > best.value:
            best = est
        history.append(max(best.value, history[-1] if history else -np.inf))
        if best.value >= norm - CLOSE_TOL:
            history.extend([history[-1]] * (n_max - n))
            break
    kind = "exact" if best.value >= norm - CLOSE_TOL else "lower_bound"
    out = GammaEstimate(best.value, kind, best.n, best.witness, best.xi, best.eta, history, n_max, norm, k)
    _record(out, False)
    return out


def _gamma_u_multiple(space, x, a, n_max, family, norm) -> GammaEstimate:
    """``x = a ⊗ u``: every witness gives ``φ_k(x) = a ⊗ I_n`` so ``γ = ||a||``."""
    k = x.k
    prog, comp = family.at(1)
    sol = comp.solve({}, "max")
    if not sol.feasible_within():
        raise SolverFailure("S_1(V;u) feasibility failed")
    wit = family.witness(prog.extract(sol.blocks))
    val = matcore.spec_norm(a)
    _, xi, eta = matcore.top_singular_pair(a)
    return GammaEstimate(val, "exact", 1, wit, xi, eta, [val] * n_max, n_max, norm, k)


# ---------------------------------------------------------------------------
# n_cb


@dataclass
class NcbEstimate:
    value: float
    kind: str  # exact | heuristic
    witness: LevelElement | None
    gamma_at_witness: GammaEstimate | None
    shortcut: str = "none"
    trace: list = field(default_factory=list)


def _gamma_gradient(space: OperatorSpace, x: LevelElement, est: GammaEstimate) -> np.ndarray:
    """Ascent direction (in coefficient space) of ``γ/||x||`` at a unit ``x``.

    Uses the envelope of the witness objective ``|<ξ, φ_k(·) η>|`` and the
    top singular pair of the realization for the norm.
    """
    k, n = x.k, est.witness.choi.n
    imgs = est.witness.choi.on_space(space)
    xi, eta = est.xi.reshape(k, n), est.eta.reshape(k, n)
    w_g = np.einsum("pa,tab,qb->pqt", xi.conj(), imgs, eta)
    ph = np.vdot(est.xi, est.witness.choi.apply_element(space, x) @ est.eta)
    w_g = w_g * (np.conj(ph) / max(abs(ph), 1e-300))
    _, a, b = matcore.top_singular_pair(x.realize(space))
    d = space.d
    a, b = a.reshape(k, d), b.reshape(k, d)
    w_n = np.einsum("pi,tij,qj->pqt", a.conj(), space.basis, b)
    return np.conj(w_g) - est.value * np.conj(w_n)


def ncb_estimate(space: OperatorSpace, k_max: int = 2, n_max: int | None = None,
                 sphere_restarts: int = 4, descent_steps: int = 6, restarts: int = 4,
                 seed: int = 0, family: WitnessFamily | None = None, max_iter: int = 30) -> NcbEstimate:
    """Estimate ``inf γ_k(x)`` over unit ``x ∈ M_k(V)``, ``k <= k_max``.

    Exact ``1`` when ``u`` is unitary in the realization (or after compressing
    to the joint support); otherwise a heuristic sphere minimization whose
    value is attained by the returned witness.
    """
    family = family or unital_family(space)
    if family.unital and not family.positivity:
        try:
            unitary_realization(space)
            return NcbEstimate(1.0, "exact", None, None, "unitary_conjugation")
        except NoUnitalRealization:
            pass
    rng = np.random.default_rng([seed, 11])
    best_val, best_x, best_est = np.inf, None, None
    trace = []

    def evaluate(x):
        nmx = n_max if n_max is not None else space.d * x.k
        est = gamma(space, x, nmx, restarts, seed, max_iter, family)
        return est.value / est.level_norm, est

    for k in range(1, k_max + 1):
        seeds = []
        if k == 1:
            seeds += [LevelElement(np.eye(space.m)[t]).normalized(space) for t in range(space.m)]
        seeds += [random_element(space, k, rng) for _ in range(sphere_restarts)]
        for x in seeds:
            val, est = evaluate(x)
            step = 0.5
            for _ in range(descent_steps):
                g = _gamma_gradient(space, x, est)
                gn = np.linalg.norm(g)
                if gn < 1e-12:
                    break
                improved = False
                while step > 0.03:
                    cand = LevelElement(x.coeffs - step * g / gn)
                    if level_norm(space, cand) < 1e-12:
                        step /= 2
                        continue
                    cand = cand.normalized(space)
                    cval, cest = evaluate(cand)
                    if cval < val - 1e-9:
                        x, val, est = cand, cval, cest
                        improved = True
                        step *= 1.5
                        break
                    step /= 2
                if not improved:
                    break
            trace.append(val)
            if val < best_val:
                best_val, best_x, best_est = val, x, est
            if best_val <= 1e-12:
                # γ is non-negative: nothing left to find
                break
        if best_val <= 1e-12:
            break
    return NcbEstimate(float(best_val), "heuristic", best_x, best_est, "none", trace)


# ---------------------------------------------------------------------------
# the quotient V_u


@dataclass
class QuotientData:
    kernel: np.ndarray  # columns: orthonormal coefficient vectors spanning N_u
    basis: np.ndarray   # columns: orthonormal complement, coordinates of V_u
    table: list
    kernel_values: list
    ambiguous: bool
    kernel_tol: float

    @property
    def Q(self) -> np.ndarray:
        """Coefficient-space quotient map ``c -> B* c`` (vanishes on ``N_u``)."""
        return self.basis.conj().T

    def lift(self, q) -> np.ndarray:
        return self.basis @ np.asarray(q, dtype=complex)


def _sample_witnesses(space, family, n_max, samples, rng):
    wits = []
    for n in range(1, n_max + 1):
        prog, comp = family.at(n)
        for _ in range(samples):
            h = matcore.random_hermitian(2 * space.d * n, rng)
            sol = comp.solve(prog.hermitian_objective(h), "max")
            if sol.feasible_within():
                wits.append(prog.extract(sol.blocks))
    return wits


def quotient_Vu(space: OperatorSpace, k_max: int = 2, kernel_tol: float = KERNEL_TOL,
                n_max: int | None = None, samples: int = 8, restarts: int = 4, seed: int = 0,
                family: WitnessFamily | None = None) -> QuotientData:
    """Detect ``N_u = {v : γ_1(v) = 0}`` and set up coordinates for ``V/N_u``.

    Witnesses from random linear objectives give the linear maps
    ``v -> φ(v)``; directions with small joint image are candidates, and each
    candidate is then scored by the seesaw lower bound ``γ̂_1``.
    """
    family = family or unital_family(space)
    n_max = n_max or space.d
    rng = np.random.default_rng([seed, 23])
    wits = _sample_witnesses(space, family, n_max, samples, rng)
    if not wits:
        raise SolverFailure("no witnesses could be sampled")
    rows = np.concatenate([c.on_space(space).reshape(space.m, -1).T for c in wits], axis=0)
    _, s, vh = np.linalg.svd(rows, full_matrices=True)
    s = np.concatenate([s, np.zeros(space.m - s.size)])
    gram = space._gram
    kernel, kvals, ambiguous = [], [], False
    for j in np.argsort(s):
        # generous screen: the seesaw score below makes the decision
        if s[j] > 100 * kernel_tol * np.sqrt(rows.shape[0]):
            continue
        v = vh[j].conj()
        x = LevelElement(v / np.sqrt(np.real(v.conj() @ gram @ v)))
        x = x.normalized(space)
        est = gamma(space, x, n_max, restarts, seed, family=family)
        # γ̂ is a lower bound, so also take the sampled images into account
        val = max(est.value, max(matcore.spec_norm(c.apply_element(space, x)) for c in wits))
        kvals.append(val)
        if val <= kernel_tol:
            kernel.append(x.coeffs.reshape(-1))
        elif val <= 10 * kernel_tol:
            ambiguous = True
            warnings.warn(f"seminorm value {val:.3g} inside the kernel guard band", AmbiguousKernelWarning)
    if kernel:
        kb, _ = np.linalg.qr(np.array(kernel).T)
    else:
        kb = np.zeros((space.m, 0), dtype=complex)
    qb = matcore.orth_complement(kb, space.m) if kb.shape[1] else np.eye(space.m, dtype=complex)
    table = []
    for k in range(1, k_max + 1):
        for j in range(qb.shape[1]):
            if k == 1:
                x = LevelElement(qb[:, j])
            else:
                c = np.einsum("pq,t->pqt", matcore.random_cmat(k, k, rng), qb[:, j])
                x = LevelElement(c)
            if level_norm(space, x) < 1e-12:
                continue
            x = x.normalized(space)
            est = gamma(space, x, n_max * k if n_max else None, restarts, seed, family=family)
            table.append({"level": k, "coeffs": x.coeffs, "quotient_coeffs": np.einsum("pqt,tj->pqj", x.coeffs, qb.conj()),
                          "value": est.value, "kind": est.kind})
    return QuotientData(kb, qb, table, kvals, ambiguous, kernel_tol)


@dataclass
class QuotientFactor:
    images: np.ndarray  # Ψ_u on quotient basis vectors, shape (r, n, n)
    residual: float


def factor_through_quotient(space: OperatorSpace, qdata: QuotientData, psi: SnWitness) -> QuotientFactor:
    """Induced map ``Ψ_u`` with ``Ψ = Ψ_u ∘ Q_u`` on coefficient space."""
    imgs = psi.choi.on_space(space)  # (m, n, n)
    kern = np.tensordot(qdata.kernel.T, imgs, axes=(1, 0)) if qdata.kernel.shape[1] else np.zeros((0,))
    vanish = float(np.abs(kern).max()) if kern.size else 0.0
    if vanish > qdata.kernel_tol:
        raise InconsistencyError(f"map does not vanish on the detected kernel (max {vanish:.3g})")
    induced = np.tensordot(qdata.basis.T, imgs, axes=(1, 0))  # Ψ(lift(e_j))
    recon = np.tensordot(qdata.basis.conj(), induced, axes=(1, 0))  # Ψ_u(Q e_t)
    residual = float(np.abs(recon - imgs).max())
    return QuotientFactor(induced, residual)
