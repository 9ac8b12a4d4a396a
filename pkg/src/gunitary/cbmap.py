"""Linear maps ``M_d -> M_n`` through their Choi matrices.

Convention: ``C = sum_ij E_ij ⊗ φ(E_ij)`` (size ``dn``), so that
``C[i*n + a, j*n + b] = φ(E_ij)[a, b]``.

Complete contractivity is encoded once, in :class:`ContractionProgram`:
``||φ||_cb <= 1`` iff there are ``C1, C2`` with ``[[C1, C], [C*, C2]] >= 0``
and ``Tr_1 C1 <= I_n``, ``Tr_1 C2 <= I_n`` (partial traces over the input
factor). The cb norm is the least ``t`` for which ``Tr_1 Ci <= t I_n`` is
feasible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matcore, sdp
from .errors import ContractViolation, SolverFailure
from .opspace import LevelElement, OperatorSpace

CP_TOL = 1e-8
WITNESS_TOL = 1e-7


@dataclass(eq=False)
class ChoiMatrix:
    d: int
    n: int
    C: np.ndarray
    cp_checked: bool = False
    cb_checked: bool = False
    slack: tuple | None = None

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=complex)
        if self.C.shape != (self.d * self.n, self.d * self.n):
            raise ContractViolation(f"Choi matrix of shape {self.C.shape} does not match d={self.d}, n={self.n}")

    @property
    def tensor(self) -> np.ndarray:
        return self.C.reshape(self.d, self.n, self.d, self.n)

    def apply(self, a, k: int | None = None) -> np.ndarray:
        return apply(self, a, k)

    def image(self, i: int, j: int) -> np.ndarray:
        return self.tensor[i, :, j, :]

    def on_space(self, space: OperatorSpace) -> np.ndarray:
        """``φ(G_t)`` for every basis element, shape ``(m, n, n)``."""
        return np.einsum("tij,iajb->tab", space.basis, self.tensor)

    def apply_element(self, space: OperatorSpace, x: LevelElement) -> np.ndarray:
        """``φ_k(x)`` for ``x ∈ M_k(V)``, computed from the basis images."""
        imgs = self.on_space(space)
        k, n = x.k, self.n
        return np.einsum("pqt,tab->paqb", x.coeffs, imgs).reshape(k * n, k * n)


def from_map(fn, d: int, n: int | None = None) -> ChoiMatrix:
    """Choi matrix of a Python callable acting on ``d x d`` matrices."""
    blocks = {}
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            blocks[i, j] = np.asarray(fn(e), dtype=complex)
    if n is None:
        n = blocks[0, 0].shape[0]
    c = np.zeros((d, n, d, n), dtype=complex)
    for (i, j), b in blocks.items():
        if b.shape != (n, n):
            raise ContractViolation("map output has inconsistent size")
        c[i, :, j, :] = b
    return ChoiMatrix(d, n, c.reshape(d * n, d * n))


def identity_map(d: int) -> ChoiMatrix:
    return from_map(lambda a: a, d)


def transpose_map(d: int) -> ChoiMatrix:
    return from_map(lambda a: a.T, d)


def compression_map(w: np.ndarray) -> ChoiMatrix:
    """``x -> W* x W`` for a ``d x n`` matrix ``W``."""
    w = np.asarray(w, dtype=complex)
    return from_map(lambda a: w.conj().T @ a @ w, w.shape[0], w.shape[1])


def apply(choi: ChoiMatrix, a, k: int | None = None) -> np.ndarray:
    """``φ_k(a)`` for ``a ∈ M_k(M_d)`` given as a ``kd x kd`` matrix."""
    a = matcore.as_cmat(a)
    d, n = choi.d, choi.n
    if k is None:
        k = a.shape[0] // d
    if a.shape != (k * d, k * d):
        raise ContractViolation(f"apply: matrix of shape {a.shape} is not in M_{k}(M_{d})")
    out = np.einsum("piqj,iajb->paqb", a.reshape(k, d, k, d), choi.tensor)
    return out.reshape(k * n, k * n)


def is_cp(choi: ChoiMatrix, tol: float = CP_TOL) -> bool:
    c = choi.C
    if not matcore.is_hermitian(c, rtol=1e-9):
        return False
    return bool(np.linalg.eigvalsh(matcore.hermitian_part(c))[0] >= -tol)


# ---------------------------------------------------------------------------
# the SDP encoding


def _tr1_terms(d: int, n: int, corner: int, a: int, b: int) -> np.ndarray:
    """Coefficient on ``Z`` (size 2dn) selecting ``(Tr_1 Z_cc)[a, b]``."""
    size = 2 * d * n
    m = np.zeros((size, size), dtype=complex)
    off = corner * d * n
    for i in range(d):
        m[off + i * n + b, off + i * n + a] = 1.0
    return m


def _lift(w: np.ndarray, d: int, n: int) -> np.ndarray:
    """Coefficient on ``Z`` for the functional ``C -> sum w[r, s] C[r, s]``, ``C = Z12``."""
    dn = d * n
    m = np.zeros((2 * dn, 2 * dn), dtype=complex)
    m[dn:, :dn] = np.asarray(w).T
    return m


def amplified_weights(g: np.ndarray, k: int, d: int, n: int, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Weights ``w`` with ``<xi, φ_k(g) eta> = sum w[r, s] C[r, s]``."""
    g4 = g.reshape(k, d, k, d)
    w = np.einsum("piqj,pa,qb->iajb", g4, xi.reshape(k, n).conj(), eta.reshape(k, n))
    return w.reshape(d * n, d * n)


class ContractionProgram:
    """SDP variables for the Choi matrices of complete contractions ``M_d -> M_n``.

    Variables: ``Z`` (size 2dn) with ``C = Z[:dn, dn:]`` and two slack blocks.
    Further linear constraints on ``C`` and positivity blocks are added with
    the ``add_*`` methods; all terms are first written against ``Z``.

    With ``unit`` given (a norm-one ``u`` in ``M_d``), the constraint
    ``φ(u) = I_n`` is included and the program is restricted to the face it
    forces: with ``K = conj(u) ⊗ I_n`` the matrix ``Y = [[I, -K], [-K*, I]]``
    is PSD and ``Tr(Y Z) + Tr S1 + Tr S2 = 0`` for every feasible point, so
    the slacks vanish and ``Z = R W R*`` where the columns of ``R`` span
    ``ker Y``. The reduced program has a strictly feasible point, which the
    interior point method needs.
    """

    def __init__(self, d: int, n: int, unit=None):
        self.d, self.n = d, n
        self.constraints: list = []
        self.n_pos = 0
        self.R = None
        dn = d * n
        if unit is None:
            self.blocks = [("Z", 2 * dn), ("S1", n), ("S2", n)]
            slacks = ("S1", "S2")
        else:
            unit = np.asarray(unit, dtype=complex)
            _, s, vh = np.linalg.svd(unit.conj())
            q = vh[s >= 1 - 1e-8].conj().T  # right singular vectors with σ = 1
            if q.shape[1] == 0:
                raise ContractViolation("distinguished element must have norm 1")
            qn = np.kron(q, np.eye(n))
            kq = np.kron(unit.conj(), np.eye(n)) @ qn
            self.R = np.vstack([kq, qn]) / np.sqrt(2)
            self.blocks = [("W", self.R.shape[1])]
            slacks = (None, None)
        for corner, sl in zip((0, 1), slacks):
            def terms(a, b, corner=corner, sl=sl):
                t = {"Z": _tr1_terms(d, n, corner, a, b)}
                if sl is not None:
                    t[sl] = sdp.entry_selector(n, a, b)
                return t
            self.constraints += sdp.hermitian_equality(terms, np.eye(n))
        if unit is not None:
            self.add_value(unit, np.eye(n))

    def functional(self, w) -> dict:
        """Complex functional ``C -> sum w[r, s] C[r, s]`` as block terms."""
        return {"Z": _lift(w, self.d, self.n)}

    def _reduce(self, terms) -> dict:
        if self.R is None:
            return terms
        out = {b: a for b, a in terms.items() if b != "Z"}
        if "Z" in terms:
            out["W"] = self.R.conj().T @ terms["Z"] @ self.R
        return out

    def add_value(self, a, target) -> None:
        """Require ``φ(a) = target`` (``a`` in ``M_d``, target in ``M_n``)."""
        a = np.asarray(a, dtype=complex)
        target = np.asarray(target, dtype=complex)
        d, n = self.d, self.n
        for p in range(n):
            for q in range(n):
                w = np.zeros((d, n, d, n), dtype=complex)
                w[:, p, :, q] = a
                self.constraints += sdp.complex_equality(self.functional(w.reshape(d * n, d * n)), target[p, q])

    def add_positivity(self, g, k: int) -> None:
        """Require ``φ_k(g) >= 0`` for ``g ∈ M_k(M_d)`` through a new PSD block."""
        d, n = self.d, self.n
        name = f"P{self.n_pos}"
        self.n_pos += 1
        size = k * n
        self.blocks.append((name, size))
        g4 = np.asarray(g, dtype=complex).reshape(k, d, k, d)
        for r in range(size):
            for s in range(size):
                p, a = divmod(r, n)
                q, b = divmod(s, n)
                w = np.zeros((d, n, d, n), dtype=complex)
                w[:, a, :, b] = g4[p, :, q, :]
                terms = self.functional(w.reshape(d * n, d * n))
                terms["Z"] = -terms["Z"]
                terms[name] = sdp.entry_selector(size, r, s)
                self.constraints += sdp.complex_equality(terms, 0.0)

    def objective(self, g, k: int, xi, eta) -> dict:
        """Hermitian objective ``Re <xi, φ_k(g) eta>``."""
        terms = self.functional(amplified_weights(np.asarray(g, dtype=complex), k, self.d, self.n, xi, eta))
        return self._reduce(sdp.real_parts(terms)[0])

    def hermitian_objective(self, h) -> dict:
        """Objective ``Tr(h Z)`` for a Hermitian ``h`` of size 2dn."""
        return self._reduce({"Z": np.asarray(h, dtype=complex)})

    def problem(self, objective=None, sense="max") -> sdp.SdpProblem:
        cons = [sdp.Constraint(self._reduce(c.coeffs), c.rhs, c.kind) for c in self.constraints]
        return sdp.SdpProblem(list(self.blocks), cons, objective or {}, sense)

    def compile(self) -> sdp.CompiledSdp:
        return sdp.CompiledSdp(self.problem())

    def z_block(self, blocks) -> np.ndarray:
        if self.R is None:
            return blocks["Z"]
        return self.R @ blocks["W"] @ self.R.conj().T

    def extract(self, blocks) -> ChoiMatrix:
        z = self.z_block(blocks)
        dn = self.d * self.n
        return ChoiMatrix(self.d, self.n, z[:dn, dn:], cb_checked=True, slack=(z[:dn, :dn], z[dn:, dn:]))


def contraction_residual(choi: ChoiMatrix) -> float:
    """How far the stored slack blocks are from certifying ``||φ||_cb <= 1``."""
    if choi.slack is None:
        return np.inf
    c1, c2 = choi.slack
    z = np.block([[c1, choi.C], [choi.C.conj().T, c2]])
    lam = float(np.linalg.eigvalsh(matcore.hermitian_part(z))[0])
    dims = (choi.d, choi.n)
    t = max(
        float(np.linalg.eigvalsh(matcore.hermitian_part(matcore.partial_trace(c, dims, 0)))[-1])
        for c in (c1, c2)
    )
    return max(0.0, -lam, t - 1.0)


# ---------------------------------------------------------------------------
# cb norm


@dataclass
class CbNorm:
    value: float
    verified: bool
    slack: tuple
    solution: sdp.SdpSolution = field(repr=False)


def cb_norm(choi: ChoiMatrix) -> CbNorm:
    """Completely bounded norm of the map with Choi matrix ``choi.C``."""
    d, n = choi.d, choi.n
    dn = d * n
    blocks = [("Z", 2 * dn), ("S1", n), ("S2", n), ("t", 1)]
    cons = []
    for r in range(dn):
        for s in range(dn):
            cons += sdp.complex_equality({"Z": sdp.entry_selector(2 * dn, r, dn + s)}, choi.C[r, s])
    for corner, sl in ((0, "S1"), (1, "S2")):
        def terms(a, b, corner=corner, sl=sl):
            t = np.zeros((1, 1), dtype=complex)
            if a == b:
                t[0, 0] = -1.0
            return {"Z": _tr1_terms(d, n, corner, a, b), sl: sdp.entry_selector(n, a, b), "t": t}
        cons += sdp.hermitian_equality(terms, np.zeros((n, n)))
    prob = sdp.SdpProblem(blocks, cons, {"t": np.ones((1, 1))}, sense="min")
    sol = sdp.solve(prob, gap_tol=1e-8)
    if sol.status == "infeasible":
        raise SolverFailure("cb norm program reported infeasible")
    z = sol.blocks["Z"]
    val = float(sol.blocks["t"][0, 0].real)
    return CbNorm(val, sol.optimal, (z[:dn, :dn], z[dn:, dn:]), sol)


def brute_force_cb(choi: ChoiMatrix, level: int | None = None, restarts: int = 20,
                   iters: int = 200, seed: int = 0) -> float:
    """Lower bound for the cb norm by alternating ascent on ``||φ_k(x)||``.

    For fixed unit ``xi, eta`` the best unit ``x`` is the polar part of the
    weight matrix of ``x -> <xi, φ_k(x) eta>``; for fixed ``x`` the best pair
    is the top singular pair. No SDP is involved.
    """
    d, n = choi.d, choi.n
    k = n if level is None else level
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(restarts):
        x = matcore.random_unitary(k * d, rng)
        prev = -1.0
        for _ in range(iters):
            sig, xi, eta = matcore.top_singular_pair(apply(choi, x, k))
            best = max(best, sig)
            w = np.einsum("paiqbj->piqj", np.einsum(
                "pa,iajb,qb->paiqbj", xi.reshape(k, n).conj(), choi.tensor, eta.reshape(k, n)
            )).reshape(k * d, k * d)
            uu, _, vh = np.linalg.svd(w.T)
            x = (uu @ vh).conj().T
            if sig - prev < 1e-13:
                break
            prev = sig
    return best


# ---------------------------------------------------------------------------
# S_n(V; u)


@dataclass(eq=False)
class SnWitness:
    choi: ChoiMatrix
    restriction_residual: float
    unit_residual: float
    contraction_residual: float = 0.0

    @property
    def valid(self) -> bool:
        return max(self.restriction_residual, self.unit_residual, self.contraction_residual) <= WITNESS_TOL

    def value(self, space: OperatorSpace, x: LevelElement) -> float:
        return matcore.spec_norm(self.choi.apply_element(space, x))

    def restrict(self, subspace: OperatorSpace) -> "SnWitness":
        """Same extension viewed as a witness for a subspace containing ``u``."""
        return make_witness(self.choi, subspace)


def make_witness(choi: ChoiMatrix, space: OperatorSpace, targets=None) -> SnWitness:
    """Package a Choi matrix as a candidate element of ``S_n(V;u)`` with residuals."""
    n = choi.n
    unit = float(np.abs(choi.apply(space.u_matrix) - np.eye(n)).max()) if space.u is not None else 0.0
    restr = 0.0
    if targets is not None:
        imgs = choi.on_space(space)
        restr = float(np.abs(imgs - np.asarray(targets, dtype=complex)).max())
    return SnWitness(choi, restr, unit, contraction_residual(choi))


def unital_program(space: OperatorSpace, n: int) -> ContractionProgram:
    """Program whose feasible set is the extensions of elements of ``S_n(V;u)``."""
    return ContractionProgram(space.d, n, unit=space.u_matrix)


def sn_membership(space: OperatorSpace, targets) -> SnWitness | sdp.SdpSolution:
    """Decide whether ``G_t -> targets[t]`` extends to an element of ``S_n(V;u)``.

    Returns an :class:`SnWitness` when feasible, otherwise the infeasible
    :class:`~gunitary.sdp.SdpSolution` carrying the certificate.
    """
    targets = np.asarray(targets, dtype=complex)
    if targets.ndim != 3 or targets.shape[0] != space.m or targets.shape[1] != targets.shape[2]:
        raise ContractViolation("need one square target matrix per basis element")
    if space.u is None:
        raise ContractViolation("S_n(V;u) needs a distinguished element")
    n = targets.shape[1]
    prog = unital_program(space, n)
    for g, tgt in zip(space.basis, targets):
        prog.add_value(g, tgt)
    sol = sdp.feasibility(prog.problem())
    if sol.status == "infeasible":
        return sol
    if not sol.feasible_within():
        raise SolverFailure(f"S_n membership program did not converge (residual {sol.max_residual:.3g})")
    return make_witness(prog.extract(sol.blocks), space, targets)


def compression_element(space: OperatorSpace, w) -> SnWitness:
    """``x -> W* x W`` as an element of ``S_n(V;u)`` when ``u`` is realized as ``I``."""
    w = np.asarray(w, dtype=complex)
    n = w.shape[1]
    if np.abs(w.conj().T @ w - np.eye(n)).max() > 1e-10:
        raise ContractViolation("W is not an isometry")
    if np.abs(space.u_matrix - np.eye(space.d)).max() > 1e-10:
        raise ContractViolation("compression_element needs u realized as the identity")
    choi = compression_map(w)
    choi.cp_checked = is_cp(choi)
    # CP with Tr_1 C = W*W = I: the block [[C, C], [C, C]] certifies cb <= 1
    choi.slack = (choi.C.copy(), choi.C.copy())
    choi.cb_checked = True
    return make_witness(choi, space)
