"""Concrete operator spaces ``V ⊆ M_d`` and their matrix levels.

An :class:`OperatorSpace` is a basis ``G_1..G_m`` of ``d x d`` matrices plus an
optional distinguished element ``u`` given by its coefficient vector. An
element of ``M_k(V)`` is a :class:`LevelElement`, a ``(k, k, m)`` coefficient
array realized as ``sum c[p, q, t] E_pq ⊗ G_t`` in ``M_{kd}``.

Level-1 normed spaces that are not (or not only) matrix realized are
described by :class:`NormedSpace`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .errors import ContractViolation, NoUnitalRealization

GRAM_FLOOR = 1e-10
UNIT_TOL = 1e-9
UNITARY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class OperatorSpace:
    basis: np.ndarray
    u: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        basis = np.array(self.basis, dtype=complex)
        if basis.ndim == 2:
            basis = basis[None]
        if basis.ndim != 3 or basis.shape[1] != basis.shape[2] or basis.shape[0] == 0:
            raise ContractViolation(f"basis must be a non-empty list of square matrices, got {basis.shape}")
        object.__setattr__(self, "basis", basis)
        gram = np.einsum("sij,tij->st", basis.conj(), basis)
        lam = float(np.linalg.eigvalsh(gram)[0])
        if lam < GRAM_FLOOR:
            raise ContractViolation(f"basis is not linearly independent (Gram eigenvalue {lam:.3g})")
        object.__setattr__(self, "_gram", gram)
        if self.u is not None:
            u = np.array(self.u, dtype=complex).reshape(-1)
            if u.shape != (self.m,):
                raise ContractViolation(f"u has {u.size} coefficients, basis has {self.m} elements")
            object.__setattr__(self, "u", u)
            nrm = matcore.spec_norm(self.realize(u))
            if abs(nrm - 1.0) > UNIT_TOL:
                raise ContractViolation(f"distinguished element must have norm 1, got {nrm:.12g}")

    @property
    def d(self) -> int:
        return self.basis.shape[1]

    @property
    def m(self) -> int:
        return self.basis.shape[0]

    @property
    def u_matrix(self) -> np.ndarray:
        if self.u is None:
            raise ContractViolation(f"space {self.label!r} has no distinguished element")
        return self.realize(self.u)

    def realize(self, coeffs) -> np.ndarray:
        """Matrix ``sum_t coeffs[t] G_t`` for a level-1 coefficient vector."""
        return np.tensordot(np.asarray(coeffs, dtype=complex), self.basis, axes=(0, 0))

    def coefficients(self, a, tol: float = 1e-9) -> np.ndarray:
        """Coefficients of a matrix in ``V``; raises if ``a`` is not in ``V``."""
        a = np.asarray(a, dtype=complex)
        rhs = np.einsum("tij,ij->t", self.basis.conj(), a)
        c = np.linalg.solve(self._gram, rhs)
        if np.abs(self.realize(c) - a).max() > tol * (1 + np.abs(a).max()):
            raise ContractViolation("matrix does not lie in the space")
        return c

    def with_u(self, u, label: str | None = None) -> "OperatorSpace":
        return OperatorSpace(self.basis, u, self.label if label is None else label)


@dataclass(frozen=True, eq=False)
class LevelElement:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[None, None, :]
        if c.ndim != 3 or c.shape[0] != c.shape[1]:
            raise ContractViolation(f"level element needs a (k, k, m) array, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def k(self) -> int:
        return self.coeffs.shape[0]

    def realize(self, space: OperatorSpace) -> np.ndarray:
        if self.coeffs.shape[2] != space.m:
            raise ContractViolation(
                f"element has {self.coeffs.shape[2]} coefficients per entry, space has {space.m}"
            )
        k, d = self.k, space.d
        return np.einsum("pqt,tij->piqj", self.coeffs, space.basis).reshape(k * d, k * d)

    def __add__(self, other):
        return LevelElement(self.coeffs + other.coeffs)

    def __mul__(self, s):
        return LevelElement(self.coeffs * s)

    __rmul__ = __mul__

    def normalized(self, space) -> "LevelElement":
        return self * (1.0 / level_norm(space, self))

    @classmethod
    def from_matrix(cls, space: OperatorSpace, a, k: int | None = None, tol: float = 1e-9):
        """Decompose a ``kd x kd`` matrix with entries in ``V``."""
        a = np.asarray(a, dtype=complex)
        d = space.d
        if k is None:
            k = a.shape[0] // d
        if a.shape != (k * d, k * d):
            raise ContractViolation(f"matrix of shape {a.shape} is not in M_{k}(M_{d})")
        blocks = a.reshape(k, d, k, d).transpose(0, 2, 1, 3)
        c = np.array([[space.coefficients(blocks[p, q], tol) for q in range(k)] for p in range(k)])
        return cls(c)

    @classmethod
    def scalar_tensor(cls, a, coeffs):
        """``a ⊗ v`` for a scalar matrix ``a`` and a level-1 coefficient vector ``v``."""
        a = np.atleast_2d(np.asarray(a, dtype=complex))
        return cls(np.einsum("pq,t->pqt", a, np.asarray(coeffs, dtype=complex)))


def level_norm(space: OperatorSpace, x: LevelElement) -> float:
    """Norm of ``x`` in ``M_k(V)``: the spectral norm of its realization."""
    return matcore.spec_norm(x.realize(space))


def random_element(space: OperatorSpace, k: int, rng: np.random.Generator, unit=True) -> LevelElement:
    c = rng.standard_normal((k, k, space.m)) + 1j * rng.standard_normal((k, k, space.m))
    x = LevelElement(c)
    return x.normalized(space) if unit else x


def u_multiple(space: OperatorSpace, x: LevelElement, tol: float = 1e-12):
    """Return the scalar matrix ``a`` when ``x = a ⊗ u``, else ``None``."""
    if space.u is None:
        return None
    u = space.u
    a = x.coeffs @ u.conj() / np.vdot(u, u)
    if np.abs(x.coeffs - np.einsum("pq,t->pqt", a, u)).max() <= tol * (1 + np.abs(x.coeffs).max()):
        return a
    return None


def direct_sum_blocks(*mats) -> np.ndarray:
    sizes = [m.shape[0] for m in mats]
    out = np.zeros((sum(sizes), sum(sizes)), dtype=complex)
    pos = 0
    for m, s in zip(mats, sizes):
        out[pos: pos + s, pos: pos + s] = m
        pos += s
    return out


def direct_sum_inf(v: OperatorSpace, w: OperatorSpace, u=None, label: str = "") -> OperatorSpace:
    """``V ⊕^∞ W`` realized block diagonally in ``M_{d_V + d_W}``.

    The coefficient vector is the concatenation ``(coeffs_V, coeffs_W)``.
    ``u`` defaults to ``(u_V, u_W)`` when both parts carry one.
    """
    zv = np.zeros((v.d, v.d))
    zw = np.zeros((w.d, w.d))
    basis = [direct_sum_blocks(g, zw) for g in v.basis] + [direct_sum_blocks(zv, h) for h in w.basis]
    if u is None and v.u is not None and w.u is not None:
        u = np.concatenate([v.u, w.u])
    return OperatorSpace(np.array(basis), u, label or f"({v.label} ⊕∞ {w.label})")


def conjugate_embedding(space: OperatorSpace):
    """Complete isometry ``x -> u* x`` onto a space containing the identity.

    The coefficient vectors are unchanged; returns ``(space', u_matrix)``.
    """
    um = space.u_matrix
    if np.abs(um.conj().T @ um - np.eye(space.d)).max() > UNITARY_TOL:
        raise NoUnitalRealization("no exact unital realization available: u is not unitary")
    basis = np.einsum("ij,tjk->tik", um.conj().T, space.basis)
    return OperatorSpace(basis, space.u, space.label + " (u*·)"), um


def reduce_realization(space: OperatorSpace, tol: float = 1e-10):
    """Compress ``V`` to the joint row/column support of its basis.

    ``x -> W_r* x W_c`` with isometries onto the joint ranges of ``G_t`` and
    ``G_t*``; this is a complete isometry since ``x = P_r x P_c`` on ``V``.
    Returns ``(space', W_r, W_c)``; coefficients are unchanged.
    """
    stack_r = np.concatenate(list(space.basis), axis=1)
    stack_c = np.concatenate([g.conj().T for g in space.basis], axis=1)

    def range_basis(a):
        uu, s, _ = np.linalg.svd(a, full_matrices=False)
        r = int((s > tol * max(1.0, s[0])).sum())
        return uu[:, :r]

    wr, wc = range_basis(stack_r), range_basis(stack_c)
    basis = np.einsum("ai,tab,bj->tij", wr.conj(), space.basis, wc)
    return OperatorSpace(basis, space.u, space.label), wr, wc


def unitary_realization(space: OperatorSpace):
    """Find a completely isometric copy of ``V`` in which ``u`` is the identity.

    Tries ``V`` itself, then its compression to the joint support. Returns
    ``(space', info)`` where ``space'`` has the same coefficients and
    ``u`` realized as ``I``; raises :class:`NoUnitalRealization` otherwise.
    The info dict holds ``left`` and ``right`` with ``x' = left @ x @ right``.
    """
    try:
        conj, um = conjugate_embedding(space)
        return conj, {"route": "conjugation", "left": um.conj().T, "right": np.eye(space.d)}
    except NoUnitalRealization:
        pass
    red, wr, wc = reduce_realization(space)
    if red.d != space.d and wr.shape[1] == wc.shape[1]:
        conj, um = conjugate_embedding(red)
        return conj, {"route": "support-compression", "left": um.conj().T @ wr.conj().T, "right": wc}
    raise NoUnitalRealization("no exact unital realization available: u is not unitary")


def has_unitary_u(space: OperatorSpace) -> bool:
    try:
        unitary_realization(space)
        return True
    except NoUnitalRealization:
        return False


def ruan_residuals(space: OperatorSpace, x: LevelElement, y: LevelElement, alpha, beta):
    """Numerical slack in the two Ruan conditions for one sample.

    Returns ``(direct_sum_error, module_excess)`` where the first is
    ``| ||x ⊕ y|| - max(||x||, ||y||) |`` and the second is
    ``||αxβ|| - ||α|| ||x|| ||β||`` (should be <= 0).
    """
    k, l = x.k, y.k
    m = space.m
    c = np.zeros((k + l, k + l, m), dtype=complex)
    c[:k, :k] = x.coeffs
    c[k:, k:] = y.coeffs
    s = level_norm(space, LevelElement(c))
    err = abs(s - max(level_norm(space, x), level_norm(space, y)))
    axb = LevelElement(np.einsum("ap,pqt,qb->abt", alpha, x.coeffs, beta))
    excess = level_norm(space, axb) - matcore.spec_norm(alpha) * level_norm(space, x) * matcore.spec_norm(beta)
    return err, excess


# ---------------------------------------------------------------------------
# level-1 normed spaces


@dataclass(frozen=True, eq=False)
class NormedSpace:
    """A finite-dimensional normed space ``X = C^m`` with an explicit dual ball.

    variants
      ``polytope``         ``||x|| = max_j |f_j . x|`` for listed dual vertices ``f_j``
      ``sup_over_points``  same formula, rows are the values of the generators on Ω
      ``matrix_realized``  spectral norm in an :class:`OperatorSpace`
      ``l1_sum``           ``X ⊕¹ Y`` of two other normed spaces

    ``u`` is an optional distinguished coefficient vector.
    """

    variant: str
    data: object
    u: np.ndarray | None = None
    label: str = ""
    parts: tuple = field(default=())

    def __post_init__(self):
        if self.variant in ("polytope", "sup_over_points"):
            f = np.array(self.data, dtype=complex)
            if f.ndim != 2 or f.shape[0] == 0:
                raise ContractViolation(f"{self.variant} needs a non-empty 2-d array of functionals")
            object.__setattr__(self, "data", f)
            if np.linalg.matrix_rank(f) < f.shape[1]:
                raise ContractViolation("functionals do not separate points: not a norm")
        elif self.variant == "matrix_realized":
            if not isinstance(self.data, OperatorSpace):
                raise ContractViolation("matrix_realized needs an OperatorSpace")
        elif self.variant == "l1_sum":
            if len(self.parts) != 2:
                raise ContractViolation("l1_sum needs two parts")
        else:
            raise ContractViolation(f"unknown normed space variant {self.variant!r}")
        if self.u is not None:
            u = np.array(self.u, dtype=complex).reshape(-1)
            object.__setattr__(self, "u", u)
            if u.shape != (self.m,):
                raise ContractViolation("u has the wrong number of coefficients")
            nrm = self.norm(u)
            if abs(nrm - 1.0) > UNIT_TOL:
                raise ContractViolation(f"distinguished element must have norm 1, got {nrm:.12g}")

    @property
    def m(self) -> int:
        if self.variant in ("polytope", "sup_over_points"):
            return self.data.shape[1]
        if self.variant == "matrix_realized":
            return self.data.m
        return self.parts[0].m + self.parts[1].m

    def split(self, x):
        """Components of ``x`` in an ``l1_sum``."""
        m0 = self.parts[0].m
        x = np.asarray(x, dtype=complex)
        return x[:m0], x[m0:]

    def norm(self, x) -> float:
        x = np.asarray(x, dtype=complex)
        if self.variant in ("polytope", "sup_over_points"):
            return float(np.abs(self.data @ x).max())
        if self.variant == "matrix_realized":
            return matcore.spec_norm(self.data.realize(x))
        a, b = self.split(x)
        return self.parts[0].norm(a) + self.parts[1].norm(b)

    def with_u(self, u) -> "NormedSpace":
        return NormedSpace(self.variant, self.data, u, self.label, self.parts)


def polytope(functionals, u=None, label="") -> NormedSpace:
    return NormedSpace("polytope", functionals, u, label)


def sup_over_points(values, u=None, label="") -> NormedSpace:
    """``X ⊆ C(Ω)``: ``values[ω, t]`` is generator ``t`` evaluated at point ``ω``."""
    return NormedSpace("sup_over_points", values, u, label)


def matrix_realized(space: OperatorSpace, u=None, label="") -> NormedSpace:
    if u is None:
        u = space.u
    return NormedSpace("matrix_realized", space, u, label or space.label)


def ell_inf(m: int, u=None, label="") -> NormedSpace:
    """``ℓ∞^m`` as functions on ``m`` points."""
    return sup_over_points(np.eye(m), u, label or f"l_inf^{m}")


def direct_sum_1(x: NormedSpace, y: NormedSpace, u=None, label="") -> NormedSpace:
    """``X ⊕¹ Y``; its dual ball is the ``⊕^∞`` product of the two dual balls."""
    return NormedSpace("l1_sum", None, u, label or f"({x.label} ⊕1 {y.label})", (x, y))


def as_points(x: NormedSpace) -> np.ndarray:
    """Dual vertices of a polytope-type space (rows)."""
    if x.variant not in ("polytope", "sup_over_points"):
        raise ContractViolation(f"{x.variant} space has no finite list of dual vertices")
    return x.data


def normed_direct_sum_inf(x: NormedSpace, y: NormedSpace, u=None, label="") -> NormedSpace:
    """``X ⊕^∞ Y`` at level 1.

    Two polytope-type spaces give a polytope (union of dual vertices); any
    other pair is realized block diagonally through :func:`min_quantization`.
    """
    label = label or f"({x.label} ⊕∞ {y.label})"
    if x.variant != "l1_sum" and y.variant != "l1_sum":
        if x.variant != "matrix_realized" and y.variant != "matrix_realized":
            fx, fy = as_points(x), as_points(y)
            f = np.zeros((fx.shape[0] + fy.shape[0], x.m + y.m), dtype=complex)
            f[: fx.shape[0], : x.m] = fx
            f[fx.shape[0]:, x.m:] = fy
            return NormedSpace("polytope", f, u, label)
        vx = x.data if x.variant == "matrix_realized" else min_quantization(x)
        vy = y.data if y.variant == "matrix_realized" else min_quantization(y)
        vs = direct_sum_inf(OperatorSpace(vx.basis), OperatorSpace(vy.basis), label=label)
        return matrix_realized(vs, u, label)
    raise ContractViolation("⊕∞ with an ℓ¹-sum part is not supported")


def min_quantization(x: NormedSpace) -> OperatorSpace:
    """``min X``: diagonal embedding of ``X ⊆ C(Ω)`` into ``M_|Ω|``.

    Generator ``t`` becomes ``diag(values[:, t])``; the level-``k`` norm is then
    ``max_ω ||x(ω)||`` automatically.
    """
    if x.variant == "matrix_realized":
        raise ContractViolation("min_quantization needs a polytope or sup_over_points space")
    vals = as_points(x)
    if vals.shape[0] == 0:
        raise ContractViolation("empty Ω")
    basis = np.array([np.diag(vals[:, t]) for t in range(vals.shape[1])])
    return OperatorSpace(basis, x.u, label=f"min {x.label}")


# ---------------------------------------------------------------------------
# stock spaces


def matrix_unit(d: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((d, d), dtype=complex)
    e[i, j] = 1.0
    return e


def full_matrix_space(d: int, u=None, label: str = "") -> OperatorSpace:
    """``M_d`` with the matrix-unit basis; ``u`` given as a matrix (default ``I``)."""
    basis = np.array([matrix_unit(d, i, j) for i in range(d) for j in range(d)])
    if u is None:
        u = np.eye(d)
    coeffs = np.asarray(u, dtype=complex).reshape(-1)
    return OperatorSpace(basis, coeffs, label or f"M_{d}")


def span_space(mats, u_matrix=None, label: str = "") -> OperatorSpace:
    sp = OperatorSpace(np.array(mats, dtype=complex), None, label)
    if u_matrix is None:
        return sp
    return sp.with_u(sp.coefficients(u_matrix))


def diagonal_space(d: int, label: str = "") -> OperatorSpace:
    basis = np.array([matrix_unit(d, i, i) for i in range(d)])
    return OperatorSpace(basis, np.ones(d), label or f"D_{d}")
