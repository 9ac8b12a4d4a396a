"""Dense complex matrix kernel.

Everything here is a thin, tolerance-explicit layer over LAPACK (through numpy).
All functions are pure.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolation

HERMITIAN_RTOL = 1e-12
PSD_TOL = 1e-8


def as_cmat(a) -> np.ndarray:
    """Return ``a`` as a 2-d complex array (copying only when needed)."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise ContractViolation(f"expected a matrix, got array of shape {a.shape}")
    return a


def is_hermitian(a, rtol: float = HERMITIAN_RTOL) -> bool:
    a = as_cmat(a)
    if a.shape[0] != a.shape[1]:
        return False
    if a.size == 0:
        return True
    scale = 1.0 + spec_norm(a)
    return float(np.abs(a - a.conj().T).max()) <= rtol * scale


def hermitian_part(a) -> np.ndarray:
    a = as_cmat(a)
    return (a + a.conj().T) / 2


def skew_part(a) -> np.ndarray:
    """Hermitian ``B`` with ``a = hermitian_part(a) + 1j * B``."""
    a = as_cmat(a)
    return (a - a.conj().T) / 2j


def _require_hermitian(a, what="matrix", rtol=HERMITIAN_RTOL):
    a = as_cmat(a)
    if a.shape[0] != a.shape[1]:
        raise ContractViolation(f"{what} must be square, got shape {a.shape}")
    if not is_hermitian(a, rtol):
        raise ContractViolation(f"{what} is not Hermitian")
    return a


def herm_eig(a, rtol: float = 1e-10):
    """Eigen-decomposition of a Hermitian matrix.

    Returns ``(w, v)`` with eigenvalues in *descending* order and the
    eigenvectors as the columns of the unitary ``v``.
    """
    a = _require_hermitian(a, rtol=rtol)
    w, v = np.linalg.eigh(hermitian_part(a))
    return w[::-1].copy(), v[:, ::-1].copy()


def eigvalsh_desc(a) -> np.ndarray:
    return np.linalg.eigvalsh(hermitian_part(a))[::-1]


def spec_norm(a) -> float:
    """Largest singular value."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def top_singular_pair(a):
    """Return ``(sigma, xi, eta)`` with ``a @ eta = sigma * xi`` and unit vectors."""
    a = as_cmat(a)
    u, s, vh = np.linalg.svd(a)
    return float(s[0]), u[:, 0].copy(), vh[0].conj().copy()


def kron(*mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, as_cmat(m))
    return out


def partial_trace(a, dims: tuple[int, int], side: int) -> np.ndarray:
    """Partial trace of ``a`` acting on ``C^dims[0] (x) C^dims[1]``.

    ``side=0`` traces out the first factor, ``side=1`` the second.
    """
    a = as_cmat(a)
    d0, d1 = dims
    if a.shape != (d0 * d1, d0 * d1):
        raise ContractViolation(f"partial_trace: shape {a.shape} incompatible with dims {dims}")
    t = a.reshape(d0, d1, d0, d1)
    if side == 0:
        return np.einsum("iaib->ab", t)
    if side == 1:
        return np.einsum("aibi->ab", t)
    raise ContractViolation("side must be 0 or 1")


def psd_check(a, tol: float = PSD_TOL):
    """Return ``(is_psd, lambda_min)`` for a Hermitian matrix."""
    a = _require_hermitian(a, rtol=1e-9)
    if a.size == 0:
        return True, 0.0
    lam = float(np.linalg.eigvalsh(hermitian_part(a))[0])
    return lam >= -tol, lam


def positivity_margin(a) -> float:
    """Signed distance-like measure of ``a`` being positive semidefinite.

    ``min(lambda_min(Re a), -||Im a||)`` where ``Re a`` and ``Im a`` are the
    Hermitian and skew-Hermitian parts. Non-negative exactly when ``a`` is PSD.
    """
    a = as_cmat(a)
    lam = float(np.linalg.eigvalsh(hermitian_part(a))[0])
    return min(lam, -spec_norm(skew_part(a)))


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """``rows x cols`` matrix with orthonormal columns (``cols <= rows``)."""
    if cols > rows:
        raise ContractViolation("an isometry needs cols <= rows")
    return random_unitary(rows, rng)[:, :cols]


def random_cmat(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    return hermitian_part(random_cmat(n, n, rng))


def unit_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def orth_complement(cols: np.ndarray, dim: int, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (as columns) of the complement of span(cols) in C^dim."""
    if cols.size == 0:
        return np.eye(dim, dtype=complex)
    u, s, _ = np.linalg.svd(cols, full_matrices=True)
    rank = int((s > tol * max(1.0, s[0])).sum())
    return u[:, rank:]


def null_space(a: np.ndarray, tol: float = 1e-10):
    """Right null space basis and the singular values of ``a``."""
    a = np.atleast_2d(a)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    scale = max(1.0, s[0]) if s.size else 1.0
    rank = int((s > tol * scale).sum())
    return vh[rank:].conj().T, s
