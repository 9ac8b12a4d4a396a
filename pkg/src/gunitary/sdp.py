"""Small dense Hermitian semidefinite programs.

Problems are stated in primal standard form over Hermitian PSD blocks::

    maximize / minimize   sum_b Tr(C_b X_b)
    subject to            sum_b Tr(A_ib X_b)  (=, <=, >=)  b_i
                          X_b >= 0

and are solved with the primal-dual interior point method of CVXOPT
(Nesterov-Todd scaling) on the real symmetric embedding
``X -> [[Re X, -Im X], [Im X, Re X]]``. Our problem is passed to CVXOPT as
its *dual* problem, so the Newton systems scale with the number of
constraints rather than with the number of matrix entries.

1x1 blocks and inequality slacks go to the non-negative orthant.
"""

from __future__ import annotations

import contextlib
import contextvars
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import scipy.linalg
from cvxopt import matrix as cvx_matrix
from cvxopt import solvers as cvx_solvers

from .errors import ContractViolation

GAP_TOL = 1e-8
FEAS_TOL = 1e-7
PSD_SLACK = 1e-8

_SOLVER_OPTIONS = {
    "show_progress": False,
    "abstol": 1e-10,
    "reltol": 1e-10,
    "feastol": 1e-10,
    "maxiters": 100,
}
_TOL_LADDER = (1e-10, 1e-9, 1e-8)


@dataclass(frozen=True)
class Constraint:
    """``sum_b Tr(coeffs[b] X_b)  kind  rhs`` with Hermitian coefficients."""

    coeffs: Mapping[str, np.ndarray]
    rhs: float
    kind: str = "eq"


@dataclass
class SdpProblem:
    blocks: list
    constraints: list
    objective: dict = field(default_factory=dict)
    sense: str = "max"
    constant: float = 0.0

    def __post_init__(self):
        if self.sense not in ("max", "min"):
            raise ContractViolation(f"unknown sense {self.sense!r}")
        names = [b for b, _ in self.blocks]
        if len(set(names)) != len(names):
            raise ContractViolation("duplicate block names")
        dims = dict(self.blocks)
        for con in self.constraints:
            if con.kind not in ("eq", "le", "ge"):
                raise ContractViolation(f"unknown constraint kind {con.kind!r}")
            _check_terms(con.coeffs, dims)
        _check_terms(self.objective, dims)

    @property
    def dims(self) -> dict:
        return dict(self.blocks)


def _check_terms(terms, dims):
    for name, a in terms.items():
        if name not in dims:
            raise ContractViolation(f"constraint references undeclared block {name!r}")
        a = np.asarray(a)
        if a.shape != (dims[name], dims[name]):
            raise ContractViolation(
                f"coefficient for block {name!r} has shape {a.shape}, expected {(dims[name],) * 2}"
            )


@dataclass
class SdpSolution:
    status: str  # optimal | infeasible | max-iterations
    blocks: dict
    primal: float
    dual: float
    gap: float
    max_residual: float
    min_eig: float
    multipliers: np.ndarray | None = None
    certificate: dict | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def feasible_within(self, tol: float = FEAS_TOL) -> bool:
        """True when the returned blocks satisfy every constraint up to ``tol``."""
        return (
            self.status != "infeasible"
            and self.max_residual <= tol
            and self.min_eig >= -PSD_SLACK * 10
        )


# ---------------------------------------------------------------------------
# constraint helpers


def real_parts(terms: Mapping[str, np.ndarray]):
    """Split a complex functional ``sum Tr(M_b X_b)`` into Hermitian coefficient dicts.

    For Hermitian ``X`` the functional equals ``Re + 1j * Im`` where both
    parts are again of the form ``sum Tr(H_b X_b)`` with Hermitian ``H_b``.
    """
    re, im = {}, {}
    for name, m in terms.items():
        m = np.asarray(m, dtype=complex)
        re[name] = (m + m.conj().T) / 2
        im[name] = (m - m.conj().T) / 2j
    return re, im


def complex_equality(terms, rhs: complex) -> list:
    """Two real constraints forcing ``sum Tr(M_b X_b) == rhs``."""
    re, im = real_parts(terms)
    return [Constraint(re, float(np.real(rhs))), Constraint(im, float(np.imag(rhs)))]


def entry_selector(size: int, p: int, q: int) -> np.ndarray:
    """Matrix ``M`` with ``Tr(M X) = X[p, q]``."""
    m = np.zeros((size, size), dtype=complex)
    m[q, p] = 1.0
    return m


def hermitian_equality(block_terms, target: np.ndarray) -> list:
    """Constraints forcing a Hermitian-valued linear map to equal ``target``.

    ``block_terms`` maps ``(p, q)`` to the functional dict producing entry
    ``[p, q]`` of the map's value; only ``p <= q`` entries are used, so the
    caller guarantees the value is Hermitian by construction.
    """
    n = target.shape[0]
    out = []
    for p in range(n):
        for q in range(p, n):
            re, im = real_parts(block_terms(p, q))
            out.append(Constraint(re, float(target[p, q].real)))
            if p != q:
                out.append(Constraint(im, float(target[p, q].imag)))
    return out


# ---------------------------------------------------------------------------
# compilation to CVXOPT


def _embed(a: np.ndarray) -> np.ndarray:
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


class CompiledSdp:
    """A problem lowered to CVXOPT data; objectives may be swapped cheaply."""

    def __init__(self, problem: SdpProblem, presolve: bool = True):
        self.problem = problem
        self.scalar_blocks = [b for b, n in problem.blocks if n == 1]
        self.matrix_blocks = [(b, n) for b, n in problem.blocks if n > 1]
        cons = problem.constraints
        self.n_slack = sum(1 for c in cons if c.kind != "eq")
        self.n_l = self.n_slack + len(self.scalar_blocks)
        self.s_dims = [2 * n for _, n in self.matrix_blocks]
        self.z_len = self.n_l + sum(k * k for k in self.s_dims)

        offsets, pos = {}, self.n_l
        for (b, n), k in zip(self.matrix_blocks, self.s_dims):
            offsets[b] = (pos, n)
            pos += k * k
        self.offsets = offsets
        self.scalar_index = {b: self.n_slack + i for i, b in enumerate(self.scalar_blocks)}

        g = np.zeros((self.z_len, len(cons)))
        rhs = np.array([float(c.rhs) for c in cons])
        slack = 0
        for i, con in enumerate(cons):
            g[:, i] = self._functional_vector(con.coeffs)
            if con.kind != "eq":
                g[slack, i] = 1.0 if con.kind == "le" else -1.0
                slack += 1
        self.g_full = g
        self.rhs_full = rhs

        keep = np.arange(len(cons))
        self.inconsistent = None
        if presolve and len(cons):
            keep, self.inconsistent = _independent_rows(g, rhs)
        self.keep = keep
        self.G = cvx_matrix(np.ascontiguousarray(g[:, keep]))
        self.c = cvx_matrix(-rhs[keep])

    def _functional_vector(self, terms) -> np.ndarray:
        v = np.zeros(self.z_len)
        for name, a in terms.items():
            a = np.asarray(a, dtype=complex)
            if name in self.scalar_index:
                v[self.scalar_index[name]] += float(a.real[0, 0])
            else:
                pos, n = self.offsets[name]
                v[pos: pos + 4 * n * n] += (_embed(a) / 2).reshape(-1)
        return v

    def _unpack(self, z) -> dict:
        z = np.asarray(z).reshape(-1)
        out = {}
        for b, i in self.scalar_index.items():
            out[b] = np.array([[z[i]]], dtype=complex)
        for b, (pos, n) in self.offsets.items():
            # column-major storage; only the lower triangle is meaningful
            w = z[pos: pos + 4 * n * n].reshape(2 * n, 2 * n).T
            w = np.tril(w) + np.tril(w, -1).T
            out[b] = (w[:n, :n] + w[n:, n:]) / 2 + 1j * (w[n:, :n] - w[:n, n:]) / 2
        return out

    def residuals(self, blocks: dict) -> tuple[float, float]:
        """Largest constraint violation and smallest block eigenvalue."""
        worst = 0.0
        for con in self.problem.constraints:
            val = sum(np.real(np.trace(np.asarray(a) @ blocks[b])) for b, a in con.coeffs.items())
            if con.kind == "eq":
                viol = abs(val - con.rhs)
            elif con.kind == "le":
                viol = max(0.0, val - con.rhs)
            else:
                viol = max(0.0, con.rhs - val)
            worst = max(worst, viol)
        lam = min(
            (float(np.linalg.eigvalsh((x + x.conj().T) / 2)[0]) for x in blocks.values()),
            default=0.0,
        )
        return worst, lam

    def objective_value(self, objective, blocks) -> float:
        return float(sum(np.real(np.trace(np.asarray(a) @ blocks[b])) for b, a in objective.items()))

    def solve(self, objective=None, sense=None, gap_tol: float = GAP_TOL,
              feas_tol: float = FEAS_TOL) -> SdpSolution:
        objective = self.problem.objective if objective is None else objective
        sense = sense or self.problem.sense
        _check_terms(objective, self.problem.dims)
        if self.inconsistent is not None:
            return self._infeasible(self.inconsistent, 0)

        sign = 1.0 if sense == "max" else -1.0
        h = -sign * self._functional_vector(objective)
        dims = {"l": self.n_l, "q": [], "s": self.s_dims}
        if self.G.size[1] == 0:
            return self._trivial(objective, sense)
        res, key = None, None
        cache = _CACHE.get()
        if cache is not None:
            key = self._key(h, dims)
            res = cache.get(key)
        if res is not None:
            sol = self._finish(res, objective, sense, gap_tol, feas_tol)
            if sol.status == "optimal":
                return sol
            # stale or foreign entry: fall through to a fresh solve
            res = None
        res = self._conelp(h, dims)
        if cache is not None and res is not None and res["status"] == "optimal" and res["z"] is not None:
            cache.put(key, res)
        return self._finish(res, objective, sense, gap_tol, feas_tol)

    def _key(self, h, dims) -> str:
        dig = hashlib.sha256()
        for arr in (np.asarray(self.c), np.asarray(self.G), np.asarray(h)):
            dig.update(np.ascontiguousarray(arr, dtype=float).tobytes())
            dig.update(str(arr.shape).encode())
        dig.update(json.dumps(dims, sort_keys=True).encode())
        return dig.hexdigest()

    def _conelp(self, h, dims):
        res = None
        for tol in _TOL_LADDER:
            opts = dict(_SOLVER_OPTIONS, abstol=tol, reltol=tol, feastol=tol)
            try:
                res = cvx_solvers.conelp(self.c, self.G, cvx_matrix(h), dims, options=opts)
            except (ArithmeticError, ValueError):
                # breakdown of the scaling update near the boundary; retry looser
                res = None
                continue
            if res["status"] in ("optimal", "dual infeasible", "primal infeasible"):
                break
        if res is None:
            return None
        return {
            "status": res["status"],
            "x": np.asarray(res["x"]).reshape(-1) if res["x"] is not None else None,
            "z": np.asarray(res["z"]).reshape(-1) if res["z"] is not None else None,
            "primal objective": res["primal objective"],
            "iterations": int(res.get("iterations") or 0),
        }

    def _finish(self, res, objective, sense, gap_tol, feas_tol) -> SdpSolution:
        const = self.problem.constant
        sign = 1.0 if sense == "max" else -1.0
        if res is None:
            blocks = {b: np.zeros((n, n), dtype=complex) for b, n in self.problem.blocks}
            return SdpSolution("max-iterations", blocks, np.nan, np.nan, np.inf, np.inf, -np.inf)
        iters = res["iterations"]
        if res["status"] == "dual infeasible":
            return self._infeasible(np.asarray(res["x"]).reshape(-1), iters)
        if res["status"] == "primal infeasible" or res["z"] is None:
            blocks = {b: np.zeros((n, n), dtype=complex) for b, n in self.problem.blocks}
            return SdpSolution("max-iterations", blocks, np.nan, np.nan, np.inf, np.inf,
                               -np.inf, iterations=iters)

        blocks = self._unpack(res["z"])
        resid, lam = self.residuals(blocks)
        primal = self.objective_value(objective, blocks) + const
        # CVXOPT's primal objective is our dual bound (negated for minimization)
        dual = sign * float(res["primal objective"] or 0.0) + const
        gap = sign * (dual - primal)
        y = -np.asarray(res["x"]).reshape(-1)
        scale = max(1.0, abs(primal))
        ok = gap <= gap_tol * scale and resid <= feas_tol and lam >= -PSD_SLACK
        status = "optimal" if ok else "max-iterations"
        return SdpSolution(status, blocks, primal, dual, gap, resid, lam, multipliers=y,
                           iterations=iters)

    def _trivial(self, objective, sense):
        blocks = {b: np.zeros((n, n), dtype=complex) for b, n in self.problem.blocks}
        if any(np.abs(np.asarray(a)).max() > 0 for a in objective.values()):
            raise ContractViolation("unconstrained problem with non-zero objective is unbounded")
        return SdpSolution("optimal", blocks, self.problem.constant, self.problem.constant,
                           0.0, 0.0, 0.0)

    def _infeasible(self, x, iters):
        """Package a Farkas certificate ``y`` (sum y_i A_i <= 0, b.y = 1)."""
        y_full = np.zeros(len(self.problem.constraints))
        y_full[self.keep if len(x) == len(self.keep) else np.arange(len(x))] = x
        comb = self.g_full @ y_full
        cert_blocks = self._unpack(2 * comb)
        worst = max(
            (float(np.linalg.eigvalsh((m + m.conj().T) / 2)[-1]) for m in cert_blocks.values()),
            default=0.0,
        )
        for i in range(self.n_l):
            worst = max(worst, float(comb[i]))
        cert = {
            "y": y_full,
            "b_dot_y": float(self.rhs_full @ y_full),
            "max_eig_combination": worst,
        }
        blocks = {b: np.zeros((n, n), dtype=complex) for b, n in self.problem.blocks}
        return SdpSolution("infeasible", blocks, np.nan, np.nan, np.inf, np.inf, -np.inf,
                           multipliers=y_full, certificate=cert, iterations=iters)


def _independent_rows(g: np.ndarray, rhs: np.ndarray, tol: float = 1e-10):
    """Indices of a maximal independent set of constraints.

    Returns ``(keep, certificate)``; ``certificate`` is a Farkas vector when a
    dropped constraint contradicts the kept ones, else ``None``.
    """
    _, r, piv = scipy.linalg.qr(g, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0:
        keep = np.array([], dtype=int)
    else:
        keep = np.sort(piv[: int((diag > tol * diag[0]).sum())])
    drop = np.setdiff1d(np.arange(g.shape[1]), keep)
    if drop.size == 0:
        return keep, None
    coef, *_ = np.linalg.lstsq(g[:, keep], g[:, drop], rcond=None)
    mismatch = rhs[drop] - rhs[keep] @ coef
    bad = np.flatnonzero(np.abs(mismatch) > 1e-9 * (1 + np.abs(rhs).max()))
    if bad.size:
        j = bad[0]
        y = np.zeros(g.shape[1])
        y[drop[j]] = 1.0
        y[keep] = -coef[:, j]
        # the combination vanishes, so the certificate only needs b.y > 0
        y /= rhs @ y
        return keep, y
    return keep, None


# ---------------------------------------------------------------------------
# solution cache

CACHE_ENV = "GUNITARY_CACHE_DIR"


class SolutionCache:
    """Raw solver outputs on disk, keyed by a hash of the compiled problem.

    Entries are re-verified (residuals, eigenvalues, gap) every time they
    are used, so a corrupted or foreign file only costs a fresh solve.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.npz"

    def get(self, key: str):
        path = self._path(key)
        if not path.exists():
            self.misses += 1
            return None
        try:
            with np.load(path) as data:
                res = {
                    "status": str(data["status"]),
                    "x": data["x"],
                    "z": data["z"],
                    "primal objective": float(data["pobj"]),
                    "iterations": int(data["iterations"]),
                }
        except (OSError, KeyError, ValueError):
            self.misses += 1
            return None
        self.hits += 1
        return res

    def put(self, key: str, res) -> None:
        tmp = self.directory / f"{key}.{os.getpid()}.tmp.npz"
        np.savez(tmp, status=res["status"], x=res["x"], z=res["z"],
                 pobj=float(res["primal objective"]), iterations=res["iterations"])
        os.replace(tmp, self._path(key))


_CACHE: contextvars.ContextVar = contextvars.ContextVar("sdp_cache", default=None)


@contextlib.contextmanager
def solution_cache(directory=None):
    """Use an on-disk solution cache for every solve inside the block.

    ``directory`` defaults to ``$GUNITARY_CACHE_DIR``; with neither set the
    block runs uncached.
    """
    directory = directory or os.environ.get(CACHE_ENV)
    cache = SolutionCache(directory) if directory else None
    token = _CACHE.set(cache)
    try:
        yield cache
    finally:
        _CACHE.reset(token)


# ---------------------------------------------------------------------------
# public entry points


def solve(problem: SdpProblem, gap_tol: float = GAP_TOL) -> SdpSolution:
    """Solve ``problem``; see :class:`SdpSolution` for the status contract."""
    return CompiledSdp(problem).solve(gap_tol=gap_tol)


def feasibility(problem: SdpProblem) -> SdpSolution:
    """Find a point satisfying the constraints, or an infeasibility certificate."""
    zero = SdpProblem(problem.blocks, problem.constraints, {}, "max")
    return CompiledSdp(zero).solve()


def to_real_problem(problem: SdpProblem) -> SdpProblem:
    """The same problem restated over real symmetric blocks of twice the size."""
    def emb(terms):
        return {b: _embed(np.asarray(a, dtype=complex)).astype(complex) / 2 for b, a in terms.items()}
    blocks = [(b, 2 * n) for b, n in problem.blocks]
    cons = [Constraint(emb(c.coeffs), c.rhs, c.kind) for c in problem.constraints]
    return SdpProblem(blocks, cons, emb(problem.objective), problem.sense, problem.constant)


def _cplx(a):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def problem_to_dict(problem: SdpProblem) -> dict:
    """JSON-ready dump: blocks, then functionals as ``{block: [[re, im], ...]}``."""
    return {
        "schema": "opspace-sdp/1",
        "sense": problem.sense,
        "constant": problem.constant,
        "blocks": [{"name": b, "dim": n} for b, n in problem.blocks],
        "objective": {b: _cplx(a) for b, a in problem.objective.items()},
        "constraints": [
            {"kind": c.kind, "rhs": c.rhs, "coeffs": {b: _cplx(a) for b, a in c.coeffs.items()}}
            for c in problem.constraints
        ],
    }


def dump_problem(problem: SdpProblem, path) -> None:
    with open(path, "w") as fh:
        json.dump(problem_to_dict(problem), fh)
