"""The acceptance checks, shared by the ``suite`` command and the test-suite.

Each check returns a :class:`CriterionResult` whose ``details`` hold only
deterministic values; wall-clock times are kept in a separate dict so two
runs with the same configuration serialize identically.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import banach, cbmap, gamma, matcore, mideal, opspace, ossys, serialize
from .opspace import LevelElement, level_norm


@dataclass
class SuiteConfig:
    seed: int = 0
    n_max: int | None = None    # None: d*k where the check asks for it
    k_max: int = 2
    restarts: int | None = None  # None: each check's own default


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] criterion {self.number:2d} {self.name}: {self.summary}"


def _m2():
    return opspace.full_matrix_space(2)


def _span_i_e12():
    return opspace.span_space([np.eye(2), opspace.matrix_unit(2, 0, 1)], np.eye(2), label="span{I,E12}")


def _min_linf(m):
    return opspace.min_quantization(opspace.ell_inf(m, np.ones(m), label=f"l_inf^{m}"))


# ---------------------------------------------------------------------------
# criteria


def cb_calibration(cfg: SuiteConfig, timing: dict) -> CriterionResult:
    t0 = time.perf_counter()
    ids = {d: cbmap.cb_norm(cbmap.identity_map(d)).value for d in range(1, 5)}
    tr = cbmap.cb_norm(cbmap.transpose_map(2)).value
    bf = cbmap.brute_force_cb(cbmap.transpose_map(2), level=2, seed=cfg.seed)
    elapsed = time.perf_counter() - t0
    timing["cb_calibration"] = elapsed
    id_err = max(abs(v - 1) for v in ids.values())
    ok = id_err <= 1e-6 and abs(tr - 2) <= 1e-3 and abs(bf - 2) <= 1e-3 and abs(tr - bf) <= 1e-3
    runtime_ok = elapsed < 30
    return CriterionResult(
        1, "cb-norm calibration", bool(ok and runtime_ok),
        f"max |cb(id_d) - 1| = {id_err:.2e}, cb(T) = {tr:.6f}, brute force = {bf:.6f}",
        {"identity": ids, "transpose": tr, "brute_force_level2": bf, "runtime_ok": runtime_ok},
    )


def unital_exactness(cfg: SuiteConfig, timing: dict) -> CriterionResult:
    t0 = time.perf_counter()
    spaces = [_m2(), _span_i_e12(), _min_linf(3)]
    rng = np.random.default_rng([cfg.seed, 2])
    rows = []
    worst = 0.0
    gamma_u = []
    for sp in spaces:
        u_el = LevelElement(sp.u)
        gamma_u.append(gamma.gamma(sp, u_el, cfg.n_max, seed=cfg.seed).value)
        for k in range(1, min(cfg.k_max, 2) + 1):
            for i in range(20):
                x = opspace.random_element(sp, k, rng)
                kw = {} if cfg.restarts is None else {"restarts": cfg.restarts}
                est = gamma.gamma(sp, x, cfg.n_max, seed=cfg.seed + i, **kw)
                gap = est.level_norm - est.value
                worst = max(worst, gap)
                rows.append({"space": sp.label, "k": k, "gamma": est.value, "norm": est.level_norm,
                             "kind": est.kind, "n": est.n})
    timing["unital_exactness"] = time.perf_counter() - t0
    u_err = max(abs(g - 1) for g in gamma_u)
    ok = worst <= 1e-4 and u_err <= 1e-9 and time.perf_counter() - t0 < 300
    label = "n_max = d*k" if cfg.n_max is None else f"n_max = {cfg.n_max} (truncated: lower bounds only)"
    return CriterionResult(
        2, "unital exactness", bool(ok),
        f"largest norm - gamma gap {worst:.2e} over {len(rows)} elements ({label})",
        {"max_gap": worst, "gamma_u": gamma_u, "samples": rows, "n_max": cfg.n_max},
    )


def level_sweep(cfg: SuiteConfig, timing: dict) -> CriterionResult:
    t0 = time.perf_counter()
    sp = _span_i_e12()
    x = LevelElement(sp.coefficients(opspace.matrix_unit(2, 0, 1)))
    est = gamma.gamma(sp, x, 2, seed=cfg.seed)
    g1, g2 = est.history[0], est.history[1]
    timing["level_sweep"] = time.perf_counter() - t0
    ok = abs(g1 - 0.5) <= 1e-3 and abs(g2 - 1.0) <= 1e-3
    return CriterionResult(3, "level-sweep monotonicity", bool(ok), f"gamma at n=1: {g1:.6f}, at n=2: {g2:.6f}",
                           {"n1": g1, "n2": g2})


def classical_constants(cfg: SuiteConfig, timing: dict) -> CriterionResult:
    t0 = time.perf_counter()
    m2 = opspace.matrix_realized(_m2())
    restarts = max(50, cfg.restarts or 50)
    n_m2 = banach.n_classic(m2, m2.u, restarts=restarts, seed=cfg.seed)
    linf = opspace.ell_inf(3, np.ones(3))
    n_linf = banach.n_classic(linf, linf.u, restarts=restarts, seed=cfg.seed)
    elapsed = time.perf_counter() - t0
    timing["classical_constants"] = elapsed
    ok = abs(n_m2.value - 0.5) <= 1e-3 and abs(n_linf.value - 1) <= 1e-6 and elapsed < 120
    return CriterionResult(4, "classical constants", bool(ok),
                           f"n(M_2; I) = {n_m2.value:.6f}, n(l_inf^3; 1) = {n_linf.value:.8f}",
                           {"n_M2": n_m2.value, "n_linf3": n_linf.value, "witness_M2": n_m2.witness,
                            "restarts": restarts})


def n_sum(cfg: SuiteConfig, timing: dict) -> CriterionResult:
    t0 = time.perf_counter()
    y = opspace.ell_inf(2, np.ones(2))
    out = {}
    ok = True
    for name, x in (("l_inf^2", opspace.ell_inf(2, np.ones(2))), ("M_2", opspace.matrix_realized(_m2()))):
        r = banach.check_n_sum(x, x.u, y, seed=cfg.seed)
        out[name] = {k: r[k] for k in ("identity_max_error", "n_sum", "n_x", "n_difference")}
        ok &= r["n_difference"] <= 2e-3 and r["identity_max_error"] <= 1e-6
    f = opspace.direct_sum_1(opspace.ell_inf(1, np.ones(1)), y)
    uf = np.array([1, 0, 0], dtype=complex)
    n_f = banach.n_classic(f, uf, seed=cfg.seed).value
    ok &= abs(n_f - 1) <= 1e-6
    out["n_C_plus_l_inf2"] = n_f
    timing["n_sum"] = time.perf_counter() - t0
    worst_id = max(out[k]["identity_max_error"] for k in ("l_inf^2", "M_2"))
    worst_n = max(out[k]["n_difference"] for k in ("l_inf^2", "M_2"))
    return CriterionResult(5, "l1-sum constant", bool(ok),
                           f"identity error {worst_id:.2e}, |n(sum) - n(X)| <= {worst_n:.2e}, n(C+l_inf^2) = {n_f:.8f}",
                           out)


def min_attainment(cfg: SuiteConfig, timing: dict) -> CriterionResult:
    t0 = time.perf_counter()
    x = opspace.ell_inf(4, np.ones(4))
    r = banach.min_comparison(x, x.u, k=3, samples=20, seed=cfg.seed)
    timing["min_attainment"] = time.perf_counter() - t0
    err = r["max_attainment_error"]
    return CriterionResult(6, "min-quantization attainment", bool(err <= 1e-8),
                           f"largest attainment error {err:.2e} over 20 elements of M_3(min l_inf^4)",
                           {"max_attainment_error": err})


def _cone_samples(rng, d, k, count):
    """Mixed Hermitian (spectrum straddling zero) and non-Hermitian samples."""
    out = []
    size = d * k
    for i in range(count):
        if i % 4 == 3:
            out.append(matcore.random_cmat(size, size, rng))
            continue
        h = matcore.random_hermitian(size, rng)
        lam = np.linalg.eigvalsh(h)[0]
        shift = rng.uniform(-0.5, 0.5)
        out.append(h + (shift - lam) * np.eye(size))
    return out


def cone_exactness(cfg: SuiteConfig, timing: dict) -> CriterionResult:
    t0 = time.perf_counter()
    sp = _m2()
    rng = np.random.default_rng([cfg.seed, 7])
    mismatches = 0
    false_violation = 0
    missed = 0
    checked = 0
    worst_member_margin = 0.0
    for k, count in ((1, 100), (2, 50)):
        for a in _cone_samples(rng, 2, k, count):
            x = LevelElement.from_matrix(sp, a, k)
            exact = ossys.cone_membership_exact(sp, x)
            herm = np.abs(a - a.conj().T).max() <= 1e-12
            truth = bool(herm and np.linalg.eigvalsh(matcore.hermitian_part(a))[0] >= -1e-8)
            mismatches += exact.member != truth
            sampled = ossys.cone_membership_sampled(sp, x, n_max=k * 2, seed=cfg.seed)
            if truth:
                worst_member_margin = min(worst_member_margin, sampled.margin)
                false_violation += sampled.margin < -1e-6
            else:
                depth = min(np.linalg.eigvalsh(matcore.hermitian_part(a))[0],
                            -matcore.spec_norm(matcore.skew_part(a)))
                if depth <= -0.01:
                    checked += 1
                    missed += sampled.margin > -1e-4
    timing["cone_exactness"] = time.perf_counter() - t0
    ok = mismatches == 0 and false_violation == 0 and missed == 0
    return CriterionResult(7, "cone exactness", bool(ok),
                           f"{mismatches} exact mismatches, {false_violation} false violations, "
                           f"{missed}/{checked} non-members missed",
                           {"mismatches": mismatches, "false_violations": false_violation,
                            "missed": missed, "non_members_checked": checked,
                            "worst_member_margin": worst_member_margin})


def operator_systems(cfg: SuiteConfig, timing: dict) -> CriterionResult:
    t0 = time.perf_counter()
    m2 = ossys.check_operator_system(_m2(), seed=cfg.seed)
    d3 = ossys.check_operator_system(opspace.diagonal_space(3), seed=cfg.seed)
    sp = ossys.check_operator_system(_span_i_e12(), seed=cfg.seed)
    timing["operator_systems"] = time.perf_counter() - t0
    ok = m2.passed and d3.passed and not sp.span_ok
    return CriterionResult(8, "operator-system characterization", bool(ok),
                           f"M_2 {'pass' if m2.passed else 'fail'}, D_3 {'pass' if d3.passed else 'fail'}, "
                           f"span{{I,E12}} span check {'passes' if sp.span_ok else 'fails'}",
                           {"M2": {"passed": m2.passed, "ncb": m2.ncb.value, "span_ok": m2.span_ok},
                            "D3": {"passed": d3.passed, "ncb": d3.ncb.value, "span_ok": d3.span_ok},
                            "span_I_E12": {"passed": sp.passed, "span_ok": sp.span_ok,
                                           "hermitian_dim": sp.hermitian_dim}})


def m_ideal_quotient(cfg: SuiteConfig, timing: dict) -> CriterionResult:
    t0 = time.perf_counter()
    m2 = _m2()
    v_space = opspace.direct_sum_inf(m2, m2, label="M_2 (+)inf M_2")
    P = np.diag([0.0] * 4 + [1.0] * 4).astype(complex)
    mp = mideal.verify_complete_m_projection(v_space, P, k_max=3, seed=cfg.seed)
    qu = mideal.check_quotient_unitality(v_space, mp, samples=100, seed=cfg.seed)
    qo = mideal.check_quotient_ossys(v_space, mp, seed=cfg.seed)
    timing["m_ideal_quotient"] = time.perf_counter() - t0
    ok = (mp.verified and mp.max_residual <= 1e-8 and abs(qu.norm_Qv - 1) <= 1e-8
          and qu.isometry_error <= 1e-6 and qu.passed and qo.passed)
    return CriterionResult(9, "M-ideal quotient", bool(ok),
                           f"projection residual {mp.max_residual:.1e}, ||Q(v)|| = {qu.norm_Qv:.10f}, "
                           f"isometry error {qu.isometry_error:.1e}, quotient system {'passes' if qo.passed else 'fails'}",
                           {"projection_residual": mp.max_residual, "norm_Qv": qu.norm_Qv,
                            "isometry_error": qu.isometry_error, "unitality_passed": qu.passed,
                            "quotient_ossys_passed": qo.passed, "ncb_V": qu.ncb_V.value, "ncb_Z": qu.ncb_Z.value})


def nonunital_systems(cfg: SuiteConfig, timing: dict) -> CriterionResult:
    t0 = time.perf_counter()
    m2 = opspace.full_matrix_space(2).with_u(None)
    psd = ossys.check_nonunital_ossys(m2, ossys.psd_cones(m2), n_max=2, seed=cfg.seed)
    diag = ossys.check_nonunital_ossys(m2, ossys.diagonal_cones(m2), n_max=2, seed=cfg.seed)
    timing["nonunital_systems"] = time.perf_counter() - t0
    ok = psd.passed and psd.ncb_plus.value >= 0.999 and not diag.passed and diag.counterexamples
    ce = diag.counterexamples[0] if diag.counterexamples else None
    return CriterionResult(10, "non-unital operator systems", bool(ok),
                           f"PSD cones {'pass' if psd.passed else 'fail'} (ncb+ = {psd.ncb_plus.value:.6f}), "
                           f"diagonal cones {'fail' if not diag.passed else 'pass'} with "
                           f"{len(diag.counterexamples)} counterexample(s)",
                           {"psd": {"passed": psd.passed, "ncb_plus": psd.ncb_plus.value,
                                    "generator_margins": psd.generator_margins},
                            "diagonal": {"passed": diag.passed, "ncb_plus": diag.ncb_plus.value,
                                         "counterexample": ce}})


CRITERIA = [cb_calibration, unital_exactness, level_sweep, classical_constants, n_sum, min_attainment,
            cone_exactness, operator_systems, m_ideal_quotient, nonunital_systems]


def run_checks(cfg: SuiteConfig, only=None):
    """Criteria 1-10 under a γ audit. Returns ``(results, audit_log, timing)``."""
    timing: dict = {}
    results = []
    with gamma.audit() as log:
        for fn in CRITERIA:
            if only is not None and CRITERIA.index(fn) + 1 not in only:
                continue
            results.append(fn(cfg, timing))
    return results, log, timing


def _audit_bounds(log) -> dict:
    over = max((e["value"] - e["level_norm"] for e in log), default=-np.inf)
    u_err = max((abs(e["value"] - 1) for e in log if e["is_u"]), default=0.0)
    return {"estimates": len(log), "max_excess_over_norm": over, "max_gamma_u_error": u_err,
            "unit_estimates": sum(1 for e in log if e["is_u"])}


def determinism(cfg: SuiteConfig, first, first_log, timing: dict, only=None) -> CriterionResult:
    """Re-run the checks and compare the serialized bodies byte for byte."""
    t0 = time.perf_counter()
    second, second_log, _ = run_checks(cfg, only)
    timing["determinism_rerun"] = time.perf_counter() - t0
    same = serialize.dumps(first) == serialize.dumps(second)
    bounds = _audit_bounds(list(first_log) + list(second_log))
    ok = same and bounds["max_excess_over_norm"] <= 1e-6 and bounds["max_gamma_u_error"] <= 1e-9
    return CriterionResult(11, "determinism and sandwich", bool(ok),
                           f"reruns {'identical' if same else 'DIFFER'}, max gamma - norm = "
                           f"{bounds['max_excess_over_norm']:.1e}, max |gamma(u) - 1| = {bounds['max_gamma_u_error']:.1e}",
                           {"identical": same, **bounds})


def run_suite(cfg: SuiteConfig | None = None, only=None):
    """All eleven criteria. Returns ``(results, timing)``."""
    cfg = cfg or SuiteConfig()
    results, log, timing = run_checks(cfg, only)
    results.append(determinism(cfg, results, log, timing, only))
    return results, timing
