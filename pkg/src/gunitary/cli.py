"""Command-line front end: ``gunitary <command> input.json [...]``.

Inputs are one or more JSON documents (schema ``opspace/1``) merged key by
key. The report is written as JSON (``--out``, default standard output) and
a short human summary goes to standard error when the report is on
standard output, to standard output otherwise.

Exit codes: 0 ok, 1 criterion failure, 2 input error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__, banach, cbmap, gamma, mideal, opspace, ossys, sdp, serialize, suite
from .errors import ContractViolation, GunitaryError, NoUnitalRealization, SolverFailure
from .serialize import SchemaError

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3

COMMANDS = ("norm", "cbnorm", "gamma", "ncb", "nclassic", "cone-test", "check-unital", "check-ossys",
            "check-nonunital-ossys", "mproj-verify", "quotient", "suite")

TOL_KEYS = ("kernel", "msum")


def _tol_pair(text: str):
    key, sep, val = text.partition("=")
    if not sep or key not in TOL_KEYS:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE with KEY in {', '.join(TOL_KEYS)}")
    try:
        return key, float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{val!r} is not a number") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gunitary", description="Geometric unitaries in concrete operator spaces.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("inputs", nargs="*", help="JSON input documents, merged in order")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nmax", type=int, default=None, help="largest witness size n")
    p.add_argument("--kmax", type=int, default=None, help="largest matrix level k")
    p.add_argument("--tol", type=_tol_pair, action="append", default=[], metavar="KEY=VALUE",
                   help=f"tolerance override, KEY in {{{','.join(TOL_KEYS)}}}")
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--cache-dir", default=None, help=f"SDP cache directory (default ${sdp.CACHE_ENV})")
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("--out", default=None, help="report path (default: standard output)")
    p.add_argument("--timing", action="store_true", help="include wall-clock times in the report")
    return p


def _opt(value, default):
    return default if value is None else value


def _space(doc):
    return serialize.parse_space(serialize._require(doc, "space", "$"))


def _element(doc, space):
    if "element" not in doc:
        raise SchemaError("$", "missing key 'element'")
    return serialize.parse_element(doc["element"], space)


def _normed(doc):
    if "normed" in doc:
        return serialize.parse_normed(doc["normed"])
    sp = _space(doc)
    if sp.u is None:
        raise SchemaError("$.space", "a distinguished element u is required")
    return opspace.matrix_realized(sp, sp.u, sp.label)


# ---------------------------------------------------------------------------
# commands: each returns (results dict, passed flag or None, summary line)


def cmd_norm(doc, args):
    if "normed" in doc:
        x = serialize.parse_normed(doc["normed"])
        v = serialize.parse_vector(serialize._require(doc, "vector", "$"), "$.vector")
        val = x.norm(v)
        return {"norm": val}, None, f"norm = {val:.12g}"
    sp = _space(doc)
    x = _element(doc, sp)
    val = opspace.level_norm(sp, x)
    return {"norm": val, "level": x.k}, None, f"level-{x.k} norm = {val:.12g}"


def cmd_cbnorm(doc, args):
    choi = serialize.parse_map(serialize._require(doc, "map", "$"))
    res = cbmap.cb_norm(choi)
    if not res.verified:
        raise SolverFailure(f"cb-norm SDP not verified (status {res.solution.status})")
    out = {"cb_norm": res.value, "d": choi.d, "n": choi.n, "gap": res.solution.gap,
           "max_residual": res.solution.max_residual}
    if args.kmax:
        out["brute_force"] = cbmap.brute_force_cb(choi, level=args.kmax, seed=args.seed,
                                                  restarts=_opt(args.restarts, 20))
    return out, None, f"cb norm = {res.value:.10g}"


def cmd_gamma(doc, args):
    if "normed" in doc:
        x = serialize.parse_normed(doc["normed"])
        v = serialize.parse_vector(serialize._require(doc, "vector", "$"), "$.vector")
        val, f = banach.gamma_classic(x, x.u, v)
        return {"gamma": val, "functional": f}, None, f"level-1 gamma = {val:.10g}"
    sp = _space(doc)
    x = _element(doc, sp)
    est = gamma.gamma(sp, x, args.nmax, _opt(args.restarts, 20), args.seed)
    out = {"gamma": est.value, "kind": est.kind, "level_norm": est.level_norm, "history": est.history,
           "n": est.n, "n_max": est.n_max, "witness_choi": est.witness.choi if est.witness else None,
           "xi": est.xi, "eta": est.eta}
    return out, None, f"gamma = {est.value:.10g} ({est.kind}), norm = {est.level_norm:.10g}, n_max = {est.n_max}"


def cmd_ncb(doc, args):
    sp = _space(doc)
    kw = {"k_max": _opt(args.kmax, 2), "n_max": args.nmax, "seed": args.seed}
    if args.restarts is not None:
        kw["restarts"] = args.restarts
    est = gamma.ncb_estimate(sp, **kw)
    out = {"ncb": est.value, "kind": est.kind, "shortcut": est.shortcut, "witness": est.witness,
           "trace": est.trace}
    return out, None, f"n_cb = {est.value:.10g} ({est.kind}, shortcut={est.shortcut})"


def cmd_nclassic(doc, args):
    x = _normed(doc)
    res = banach.n_classic(x, x.u, _opt(args.restarts, 50), args.seed)
    out = {"n": res.value, "witness": res.witness, "functional": res.functional, "restarts": res.restarts}
    return out, None, f"n(X; u) = {res.value:.10g} (heuristic minimum over {res.restarts} starts)"


def cmd_cone_test(doc, args):
    sp = _space(doc)
    x = _element(doc, sp)
    if "cones" in doc:
        cones = serialize.parse_cones(doc["cones"], sp)
        inside, _ = ossys.in_declared_cone(sp, cones, x)
        v = ossys.k_n_outer(sp, cones, x, _opt(args.nmax, 2), _opt(args.restarts, 3), args.seed)
        out = {"in_declared_cone": inside, "K_n": v}
        return out, None, f"declared cone: {inside}, K_n margin {v.margin:.3g} ({v.note})"
    try:
        v = ossys.cone_membership_exact(sp, x)
    except (NoUnitalRealization, ContractViolation):
        v = ossys.cone_membership_sampled(sp, x, args.nmax, _opt(args.restarts, 3), args.seed)
    kind = "exact" if v.exact else "sampled"
    return {"verdict": v}, None, f"member = {v.member} ({kind}), margin = {v.margin:.3g}"


def _projection(doc, sp, args):
    P = serialize.parse_projection(serialize._require(doc, "projection", "$"), sp)
    tol = dict(args.tol).get("msum", mideal.MSUM_TOL)
    return mideal.verify_complete_m_projection(sp, P, _opt(args.kmax, 3), seed=args.seed, tol=tol)


def cmd_check_unital(doc, args):
    sp = _space(doc)
    mp = _projection(doc, sp, args)
    if not mp.verified:
        return {"projection": mp}, False, f"projection is not a complete M-projection (residual {mp.max_residual:.3g})"
    v = serialize.parse_vector(doc["v"], "$.v") if "v" in doc else None
    ncb_opts = {"k_max": min(_opt(args.kmax, 2), 2), "n_max": args.nmax}
    r = mideal.check_quotient_unitality(sp, mp, v, seed=args.seed, ncb_opts=ncb_opts)
    return {"projection": mp, "report": r}, r.passed, (
        f"||Q(v)|| = {r.norm_Qv:.10g}, ||u|| = {r.norm_u:.6g}, ||w|| = {r.norm_w:.6g}, "
        f"isometry error {r.isometry_error:.2g}, alarm = {r.alarm}")


def cmd_check_ossys(doc, args):
    sp = _space(doc)
    kw = {"k_max": _opt(args.kmax, 2), "n_max": args.nmax}
    r = ossys.check_operator_system(sp, seed=args.seed, **kw)
    return {"report": r}, r.passed, (f"n_cb = {r.ncb.value:.6g} ({r.ncb.kind}), span_ok = {r.span_ok}"
                                     + (" (approximate)" if r.approximate else ""))


def cmd_check_nonunital(doc, args):
    sp = _space(doc)
    cones = serialize.parse_cones(serialize._require(doc, "cones", "$"), sp)
    r = ossys.check_nonunital_ossys(sp, cones, _opt(args.nmax, 2), _opt(args.kmax, 2),
                                    restarts=_opt(args.restarts, 3), seed=args.seed)
    return {"report": r}, r.passed, (f"ncb+ = {r.ncb_plus.value:.6g}, generators ok = {r.generators_ok}, "
                                     f"{len(r.counterexamples)} counterexample(s) ({r.note})")


def cmd_mproj_verify(doc, args):
    sp = _space(doc)
    mp = _projection(doc, sp, args)
    return {"projection": mp}, mp.verified, (f"verified = {mp.verified} at k <= {mp.verified_levels}, "
                                             f"max residual {mp.max_residual:.3g} over {mp.samples} samples")


def cmd_quotient(doc, args):
    sp = _space(doc)
    if "projection" in doc:
        mp = _projection(doc, sp, args)
        if not mp.verified:
            return {"projection": mp}, False, "projection is not a complete M-projection"
        q = mideal.quotient_by_msummand(sp, mp)
        out = {"quotient_space": q.Z, "Q": q.Q, "lift": q.lift, "projection": mp}
        return out, None, f"quotient by complete M-summand: dim {q.Z.m}, realized in M_{q.Z.d}"
    tol = dict(args.tol).get("kernel", gamma.KERNEL_TOL)
    qd = gamma.quotient_Vu(sp, _opt(args.kmax, 2), tol, args.nmax, seed=args.seed,
                           restarts=_opt(args.restarts, 4))
    out = {"kernel": qd.kernel, "basis": qd.basis, "kernel_values": qd.kernel_values,
           "ambiguous": qd.ambiguous, "kernel_tol": qd.kernel_tol}
    return out, None, f"kernel of gamma_1 has dimension {qd.kernel.shape[1]}; quotient dimension {qd.basis.shape[1]}"


def cmd_suite(doc, args):
    cfg = suite.SuiteConfig(seed=args.seed, n_max=args.nmax, k_max=_opt(args.kmax, 2), restarts=args.restarts)
    results, timing = suite.run_suite(cfg)
    lines = "\n".join(r.line() for r in results)
    passed = all(r.passed for r in results)
    return {"criteria": results}, passed, lines, timing


HANDLERS = {
    "norm": cmd_norm, "cbnorm": cmd_cbnorm, "gamma": cmd_gamma, "ncb": cmd_ncb, "nclassic": cmd_nclassic,
    "cone-test": cmd_cone_test, "check-unital": cmd_check_unital, "check-ossys": cmd_check_ossys,
    "check-nonunital-ossys": cmd_check_nonunital, "mproj-verify": cmd_mproj_verify,
    "quotient": cmd_quotient, "suite": cmd_suite,
}


def _config_echo(args) -> dict:
    return {
        "command": args.command,
        "inputs": list(args.inputs),
        "seed": args.seed,
        "n_max": args.nmax,
        "k_max": args.kmax,
        "tol": dict(args.tol),
        "restarts": args.restarts,
        "cache": None if args.no_cache else (args.cache_dir or os.environ.get(sdp.CACHE_ENV)),
    }


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    report = {"schema": serialize.SCHEMA, "version": __version__, "command": args.command,
              "config": _config_echo(args)}
    t0 = time.perf_counter()
    cache_dir = None if args.no_cache else args.cache_dir
    code = EXIT_OK
    summary = ""
    timing = {}
    try:
        doc = serialize.load_document(args.inputs) if args.inputs else {}
        if args.command != "suite" and not args.inputs:
            raise SchemaError("$", f"command {args.command!r} needs an input document")
        with np.errstate(all="ignore"):
            ctx = sdp.solution_cache(cache_dir) if not args.no_cache else _null_cache()
            with ctx:
                out = HANDLERS[args.command](doc, args)
        if len(out) == 4:
            results, passed, summary, timing = out
        else:
            results, passed, summary = out
        report["results"] = results
        report["passed"] = passed
        if passed is False:
            code = EXIT_FAIL
    except SchemaError as exc:
        report["error"] = {"kind": "input", "message": str(exc), "path": exc.path}
        summary = f"input error: {exc}"
        code = EXIT_INPUT
    except ContractViolation as exc:
        report["error"] = {"kind": "input", "message": str(exc)}
        summary = f"input error: {exc}"
        code = EXIT_INPUT
    except SolverFailure as exc:
        report["error"] = {"kind": "solver", "message": str(exc)}
        summary = f"solver failure: {exc}"
        code = EXIT_SOLVER
    except GunitaryError as exc:
        report["error"] = {"kind": type(exc).__name__, "message": str(exc)}
        summary = f"error: {exc}"
        code = EXIT_SOLVER
    if args.timing:
        report["timing"] = {"total_seconds": time.perf_counter() - t0, **timing}
    text = serialize.dumps(report)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"cannot write report: {exc}", file=sys.stderr)
            return EXIT_INPUT
        print(summary)
    else:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)
    return code


class _null_cache:
    def __enter__(self):
        self._token = sdp._CACHE.set(None)
        return None

    def __exit__(self, *exc):
        sdp._CACHE.reset(self._token)
        return False


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
