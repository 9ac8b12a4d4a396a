"""JSON input and output, schema ``opspace/1``.

Complex numbers are ``[re, im]`` pairs (plain numbers are read as real);
matrices are row-major nested lists. Every parse error carries the JSON path
of the offending value.
"""
from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from . import cbmap, opspace, ossys
from .errors import ContractViolation, GunitaryError
from .opspace import LevelElement, NormedSpace, OperatorSpace

SCHEMA = "opspace/1"


class SchemaError(GunitaryError):
    """Input JSON does not match the expected shape."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# numbers and arrays


def _number(obj, path) -> complex:
    if isinstance(obj, bool):
        raise SchemaError(path, "expected a number or [re, im], got a boolean")
    if isinstance(obj, (int, float)):
        return complex(obj)
    if isinstance(obj, list) and len(obj) == 2 and all(
        isinstance(t, (int, float)) and not isinstance(t, bool) for t in obj
    ):
        return complex(obj[0], obj[1])
    raise SchemaError(path, f"expected a number or [re, im], got {json.dumps(obj)[:40]}")


def _is_entry(obj) -> bool:
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return True
    return isinstance(obj, list) and len(obj) == 2 and all(
        isinstance(t, (int, float)) and not isinstance(t, bool) for t in obj
    )


def parse_vector(obj, path: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise SchemaError(path, "expected a non-empty list of numbers")
    return np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(obj)], dtype=complex)


def parse_matrix(obj, path: str, square: bool = True) -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise SchemaError(path, "expected a non-empty list of rows")
    rows = []
    for i, row in enumerate(obj):
        if not isinstance(row, list) or not row or not all(_is_entry(e) for e in row):
            if isinstance(row, list):
                for j, e in enumerate(row):
                    _number(e, f"{path}[{i}][{j}]")
            raise SchemaError(f"{path}[{i}]", "expected a non-empty row of numbers")
        rows.append([_number(e, f"{path}[{i}][{j}]") for j, e in enumerate(row)])
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise SchemaError(f"{path}[{i}]", f"row has {len(r)} entries, expected {width}")
    a = np.array(rows, dtype=complex)
    if square and a.shape[0] != a.shape[1]:
        raise SchemaError(path, f"expected a square matrix, got {a.shape[0]}x{a.shape[1]}")
    return a


def parse_matrix_list(obj, path: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise SchemaError(path, "expected a non-empty list of matrices")
    mats = [parse_matrix(m, f"{path}[{i}]") for i, m in enumerate(obj)]
    for i, m in enumerate(mats):
        if m.shape != mats[0].shape:
            raise SchemaError(f"{path}[{i}]", f"shape {m.shape} differs from {mats[0].shape}")
    return np.array(mats)


def encode_array(a):
    a = np.asarray(a)
    if a.ndim == 0:
        return encode_value(a.item())
    return [encode_array(b) for b in a]


def _float(x: float):
    if math.isfinite(x):
        return float(x)
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def encode_value(obj):
    """Turn results (dataclasses, arrays, numpy scalars) into JSON-ready data."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return [_float(obj.real), _float(obj.imag)]
    if isinstance(obj, np.ndarray):
        if obj.dtype.kind in "fc":
            return encode_array(obj)
        return [encode_value(v) for v in obj.tolist()]
    if isinstance(obj, OperatorSpace):
        return dump_space(obj)
    if isinstance(obj, LevelElement):
        return {"kind": "level_element", "coeffs": encode_array(obj.coeffs)}
    if isinstance(obj, NormedSpace):
        return {"kind": "normed_space", "variant": obj.variant, "label": obj.label}
    if isinstance(obj, cbmap.ChoiMatrix):
        return {"kind": "map", "d": obj.d, "n": obj.n, "choi": encode_array(obj.C)}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: encode_value(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): encode_value(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode_value(v) for v in obj]
    return repr(obj)


def dumps(obj) -> str:
    """Deterministic JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(encode_value(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# domain objects


def _require(obj, key, path):
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    if key not in obj:
        raise SchemaError(path, f"missing key {key!r}")
    return obj[key]


def _int(obj, path, low=1):
    if isinstance(obj, bool) or not isinstance(obj, int) or obj < low:
        raise SchemaError(path, f"expected an integer >= {low}")
    return obj


def _wrap(fn, path):
    try:
        return fn()
    except ContractViolation as exc:
        raise SchemaError(path, str(exc)) from None


def parse_space(obj, path: str = "$.space") -> OperatorSpace:
    """Operator space from an explicit basis or a stock name.

    Explicit: ``{"basis": [...], "u": [coeffs]}`` or ``"u_matrix": matrix``.
    Stock: ``{"stock": "full_matrix" | "diagonal" | "min_linf" | "direct_sum_inf", ...}``.
    """
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    label = obj.get("label", "")
    if not isinstance(label, str):
        raise SchemaError(f"{path}.label", "expected a string")
    if "stock" in obj:
        space = _stock_space(obj, path, label)
    else:
        basis = parse_matrix_list(_require(obj, "basis", path), f"{path}.basis")
        space = _wrap(lambda: OperatorSpace(basis, None, label), f"{path}.basis")
    if "u" in obj and obj["u"] is not None:
        u = parse_vector(obj["u"], f"{path}.u")
        space = _wrap(lambda: space.with_u(u), f"{path}.u")
    elif "u_matrix" in obj:
        um = parse_matrix(obj["u_matrix"], f"{path}.u_matrix")
        coeffs = _wrap(lambda: space.coefficients(um), f"{path}.u_matrix")
        space = _wrap(lambda: space.with_u(coeffs), f"{path}.u_matrix")
    return space


def _stock_space(obj, path, label):
    name = obj["stock"]
    if name == "full_matrix":
        d = _int(_require(obj, "d", path), f"{path}.d")
        sp = opspace.full_matrix_space(d, label=label or f"M_{d}")
        return sp if obj.get("unit", True) else sp.with_u(None)
    if name == "diagonal":
        d = _int(_require(obj, "d", path), f"{path}.d")
        sp = opspace.diagonal_space(d, label=label or f"D_{d}")
        return sp if obj.get("unit", True) else sp.with_u(None)
    if name == "min_linf":
        m = _int(_require(obj, "m", path), f"{path}.m")
        return opspace.min_quantization(opspace.ell_inf(m, np.ones(m)))
    if name == "direct_sum_inf":
        parts = _require(obj, "parts", path)
        if not isinstance(parts, list) or len(parts) != 2:
            raise SchemaError(f"{path}.parts", "expected a list of two spaces")
        a = parse_space(parts[0], f"{path}.parts[0]")
        b = parse_space(parts[1], f"{path}.parts[1]")
        return _wrap(lambda: opspace.direct_sum_inf(a, b, label=label), path)
    raise SchemaError(f"{path}.stock", f"unknown stock space {name!r}")


def dump_space(space: OperatorSpace) -> dict:
    return {
        "schema": SCHEMA,
        "kind": "operator_space",
        "label": space.label,
        "basis": encode_array(space.basis),
        "u": None if space.u is None else encode_array(space.u),
    }


def parse_normed(obj, path: str = "$.normed") -> NormedSpace:
    """Normed space: ``polytope``, ``sup_over_points``, ``ell_inf``, ``matrix_realized``, ``l1_sum``."""
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    variant = _require(obj, "variant", path)
    u = parse_vector(obj["u"], f"{path}.u") if obj.get("u") is not None else None
    if variant == "ell_inf":
        m = _int(_require(obj, "m", path), f"{path}.m")
        return _wrap(lambda: opspace.ell_inf(m, u if u is not None else np.ones(m)), path)
    if variant == "polytope":
        f = parse_matrix(_require(obj, "functionals", path), f"{path}.functionals", square=False)
        return _wrap(lambda: opspace.polytope(f, u), path)
    if variant == "sup_over_points":
        v = parse_matrix(_require(obj, "values", path), f"{path}.values", square=False)
        return _wrap(lambda: opspace.sup_over_points(v, u), path)
    if variant == "matrix_realized":
        sp = parse_space(_require(obj, "space", path), f"{path}.space")
        return _wrap(lambda: opspace.matrix_realized(sp, u if u is not None else sp.u), path)
    if variant == "l1_sum":
        parts = _require(obj, "parts", path)
        if not isinstance(parts, list) or len(parts) != 2:
            raise SchemaError(f"{path}.parts", "expected a list of two normed spaces")
        a = parse_normed(parts[0], f"{path}.parts[0]")
        b = parse_normed(parts[1], f"{path}.parts[1]")
        return _wrap(lambda: opspace.direct_sum_1(a, b, u), path)
    raise SchemaError(f"{path}.variant", f"unknown variant {variant!r}")


def parse_element(obj, space: OperatorSpace, path: str = "$.element") -> LevelElement:
    """``{"coeffs": (k, k, m) nested}``, ``{"vector": coeffs}`` or ``{"matrix": kd x kd}``."""
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    if "vector" in obj:
        v = parse_vector(obj["vector"], f"{path}.vector")
        if v.size != space.m:
            raise SchemaError(f"{path}.vector", f"expected {space.m} coefficients, got {v.size}")
        return LevelElement(v)
    if "matrix" in obj:
        a = parse_matrix(obj["matrix"], f"{path}.matrix")
        return _wrap(lambda: LevelElement.from_matrix(space, a), f"{path}.matrix")
    raw = _require(obj, "coeffs", path)
    if not isinstance(raw, list) or not raw:
        raise SchemaError(f"{path}.coeffs", "expected a k x k list of coefficient vectors")
    k = len(raw)
    c = np.zeros((k, k, space.m), dtype=complex)
    for p, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != k:
            raise SchemaError(f"{path}.coeffs[{p}]", f"expected {k} entries")
        for q, vec in enumerate(row):
            v = parse_vector(vec, f"{path}.coeffs[{p}][{q}]")
            if v.size != space.m:
                raise SchemaError(f"{path}.coeffs[{p}][{q}]", f"expected {space.m} coefficients")
            c[p, q] = v
    return LevelElement(c)


def parse_map(obj, path: str = "$.map") -> cbmap.ChoiMatrix:
    """``{"stock": "identity" | "transpose", "d": d}`` or ``{"d", "n", "choi"}``."""
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    if "stock" in obj:
        d = _int(_require(obj, "d", path), f"{path}.d")
        if obj["stock"] == "identity":
            return cbmap.identity_map(d)
        if obj["stock"] == "transpose":
            return cbmap.transpose_map(d)
        raise SchemaError(f"{path}.stock", f"unknown stock map {obj['stock']!r}")
    d = _int(_require(obj, "d", path), f"{path}.d")
    n = _int(_require(obj, "n", path), f"{path}.n")
    c = parse_matrix(_require(obj, "choi", path), f"{path}.choi")
    return _wrap(lambda: cbmap.ChoiMatrix(d, n, c), f"{path}.choi")


def parse_cones(obj, space: OperatorSpace, path: str = "$.cones") -> ossys.ConeSpec:
    """``{"stock": "psd" | "diagonal"}`` or ``{"generators": [{"element", "feeds"}]}``."""
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    if "stock" in obj:
        if obj["stock"] == "psd":
            return _wrap(lambda: ossys.psd_cones(space), path)
        if obj["stock"] == "diagonal":
            return _wrap(lambda: ossys.diagonal_cones(space), path)
        raise SchemaError(f"{path}.stock", f"unknown stock cones {obj['stock']!r}")
    gens = _require(obj, "generators", path)
    if not isinstance(gens, list):
        raise SchemaError(f"{path}.generators", "expected a list")
    out = []
    for i, g in enumerate(gens):
        gp = f"{path}.generators[{i}]"
        el = parse_element(_require(g, "element", gp), space, f"{gp}.element")
        feeds = _require(g, "feeds", gp)
        if not isinstance(feeds, list) or not feeds:
            raise SchemaError(f"{gp}.feeds", "expected a non-empty list of levels")
        out.append(ossys.ConeGenerator(el, tuple(_int(f, f"{gp}.feeds[{j}]") for j, f in enumerate(feeds))))
    return _wrap(lambda: ossys.ConeSpec(out).validate(space), path)


def parse_projection(obj, space: OperatorSpace, path: str = "$.projection") -> np.ndarray:
    """``{"P": m x m}`` or ``{"onto": [indices]}`` (coordinate projection)."""
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    if "onto" in obj:
        idx = obj["onto"]
        if not isinstance(idx, list) or not all(isinstance(i, int) and 0 <= i < space.m for i in idx):
            raise SchemaError(f"{path}.onto", f"expected basis indices in [0, {space.m})")
        p = np.zeros((space.m, space.m), dtype=complex)
        p[idx, idx] = 1.0
        return p
    p = parse_matrix(_require(obj, "P", path), f"{path}.P")
    if p.shape != (space.m, space.m):
        raise SchemaError(f"{path}.P", f"expected {space.m}x{space.m}, got {p.shape}")
    return p


def load_document(paths) -> dict:
    """Merge one or more JSON files (later keys win) and check the schema tag."""
    doc: dict = {}
    for p in paths:
        p = Path(p)
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise SchemaError(str(p), "file not found") from None
        except json.JSONDecodeError as exc:
            raise SchemaError(str(p), f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
        if not isinstance(data, dict):
            raise SchemaError(f"{p}:$", "top level must be an object")
        tag = data.get("schema", SCHEMA)
        if tag != SCHEMA:
            raise SchemaError(f"{p}:$.schema", f"unsupported schema {tag!r}, expected {SCHEMA!r}")
        doc.update(data)
    return doc
