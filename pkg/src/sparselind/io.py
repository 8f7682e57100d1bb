"""Model file parsing and deterministic JSON/CSV serialization."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .applications import WalkSpec
from .classes import (
    DenseDiagonalSpec,
    DiagonalSpec,
    IdenticalCoordinateSpec,
    OneKetSparseSpec,
    Strongly1SparseSpec,
)
from .decompose import permutation_cover
from .errors import ValidationError
from .lindblad import LindbladModel, OvercompleteGKS, lindblad_ops_from_gks

CLASSES = ("identical_coordinate", "diagonal", "strongly_1sparse", "dense_diagonal", "one_ket_sparse",
           "sparse_operator", "lindblad", "local")


def parse_json_text(text: str, source: str = "<input>"):
    """``json.loads`` with the offending line quoted on failure."""
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        line = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        pointer = " " * max(exc.colno - 1, 0) + "^"
        raise ValidationError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}\n  {line}\n  {pointer}") from None


def load_json(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {p}: {exc.strerror}") from None
    return parse_json_text(text, str(p))


def complex_matrix(obj, name: str) -> np.ndarray:
    """Nested lists whose entries are numbers or ``[re, im]`` pairs."""
    def entry(v):
        if isinstance(v, (int, float)):
            return complex(v)
        if isinstance(v, list) and len(v) == 2 and all(isinstance(u, (int, float)) for u in v):
            return complex(v[0], v[1])
        raise ValidationError(f"{name}: entry {v!r} is not a number or [re, im] pair")

    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ValidationError(f"{name} must be a non-empty list of rows")
    rows = [[entry(v) for v in r] for r in obj]
    if len({len(r) for r in rows}) != 1:
        raise ValidationError(f"{name} has ragged rows")
    return np.array(rows, dtype=complex)


def _require(d: dict, key: str, cls: str):
    if key not in d:
        raise ValidationError(f"model of class {cls!r} is missing field {key!r}")
    return d[key]


def parse_model(d: dict):
    """Build the spec object named by ``d["class"]``."""
    if not isinstance(d, dict):
        raise ValidationError("model file must contain a JSON object")
    if "class" not in d:
        return parse_walk(d) if "vertices" in d else parse_generic(d)
    cls = d["class"]
    if cls not in CLASSES:
        raise ValidationError(f"unknown model class {cls!r}; expected one of {CLASSES}")
    if cls == "identical_coordinate":
        a = _require(d, "a", cls)
        return IdenticalCoordinateSpec(d.get("dim", len(a)), a, _require(d, "c", cls))
    if cls == "diagonal":
        a = np.asarray(_require(d, "a", cls), dtype=float)
        return DiagonalSpec(d.get("dim", a.shape[0]), a, d.get("d"))
    if cls == "dense_diagonal":
        a = _require(d, "a", cls)
        return DenseDiagonalSpec(d.get("dim", len(a)), a, d.get("prefix"))
    if cls == "one_ket_sparse":
        nu = _require(d, "nu", cls)
        return OneKetSparseSpec(d.get("dim", len(nu)), nu, _require(d, "a", cls), _require(d, "aprime", cls),
                                _require(d, "b", cls))
    if cls == "sparse_operator":
        L = complex_matrix(_require(d, "L", cls), "L")
        return permutation_cover(L, d.get("k"))
    if cls == "strongly_1sparse":
        nu = _require(d, "nu", cls)
        return Strongly1SparseSpec(d.get("dim", len(nu)), nu, _require(d, "off", cls), _require(d, "diag", cls))
    if cls == "local":
        c, n = int(_require(d, "c", cls)), int(_require(d, "n", cls))
        return LocalModel(parse_generic({**d, "dim": d.get("dim", 2 ** c)}), c, n)
    return parse_generic(d)


def parse_generic(d: dict):
    """``{dim, hamiltonian?, lindblad_ops | gks_entries}``."""
    has_ops, has_gks = "lindblad_ops" in d, "gks_entries" in d
    if has_ops == has_gks:
        raise ValidationError("exactly one of 'lindblad_ops' and 'gks_entries' must be present")
    H = complex_matrix(d["hamiltonian"], "hamiltonian") if d.get("hamiltonian") is not None else None
    dim = d.get("dim")
    if dim is None:
        if H is not None:
            dim = H.shape[0]
        elif has_ops and d["lindblad_ops"]:
            dim = len(d["lindblad_ops"][0])
        else:
            raise ValidationError("model needs 'dim'")
    if not isinstance(dim, int) or dim < 1:
        raise ValidationError(f"dim must be a positive integer, got {dim!r}")
    if has_ops:
        if not isinstance(d["lindblad_ops"], list):
            raise ValidationError("lindblad_ops must be a list of matrices")
        ops = [complex_matrix(L, f"lindblad_ops[{i}]") for i, L in enumerate(d["lindblad_ops"])]
        return LindbladModel(dim, H, ops)
    g = OvercompleteGKS(dim, hamiltonian=H)
    if not isinstance(d["gks_entries"], list):
        raise ValidationError("gks_entries must be a list of objects")
    for i, e in enumerate(d["gks_entries"]):
        if not isinstance(e, dict) or not {"k", "l", "kp", "lp"} <= set(e):
            raise ValidationError(f"gks_entries[{i}] needs integer fields k, l, kp, lp")
        g.set(int(e["k"]), int(e["l"]), int(e["kp"]), int(e["lp"]), complex(e.get("re", 0.0), e.get("im", 0.0)))
    return g


class LocalModel:
    """A ``c``-qubit model acting on the leading qubits of ``n``."""

    def __init__(self, model, c: int, n: int):
        if not 1 <= c <= n:
            raise ValidationError("need 1 <= c <= n")
        if isinstance(model, OvercompleteGKS):
            model = lindblad_ops_from_gks(model)
        if model.dim != 2 ** c:
            raise ValidationError(f"local model dimension {model.dim} != 2^c = {2 ** c}")
        self.model, self.c, self.n = model, c, n


def parse_walk(d: dict) -> WalkSpec:
    H = d.get("hamiltonian", "laplacian")
    custom = None
    if isinstance(H, list):
        custom, H = complex_matrix(H, "hamiltonian"), "custom"
    return WalkSpec(int(_require(d, "vertices", "walk")), d.get("edges", []), H, custom,
                    d.get("rates"), d.get("mix"))


# ---------------------------------------------------------------- output


def format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(x, ".17g")


def dumps(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON with floats at 17 significant digits and one key per line."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return dumps([float(obj.real), float(obj.imag)], indent, _level)
    return json.dumps(str(obj))


def complex_to_pairs(M: np.ndarray) -> list:
    M = np.asarray(M, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in M]
