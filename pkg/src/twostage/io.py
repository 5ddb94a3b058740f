"""Instance files: JSON schemas, parsing with JSON-pointer diagnostics, and
serialisation back to canonical JSON."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, TextIO

import jsonschema

from .numerics import as_fraction, fraction_str
from .polytope import HPolytope
from .volume_dp import IntegerSystem

RATIONAL = {
    "oneOf": [
        {"type": "string", "pattern": r"^-?(0|[1-9][0-9]*)(/[1-9][0-9]*)?$"},
        {"type": "integer"},
    ]
}
INTEGER = {"type": "integer"}


def _vector(item, min_items=0):
    return {"type": "array", "items": item, "minItems": min_items}


def _matrix(item):
    return _vector(_vector(item))


SCHEMAS: dict[str, dict] = {
    "graph": {
        "type": "object",
        "required": ["n", "edges"],
        "additionalProperties": False,
        "properties": {
            "n": {"type": "integer", "minimum": 2},
            "edges": _vector({"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2}),
        },
    },
    "polytope": {
        "type": "object",
        "required": ["dim", "rows"],
        "additionalProperties": False,
        "properties": {
            "dim": {"type": "integer", "minimum": 1},
            "rows": _vector({
                "type": "object",
                "required": ["a", "rhs"],
                "additionalProperties": False,
                "properties": {"a": _vector(RATIONAL), "rhs": RATIONAL},
            }),
            "box": {
                "type": "object",
                "required": ["lower", "upper"],
                "additionalProperties": False,
                "properties": {"lower": _vector(RATIONAL), "upper": _vector(RATIONAL)},
            },
        },
    },
    "integer-system": {
        "type": "object",
        "required": ["A", "b"],
        "additionalProperties": False,
        "properties": {"A": _vector(_vector(INTEGER, 1), 1), "b": _vector(RATIONAL, 1)},
    },
    "sslp": {
        "type": "object",
        "required": ["n1", "m1", "n2", "m2", "d", "c", "A", "b", "W", "q0", "Qmat", "T0", "Tk", "h0", "Hmat", "l", "u"],
        "additionalProperties": False,
        "properties": {
            **{k: {"type": "integer", "minimum": 1} for k in ("n1", "m1", "n2", "m2", "d")},
            **{k: _vector(RATIONAL) for k in ("c", "b", "q0", "h0", "l", "u")},
            **{k: _matrix(RATIONAL) for k in ("A", "W", "Qmat", "T0", "Hmat")},
            "Tk": _vector(_matrix(RATIONAL)),
        },
    },
}

INSTANCE_SCHEMA = {
    "type": "object",
    "required": ["kind", "payload"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": sorted(SCHEMAS)},
        "payload": {"type": "object"},
        "metadata": {"type": "object"},
    },
}


class InputError(Exception):
    """Bad input; ``code`` is the CLI exit code (2 malformed, 3 invalid)."""

    def __init__(self, code: int, reason: str, pointer: str = ""):
        super().__init__(reason)
        self.code = code
        self.reason = reason
        self.pointer = pointer

    def to_json(self) -> dict:
        out = {"code": self.code, "reason": self.reason}
        if self.pointer or self.code == 3:
            out["pointer"] = self.pointer
        return out


@dataclass
class InstanceFile:
    kind: str
    payload: dict
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "payload": self.payload}
        if self.metadata:
            out["metadata"] = self.metadata
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _pointer(path) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def _invalid(path, reason) -> InputError:
    return InputError(3, reason, _pointer(path))


def _check_len(value, n, path, what):
    if len(value) != n:
        raise _invalid(path, f"{what} has length {len(value)}, expected {n}")


def _check_matrix(M, rows, cols, path, name):
    _check_len(M, rows, path, f"{name}")
    for i, r in enumerate(M):
        _check_len(r, cols, path + [i], f"{name} row {i}")


def _check_dimensions(kind: str, p: dict, base: list) -> None:
    if kind == "graph":
        for i, e in enumerate(p["edges"]):
            if max(e) > p["n"] or e[0] == e[1]:
                raise _invalid(base + ["edges", i], f"edge {e} is not a pair of distinct vertices in 1..{p['n']}")
        seen = set()
        for i, e in enumerate(p["edges"]):
            key = tuple(sorted(e))
            if key in seen:
                raise _invalid(base + ["edges", i], f"duplicate edge {e}")
            seen.add(key)
    elif kind == "polytope":
        d = p["dim"]
        for i, r in enumerate(p["rows"]):
            _check_len(r["a"], d, base + ["rows", i, "a"], "row")
        if "box" in p:
            lo, hi = p["box"]["lower"], p["box"]["upper"]
            _check_len(lo, d, base + ["box", "lower"], "box lower")
            _check_len(hi, d, base + ["box", "upper"], "box upper")
            for i, (a, b) in enumerate(zip(lo, hi)):
                if as_fraction(a) >= as_fraction(b):
                    raise _invalid(base + ["box", "upper", i], "box needs lower < upper")
    elif kind == "integer-system":
        d = len(p["A"][0])
        for i, r in enumerate(p["A"]):
            _check_len(r, d, base + ["A", i], f"A row {i}")
        _check_len(p["b"], len(p["A"]), base + ["b"], "b")
    elif kind == "sslp":
        n1, m1, n2, m2, d = (p[k] for k in ("n1", "m1", "n2", "m2", "d"))
        _check_len(p["c"], n1, base + ["c"], "c")
        _check_matrix(p["A"], m1, n1, base + ["A"], "A")
        _check_len(p["b"], m1, base + ["b"], "b")
        _check_matrix(p["W"], m2, n2, base + ["W"], "W")
        _check_len(p["q0"], n2, base + ["q0"], "q0")
        _check_matrix(p["Qmat"], n2, d, base + ["Qmat"], "Qmat")
        _check_matrix(p["T0"], m2, n1, base + ["T0"], "T0")
        _check_len(p["Tk"], d, base + ["Tk"], "Tk")
        for k, t in enumerate(p["Tk"]):
            _check_matrix(t, m2, n1, base + ["Tk", k], f"Tk[{k}]")
        _check_len(p["h0"], m2, base + ["h0"], "h0")
        _check_matrix(p["Hmat"], m2, d, base + ["Hmat"], "Hmat")
        _check_len(p["l"], d, base + ["l"], "l")
        _check_len(p["u"], d, base + ["u"], "u")
        for i, (a, b) in enumerate(zip(p["l"], p["u"])):
            if as_fraction(a) >= as_fraction(b):
                raise _invalid(base + ["u", i], "box needs l < u")


def validate(doc: Any) -> InstanceFile:
    try:
        jsonschema.validate(doc, INSTANCE_SCHEMA)
    except jsonschema.ValidationError as err:
        raise _invalid(err.absolute_path, err.message) from None
    kind = doc["kind"]
    try:
        jsonschema.validate(doc["payload"], SCHEMAS[kind])
    except jsonschema.ValidationError as err:
        raise _invalid(["payload", *err.absolute_path], err.message) from None
    _check_dimensions(kind, doc["payload"], ["payload"])
    return InstanceFile(kind, doc["payload"], doc.get("metadata", {}))


def parse_instance(source: str | TextIO) -> InstanceFile:
    """Parse and validate a path, ``"-"`` (stdin) or an open stream."""
    try:
        if source == "-":
            text = sys.stdin.read()
        elif isinstance(source, str):
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        else:
            text = source.read()
        doc = json.loads(text)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as err:
        raise InputError(2, f"cannot read JSON: {err}") from None
    return validate(doc)


# ---------------------------------------------------------------------------
# conversions


def _fr(v) -> Fraction:
    return as_fraction(v)


def to_graph(inst: InstanceFile):
    from .gadgets import Graph

    return Graph.from_edges(inst.payload["n"], inst.payload["edges"])


def to_polytope(inst: InstanceFile) -> HPolytope:
    p = inst.payload
    rows = tuple((tuple(_fr(v) for v in r["a"]), _fr(r["rhs"])) for r in p["rows"])
    box = None
    if "box" in p:
        box = (tuple(_fr(v) for v in p["box"]["lower"]), tuple(_fr(v) for v in p["box"]["upper"]))
    return HPolytope(p["dim"], rows, box)


def to_integer_system(inst: InstanceFile) -> tuple[IntegerSystem, list[Fraction]]:
    p = inst.payload
    return IntegerSystem(tuple(tuple(r) for r in p["A"])), [_fr(v) for v in p["b"]]


def to_sslp(inst: InstanceFile):
    from .recourse import StochasticProgram

    p = inst.payload
    sp = StochasticProgram(
        p["c"], p["A"], p["b"], p["W"], p["q0"], p["Qmat"], p["T0"], p["Tk"],
        p["h0"], p["Hmat"], p["l"], p["u"], metadata=dict(inst.metadata),
    )
    try:
        sp.check_first_stage()
    except ValueError as err:
        raise _invalid(["payload", "A"], str(err)) from None
    return sp


def _vec(v):
    return [fraction_str(as_fraction(x)) for x in v]


def _mat(M):
    return [_vec(r) for r in M]


def graph_instance(g, metadata=None) -> InstanceFile:
    return InstanceFile("graph", {"n": g.n, "edges": [list(e) for e in g.sorted_edges()]}, metadata or {})


def polytope_instance(p: HPolytope, metadata=None) -> InstanceFile:
    payload = {"dim": p.dim, "rows": [{"a": _vec(a), "rhs": fraction_str(r)} for a, r in p.rows]}
    if p.box is not None:
        payload["box"] = {"lower": _vec(p.box[0]), "upper": _vec(p.box[1])}
    return InstanceFile("polytope", payload, metadata or {})


def integer_system_instance(system: IntegerSystem, b, metadata=None) -> InstanceFile:
    return InstanceFile(
        "integer-system", {"A": [list(r) for r in system.A], "b": _vec(b)}, metadata or {}
    )


def sslp_instance(sp, metadata=None) -> InstanceFile:
    payload = {
        "n1": sp.n1, "m1": sp.m1, "n2": sp.n2, "m2": sp.m2, "d": sp.d,
        "c": _vec(sp.c), "A": _mat(sp.A), "b": _vec(sp.b), "W": _mat(sp.W),
        "q0": _vec(sp.q0), "Qmat": _mat(sp.Qmat), "T0": _mat(sp.T0),
        "Tk": [_mat(t) for t in sp.Tk], "h0": _vec(sp.h0), "Hmat": _mat(sp.Hmat),
        "l": _vec(sp.l), "u": _vec(sp.u),
    }
    meta = dict(metadata or {})
    for k, v in sp.metadata.items():
        meta.setdefault(k, fraction_str(v) if isinstance(v, Fraction) else v)
    return InstanceFile("sslp", payload, meta)


def dump(inst: InstanceFile, fh: TextIO) -> None:
    json.dump(inst.to_json(), fh, indent=1)
    fh.write("\n")
