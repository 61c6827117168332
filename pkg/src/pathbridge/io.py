"""JSON model and report files.

Complex matrices are written row-major with each entry as an ``[re, im]``
pair. Every file carries ``"version": "v1"``. Serialization is canonical
(fixed key order, shortest round-trip float repr) so identical inputs give
byte-identical outputs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .chain import ChainModel
from .errors import ModelError, ParseError
from .qpaths import QuantumPathModel
from .quantum import KrausMap, spectral_decompose

VERSION = "v1"

_real_vector = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_real_matrix = {"type": "array", "items": _real_vector, "minItems": 1}
_complex_entry = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_complex_matrix = {"type": "array", "minItems": 1,
                   "items": {"type": "array", "minItems": 1, "items": _complex_entry}}

CHAIN_SCHEMA = {
    "type": "object",
    "required": ["version", "type", "states", "T", "initial", "transitions"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": VERSION},
        "type": {"const": "chain"},
        "states": {"type": "array", "items": {"type": "string"}, "minItems": 1, "uniqueItems": True},
        "T": {"type": "integer", "minimum": 1},
        "initial": _real_vector,
        "transitions": {"type": "array", "items": _real_matrix, "minItems": 1},
    },
}

QUANTUM_SCHEMA = {
    "type": "object",
    "required": ["version", "type", "dim", "sigma0", "kraus", "observables"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": VERSION},
        "type": {"const": "quantum"},
        "dim": {"type": "integer", "minimum": 1},
        "sigma0": _complex_matrix,
        "kraus": {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": _complex_matrix}},
        "observables": {"type": "array", "minItems": 2, "items": _complex_matrix},
    },
}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["version", "type"],
    "properties": {"version": {"const": VERSION}, "type": {"enum": ["chain", "quantum"]}},
}


def validate(doc, schema):
    """Raise :class:`ParseError` at the JSON pointer of the most relevant violation."""
    err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(schema).iter_errors(doc))
    if err is not None:
        pointer = "".join(f"/{p}" for p in err.absolute_path)
        raise ParseError(err.message, pointer)


def decode_complex(m, dim: int | None = None, where: str = "") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 3 or a.shape[0] != a.shape[1] or a.shape[2] != 2:
        raise ParseError(f"expected a square matrix of [re, im] pairs, got shape {a.shape}", where)
    if dim is not None and a.shape[0] != dim:
        raise ParseError(f"expected dimension {dim}, got {a.shape[0]}", where)
    return a[..., 0] + 1j * a[..., 1]


def encode_complex(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


@dataclass(frozen=True)
class ModelDocument:
    """A parsed model together with the presentation data needed to write it back."""

    model: ChainModel | QuantumPathModel
    labels: tuple | None = None

    @property
    def kind(self) -> str:
        return "chain" if isinstance(self.model, ChainModel) else "quantum"


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def parse_model(source) -> ModelDocument:
    """Parse a model file (path) or an already-loaded JSON object."""
    doc = source if isinstance(source, dict) else load_json(source)
    validate(doc, MODEL_SCHEMA)
    if doc["type"] == "chain":
        validate(doc, CHAIN_SCHEMA)
        return _parse_chain(doc)
    validate(doc, QUANTUM_SCHEMA)
    return _parse_quantum(doc)


def _parse_chain(doc) -> ModelDocument:
    n = len(doc["states"])
    if len(doc["initial"]) != n:
        raise ParseError(f"initial has {len(doc['initial'])} entries for {n} states", "/initial")
    if len(doc["transitions"]) != doc["T"]:
        raise ParseError(f"T = {doc['T']} but {len(doc['transitions'])} transition matrices given", "/transitions")
    for t, P in enumerate(doc["transitions"]):
        if len(P) != n or any(len(row) != n for row in P):
            raise ParseError(f"transition {t} is not {n}x{n}", f"/transitions/{t}")
    model = ChainModel(np.array(doc["initial"], float), tuple(np.array(P, float) for P in doc["transitions"]))
    return ModelDocument(model, tuple(doc["states"]))


def _parse_quantum(doc) -> ModelDocument:
    d = doc["dim"]
    sigma0 = decode_complex(doc["sigma0"], d, "/sigma0")
    maps = []
    for t, ops in enumerate(doc["kraus"]):
        maps.append(KrausMap([decode_complex(M, d, f"/kraus/{t}/{k}") for k, M in enumerate(ops)]))
    if len(doc["observables"]) != len(maps) + 1:
        raise ParseError(f"need {len(maps) + 1} observables for {len(maps)} maps", "/observables")
    obs = [spectral_decompose(decode_complex(X, d, f"/observables/{t}")) for t, X in enumerate(doc["observables"])]
    return ModelDocument(QuantumPathModel(sigma0, tuple(maps), tuple(obs)))


def dump_model(doc: ModelDocument) -> dict:
    m = doc.model
    if isinstance(m, ChainModel):
        labels = doc.labels if doc.labels is not None else tuple(str(i) for i in range(m.n))
        return {
            "version": VERSION,
            "type": "chain",
            "states": list(labels),
            "T": m.T,
            "initial": [float(x) for x in m.initial],
            "transitions": [[[float(x) for x in row] for row in P] for P in m.transitions],
        }
    return {
        "version": VERSION,
        "type": "quantum",
        "dim": m.dim,
        "sigma0": encode_complex(m.sigma0),
        "kraus": [[encode_complex(M) for M in E.operators] for E in m.maps],
        "observables": [encode_complex(X.matrix) for X in m.observables],
    }


def to_jsonable(obj):
    """Numpy-aware conversion; non-finite floats become the strings "inf", "-inf", "nan"."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            if obj.ndim == 2:
                return encode_complex(obj)
            return [to_jsonable(v) for v in obj]
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False) + "\n"


def write_json(obj, path):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_vector(v, name: str) -> np.ndarray:
    try:
        return np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"{name}: expected a list of numbers") from exc
