"""JSON interchange for operators and channels, plus strict input-file schemas.

Operator shape: {"dim_row": n, "dim_col": m, "entries": [[re, im], ...]} with
entries flattened row-major.  Channel shape: {"kind": ..., "d_in": ...,
"d_out": ..., <payload>}.  Readers are strict: unknown or missing fields are
rejected with the offending field path."""

from __future__ import annotations

import json

import numpy as np

from .channels import ChoiChannel, KrausChannel, MeasurePrepareChannel
from .operators import DiscretePOVM, OperatorError, as_complex_matrix

__all__ = [
    "SchemaError",
    "operator_to_json",
    "operator_from_json",
    "channel_to_json",
    "channel_from_json",
    "dumps_report",
    "load_json_file",
    "io_roundtrip",
]


class SchemaError(ValueError):
    """Input JSON violates the expected schema; message carries the field path."""


def _expect_keys(obj, required, optional=(), path="$"):
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected an object, got {type(obj).__name__}")
    for key in required:
        if key not in obj:
            raise SchemaError(f"{path}.{key}: missing required field")
    allowed = set(required) | set(optional)
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}: unknown field")


def operator_to_json(matrix) -> dict:
    m = as_complex_matrix(matrix)
    return {
        "dim_row": int(m.shape[0]),
        "dim_col": int(m.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in m.reshape(-1)],
    }


def operator_from_json(obj, path="$") -> np.ndarray:
    _expect_keys(obj, ("dim_row", "dim_col", "entries"), path=path)
    rows, cols = obj["dim_row"], obj["dim_col"]
    if not (isinstance(rows, int) and isinstance(cols, int) and rows >= 1 and cols >= 1):
        raise SchemaError(f"{path}.dim_row/dim_col: need positive integers")
    entries = obj["entries"]
    if not isinstance(entries, list) or len(entries) != rows * cols:
        raise SchemaError(
            f"{path}.entries: expected {rows * cols} [re, im] pairs, got "
            f"{len(entries) if isinstance(entries, list) else type(entries).__name__}")
    flat = np.empty(rows * cols, dtype=complex)
    for i, pair in enumerate(entries):
        if (not isinstance(pair, list)) or len(pair) != 2:
            raise SchemaError(f"{path}.entries[{i}]: expected an [re, im] pair")
        re, im = pair
        if not all(isinstance(v, (int, float)) for v in (re, im)):
            raise SchemaError(f"{path}.entries[{i}]: entries must be numbers")
        flat[i] = complex(re, im)
    try:
        return as_complex_matrix(flat.reshape(rows, cols))
    except OperatorError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def channel_to_json(channel) -> dict:
    kind = getattr(channel, "kind", None)
    if kind == "kraus":
        payload = {"kraus_ops": [operator_to_json(k) for k in channel.kraus_ops]}
    elif kind == "choi":
        payload = {"matrix": operator_to_json(channel.matrix)}
    elif kind == "measure_prepare":
        payload = {
            "povm": [operator_to_json(g) for g in channel.povm.effects],
            "states": [operator_to_json(s) for s in channel.states],
            "labels": list(channel.povm.labels),
        }
    else:
        raise SchemaError(f"cannot serialize channel of kind {kind!r}")
    return {"kind": kind, "d_in": channel.d_in, "d_out": channel.d_out, **payload}


def channel_from_json(obj, path="$"):
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected an object")
    kind = obj.get("kind")
    if kind == "kraus":
        _expect_keys(obj, ("kind", "d_in", "d_out", "kraus_ops"), path=path)
        ops = [operator_from_json(k, f"{path}.kraus_ops[{i}]")
               for i, k in enumerate(obj["kraus_ops"])]
        ch = KrausChannel(ops)
    elif kind == "choi":
        _expect_keys(obj, ("kind", "d_in", "d_out", "matrix"), path=path)
        ch = ChoiChannel(operator_from_json(obj["matrix"], f"{path}.matrix"),
                         obj["d_in"], obj["d_out"])
    elif kind == "measure_prepare":
        _expect_keys(obj, ("kind", "d_in", "d_out", "povm", "states"),
                     optional=("labels",), path=path)
        effects = [operator_from_json(g, f"{path}.povm[{i}]")
                   for i, g in enumerate(obj["povm"])]
        states = [operator_from_json(s, f"{path}.states[{i}]")
                  for i, s in enumerate(obj["states"])]
        labels = tuple(obj["labels"]) if "labels" in obj else None
        try:
            ch = MeasurePrepareChannel(DiscretePOVM(tuple(effects), labels), states)
        except (OperatorError, ValueError) as exc:
            raise SchemaError(f"{path}: {exc}") from exc
    else:
        raise SchemaError(f"{path}.kind: unknown channel kind {kind!r}")
    if (ch.d_in, ch.d_out) != (obj["d_in"], obj["d_out"]):
        raise SchemaError(
            f"{path}.d_in/d_out: declared ({obj['d_in']}, {obj['d_out']}) but payload "
            f"implies ({ch.d_in}, {ch.d_out})")
    return ch


def dumps_report(report: dict) -> str:
    """Deterministic JSON: sorted keys, full double precision floats."""
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_json_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _parse_known(obj):
    """Parse a JSON object of any supported shape into library objects."""
    if isinstance(obj, dict) and "kind" in obj:
        return channel_from_json(obj), "channel"
    if isinstance(obj, dict) and "dim_row" in obj:
        return operator_from_json(obj), "operator"
    if isinstance(obj, dict) and "states" in obj and "dim_row" not in obj:
        _expect_keys(obj, ("states",), path="$")
        return [operator_from_json(s, f"$.states[{i}]")
                for i, s in enumerate(obj["states"])], "state_set"
    if isinstance(obj, dict) and "effects" in obj:
        _expect_keys(obj, ("effects",), optional=("picture", "channel", "epsilon"), path="$")
        return obj, "effect_set"
    raise SchemaError("$: unrecognized document shape")


def io_roundtrip(path):
    """Parse, re-serialize, and re-parse a file; returns the parsed object and
    raises if the roundtrip is not stable to full double precision."""
    raw = load_json_file(path)
    parsed, shape = _parse_known(raw)
    if shape == "channel":
        second = channel_from_json(json.loads(json.dumps(channel_to_json(parsed))))
        probes = [channel_to_json(parsed), channel_to_json(second)]
    elif shape == "operator":
        second = operator_from_json(json.loads(json.dumps(operator_to_json(parsed))))
        if not np.array_equal(parsed, second):
            raise SchemaError("$: operator roundtrip is not byte-stable")
        probes = [operator_to_json(parsed), operator_to_json(second)]
    else:
        probes = [raw, json.loads(json.dumps(raw))]
    if json.dumps(probes[0], sort_keys=True) != json.dumps(probes[1], sort_keys=True):
        raise SchemaError("$: serialization roundtrip is not stable")
    return parsed
