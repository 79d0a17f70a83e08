"""File formats: model JSON, sample CSV with a metadata sidecar, result JSON.

Every JSON document written here is checked against a schema first, so a
malformed file never leaves the process.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .signal_model import SampleSet, SamplingGrid, SignalModel

_NUMBER = {"type": "number"}
_PAIR = {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["terms"],
    "properties": {
        "terms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["beta", "gamma", "psi", "omega"],
                "properties": {k: _NUMBER for k in ("beta", "gamma", "psi", "omega")},
            },
        },
    },
}

SIDECAR_SCHEMA = {
    "type": "object",
    "required": ["delta", "count", "noise", "outliers"],
    "properties": {
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "count": {"type": "integer", "minimum": 2},
        "noise": {"type": "array", "items": {
            "type": "object", "required": ["snr_db", "seed"],
            "properties": {"snr_db": _NUMBER, "seed": {"type": "integer"}}}},
        "outliers": {"type": "array", "items": {
            "type": "object", "required": ["index", "offset"],
            "properties": {"index": {"type": "integer", "minimum": 0}, "offset": _PAIR}}},
        "model": MODEL_SCHEMA,
    },
}

_TERM_OUT = {
    "type": "object",
    "required": ["beta", "gamma", "psi", "omega"],
    "properties": {k: _NUMBER for k in ("beta", "gamma", "psi", "omega")},
}

RESULT_SCHEMA = {
    "type": "object",
    "required": ["mode", "model_order", "terms"],
    "properties": {
        "mode": {"enum": ["vexpa", "baseline"]},
        "model_order": {"type": "integer", "minimum": 0},
        "terms": {"type": "array", "items": _TERM_OUT},
        "excluded_decimations": {"type": "array", "items": {"type": "integer"}},
        "config": {"type": "object"},
        "metadata": {"type": "object"},
    },
}

SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["experiment", "passed", "checks", "metadata"],
    "properties": {
        "experiment": {"type": "string"},
        "passed": {"type": "boolean"},
        "checks": {"type": "array", "items": {
            "type": "object", "required": ["name", "passed"],
            "properties": {"name": {"type": "string"}, "passed": {"type": "boolean"}}}},
        "metadata": {"type": "object"},
    },
}


def jsonable(obj):
    """Recursively turn numpy scalars and arrays into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, data: dict, schema: dict | None = None) -> Path:
    data = jsonable(data)
    if schema is not None:
        jsonschema.validate(data, schema)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path, schema: dict | None = None) -> dict:
    data = json.loads(Path(path).read_text())
    if schema is not None:
        jsonschema.validate(data, schema)
    return data


def read_model(path) -> SignalModel:
    try:
        data = read_json(path, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValueError(f"malformed model file {path}: {exc.message}") from None
    return SignalModel.from_dict(data)


def write_model(path, model: SignalModel) -> Path:
    return write_json(path, model.to_dict(), MODEL_SCHEMA)


def sidecar_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".meta.json")


def write_samples(path, samples: SampleSet, model: SignalModel | None = None) -> Path:
    """Write ``j,t,re,im`` rows at 17 significant digits plus the metadata sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    t = samples.grid.times
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "t", "re", "im"])
        for j, (tj, v) in enumerate(zip(t, samples.values)):
            w.writerow([j, f"{tj:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
    meta = {
        "delta": samples.grid.delta,
        "count": samples.grid.count,
        "noise": [{"snr_db": snr, "seed": seed} for snr, seed in samples.noise],
        "outliers": [{"index": i, "offset": [off.real, off.imag]} for i, off in samples.outliers],
    }
    if model is not None:
        meta["model"] = model.to_dict()
    write_json(sidecar_path(path), meta, SIDECAR_SCHEMA)
    return path


def read_samples(path) -> SampleSet:
    """Read a sample CSV; the sidecar, when present, restores grid and provenance."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["j", "t", "re", "im"]:
            raise ValueError(f"{path}: expected header j,t,re,im, got {header}")
        rows = [r for r in reader if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two samples")
    j = np.array([int(r[0]) for r in rows])
    if not np.array_equal(j, np.arange(len(rows))):
        raise ValueError(f"{path}: sample indices must run 0..N-1 in order")
    t = np.array([float(r[1]) for r in rows])
    values = np.array([complex(float(r[2]), float(r[3])) for r in rows])
    side = sidecar_path(path)
    noise, outliers = (), ()
    if side.exists():
        meta = read_json(side, SIDECAR_SCHEMA)
        if meta["count"] != len(values):
            raise ValueError(f"{side}: count {meta['count']} does not match {len(values)} rows")
        delta = float(meta["delta"])
        noise = tuple((float(n["snr_db"]), int(n["seed"])) for n in meta["noise"])
        outliers = tuple((int(o["index"]), complex(*o["offset"])) for o in meta["outliers"])
    else:
        delta = float(t[1] - t[0])
    return SampleSet(SamplingGrid(delta, len(values)), values, noise=noise, outliers=outliers)


def write_rows(path, header: list[str], rows) -> Path:
    """Plain CSV with fixed float formatting, so re-runs are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in row])
    return path
