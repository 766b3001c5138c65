"""CSV/JSON writers with 17 significant digits and the measure file format."""
from __future__ import annotations

import json
import math
from typing import Any, Iterable, Sequence

import numpy as np

from .measures import AtomicMeasure, DensityMeasure, Measure


class MeasureFormatError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.17g" % x
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as f:
        f.write(csv_text(header, rows))


def read_csv(path: str):
    """Header list and rows as strings."""
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def _json_value(x, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if x is None:
        return "null"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            # JSON has no literal for these
            return json.dumps(fmt(x))
        return "%.17g" % x
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, np.ndarray):
        x = x.tolist()
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(v, indent, level + 1)}"
                 for k, v in x.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(x, (list, tuple)):
        if not x:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in x):
            return "[" + ", ".join(_json_value(v, indent, level + 1) for v in x) + "]"
        items = [pad + _json_value(v, indent, level + 1) for v in x]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(x).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _json_value(obj, indent, 0) + "\n"


def write_json(path: str, obj) -> None:
    with open(path, "w") as f:
        f.write(dumps(obj))


def measure_to_dict(m: Measure) -> dict:
    if isinstance(m, AtomicMeasure):
        d = {"axis": m.axis, "atoms": [[float(p), float(w)] for p, w in zip(m.positions, m.weights)]}
        if m.signed:
            d["signed"] = True
        return d
    return {"axis": m.axis, "grid": {"start": m.start, "step": m.step, "n": int(m.values.size)},
            "values": [float(v) for v in m.values]}


def measure_from_dict(d: dict) -> Measure:
    if not isinstance(d, dict) or "axis" not in d:
        raise MeasureFormatError("measure needs an 'axis' field")
    try:
        if "atoms" in d:
            atoms = np.asarray(d["atoms"], dtype=float).reshape(-1, 2)
            return AtomicMeasure(atoms[:, 0], atoms[:, 1], d["axis"], bool(d.get("signed", False)))
        if "grid" in d:
            g = d["grid"]
            vals = np.asarray(d["values"], dtype=float)
            if vals.size != int(g["n"]):
                raise MeasureFormatError("grid size and value count differ")
            return DensityMeasure(float(g["start"]), float(g["step"]), vals, d["axis"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MeasureFormatError):
            raise
        raise MeasureFormatError(f"malformed measure: {exc}") from exc
    raise MeasureFormatError("measure needs 'atoms' or 'grid'")


def load_measure(path: str) -> Measure:
    try:
        with open(path) as f:
            d = json.load(f)
    except json.JSONDecodeError as exc:
        raise MeasureFormatError(f"{path}: not valid JSON ({exc})") from exc
    return measure_from_dict(d)
