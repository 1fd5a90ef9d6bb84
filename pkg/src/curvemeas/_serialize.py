"""Deterministic JSON emission.

Floats are printed with 17 significant digits so that identical runs produce
byte-identical files. Non-finite values use the Infinity/NaN tokens that
Python's json reader accepts.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np


def _format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps_json(obj, indent: int = 2, _level: int = 0) -> str:
    pad = " " * (indent * _level)
    pad_in = " " * (indent * (_level + 1))
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"')
        out = out.replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")
        return f'"{out}"'
    if isinstance(obj, np.ndarray):
        return dumps_json(obj.tolist(), indent, _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad_in}{dumps_json(str(k), indent, 0)}: {dumps_json(v, indent, _level + 1)}'
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        flat = all(
            isinstance(v, (int, float, np.integer, np.floating, bool, np.bool_))
            for v in obj
        )
        if flat:
            return "[" + ", ".join(dumps_json(v, indent, 0) for v in obj) + "]"
        items = [f"{pad_in}{dumps_json(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_json(obj, path) -> None:
    Path(path).write_text(dumps_json(obj) + "\n")
