"""Plain-text output helpers shared by the command-line front end.

Floats are written with 12 significant digits so reruns on one platform
produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SIG_DIGITS = 12


def fmt(x) -> str:
    """Format one CSV field."""
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
        if x == 0.0:
            return "0"
        return f"{x:.{SIG_DIGITS}g}"
    if x is None:
        return ""
    return str(x)


def round_sig(obj):
    """Recursively round floats in a JSON-like structure to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): round_sig(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [round_sig(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{SIG_DIGITS}g}")
    return obj


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(round_sig(obj), fh, indent=2, sort_keys=False)
        fh.write("\n")
    return path


def write_grid_json(path, x, p, values, names=("X", "P")) -> Path:
    """Axes plus a row-major flat array: values[i, j] sits at index i*len(p) + j."""
    return write_json(path, {
        names[0]: np.asarray(x), names[1]: np.asarray(p),
        "shape": [int(len(x)), int(len(p))],
        "values": np.asarray(values).ravel(),
    })


def grid_rows(x, p, values):
    values = np.asarray(values)
    for i, xi in enumerate(x):
        for j, pj in enumerate(p):
            yield float(xi), float(pj), float(values[i, j])


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def remove_quietly(path) -> None:
    try:
        os.remove(path)
    except FileNotFoundError:
        pass
