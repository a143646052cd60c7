"""Headerless CSV matrices and JSON side files.

Floats are written with 17 significant digits, which round-trips float64
exactly; integer matrices are written as plain integers.
"""

import json
import platform
import sys
from pathlib import Path

import numpy as np

from .errors import InputError

FLOAT_FMT = "%.17g"


def write_matrix(path, M, integer=False):
    M = np.atleast_2d(np.asarray(M))
    fmt = "%d" if integer else FLOAT_FMT
    with open(path, "w", newline="") as fh:
        for row in M:
            fh.write(",".join(fmt % v for v in row))
            fh.write("\n")


def read_matrix(path):
    """Read a rectangular headerless numeric CSV into a float64 array."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise InputError(f"{path} is empty")
    try:
        data = [[float(tok) for tok in line.split(",")] for line in rows]
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric entry ({exc})") from exc
    width = len(data[0])
    for i, row in enumerate(data):
        if len(row) != width:
            raise InputError(f"{path}: row {i + 1} has {len(row)} fields, expected {width}")
    M = np.array(data, dtype=np.float64)
    if not np.all(np.isfinite(M)):
        raise InputError(f"{path} contains non-finite values")
    return M


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def versions():
    import scipy

    from . import __version__

    out = {"daglearn": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
           "python": sys.version.split()[0], "platform": platform.platform()}
    try:
        import numba
        out["numba"] = numba.__version__
    except ImportError:  # pragma: no cover
        pass
    return out
