"""CSV/JSON writers. Every file opens with a line recording the config hash.

Floats are written with ``repr`` (shortest round-trip form), so identical
inputs give byte-identical files.
"""

import csv
import json
import os

import numpy as np


def header_line(digest: str) -> str:
    return f"# riskfilt config-sha256={digest}"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path: str, digest: str, columns, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(header_line(digest) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_columns(path: str, digest: str, columns, *arrays):
    write_csv(path, digest, columns, zip(*arrays))


def write_kernel(path: str, digest: str, kernel, stride: int = 1):
    """Kernel as ``t,s,value`` rows in row-major triangular order."""
    t = kernel.grid.t
    V = kernel.values
    idx = range(0, kernel.grid.N + 1, stride)
    rows = ((t[i], t[j], V[i, j]) for i in idx for j in idx if j <= i)
    write_csv(path, digest, ["t", "s", "value"], rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: str, digest: str, payload: dict):
    """JSON cannot carry a comment line, so the hash is the first key."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    doc = {"config_sha256": digest}
    doc.update(_jsonable(payload))
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
