"""Model files: TOML documents with [model], [lambda], [grid] and optional
[covariance] / [run] sections.

Coefficient values are numbers, ``"const:<v>"`` or ``"samples:<csv>"``; a
samples file has a ``t,value`` header and one row per grid node. Relative
paths resolve against the directory of the model file.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ValidationError
from .model import CovarianceSpec, ModelSpec, TimeGrid, ValidatedModel, validate_model

NODE_TOL = 1e-9


class MissingKey(ValidationError):
    kind = "MissingKey"

    def __init__(self, key: str):
        super().__init__(f"missing required key {key!r}")
        self.key = key


@dataclass
class LoadedConfig:
    path: str
    raw: dict
    model: ValidatedModel
    resolved: dict = field(default_factory=dict)  # canonical form used for hashing

    def section(self, name: str) -> dict:
        return self.raw.get(name, {})


def _require(doc: dict, section: str, key: str):
    if section not in doc:
        raise MissingKey(section)
    if key not in doc[section]:
        raise MissingKey(f"{section}.{key}")
    return doc[section][key]


def _file_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def read_samples(path: str, grid: TimeGrid) -> np.ndarray:
    """Values from a ``t,value`` CSV whose rows are exactly the grid nodes."""
    if not os.path.exists(path):
        raise ValidationError(f"samples file not found: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or [c.strip() for c in rows[0]] != ["t", "value"]:
        raise ValidationError(f"{path}: header row 't,value' required")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]])
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if data.shape != (grid.N + 1, 2) or np.max(np.abs(data[:, 0] - grid.t)) > NODE_TOL:
        raise ValidationError(f"{path}: sample nodes do not match the grid (N={grid.N}, T={grid.T})")
    return data[:, 1]


def read_kernel_samples(path: str, grid: TimeGrid) -> np.ndarray:
    """Symmetric matrix from a ``t,s,value`` CSV covering the lower triangle."""
    if not os.path.exists(path):
        raise ValidationError(f"kernel samples file not found: {path}")
    n = grid.N + 1
    K = np.full((n, n), np.nan)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or [c.strip() for c in rows[0]] != ["t", "s", "value"]:
        raise ValidationError(f"{path}: header row 't,s,value' required")
    for r in rows[1:]:
        try:
            t, s, v = (float(x) for x in r)
        except ValueError as exc:
            raise ValidationError(f"{path}: bad row {r}: {exc}") from None
        i, j = int(round(t / grid.dt)), int(round(s / grid.dt))
        if not (0 <= j <= i < n) or abs(i * grid.dt - t) > NODE_TOL or abs(j * grid.dt - s) > NODE_TOL:
            raise ValidationError(f"{path}: ({t}, {s}) is not a lower-triangle grid node")
        K[i, j] = K[j, i] = v
    if np.isnan(K).any():
        raise ValidationError(f"{path}: lower triangle incomplete")
    return K


def parse_coefficient(value, grid: TimeGrid, base_dir: str, name: str):
    """Return (sampled array or float, canonical description for hashing)."""
    if isinstance(value, bool):
        raise ValidationError(f"{name}: expected a number or coefficient string")
    if isinstance(value, (int, float)):
        return float(value), repr(float(value))
    if isinstance(value, str):
        kind, _, arg = value.partition(":")
        if kind == "const":
            try:
                v = float(arg)
            except ValueError:
                raise ValidationError(f"{name}: bad constant {arg!r}") from None
            return v, repr(v)
        if kind == "samples":
            path = os.path.join(base_dir, arg)
            return read_samples(path, grid), "sha256:" + _file_digest(path)
    raise ValidationError(f"{name}: cannot parse {value!r} (use a number, const:<v> or samples:<csv>)")


def load_config(path: str, T: float | None = None, N: int | None = None) -> LoadedConfig:
    """Parse and validate a model file; ``T``/``N`` override the file values."""
    if not os.path.exists(path):
        raise ValidationError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from None
    base = os.path.dirname(os.path.abspath(path))

    T_val = float(T if T is not None else _require(doc, "model", "T"))
    N_val = N if N is not None else _require(doc, "grid", "N")
    if int(N_val) != N_val or N_val < 10:
        raise ValidationError(f"grid.N must be an integer >= 10, got {N_val}")
    grid = TimeGrid(T_val, int(N_val))

    resolved = {"T": repr(T_val), "N": int(N_val)}
    coefs = {}
    for section, keys in (("model", ("a", "A")), ("lambda", ("l11", "l12", "l22"))):
        for key in keys:
            coefs[key], resolved[key] = parse_coefficient(
                _require(doc, section, key), grid, base, f"{section}.{key}")
    mu = _require(doc, "model", "mu")
    if isinstance(mu, bool) or not isinstance(mu, (int, float)):
        raise ValidationError("model.mu must be a number")
    resolved["mu"] = repr(float(mu))

    spec = ModelSpec(coefs["a"], coefs["A"], (coefs["l11"], coefs["l12"], coefs["l22"]),
                     float(mu), T_val)
    model = validate_model(spec, grid)
    return LoadedConfig(path, doc, model, resolved)


def load_covariance(cfg: LoadedConfig, override: str | None = None):
    """CovarianceSpec from [covariance] (K = "ou" or "samples:<csv>", m optional).

    Returns (cov, canonical description).
    """
    from .model import ou_covariance

    sec = cfg.section("covariance")
    base = os.path.dirname(os.path.abspath(cfg.path))
    K_spec = override if override is not None else sec.get("K", "ou")
    grid = cfg.model.grid
    m_val, m_desc = parse_coefficient(sec.get("m", 0.0), grid, base, "covariance.m")
    m = np.full(grid.N + 1, m_val) if np.ndim(m_val) == 0 else m_val
    if K_spec == "ou":
        cov = ou_covariance(cfg.model)
        return CovarianceSpec(grid, m, cov.K), {"K": "ou", "m": m_desc}
    path = K_spec[len("samples:"):] if K_spec.startswith("samples:") else K_spec
    path = path if os.path.isabs(path) or override is not None else os.path.join(base, path)
    K = read_kernel_samples(path, grid)
    return CovarianceSpec(grid, m, K), {"K": "sha256:" + _file_digest(path), "m": m_desc}


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
