"""CSV and JSON serialization with deterministic formatting."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import is_dataclass
from pathlib import Path

import numpy as np

from .black import BlackProfile
from .errors import InvalidParameterError
from .gray import GrayProfile
from .spectral import Grid

PROFILE_COLUMNS = ("x", "eta", "theta", "u_re", "u_im")
SWEEP_COLUMNS = ("lambda", "distance_eta", "distance_u", "energy", "residual")
FLOAT_FORMAT = "%.17g"


def _fmt(v) -> str:
    return FLOAT_FORMAT % v


def jsonable(obj):
    """Plain JSON types; non-finite floats become null, complex becomes {re, im}."""
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if is_dataclass(obj):
        return jsonable(vars(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, complex):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def profile_columns(profile):
    x = profile.grid.x
    if isinstance(profile, BlackProfile):
        zeros = np.zeros_like(x)
        return x, profile.eta.values, zeros, profile.u.values, zeros
    return x, profile.eta.values, profile.theta.values, profile.u_re.values, profile.u_im.values


def write_profile_csv(path, profile) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = profile_columns(profile)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_COLUMNS)
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])
    return path


def write_sweep_csv(path, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in SWEEP_COLUMNS])
    return path


def read_profile_csv(path, speed: float | None = None):
    """Load a profile written by ``write_profile_csv``.

    A file with identically zero phase and imaginary part is read as a black
    profile.  For gray profiles the speed is recovered from
    ``theta' = (c/2) eta/(1-eta)`` unless given.
    """
    data = np.genfromtxt(path, delimiter=",", names=True)
    missing = [c for c in PROFILE_COLUMNS if c not in (data.dtype.names or ())]
    if missing:
        raise InvalidParameterError(f"{path}: missing columns {missing}")
    x = np.asarray(data["x"], dtype=float)
    n = x.size
    grid = Grid(-float(x[0]), n)
    if np.max(np.abs(x - grid.x)) > 1e-9 * grid.L:
        raise InvalidParameterError(f"{path}: x column is not a uniform grid on [-L, L)")
    if not np.any(data["theta"]) and not np.any(data["u_im"]):
        return BlackProfile(grid.field(data["u_re"]))
    eta = grid.field(data["eta"])
    if speed is None:
        weight = np.sum(eta.values / (1 - eta.values)) * grid.h
        speed = 2 * (data["theta"][-1] - data["theta"][0]) / weight if weight else 0.0
    return GrayProfile(float(speed), eta, grid.field(data["theta"]), grid.field(data["u_re"]),
                       grid.field(data["u_im"]))
