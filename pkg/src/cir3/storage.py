"""Binary ensemble cache and CSV sidecars.

Cache layout: a 16-byte header (magic ``CIR3``, u32 version, u32 factor count,
u32 reserved) followed by five little-endian float64 columns of equal length:
path, time, R, theta, v. Coordinates absent from the ensemble are NaN. Grid,
scheme and seed live in a JSON sidecar next to the cache file.
"""
from __future__ import annotations

import csv
import json
import os
import struct
from pathlib import Path

import numpy as np

from .sde import COORDS, PathEnsemble, TimeGrid

MAGIC = b"CIR3"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
_COLUMNS = ("path", "time", "R", "theta", "v")


class CacheFormatError(ValueError):
    pass


def cache_dir() -> Path:
    return Path(os.environ.get("CIR3_CACHE_DIR", Path.home() / ".cache" / "cir3"))


def write_cache(ens: PathEnsemble, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_rec, n_paths, _ = ens.states.shape
    cols = {
        "path": np.tile(np.arange(n_paths, dtype=np.float64), n_rec),
        "time": np.repeat(ens.times, n_paths),
    }
    for name in ("R", "theta", "v"):
        cols[name] = ens.coord(name).ravel() if name in ens.coords else np.full(n_rec * n_paths, np.nan)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, ens.factors, 0))
        for name in _COLUMNS:
            fh.write(cols[name].astype("<f8").tobytes())
    meta = {
        "dt": ens.grid.dt, "n_steps": ens.grid.n_steps, "record_stride": ens.grid.record_stride,
        "scheme": ens.scheme, "root_seed": ens.root_seed, "n_paths": n_paths, "factors": ens.factors,
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return path


def read_header(path) -> dict:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise CacheFormatError(f"{path}: truncated header")
    magic, version, factors, _ = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise CacheFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CacheFormatError(f"{path}: unsupported version {version}")
    body = path.stat().st_size - _HEADER.size
    if body % (8 * len(_COLUMNS)):
        raise CacheFormatError(f"{path}: body size {body} is not a whole number of rows")
    return {"version": version, "factors": factors, "rows": body // (8 * len(_COLUMNS))}


def read_cache(path) -> PathEnsemble:
    path = Path(path)
    head = read_header(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    rows = head["rows"]
    data = np.fromfile(path, dtype="<f8", offset=_HEADER.size).reshape(len(_COLUMNS), rows)
    n_paths = int(meta["n_paths"])
    grid = TimeGrid(float(meta["dt"]), int(meta["n_steps"]), int(meta["record_stride"]))
    factors = head["factors"]
    states = np.stack([data[_COLUMNS.index(c)].reshape(grid.n_records, n_paths) for c in COORDS[factors]], axis=-1)
    return PathEnsemble(grid, meta["scheme"], n_paths, states, int(meta["root_seed"]), factors)


def _write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def write_curve_csv(path, times, values, stderr, bound=None) -> Path:
    bound = [""] * len(times) if bound is None else bound
    return _write_rows(path, ["time", "value", "stderr", "bound"], zip(times, values, stderr, bound))


def write_distance_csv(path, rows) -> Path:
    """``rows`` of (time, estimator, value, stderr_or_spread)."""
    return _write_rows(path, ["time", "estimator", "value", "stderr"], rows)


def write_residual_csv(path, table) -> Path:
    return _write_rows(path, ["function_id", "mean", "stderr", "z"],
                       ((r.function_id, r.mean, r.stderr, r.z) for r in table.rows))


def ensemble_to_csv(ens: PathEnsemble, path) -> Path:
    n_rec, n_paths, _ = ens.states.shape

    def rows():
        for i, t in enumerate(ens.times):
            for p in range(n_paths):
                yield (p, t, *ens.states[i, p])

    return _write_rows(path, ["path", "time", *ens.coords], rows())
