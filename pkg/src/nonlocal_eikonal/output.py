"""Atomic file output: CSV series, JSON manifests, snapshots."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .grid import shift_next

OUTPUT_ROOT_ENV = "NONLOCAL_EIKONAL_OUTPUT_ROOT"


def resolve_dir(path) -> Path:
    """Relative output paths are placed under $NONLOCAL_EIKONAL_OUTPUT_ROOT when set."""
    p = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not p.is_absolute():
        p = Path(root) / p
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_atomic(path, data: str | bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def dumps(obj) -> str:
    # float repr is the shortest string that round-trips exactly (<= 17 digits)
    return json.dumps(obj, indent=2, default=_jsonable, allow_nan=True)


def write_json(path, obj) -> Path:
    return write_atomic(path, dumps(obj) + "\n")


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return write_atomic(path, buf.getvalue())


def snapshot_rows(state, grid):
    x = grid.x
    u = state.u
    density = (shift_next(u) - u) / grid.dx + state.L_P
    for i in range(grid.ring_size):
        yield i, x[i], u[i], u[i] + state.L_P * x[i], density[i]


SNAPSHOT_HEADER = ("i", "x_i", "u_i", "u_i_plus_LPx_i", "theta_plus_LP")


def write_snapshot(directory, state, grid) -> Path:
    name = f"snapshot_{state.n:08d}.csv"
    return write_csv(Path(directory) / name, SNAPSHOT_HEADER, snapshot_rows(state, grid))


def save_state(path, state) -> Path:
    buf = io.BytesIO()
    np.savez(buf, u=state.u, n=state.n, t=state.t, L_P=state.L_P)
    return write_atomic(path, buf.getvalue())
