"""Persistence of fields, summaries and tables.

A field is stored as ``<stem>.npy`` (raw float64 samples) next to
``<stem>.json`` holding the grid header, so a load reproduces the samples
bit for bit.  JSON floats are written with ``repr``, which is the shortest
string that round-trips to the same double; non-finite values become null.
Every file is written to a temporary name and moved into place.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ArtifactError, InvalidGrid
from .spectral import Field, make_grid


def _atomic_write(path: Path, write) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if hasattr(obj, "value") and isinstance(obj.value, str):   # str enums
        return obj.value
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    text = dumps(obj).encode()
    _atomic_write(path, lambda fh: fh.write(text))
    return Path(path)


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ArtifactError(f"no such file: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"cannot read JSON from {path}: {exc}") from exc


def _with(stem: Path, suffix: str) -> Path:
    # stems may contain dots (w_a0.7_mu2), so never use with_suffix
    return stem.parent / (stem.name + suffix)


def save_field(stem, u: Field, **extra) -> tuple[Path, Path]:
    """Write ``stem.npy`` and its header ``stem.json``; ``extra`` goes into the header."""
    stem = Path(stem)
    npy, hdr = _with(stem, ".npy"), _with(stem, ".json")
    data = np.ascontiguousarray(u.values, dtype=np.float64)
    _atomic_write(npy, lambda fh: np.save(fh, data, allow_pickle=False))
    write_json(hdr, {**u.grid.header(), **extra})
    return npy, hdr


def load_field(stem) -> tuple[Field, dict]:
    stem = Path(stem)
    header = read_json(_with(stem, ".json"))
    try:
        values = np.load(_with(stem, ".npy"), allow_pickle=False)
    except FileNotFoundError as exc:
        raise ArtifactError(f"no such file: {_with(stem, '.npy')}") from exc
    except (OSError, ValueError) as exc:
        raise ArtifactError(f"cannot read field {stem}: {exc}") from exc
    try:
        grid = make_grid(header["N"], header["M"], header["L"])
    except KeyError as exc:
        raise ArtifactError(f"field header {stem}.json lacks {exc}") from exc
    if values.shape != grid.shape:
        raise InvalidGrid(f"samples of shape {values.shape} do not fit grid {grid.shape}")
    return Field(grid, values), header


def write_csv(path, rows, fieldnames=None) -> Path:
    """Rows are dicts (or sequences with ``fieldnames``); floats keep full precision."""
    rows = list(rows)
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else []

    def cell(x):
        x = _clean(x)
        if x is None:
            return "nan"
        return repr(x) if isinstance(x, float) else x

    def write(fh):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(fieldnames)
        for r in rows:
            vals = [r.get(k, "") for k in fieldnames] if isinstance(r, dict) else list(r)
            w.writerow([cell(v) for v in vals])
        fh.write(buf.getvalue().encode())

    _atomic_write(path, write)
    return Path(path)


def read_csv(path) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise ArtifactError(f"cannot read CSV {path}: {exc}") from exc


# -- composite artifacts -----------------------------------------------------

def save_ground_state(outdir, gs) -> Path:
    outdir = Path(outdir)
    save_field(outdir / "w0", gs.w0, s=gs.params.s)
    return write_json(outdir / "ground_state.json", gs.summary())


def save_solution(outdir, sol) -> Path:
    outdir = Path(outdir)
    s = sol.sys.params.s
    save_field(outdir / "u", sol.u, s=s)
    save_field(outdir / "v", sol.v, s=s)
    return write_json(outdir / "solution.json", sol.summary())


def load_solution(outdir) -> tuple[dict, Field, Field]:
    outdir = Path(outdir)
    summary = read_json(outdir / "solution.json")
    u, _ = load_field(outdir / "u")
    v, _ = load_field(outdir / "v")
    return summary, u, v
