"""File formats: numeric CSV, result tables, PGM images, config text and run manifests.

Numeric CSV is comma separated and row-major with an optional single header
line starting with ``#``. Result tables always carry such a header naming
their columns. Floats are written with ``repr`` so files round-trip exactly
and identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
from datetime import datetime, timezone
from typing import Dict, Iterable, Sequence

import numpy as np

from . import __version__
from .model import InvalidInputError


def read_matrix(path: str) -> np.ndarray:
    try:
        arr = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot read matrix from {path}: {exc}") from exc
    if arr.size == 0:
        raise InvalidInputError(f"{path} is empty")
    return arr


def read_vector(path: str) -> np.ndarray:
    """A single row or a single column."""
    arr = read_matrix(path)
    if min(arr.shape) != 1:
        raise InvalidInputError(f"{path} holds a {arr.shape} matrix, expected a vector")
    return arr.ravel()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def write_matrix(path: str, arr, header: str | None = None) -> None:
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        for row in arr:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_table(path: str, columns: Sequence[str], rows: Iterable[Sequence]) -> int:
    """Write a ``#``-headed CSV table; returns the number of data rows."""
    n = 0
    with open(path, "w", newline="") as fh:
        fh.write("# " + ",".join(columns) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        for row in rows:
            if len(row) != len(columns):
                raise ValueError("row length does not match the columns")
            w.writerow([_fmt(v) for v in row])
            n += 1
    return n


def read_table(path: str):
    """``(columns, rows)`` of a table written by :func:`write_table` (values as strings)."""
    with open(path, newline="") as fh:
        head = fh.readline()
        if not head.startswith("#"):
            raise InvalidInputError(f"{path} has no '#' header")
        cols = [c.strip() for c in head[1:].split(",")]
        return cols, [r for r in csv.reader(fh) if r]


# --- PGM ---------------------------------------------------------------------------

def _pgm_tokens(data: bytes, count: int, start: int = 0):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    toks, i = [], start
    while len(toks) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if i >= len(data):
            raise InvalidInputError("truncated PGM header")
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        toks.append(data[i:j])
        i = j
    return toks, i


def read_pgm(path: str) -> np.ndarray:
    """Load a P2 or P5 image scaled linearly to ``[0, 1]``."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    (magic, w, h, mx), pos = _pgm_tokens(data, 4)
    try:
        w, h, mx = int(w), int(h), int(mx)
    except ValueError as exc:
        raise InvalidInputError("bad PGM header") from exc
    if w < 1 or h < 1 or not 0 < mx < 65536:
        raise InvalidInputError("bad PGM dimensions or maxval")
    if magic == b"P2":
        vals, _ = _pgm_tokens(data, w * h, pos)
        img = np.array([int(v) for v in vals], dtype=float)
    elif magic == b"P5":
        dtype = np.dtype(">u2") if mx > 255 else np.dtype("u1")
        raw = data[pos + 1:pos + 1 + w * h * dtype.itemsize]
        if len(raw) != w * h * dtype.itemsize:
            raise InvalidInputError("truncated PGM raster")
        img = np.frombuffer(raw, dtype=dtype).astype(float)
    else:
        raise InvalidInputError(f"{path} is not a P2/P5 PGM")
    if img.max(initial=0) > mx:
        raise InvalidInputError("PGM sample exceeds maxval")
    return img.reshape(h, w) / mx


def write_pgm(path: str, img, binary: bool = True, maxval: int = 255) -> None:
    """Save an image in ``[0, 1]`` (values outside are clipped)."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise InvalidInputError("image must be 2-D")
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(int)
    h, w = q.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(f"P5\n{w} {h}\n{maxval}\n".encode())
            fh.write(q.astype(">u2" if maxval > 255 else "u1").tobytes())
        else:
            fh.write(f"P2\n{w} {h}\n{maxval}\n".encode())
            for row in q:
                fh.write((" ".join(map(str, row)) + "\n").encode())


# --- config and manifest ---------------------------------------------------------------

def parse_config(text: str) -> Dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; later keys win."""
    out: Dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep or not key.strip():
            raise InvalidInputError(f"config line {n}: expected 'key = value'")
        out[key.strip()] = val.strip()
    return out


def read_config(path: str) -> Dict[str, str]:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return None if math.isnan(v) else float(v)
    return v


def manifest_path(out: str) -> str:
    return os.path.splitext(out)[0] + ".manifest.json"


def write_manifest(path: str, subcommand: str, params: dict, seed=None) -> dict:
    """JSON record of everything needed to re-run a command."""
    doc = {
        "subcommand": subcommand,
        "params": _jsonable(params),
        "seed": seed,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc
