"""Plain-file formats for fields, masks and density tables.

* Field CSV: comma separated, no header, one grid row per line, values
  printed with 17 significant digits so a write/read round trip is exact.
* Mask PGM: binary P5, ``maxval`` 255, one byte per pixel in row-major
  order, 0 for background and 255 for signal.  Reading also accepts ASCII
  P2 and 16-bit P5 images, which may carry ``#`` comments in the header.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "write_field_csv",
    "read_field_csv",
    "write_mask_pgm",
    "read_pgm",
    "read_field",
    "write_density_csv",
    "sha256_file",
]


def write_field_csv(path, values) -> None:
    a = np.asarray(values, dtype=float)
    if a.ndim != 2:
        raise InvalidArgumentError(f"expected a 2-D grid, got shape {a.shape}")
    lines = (",".join(format(v, ".17g") for v in row) for row in a.tolist())
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise InvalidArgumentError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise InvalidArgumentError(f"{path}: no data")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InvalidArgumentError(f"{path}: rows have unequal lengths")
    return np.array(rows, dtype=float)


def write_mask_pgm(path, mask) -> None:
    m = np.asarray(mask, dtype=bool)
    rows, cols = m.shape
    header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
    Path(path).write_bytes(header + (m.astype(np.uint8) * 255).tobytes())


def _pgm_tokens(data: bytes, count: int):
    """First ``count`` whitespace-separated header tokens and the offset after them."""
    tokens = []
    i = 0
    while len(tokens) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        if j == i:
            raise InvalidArgumentError("truncated PGM header")
        tokens.append(data[i:j])
        i = j
    return tokens, i + 1  # exactly one whitespace byte precedes the raster


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    try:
        tokens, offset = _pgm_tokens(data, 4)
        magic = tokens[0]
        cols, rows, maxval = (int(t) for t in tokens[1:])
    except (ValueError, IndexError) as exc:
        raise InvalidArgumentError(f"{path}: malformed PGM header") from exc
    if magic not in (b"P5", b"P2") or not 0 < maxval < 65536 or rows < 1 or cols < 1:
        raise InvalidArgumentError(f"{path}: unsupported PGM ({magic!r}, maxval {maxval})")
    if magic == b"P2":
        vals = np.array(data[offset:].split(), dtype=np.int64)
    else:
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        vals = np.frombuffer(data, dtype=dtype, offset=offset, count=-1)
    if vals.size < rows * cols:
        raise InvalidArgumentError(f"{path}: expected {rows * cols} pixels, found {vals.size}")
    return vals[: rows * cols].reshape(rows, cols).astype(float)


def read_field(path, fmt: str | None = None) -> np.ndarray:
    """Read a field grid; ``fmt`` defaults to the file extension."""
    if fmt is None:
        fmt = "pgm" if str(path).lower().endswith(".pgm") else "csv"
    if fmt == "csv":
        return read_field_csv(path)
    if fmt == "pgm":
        return read_pgm(path)
    raise InvalidArgumentError(f"unknown input format {fmt!r}")


def write_density_csv(path, model) -> None:
    lines = ["x,f,f_h0"]
    if model is not None:
        f_h0 = model.f_h0 if model.f_h0 is not None else [None] * model.grid.size
        for x, f, f0 in zip(model.grid, model.f, f_h0):
            lines.append(f"{x:.17g},{f:.17g}," + ("" if f0 is None else f"{f0:.17g}"))
    Path(path).write_text("\n".join(lines) + "\n")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
