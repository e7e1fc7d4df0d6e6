"""Raster set files: binary PGM (P5) for 2D, packed raw bits for 3D.

Both carry a JSON sidecar next to the data file with keys
``dim``, ``origin``, ``cell`` and ``shape``.  Mask axis 0 maps to image rows.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .raster import RasterSet

__all__ = ["save_raster", "load_raster", "sidecar_path"]


def sidecar_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".json")


def save_raster(A: RasterSet, path) -> Path:
    path = Path(path)
    meta = {"dim": A.dim, "origin": A.origin.tolist(), "cell": A.cell, "shape": list(A.shape)}
    if A.dim == 2:
        rows, cols = A.shape
        pixels = np.where(A.mask, 255, 0).astype(np.uint8)
        with open(path, "wb") as fh:
            fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
            fh.write(pixels.tobytes())
    elif A.dim == 3:
        path.write_bytes(np.packbits(A.mask.reshape(-1)).tobytes())
    else:
        raise ValueError(f"no file format for {A.dim}D raster sets")
    sidecar_path(path).write_text(json.dumps(meta, indent=2))
    return path


def _read_pgm(data: bytes) -> np.ndarray:
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM (P5) file")
    cols, rows, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise ValueError("16-bit PGM not supported")
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, count=rows * cols, offset=pos)
    return pixels.reshape(rows, cols) > maxval // 2


def load_raster(path) -> RasterSet:
    path = Path(path)
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else None
    data = path.read_bytes()
    if data[:2] == b"P5":
        mask = _read_pgm(data)
        if meta is None:
            meta = {"origin": [0.0, 0.0], "cell": 1.0}
    else:
        if meta is None:
            raise ValueError(f"raw raster {path} needs a sidecar {side.name}")
        shape = tuple(meta["shape"])
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        mask = bits[: int(np.prod(shape))].astype(bool).reshape(shape)
    if "shape" in meta and tuple(meta["shape"]) != mask.shape:
        raise ValueError(f"sidecar shape {meta['shape']} does not match data {mask.shape}")
    return RasterSet(meta["origin"], meta["cell"], mask)
