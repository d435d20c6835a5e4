"""Minimal PLY reader/writer for the cloud interchange format.

Binary little-endian only: properties x, y, z as float32, optionally
red, green, blue as uint8. Colors map to [0, 1] floats in memory.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np

from .errors import PreconditionError
from .geometry import PointCloud

_FLOAT_NAMES = {"float", "float32"}
_UCHAR_NAMES = {"uchar", "uint8"}


def write_ply(cloud: PointCloud, path: Union[str, Path]) -> None:
    path = Path(path)
    n = len(cloud)
    header = [
        "ply",
        "format binary_little_endian 1.0",
        f"element vertex {n}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if cloud.has_colors:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")

    if cloud.has_colors:
        dtype = np.dtype(
            [("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("red", "u1"), ("green", "u1"), ("blue", "u1")]
        )
        rec = np.empty(n, dtype=dtype)
        rec["x"], rec["y"], rec["z"] = cloud.points.T.astype(np.float32)
        rgb = np.rint(cloud.colors * 255.0).clip(0, 255).astype(np.uint8)
        rec["red"], rec["green"], rec["blue"] = rgb.T
    else:
        dtype = np.dtype([("x", "<f4"), ("y", "<f4"), ("z", "<f4")])
        rec = np.empty(n, dtype=dtype)
        rec["x"], rec["y"], rec["z"] = cloud.points.T.astype(np.float32)

    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(rec.tobytes())


def read_ply(path: Union[str, Path]) -> PointCloud:
    path = Path(path)
    with open(path, "rb") as f:
        raw = f.read()
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply") or end < 0:
        raise PreconditionError(f"{path} is not a PLY file")
    header_lines = raw[:end].decode("ascii", errors="replace").splitlines()
    body = raw[end + len(b"end_header\n"):]

    n_vertices = None
    fields: list[tuple[str, str]] = []
    in_vertex = False
    fmt_ok = False
    for line in header_lines:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt_ok = parts[1] == "binary_little_endian"
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                n_vertices = int(parts[2])
        elif parts[0] == "property" and in_vertex:
            fields.append((parts[2], parts[1]))
    if not fmt_ok:
        raise PreconditionError(f"{path}: only binary little-endian PLY is supported")
    if n_vertices is None:
        raise PreconditionError(f"{path}: missing vertex element")

    np_fields = []
    for name, ply_type in fields:
        if ply_type in _FLOAT_NAMES:
            np_fields.append((name, "<f4"))
        elif ply_type in _UCHAR_NAMES:
            np_fields.append((name, "u1"))
        else:
            raise PreconditionError(f"{path}: unsupported property type {ply_type}")
    dtype = np.dtype(np_fields)
    if len(body) < n_vertices * dtype.itemsize:
        raise PreconditionError(
            f"{path}: body holds {len(body)} bytes, header promises {n_vertices * dtype.itemsize}"
        )
    rec = np.frombuffer(body, dtype=dtype, count=n_vertices)

    names = {name for name, _ in np_fields}
    if not {"x", "y", "z"} <= names:
        raise PreconditionError(f"{path}: missing x/y/z properties")
    points = np.column_stack([rec["x"], rec["y"], rec["z"]]).astype(np.float64)
    colors = None
    if {"red", "green", "blue"} <= names:
        colors = np.column_stack([rec["red"], rec["green"], rec["blue"]]).astype(np.float64) / 255.0
    return PointCloud(points=points, colors=colors)
