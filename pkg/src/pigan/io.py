"""Array container files: one JSON header line followed by raw float64 data.

Layout::

    {"arrays": [{"name": ..., "shape": [...]}, ...], "format": "pigan-arrays/1", "meta": {...}}\\n
    <little-endian float64 payload of each array, C order, in header order>

The header is serialized with sorted keys, so writing what was read back
reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Mapping

import numpy as np

FORMAT = "pigan-arrays/1"


class FileFormatError(ValueError):
    pass


def write_arrays(path: str | os.PathLike, meta: Mapping, arrays: Mapping[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    items = [(name, np.ascontiguousarray(a, dtype="<f8")) for name, a in arrays.items()]
    header = {
        "format": FORMAT,
        "meta": dict(meta),
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in items],
    }
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for _, a in items:
            fh.write(a.tobytes(order="C"))
    os.replace(tmp, path)
    return path


def read_arrays(path: str | os.PathLike) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"{path}: bad header") from exc
        if header.get("format") != FORMAT:
            raise FileFormatError(f"{path}: unknown format {header.get('format')!r}")
        payload = fh.read()
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = 8 * count
        if offset + nbytes > len(payload):
            raise FileFormatError(f"{path}: truncated payload")
        arrays[entry["name"]] = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(payload):
        raise FileFormatError(f"{path}: trailing bytes")
    return header["meta"], arrays
