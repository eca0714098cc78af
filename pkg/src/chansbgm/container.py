"""On-disk array container: a JSON sidecar plus a raw binary payload.

Every array is stored as two files, ``<stem>.json`` and ``<stem>.bin``.
The sidecar records shape, dtype tag (``"c128"`` or ``"f64"``), row-major
order, little-endian byte order, a semantic role string, and optional
provenance. The payload is the raw little-endian bytes; complex values are
stored as interleaved (re, im) pairs of 8-byte floats. Reading back what
was written is bit-exact.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError

FORMAT_TAG = "chansbgm-array-v1"

_DTYPES = {
    "c128": np.dtype("<c16"),
    "f64": np.dtype("<f8"),
}


def _dtype_tag(array: np.ndarray) -> str:
    if np.iscomplexobj(array):
        return "c128"
    return "f64"


def write_json(path: str | Path, document: dict) -> None:
    """Write a JSON document deterministically (sorted keys, fixed layout)."""
    path = Path(path)
    text = json.dumps(document, sort_keys=True, indent=2) + "\n"
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_array(
    stem: str | Path,
    array: np.ndarray,
    role: str,
    provenance: dict | None = None,
) -> None:
    """Write ``array`` to ``<stem>.json`` + ``<stem>.bin``.

    Arrays are converted to c128/f64 before writing; integer input is
    stored as f64 (exact for the small index ranges used here).
    """
    stem = Path(stem)
    tag = _dtype_tag(np.asarray(array))
    data = np.ascontiguousarray(array, dtype=_DTYPES[tag])
    sidecar = {
        "format": FORMAT_TAG,
        "dtype": tag,
        "shape": list(data.shape),
        "order": "C",
        "endianness": "LE",
        "role": role,
    }
    if provenance is not None:
        sidecar["provenance"] = provenance
    bin_path = stem.with_suffix(".bin")
    tmp = bin_path.with_name(bin_path.name + ".tmp")
    tmp.write_bytes(data.tobytes(order="C"))
    os.replace(tmp, bin_path)
    write_json(stem.with_suffix(".json"), sidecar)


def read_array(stem: str | Path) -> tuple[np.ndarray, dict]:
    """Read an array written by :func:`write_array`; returns (array, sidecar)."""
    stem = Path(stem)
    sidecar = read_json(stem.with_suffix(".json"))
    if sidecar.get("format") != FORMAT_TAG:
        raise InvalidArgumentError(f"not a {FORMAT_TAG} sidecar: {stem}")
    tag = sidecar["dtype"]
    if tag not in _DTYPES:
        raise InvalidArgumentError(f"unknown dtype tag {tag!r} in {stem}")
    dtype = _DTYPES[tag]
    shape = tuple(int(n) for n in sidecar["shape"])
    payload = stem.with_suffix(".bin").read_bytes()
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(payload) != expected:
        raise InvalidArgumentError(
            f"payload of {stem}.bin has {len(payload)} bytes, expected {expected}"
        )
    array = np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
    return array, sidecar
