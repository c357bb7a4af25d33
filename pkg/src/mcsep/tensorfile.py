"""Binary tensor interchange format.

Layout::

    u64 little-endian header length N
    N bytes of UTF-8 JSON: {"dtype": "f64"|"c128", "layout": "row-major",
                            "schema_version": 1, "shape": [...]}
    raw little-endian payload, row-major
"""
from __future__ import annotations

import json
import os
import struct

import numpy as np

__all__ = ["write_tensor", "read_tensor", "TensorFormatError", "TENSOR_SCHEMA_VERSION"]

TENSOR_SCHEMA_VERSION = 1
_DTYPES = {"f64": np.dtype("<f8"), "c128": np.dtype("<c16")}


class TensorFormatError(ValueError):
    pass


def write_tensor(path: str | os.PathLike, array: np.ndarray) -> None:
    a = np.asarray(array)
    kind = "c128" if np.iscomplexobj(a) else "f64"
    header = json.dumps(
        {"dtype": kind, "layout": "row-major", "schema_version": TENSOR_SCHEMA_VERSION,
         "shape": list(a.shape)},
        sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = np.ascontiguousarray(a, dtype=_DTYPES[kind]).tobytes()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(payload)


def read_tensor(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise TensorFormatError(f"{path}: missing header length prefix")
    (n,) = struct.unpack("<Q", raw[:8])
    if 8 + n > len(raw):
        raise TensorFormatError(f"{path}: header length {n} exceeds file size")
    try:
        header = json.loads(raw[8:8 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TensorFormatError(f"{path}: header is not valid JSON") from exc
    if header.get("layout") != "row-major":
        raise TensorFormatError(f"{path}: unsupported layout {header.get('layout')!r}")
    if header.get("schema_version") != TENSOR_SCHEMA_VERSION:
        raise TensorFormatError(f"{path}: unsupported schema_version {header.get('schema_version')!r}")
    dtype = _DTYPES.get(header.get("dtype"))
    if dtype is None:
        raise TensorFormatError(f"{path}: unsupported dtype {header.get('dtype')!r}")
    shape = tuple(int(s) for s in header["shape"])
    payload = raw[8 + n:]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(payload) != expected:
        raise TensorFormatError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))
