"""Framed binary container shared by model and dataset files.

Layout (all integers little-endian)::

    magic        4 bytes      b"LBDM" (model) or b"LBDS" (dataset)
    version      uint16
    header_len   uint32
    header       header_len bytes of UTF-8 JSON, sorted keys
    arrays       raw row-major bytes of each array, in header["arrays"] order
    checksum     8 bytes      BLAKE2b (digest_size=8) of everything above

``header["arrays"]`` lists ``{"dtype": "<f8" | "<i8", "shape": [...]}``
per array, so a file describes its own payload size. Reads check, in
order: magic, version, declared length, checksum.
"""

from __future__ import annotations

import hashlib
import json
import struct
from typing import List, Sequence, Tuple

import numpy as np

from lstm_ids.exceptions import (
    ChecksumError,
    ModelFormatError,
    TruncatedFileError,
    VersionMismatchError,
)

PREFIX = struct.Struct("<4sHI")
CHECKSUM_BYTES = 8
DTYPES = ("<f8", "<i8")


def checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=CHECKSUM_BYTES).digest()


def pack(magic: bytes, version: int, header: dict,
         arrays: Sequence[np.ndarray]) -> bytes:
    """Serialize ``header`` plus ``arrays``; identical inputs give identical bytes."""
    layout = []
    payload = []
    for array in arrays:
        array = np.asarray(array)
        dtype = "<i8" if np.issubdtype(array.dtype, np.integer) else "<f8"
        data = np.ascontiguousarray(array, dtype=dtype)
        layout.append({"dtype": dtype, "shape": list(data.shape)})
        payload.append(data.tobytes(order="C"))
    header = dict(header, arrays=layout)
    text = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = PREFIX.pack(magic, version, len(text)) + text + b"".join(payload)
    return body + checksum(body)


def _payload_size(layout: List[dict]) -> int:
    size = 0
    for entry in layout:
        if entry.get("dtype") not in DTYPES:
            raise ModelFormatError(f"Unsupported array dtype {entry.get('dtype')!r}")
        size += 8 * int(np.prod(entry["shape"], dtype=np.int64))
    return size


def unpack(data: bytes, magic: bytes, version: int,
           kind: str = "model") -> Tuple[dict, List[np.ndarray]]:
    """Inverse of :func:`pack`; raises a ModelFormatError subclass on any defect."""
    if len(data) < PREFIX.size:
        raise TruncatedFileError(
            f"{kind} file is {len(data)} bytes, shorter than its {PREFIX.size}-byte prefix")
    found_magic, found_version, header_len = PREFIX.unpack_from(data)
    if found_magic != magic:
        raise ModelFormatError(
            f"Not a {kind} file: magic {found_magic!r}, expected {magic!r}")
    if found_version != version:
        raise VersionMismatchError(found_version, version)
    header_end = PREFIX.size + header_len
    if len(data) < header_end + CHECKSUM_BYTES:
        raise TruncatedFileError(
            f"{kind} file is {len(data)} bytes, its header alone needs "
            f"{header_end + CHECKSUM_BYTES}")

    body, stored = data[:-CHECKSUM_BYTES], data[-CHECKSUM_BYTES:]
    try:
        header = json.loads(data[PREFIX.size:header_end].decode("utf-8"))
        expected = header_end + _payload_size(header["arrays"]) + CHECKSUM_BYTES
    except (UnicodeDecodeError, ValueError, KeyError, TypeError):
        header, expected = None, None
    if expected is not None and len(data) < expected:
        raise TruncatedFileError(
            f"{kind} file is {len(data)} bytes, its layout declares {expected}")
    if checksum(body) != stored:
        raise ChecksumError(f"{kind} file checksum does not match its contents")
    if header is None or len(data) != expected:
        raise ModelFormatError(f"{kind} file header is malformed")

    arrays = []
    offset = header_end
    for entry in header.pop("arrays"):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        array = np.frombuffer(data, dtype=entry["dtype"], count=count, offset=offset)
        native = np.float64 if entry["dtype"] == "<f8" else np.int64
        arrays.append(array.reshape(shape).astype(native))
        offset += 8 * count
    return header, arrays
