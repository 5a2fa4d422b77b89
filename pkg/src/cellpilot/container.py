"""Deterministic binary container for checkpoints and cached trajectories.

Layout: 8-byte magic, u32 format version, u64 header length, UTF-8 JSON
header (sorted keys), raw little-endian array payload, SHA-256 over all
preceding bytes. No timestamps anywhere, so identical content always
produces identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

MAGIC = b"CLPTBIN\x00"
FORMAT_VERSION = 1


class ContainerError(Exception):
    """Corrupt, truncated, or version-incompatible container file."""


def save_container(path, meta: dict, arrays: dict) -> None:
    """Write `meta` (JSON-serializable) and named float/int arrays to `path`.

    Array insertion order is not significant: entries are stored sorted by
    name so byte output is independent of caller dict ordering.
    """
    entries = []
    payload = bytearray()
    for name in sorted(arrays):
        # asarray (not ascontiguousarray) so 0-d shapes survive the round trip
        arr = np.asarray(arrays[name])
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        entries.append(
            {
                "name": name,
                "dtype": arr.dtype.str,
                "shape": list(arr.shape),
                "offset": len(payload),
                "nbytes": arr.nbytes,
            }
        )
        payload.extend(arr.tobytes())
    header = json.dumps(
        {"meta": meta, "arrays": entries}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    blob = bytearray()
    blob.extend(MAGIC)
    blob.extend(struct.pack("<I", FORMAT_VERSION))
    blob.extend(struct.pack("<Q", len(header)))
    blob.extend(header)
    blob.extend(payload)
    blob.extend(hashlib.sha256(bytes(blob)).digest())
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_container(path) -> tuple[dict, dict]:
    """Read a container; returns (meta, {name: ndarray}).

    Raises ContainerError on bad magic, version mismatch, or checksum
    failure.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 12 + 32:
        raise ContainerError(f"{path}: truncated container")
    if blob[: len(MAGIC)] != MAGIC:
        raise ContainerError(f"{path}: bad magic, not a cellpilot container")
    (version,) = struct.unpack_from("<I", blob, len(MAGIC))
    if version != FORMAT_VERSION:
        raise ContainerError(
            f"{path}: container version {version}, expected {FORMAT_VERSION}"
        )
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ContainerError(f"{path}: checksum mismatch, file corrupt")
    (header_len,) = struct.unpack_from("<Q", blob, len(MAGIC) + 4)
    header_start = len(MAGIC) + 12
    header = json.loads(blob[header_start : header_start + header_len])
    payload = body[header_start + header_len :]
    arrays = {}
    for ent in header["arrays"]:
        raw = payload[ent["offset"] : ent["offset"] + ent["nbytes"]]
        arrays[ent["name"]] = np.frombuffer(raw, dtype=np.dtype(ent["dtype"])).reshape(
            ent["shape"]
        ).copy()
    return header["meta"], arrays
