"""Deterministic payload hashing and per-connection instance routing."""

from __future__ import annotations

from collections.abc import Sequence
from typing import Any

from .errors import IndexOutOfRange

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK = 0xFFFFFFFFFFFFFFFF

UNIT_SEPARATOR = b"\x1f"


def stable_hash(data: bytes) -> int:
    """64-bit FNV-1a. Unlike ``hash()`` this is stable across processes."""
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK
    return h


def canonical_encode(value: Any) -> bytes:
    """Encode a payload value to the bytes used for hashing and transport.

    Integers are decimal text, floats the shortest round-trip repr, strings
    UTF-8 and sequences ``[a,b,...]``. Booleans encode as integers so that
    ``True`` and ``1`` (equal in Python) land on the same instance.
    """
    if isinstance(value, bool):
        return b"1" if value else b"0"
    if isinstance(value, int):
        return str(value).encode("ascii")
    if isinstance(value, float):
        return repr(value).encode("ascii")
    if isinstance(value, str):
        return value.encode("utf-8")
    if isinstance(value, (bytes, bytearray)):
        return bytes(value)
    if value is None:
        return b"null"
    if isinstance(value, (list, tuple)):
        return b"[" + b",".join(canonical_encode(v) for v in value) + b"]"
    if isinstance(value, dict):
        items = sorted((canonical_encode(k), canonical_encode(v)) for k, v in value.items())
        return b"{" + b",".join(k + b":" + v for k, v in items) + b"}"
    raise TypeError(f"no canonical encoding for {type(value).__name__}")


def project(payload: Any, indices: Sequence[int]) -> bytes:
    if not isinstance(payload, (list, tuple)):
        raise IndexOutOfRange(
            f"group-by needs a tuple payload, got {type(payload).__name__}",
            payload=payload,
        )
    parts = []
    for i in indices:
        if i >= len(payload):
            raise IndexOutOfRange(
                f"group-by index {i} beyond payload of length {len(payload)}",
                index=i,
            )
        parts.append(canonical_encode(payload[i]))
    return UNIT_SEPARATOR.join(parts)


def route(grouping, payload: Any, sender_counter: int, n_instances: int) -> int:
    """Pick the destination instance for one emission on one connection."""
    if n_instances < 1:
        raise ValueError("n_instances must be >= 1")
    indices = grouping.indices
    if indices is None:
        return sender_counter % n_instances
    key = project(payload, indices)
    if n_instances == 1:
        return 0
    return stable_hash(key) % n_instances
