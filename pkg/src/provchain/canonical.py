"""Canonical encoding primitives: deterministic JSON, SHA-256, base58, clocks.

Every byte sequence that gets hashed, signed, or size-accounted in this
package goes through ``canonical_json_bytes`` so that two structurally equal
values always produce identical bytes: UTF-8, lexicographically sorted keys,
no insignificant whitespace.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timedelta, timezone
from typing import Any

# --- canonical JSON ---------------------------------------------------------


def canonical_json_bytes(value: Any) -> bytes:
    """Serialize ``value`` to canonical JSON bytes (sorted keys, compact)."""
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def parse_json_bytes(data: bytes) -> Any:
    return json.loads(data.decode("utf-8"))


# --- hashing ----------------------------------------------------------------


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# --- base58 -----------------------------------------------------------------
# Bitcoin alphabet. Implemented here because no base58 package is available
# in the build environment; the codec is small enough to own.

_B58_ALPHABET = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"
_B58_INDEX = {c: i for i, c in enumerate(_B58_ALPHABET)}


def base58_encode(data: bytes) -> str:
    """Encode bytes as base58, preserving leading zero bytes as '1's."""
    n = int.from_bytes(data, "big")
    chars: list[str] = []
    while n > 0:
        n, rem = divmod(n, 58)
        chars.append(_B58_ALPHABET[rem])
    pad = 0
    for b in data:
        if b == 0:
            pad += 1
        else:
            break
    return "1" * pad + "".join(reversed(chars))


def base58_decode(text: str) -> bytes:
    n = 0
    for c in text:
        if c not in _B58_INDEX:
            raise ValueError(f"invalid base58 character: {c!r}")
        n = n * 58 + _B58_INDEX[c]
    pad = 0
    for c in text:
        if c == "1":
            pad += 1
        else:
            break
    body = n.to_bytes((n.bit_length() + 7) // 8, "big") if n else b""
    return b"\x00" * pad + body


# --- timestamps and clocks ---------------------------------------------------
# A clock is any zero-argument callable returning an aware UTC datetime.
# TickingClock gives tests and scripted runs a deterministic, strictly
# monotonic time source.

_TS_FORMAT = "%Y-%m-%dT%H:%M:%S.%fZ"


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    """Render an aware datetime as a fixed-width UTC string."""
    if dt.tzinfo is None:
        raise ValueError("timestamp must be timezone-aware")
    return dt.astimezone(timezone.utc).strftime(_TS_FORMAT)


def parse_timestamp(text: str) -> datetime:
    return datetime.strptime(text, _TS_FORMAT).replace(tzinfo=timezone.utc)


class TickingClock:
    """Deterministic clock: starts at ``start`` and advances ``step`` per call."""

    def __init__(self, start: datetime, step: timedelta = timedelta(seconds=1)):
        if start.tzinfo is None:
            start = start.replace(tzinfo=timezone.utc)
        self._next = start
        self._step = step

    def __call__(self) -> datetime:
        current = self._next
        self._next = current + self._step
        return current

    def to_state(self) -> dict:
        return {
            "next": format_timestamp(self._next),
            "step_seconds": self._step.total_seconds(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "TickingClock":
        return cls(
            parse_timestamp(state["next"]),
            timedelta(seconds=state["step_seconds"]),
        )
