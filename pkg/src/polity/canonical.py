"""Canonical byte forms shared by claims, proof envelopes, and the decision log.

Everything that gets hashed or signed goes through here: one JSON encoding
(sorted keys, no insignificant whitespace, UTF-8) and one timestamp format,
so equal structures always produce equal bytes.
"""
from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from typing import Any

# RFC 3339 UTC with fixed microsecond precision; the trailing Z is mandatory
# on output so canonical bytes never vary with the producer's locale or zone.
_TS_FORMAT = "%Y-%m-%dT%H:%M:%S.%fZ"


def canonical_json_bytes(obj: Any) -> bytes:
    """Serialize to the canonical wire form: sorted keys, compact, UTF-8."""
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def format_timestamp(ts: datetime) -> str:
    """Render a UTC timestamp in the canonical RFC 3339 form."""
    if ts.tzinfo is None:
        raise ValueError("timestamps must be timezone-aware")
    return ts.astimezone(timezone.utc).strftime(_TS_FORMAT)


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 UTC timestamp; accepts Z or +00:00 suffixes."""
    raw = text.strip()
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    ts = datetime.fromisoformat(raw)
    if ts.tzinfo is None:
        raise ValueError(f"timestamp {text!r} lacks a timezone")
    return ts.astimezone(timezone.utc)


def utc_now() -> datetime:
    return datetime.now(timezone.utc)
