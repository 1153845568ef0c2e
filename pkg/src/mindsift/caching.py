"""Append-only JSONL caches with per-record checksums.

Each line is one record ``{"key", "model", "payload", "checksum"}``. Corrupt
lines (truncated JSON, missing fields, checksum or payload-shape mismatch)
are counted and skipped at load time, so the entry is simply refetched; they
never crash a run.
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path

import numpy as np

from .errors import CorruptCacheEntry


def _checksum(key: str, model: str, payload) -> str:
    blob = json.dumps([key, model, payload], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


class AppendOnlyCache:
    """Base cache; subclasses define payload encoding and validation."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, object] = {}
        self._corrupt = 0
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            try:
                key, value = self.parse_record(line)
            except CorruptCacheEntry:
                self._corrupt += 1
                continue
            self._entries[key] = value

    def parse_record(self, line: str) -> tuple[str, object]:
        """Strict single-record parse; raises CorruptCacheEntry on any defect."""
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptCacheEntry(f"undecodable cache line: {exc}") from exc
        if not isinstance(rec, dict):
            raise CorruptCacheEntry("cache record is not an object")
        missing = {"key", "model", "payload", "checksum"} - rec.keys()
        if missing:
            raise CorruptCacheEntry(f"cache record lacks fields {sorted(missing)}")
        if _checksum(rec["key"], rec["model"], rec["payload"]) != rec["checksum"]:
            raise CorruptCacheEntry(f"checksum mismatch for key {rec['key']!r}")
        return rec["key"], self._decode(rec["payload"])

    def _decode(self, payload):
        raise NotImplementedError

    def _encode(self, value):
        raise NotImplementedError

    def get(self, key: str):
        return self._entries.get(key)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def corrupt_entries(self) -> int:
        return self._corrupt

    def put(self, key: str, model: str, value) -> None:
        payload = self._encode(value)
        record = {
            "key": key,
            "model": model,
            "payload": payload,
            "checksum": _checksum(key, model, payload),
        }
        with self._lock:  # single writer; appends are atomic per line
            self._entries[key] = value
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
            self._corrupt = 0
            if self.path is not None and self.path.exists():
                self.path.unlink()


class VectorCache(AppendOnlyCache):
    """Embedding store; values are float64 vectors, serialized as decimal
    JSON floats (round-trips bit-exactly)."""

    def _encode(self, value):
        arr = np.asarray(value, dtype=np.float64)
        return {"dimension": int(arr.shape[0]), "values": [float(v) for v in arr]}

    def _decode(self, payload):
        if not isinstance(payload, dict) or "values" not in payload or "dimension" not in payload:
            raise CorruptCacheEntry("vector payload lacks dimension/values")
        values = payload["values"]
        if not isinstance(values, list) or len(values) != payload["dimension"]:
            raise CorruptCacheEntry("vector payload length differs from declared dimension")
        arr = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise CorruptCacheEntry("vector payload has non-finite entries")
        return arr


class TextCache(AppendOnlyCache):
    """Response store; values are raw strings."""

    def _encode(self, value):
        return {"response": str(value)}

    def _decode(self, payload):
        if not isinstance(payload, dict) or not isinstance(payload.get("response"), str):
            raise CorruptCacheEntry("text payload lacks a response string")
        return payload["response"]
