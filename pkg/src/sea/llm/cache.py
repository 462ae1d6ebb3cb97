"""Append-only JSON-lines response cache."""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path
from typing import Optional


def cache_key(prompt_sha: str, model: str, temperature: float, run: int) -> str:
    raw = json.dumps([prompt_sha, model, float(temperature), int(run)])
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()


class ResponseCache:
    """Maps (prompt hash, model, temperature, run) to a raw response.

    Without a path the cache lives in memory only.  Records are appended
    once per key; repeated puts of a known key are ignored.
    """

    def __init__(self, path: Optional[Path | str] = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self.writes = 0
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with self.path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    self._entries.setdefault(rec["key_hash"], rec["response"])
                except (ValueError, KeyError) as exc:
                    raise ValueError(f"{self.path}:{lineno}: corrupt cache record: {exc}") from exc

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, prompt_sha: str, model: str, temperature: float, run: int) -> Optional[str]:
        key = cache_key(prompt_sha, model, temperature, run)
        with self._lock:
            value = self._entries.get(key)
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
            return value

    def put(self, prompt_sha: str, model: str, temperature: float, run: int, response: str) -> None:
        key = cache_key(prompt_sha, model, temperature, run)
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = response
            self.writes += 1
            if self.path is not None:
                rec = {"key_hash": key, "model": model, "temperature": float(temperature), "run": run,
                       "prompt_sha": prompt_sha, "response": response}
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")

    def stats(self) -> dict:
        return {"entries": len(self._entries), "hits": self.hits, "misses": self.misses,
                "writes": self.writes}
