"""Content-addressed record/replay store for provider calls.

Layout: ``<root>/<endpoint>/<digest>.json``, one record per request, where
``digest`` is the sha256 of the canonical request JSON (sorted keys, compact
separators, image payloads reduced to their content digests). Each record
holds the endpoint, the canonical request echo, and the stored response.
Reads are concurrent-safe; writes go through an atomic rename.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any

from igekit.errors import ReplayMiss


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def replay_key(endpoint: str, request_obj: Any) -> str:
    """sha256 over the canonicalized request; 256-bit hex digest."""
    return hashlib.sha256(canonical_json(request_obj).encode("utf-8")).hexdigest()


class ReplayStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _path(self, endpoint: str, digest: str) -> Path:
        return self.root / endpoint / f"{digest}.json"

    def get(self, endpoint: str, request_obj: Any) -> Any:
        digest = replay_key(endpoint, request_obj)
        path = self._path(endpoint, digest)
        if not path.exists():
            raise ReplayMiss(f"{endpoint}/{digest} not in replay store {self.root}")
        return json.loads(path.read_text(encoding="utf-8"))["response"]

    def put(self, endpoint: str, request_obj: Any, response: Any) -> str:
        digest = replay_key(endpoint, request_obj)
        path = self._path(endpoint, digest)
        path.parent.mkdir(parents=True, exist_ok=True)
        record = {
            "endpoint": endpoint,
            "digest": digest,
            "request": request_obj,
            "response": response,
        }
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n",
                       encoding="utf-8")
        os.replace(tmp, path)
        return digest

    def has(self, endpoint: str, request_obj: Any) -> bool:
        return self._path(endpoint, replay_key(endpoint, request_obj)).exists()
