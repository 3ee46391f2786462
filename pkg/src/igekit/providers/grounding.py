"""Description-grounding clients: locate image regions for free-text CDs.

Wire protocol (served by the grounding adapter): HTTP POST /ground with
``{"image_b64": str, "descriptions": [str]}``; 200 response
``{"results": [{"boxes": [{"x","y","w","h","score"}]}]}`` with results
aligned one-to-one with descriptions; errors come back as
``{"error": str}`` with a 4xx/5xx status.
"""

from __future__ import annotations

import base64
import os
from dataclasses import dataclass
from typing import Sequence

import requests

from igekit.errors import ProtocolError, RateLimited, TransportError
from igekit.geometry import BoundingBox, ScoredBox
from igekit.providers.payloads import ImagePayload
from igekit.providers.replay import ReplayStore


@dataclass(frozen=True)
class GroundRequest:
    image: ImagePayload
    descriptions: tuple[str, ...]

    def request_obj(self) -> dict:
        return {"image": self.image.key_fields(),
                "descriptions": list(self.descriptions)}


@dataclass(frozen=True)
class GroundResponse:
    results: tuple[tuple[ScoredBox, ...], ...]


def _boxes_to_wire(results: Sequence[Sequence[ScoredBox]]) -> list[dict]:
    return [{"boxes": [{"x": sb.box.x, "y": sb.box.y, "w": sb.box.w,
                        "h": sb.box.h, "score": sb.score} for sb in group]}
            for group in results]


def _boxes_from_wire(doc: dict, n_descriptions: int) -> list[list[ScoredBox]]:
    results = doc.get("results")
    if not isinstance(results, list):
        raise ProtocolError("grounding reply missing 'results' list")
    if len(results) != n_descriptions:
        raise ProtocolError(f"grounding reply has {len(results)} results "
                            f"for {n_descriptions} descriptions")
    out: list[list[ScoredBox]] = []
    for entry in results:
        boxes_raw = entry.get("boxes") if isinstance(entry, dict) else None
        if not isinstance(boxes_raw, list):
            raise ProtocolError("grounding reply entry missing 'boxes' list")
        group = []
        for b in boxes_raw:
            try:
                group.append(ScoredBox(BoundingBox(float(b["x"]), float(b["y"]),
                                                   float(b["w"]), float(b["h"])),
                                       float(b["score"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"malformed box in grounding reply: {b!r}") from exc
        out.append(group)
    return out


class SyntheticGroundingBackend:
    """Rule table: case-folded substring of the description -> boxes."""

    def __init__(self, rules: Sequence[tuple[str, Sequence[ScoredBox]]]):
        self.rules = [(needle.lower(), tuple(boxes)) for needle, boxes in rules]
        self.calls = 0

    def ground(self, req: GroundRequest) -> list[list[ScoredBox]]:
        self.calls += 1
        out = []
        for description in req.descriptions:
            hay = description.lower()
            group: list[ScoredBox] = []
            for needle, boxes in self.rules:
                if needle in hay:
                    group.extend(boxes)
            out.append(group)
        return out


class ReplayGroundingBackend:
    def __init__(self, store: ReplayStore):
        self.store = store

    def ground(self, req: GroundRequest) -> list[list[ScoredBox]]:
        doc = self.store.get("ground", req.request_obj())
        return _boxes_from_wire(doc, len(req.descriptions))


class RecordingGroundingBackend:
    def __init__(self, inner, store: ReplayStore):
        self.inner = inner
        self.store = store

    def ground(self, req: GroundRequest) -> list[list[ScoredBox]]:
        results = self.inner.ground(req)
        self.store.put("ground", req.request_obj(),
                       {"results": _boxes_to_wire(results)})
        return results


class HttpGroundingBackend:
    """Client for the /ground wire protocol; env IGEKIT_GROUND_URL."""

    def __init__(self, base_url: str | None = None,
                 session: requests.Session | None = None, timeout: float = 120.0):
        self.base_url = (base_url or os.environ.get("IGEKIT_GROUND_URL", "")).rstrip("/")
        self.session = session or requests.Session()
        self.timeout = timeout
        if not self.base_url:
            raise ValueError("grounding backend needs a base URL (IGEKIT_GROUND_URL)")

    def ground(self, req: GroundRequest) -> list[list[ScoredBox]]:
        payload = {
            "image_b64": base64.b64encode(req.image.materialize()).decode("ascii"),
            "descriptions": list(req.descriptions),
        }
        try:
            resp = self.session.post(f"{self.base_url}/ground", json=payload,
                                     timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429:
            raise RateLimited("grounding adapter throttled the request")
        if resp.status_code >= 500:
            raise TransportError(f"grounding adapter returned {resp.status_code}")
        if resp.status_code != 200:
            raise ProtocolError(f"grounding adapter rejected the request "
                                f"({resp.status_code}): {resp.text[:200]}")
        try:
            doc = resp.json()
        except ValueError as exc:
            raise ProtocolError("grounding adapter reply is not JSON") from exc
        return _boxes_from_wire(doc, len(req.descriptions))


class GroundingClient:
    """Validates alignment and clamps returned boxes to the image bounds."""

    def __init__(self, backend):
        self.backend = backend
        self.calls = 0

    def ground(self, req: GroundRequest,
               image_size: tuple[float, float]) -> GroundResponse:
        raw = self.backend.ground(req)
        if len(raw) != len(req.descriptions):
            raise ProtocolError(f"backend returned {len(raw)} groups for "
                                f"{len(req.descriptions)} descriptions")
        self.calls += 1
        w, h = image_size
        results = []
        for group in raw:
            kept = []
            for sb in group:
                clamped = sb.box.clamped(w, h)
                if clamped is not None:
                    kept.append(ScoredBox(clamped, sb.score))
            results.append(tuple(kept))
        return GroundResponse(results=tuple(results))
