"""Multimodal chat clients over the prompt-template registry.

Backends implement ``complete(request_obj, prompt, req) -> str``:
ScriptedChatBackend serves canned or computed answers for tests,
ReplayChatBackend serves a recorded store (raising ReplayMiss on unknown
requests), RecordingChatBackend wraps a live backend and records, and
RemoteChatBackend talks to an OpenAI-style HTTP endpoint.

``ChatClient.ask`` renders a template, calls the backend under a concurrency
bound, parses the answer against the template's schema, and re-asks up to
``max_parse_retries`` times with a strict-JSON nudge before giving up.
"""

from __future__ import annotations

import base64
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import requests

from igekit.errors import ParseError, RateLimited, ReplayMiss, TransportError
from igekit.providers import templates
from igekit.providers.parsing import parse_structured
from igekit.providers.payloads import ImagePayload
from igekit.providers.replay import ReplayStore

templates.validate_registry()

STRICT_JSON_NUDGE = "\n\nYour previous answer was not parseable. Return valid JSON only."


@dataclass(frozen=True)
class DecodeParams:
    temperature: float = 0.0
    max_tokens: int = 1024
    seed: int | None = None


@dataclass(frozen=True)
class ChatRequest:
    template_id: str
    slots: Mapping[str, str]
    images: tuple[ImagePayload, ...] = ()
    demos: tuple[str, ...] = ()
    decode: DecodeParams = field(default_factory=DecodeParams)

    def render(self) -> str:
        slots = dict(self.slots)
        spec = templates.TEMPLATES[self.template_id]
        if spec.uses_demos:
            slots.setdefault("demonstrations", templates.format_demos(self.demos))
        return templates.render(self.template_id, slots)

    def request_obj(self, nudge: int = 0) -> dict:
        """Canonical form digested into the replay key."""
        obj = {
            "template_id": self.template_id,
            "slots": {k: str(v) for k, v in sorted(self.slots.items())},
            "images": [im.key_fields() for im in self.images],
            "demos": list(self.demos),
            "decode": {"temperature": self.decode.temperature,
                       "max_tokens": self.decode.max_tokens,
                       "seed": self.decode.seed},
        }
        if nudge:
            obj["strict_json_nudge"] = nudge
        return obj


class ScriptedChatBackend:
    """Answers from a script: template_id -> str | list[str] | callable(req).

    List values are consumed in order (repeating the last); callables get the
    ChatRequest and may branch on slots.
    """

    def __init__(self, script: Mapping[str, Any]):
        self.script = dict(script)
        self._cursor: dict[str, int] = {}
        self.calls: list[str] = []

    def complete(self, request_obj: dict, prompt: str, req: ChatRequest) -> str:
        self.calls.append(req.template_id)
        if req.template_id not in self.script:
            raise KeyError(f"scripted backend has no answer for {req.template_id}")
        entry = self.script[req.template_id]
        if callable(entry):
            return entry(req)
        if isinstance(entry, list):
            i = self._cursor.get(req.template_id, 0)
            self._cursor[req.template_id] = i + 1
            return entry[min(i, len(entry) - 1)]
        return entry


class ReplayChatBackend:
    def __init__(self, store: ReplayStore):
        self.store = store

    def complete(self, request_obj: dict, prompt: str, req: ChatRequest) -> str:
        return self.store.get("chat", request_obj)


class RecordingChatBackend:
    def __init__(self, inner, store: ReplayStore):
        self.inner = inner
        self.store = store

    def complete(self, request_obj: dict, prompt: str, req: ChatRequest) -> str:
        response = self.inner.complete(request_obj, prompt, req)
        self.store.put("chat", request_obj, response)
        return response


class RemoteChatBackend:
    """OpenAI-compatible chat-completions endpoint.

    Configuration via env: IGEKIT_CHAT_BASE_URL, IGEKIT_CHAT_API_KEY,
    IGEKIT_CHAT_MODEL. Transport failures retry with exponential backoff.
    """

    def __init__(self, base_url: str | None = None, api_key: str | None = None,
                 model: str | None = None, session: requests.Session | None = None,
                 max_attempts: int = 3, backoff: float = 0.5, timeout: float = 120.0):
        self.base_url = (base_url or os.environ.get("IGEKIT_CHAT_BASE_URL", "")).rstrip("/")
        self.api_key = api_key or os.environ.get("IGEKIT_CHAT_API_KEY", "")
        self.model = model or os.environ.get("IGEKIT_CHAT_MODEL", "")
        self.session = session or requests.Session()
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.timeout = timeout
        if not self.base_url:
            raise ValueError("remote chat backend needs a base URL "
                             "(IGEKIT_CHAT_BASE_URL)")

    def build_payload(self, prompt: str, req: ChatRequest) -> dict:
        content: list[dict] = [{"type": "text", "text": prompt}]
        for image in req.images:
            b64 = base64.b64encode(image.materialize()).decode("ascii")
            content.append({"type": "image_url",
                            "image_url": {"url": f"data:{image.media_type};base64,{b64}"}})
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": req.decode.temperature,
            "max_tokens": req.decode.max_tokens,
        }
        if req.decode.seed is not None:
            payload["seed"] = req.decode.seed
        return payload

    def complete(self, request_obj: dict, prompt: str, req: ChatRequest) -> str:
        payload = self.build_payload(prompt, req)
        if request_obj.get("strict_json_nudge"):
            payload["messages"][0]["content"][0]["text"] += STRICT_JSON_NUDGE
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.session.post(
                    f"{self.base_url}/chat/completions", json=payload,
                    headers={"Authorization": f"Bearer {self.api_key}"},
                    timeout=self.timeout)
            except requests.RequestException as exc:
                last = TransportError(str(exc))
                continue
            if resp.status_code == 429:
                last = RateLimited("chat backend throttled the request")
                continue
            if resp.status_code >= 500:
                last = TransportError(f"chat backend returned {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise TransportError(f"chat backend returned {resp.status_code}: "
                                     f"{resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise TransportError(f"malformed chat completion payload: {exc}") from exc
        raise last if last is not None else TransportError("chat request failed")


class ChatClient:
    """Template-aware chat with schema parsing and bounded re-asks.

    backend_overrides routes individual templates to a different backend
    (e.g. a separate reviewer model for the advisor verdict); everything
    else uses the default backend.
    """

    def __init__(self, backend, max_parse_retries: int = 2, concurrency: int = 4,
                 backend_overrides: Mapping[str, object] | None = None):
        self.backend = backend
        self.backend_overrides = dict(backend_overrides or {})
        self.max_parse_retries = max_parse_retries
        self._gate = threading.Semaphore(concurrency)
        self._lock = threading.Lock()
        self.calls: list[str] = []

    def chat(self, req: ChatRequest, nudge: int = 0) -> str:
        prompt = req.render()
        if nudge:
            prompt += STRICT_JSON_NUDGE
        backend = self.backend_overrides.get(req.template_id, self.backend)
        with self._gate:
            raw = backend.complete(req.request_obj(nudge), prompt, req)
        with self._lock:
            self.calls.append(req.template_id)
        return raw

    def ask(self, template_id: str, slots: Mapping[str, str],
            images: Sequence[ImagePayload] = (), demos: Sequence[str] = (),
            decode: DecodeParams | None = None, schema_id: str | None = None) -> dict:
        spec = templates.TEMPLATES[template_id]
        req = ChatRequest(template_id=template_id, slots=dict(slots),
                          images=tuple(images), demos=tuple(demos),
                          decode=decode or DecodeParams())
        schema = schema_id or spec.schema_id
        last: ParseError | None = None
        for nudge in range(self.max_parse_retries + 1):
            raw = self.chat(req, nudge=nudge)
            try:
                return parse_structured(raw, schema)
            except ParseError as exc:
                last = exc
        assert last is not None
        raise last
