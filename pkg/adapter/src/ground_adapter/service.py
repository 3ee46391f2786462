"""HTTP service for the /ground wire protocol.

Request handling is a pure function (``serve_ground``) wrapped by a thin
ThreadingHTTPServer. Coordinate conversion is centralized here: models
declare their native box format and the adapter always answers in absolute
top-left (x, y, w, h), clamped to the image, filtered by the score floor,
and truncated to max_boxes per description. Inference runs under a lock
(bounded concurrency of one model instance).
"""

from __future__ import annotations

import base64
import binascii
import io
import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from PIL import Image, UnidentifiedImageError

from ground_adapter.config import AdapterConfig

log = logging.getLogger(__name__)


class SchemaViolation(ValueError):
    """Request fails wire-protocol validation (HTTP 400)."""


def _decode_image(image_b64: str) -> tuple[int, int]:
    try:
        raw = base64.b64decode(image_b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise SchemaViolation(f"image_b64 is not valid base64: {exc}") from exc
    try:
        with Image.open(io.BytesIO(raw)) as im:
            return im.size
    except UnidentifiedImageError as exc:
        raise SchemaViolation("image_b64 does not decode to an image") from exc


def _to_absolute_xywh(box: list[float], box_format: str,
                      width: int, height: int) -> tuple[float, float, float, float]:
    if box_format == "xyxy-normalized":
        x1, y1, x2, y2 = (box[0] * width, box[1] * height,
                          box[2] * width, box[3] * height)
    elif box_format == "xyxy":
        x1, y1, x2, y2 = box
    elif box_format == "xywh":
        x1, y1 = box[0], box[1]
        x2, y2 = box[0] + box[2], box[1] + box[3]
    else:
        raise ValueError(f"model declares unknown box format {box_format!r}")
    # clamp into the image, drop degenerate remainders at the caller
    x1, x2 = max(0.0, min(x1, width)), max(0.0, min(x2, width))
    y1, y2 = max(0.0, min(y1, height)), max(0.0, min(y2, height))
    return x1, y1, x2 - x1, y2 - y1


def serve_ground(model, config: AdapterConfig, request_doc: dict) -> dict:
    """Wire request -> wire response (no HTTP)."""
    if not isinstance(request_doc, dict):
        raise SchemaViolation("request body must be a JSON object")
    if "image_b64" not in request_doc or not isinstance(request_doc["image_b64"], str):
        raise SchemaViolation("missing or non-string 'image_b64'")
    descriptions = request_doc.get("descriptions")
    if not isinstance(descriptions, list) or \
            not all(isinstance(d, str) for d in descriptions):
        raise SchemaViolation("'descriptions' must be a list of strings")

    width, height = _decode_image(request_doc["image_b64"])
    raw_results = model.infer((width, height), descriptions)

    results = []
    for hits in raw_results:
        boxes = []
        for native_box, score in hits:
            if score < config.score_floor:
                continue
            x, y, w, h = _to_absolute_xywh(native_box, model.box_format,
                                           width, height)
            if w <= 0 or h <= 0:
                continue
            boxes.append({"x": x, "y": y, "w": w, "h": h, "score": score})
        boxes.sort(key=lambda b: (-b["score"], b["x"], b["y"]))
        results.append({"boxes": boxes[:config.max_boxes]})
    return {"results": results}


class _Handler(BaseHTTPRequestHandler):
    server: "AdapterServer"

    def _send_json(self, status: int, doc: dict) -> None:
        body = json.dumps(doc, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:  # noqa: N802 (http.server API)
        if self.path != "/health":
            self._send_json(404, {"error": "unknown endpoint"})
            return
        if not self.server.model.ready:
            self._send_json(503, {"error": "model not loaded"})
            return
        self._send_json(200, {"status": "ok", "model_tag": self.server.model.model_tag})

    def do_POST(self) -> None:  # noqa: N802
        if self.path != "/ground":
            self._send_json(404, {"error": "unknown endpoint"})
            return
        if not self.server.model.ready:
            self._send_json(503, {"error": "model not loaded"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            doc = json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            self._send_json(400, {"error": f"invalid JSON body: {exc}"})
            return
        try:
            with self.server.inference_lock:
                response = serve_ground(self.server.model, self.server.config, doc)
        except SchemaViolation as exc:
            self._send_json(400, {"error": str(exc)})
        except Exception as exc:  # model failure
            log.exception("inference failed")
            self._send_json(500, {"error": f"model failure: {exc}"})
        else:
            self._send_json(200, response)

    def log_message(self, fmt: str, *args) -> None:
        log.debug("%s - %s", self.address_string(), fmt % args)


class AdapterServer(ThreadingHTTPServer):
    def __init__(self, address: tuple[str, int], model, config: AdapterConfig):
        super().__init__(address, _Handler)
        self.model = model
        self.config = config
        self.inference_lock = threading.Lock()


def make_server(host: str, port: int, model, config: AdapterConfig) -> AdapterServer:
    """Server is created unready; call model.load() to flip /health to 200."""
    return AdapterServer((host, port), model, config)
