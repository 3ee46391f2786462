"""Image payloads passed to model backends.

A payload is either source bytes read from disk or a *derived* descriptor
(crop or box-overlay) expressed as deterministic bytes over the source
digest plus parameters. Derivation never re-encodes pixels, so request
digests — and therefore replay keys — are identical across platforms and
imaging-library versions. Remote transports materialize derived payloads
into real pixels at send time via ``materialize``.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from igekit.errors import CropError
from igekit.geometry import BoundingBox


@dataclass(frozen=True)
class ImagePayload:
    data: bytes
    media_type: str = "image/png"
    source: str = ""
    derivation: tuple = ()  # ("crop", x, y, w, h) or ("overlay", boxes...)

    @classmethod
    def from_file(cls, path: str | Path) -> "ImagePayload":
        p = Path(path)
        suffix = p.suffix.lower().lstrip(".") or "png"
        return cls(data=p.read_bytes(), media_type=f"image/{suffix}", source=str(p))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.data).hexdigest()

    def crop(self, box: BoundingBox, image_w: float, image_h: float,
             pad_fraction: float = 0.1) -> "ImagePayload":
        """Descriptor for the padded, clamped crop of this payload.

        Raises CropError when the clamped region degenerates below 1x1.
        """
        pad_w, pad_h = box.w * pad_fraction, box.h * pad_fraction
        padded = BoundingBox(box.x - pad_w, box.y - pad_h,
                             box.w + 2 * pad_w, box.h + 2 * pad_h)
        clamped = padded.clamped(image_w, image_h)
        if clamped is None or clamped.w < 1 or clamped.h < 1:
            raise CropError(f"crop of {box.as_tuple()} degenerates within "
                            f"{image_w}x{image_h}")
        region = tuple(round(v, 4) for v in clamped.as_tuple())
        return self._derive(("crop", *region))

    def overlay(self, boxes: list[BoundingBox]) -> "ImagePayload":
        """Descriptor for this payload with detection boxes drawn on it."""
        coords = tuple(tuple(round(v, 4) for v in b.as_tuple()) for b in boxes)
        return self._derive(("overlay", coords))

    def _derive(self, derivation: tuple) -> "ImagePayload":
        blob = json.dumps({"source_digest": self.digest, "derivation": derivation},
                          sort_keys=True, separators=(",", ":")).encode()
        return ImagePayload(data=b"igekit-derived:" + blob,
                            media_type=self.media_type,
                            source=self.source, derivation=derivation)

    @property
    def is_derived(self) -> bool:
        return bool(self.derivation)

    def materialize(self) -> bytes:
        """Real pixel bytes for transport; decodes only for derived payloads."""
        if not self.is_derived:
            return self.data
        from PIL import Image, ImageDraw

        with Image.open(self.source) as im:
            im = im.convert("RGB")
            kind = self.derivation[0]
            if kind == "crop":
                x, y, w, h = self.derivation[1:]
                im = im.crop((int(x), int(y), int(round(x + w)), int(round(y + h))))
            elif kind == "overlay":
                draw = ImageDraw.Draw(im)
                for (x, y, w, h) in self.derivation[1]:
                    draw.rectangle((x, y, x + w, y + h), outline=(255, 0, 0), width=2)
            buf = io.BytesIO()
            im.save(buf, format="PNG")
            return buf.getvalue()

    def key_fields(self) -> dict:
        """Stable identity used in canonical request serialization."""
        return {"image_digest": self.digest, "media_type": self.media_type}
