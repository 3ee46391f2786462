#!/usr/bin/env python3
"""Freeze the protocol conformance suite: golden request/response pairs.

Writes tests/data/fixture.png and tests/data/golden_pairs.json from a stub
run. Commit the output; the conformance tests replay the requests against a
live server and require byte-identical canonical responses.
"""

from __future__ import annotations

import base64
import io
import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from PIL import Image

from ground_adapter.config import AdapterConfig
from ground_adapter.service import serve_ground
from ground_adapter.stub import StubModel

DATA = REPO / "tests" / "data"


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    png_path = DATA / "fixture.png"
    if not png_path.exists():  # keep bytes stable once committed
        buf = io.BytesIO()
        Image.new("RGB", (320, 180), (60, 120, 60)).save(buf, format="PNG")
        png_path.write_bytes(buf.getvalue())
    image_b64 = base64.b64encode(png_path.read_bytes()).decode("ascii")

    requests = [
        ("two descriptions, aligned results",
         {"image_b64": image_b64,
          "descriptions": ["a glazed donut on a tray", "a red lever"]}),
        ("nothing matches", {"image_b64": image_b64,
                             "descriptions": ["an invisible elephant"]}),
        ("several matches in one scene",
         {"image_b64": image_b64,
          "descriptions": ["a baseball next to a bat",
                           "a coffee mug", "a round button"]}),
        ("empty description list", {"image_b64": image_b64, "descriptions": []}),
    ]

    model = StubModel()
    model.load()
    config = AdapterConfig()
    pairs = [{"name": name, "request": req,
              "response": serve_ground(model, config, req)}
             for name, req in requests]
    out = DATA / "golden_pairs.json"
    out.write_text(json.dumps(pairs, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    print(f"wrote {out} ({len(pairs)} pairs)")


if __name__ == "__main__":
    main()
