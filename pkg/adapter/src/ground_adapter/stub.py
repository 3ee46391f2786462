"""No-ML stub model: regex rules mapped to boxes.

Rules use *normalized xyxy* coordinates (fractions of image width/height),
deliberately a different convention from the wire protocol so the adapter's
centralized coordinate conversion is exercised by every conformance run.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

DEFAULT_RULES = [
    {"pattern": r"donut", "box": [0.10, 0.15, 0.16, 0.25], "score": 0.9},
    {"pattern": r"baseball|ball\b", "box": [0.44, 0.37, 0.50, 0.48], "score": 0.92},
    {"pattern": r"\bbat\b", "box": [0.10, 0.56, 0.15, 0.85], "score": 0.84},
    {"pattern": r"button", "box": [0.45, 0.45, 0.55, 0.55], "score": 0.8},
    {"pattern": r"mug|cup", "box": [0.31, 0.55, 0.36, 0.63], "score": 0.7},
]


class StubModel:
    model_tag = "stub-regex-v1"
    box_format = "xyxy-normalized"

    def __init__(self, rules: list[dict] | None = None):
        self._raw_rules = rules if rules is not None else DEFAULT_RULES
        self._compiled: list[tuple[re.Pattern, list[float], float]] | None = None

    @classmethod
    def from_rules_file(cls, path: str | Path) -> "StubModel":
        return cls(rules=json.loads(Path(path).read_text(encoding="utf-8")))

    @property
    def ready(self) -> bool:
        return self._compiled is not None

    def load(self) -> None:
        self._compiled = [
            (re.compile(rule["pattern"], re.IGNORECASE),
             [float(v) for v in rule["box"]], float(rule["score"]))
            for rule in self._raw_rules
        ]

    def infer(self, image_size: tuple[int, int],
              descriptions: list[str]) -> list[list[tuple[list[float], float]]]:
        """Per description: (box in the model's native format, score) pairs."""
        if self._compiled is None:
            raise RuntimeError("model not loaded")
        out = []
        for description in descriptions:
            hits = [(list(box), score) for pattern, box, score in self._compiled
                    if pattern.search(description)]
            out.append(hits)
        return out
