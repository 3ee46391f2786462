from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class AdapterConfig:
    """Inference knobs applied uniformly to whatever model is wrapped.

    score_floor and max_boxes are adapter-side defaults (the upstream model
    publishes no inference hyperparameters); both are surfaced on the CLI.
    """

    model: str = "stub"
    device: str = "cpu"
    score_floor: float = 0.05
    max_boxes: int = 10

    def __post_init__(self) -> None:
        if not (0.0 <= self.score_floor <= 1.0):
            raise ValueError(f"score_floor must be in [0, 1], got {self.score_floor}")
        if self.max_boxes < 1:
            raise ValueError("max_boxes must be >= 1")
