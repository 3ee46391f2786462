"""Monte-Carlo simulation of black-box GUI testing on annotated scenes.

Interactions are instantaneous points dropped on the scene image once per
interval. The random strategy samples uniformly over the image; the guided
strategy follows predicted boxes with probability p = 1 - t/T (decaying as
the test progresses) and explores uniformly otherwise. A point is effective
when it lands inside any interactable ground-truth box (half-open
membership); an element is covered once at least one point has landed in
its box.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from igekit import kernels
from igekit.dataset import Annotation, Scene
from igekit.errors import DomainError
from igekit.geometry import BoundingBox

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimulationConfig:
    duration: float = 60.0       # minutes
    interval: float = 1.0        # minutes per interaction
    runs: int = 5
    seed: int = 0
    strategy: str = "random"     # "random" | "guided"
    box_weighting: str = "per-box"  # "per-box" | "area"

    def __post_init__(self) -> None:
        if self.duration <= 0 or self.interval <= 0:
            raise ValueError("duration and interval must be positive")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.strategy not in ("random", "guided"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.box_weighting not in ("per-box", "area"):
            raise ValueError(f"unknown box weighting {self.box_weighting!r}")


@dataclass(frozen=True)
class InteractionPoint:
    scene_id: str
    t: float
    x: float
    y: float


def guidance_probability(t: float, duration: float) -> float:
    """Probability of following the predicted boxes at minute t."""
    if not (0.0 <= t <= duration):
        raise DomainError(f"t={t} outside [0, {duration}]")
    return 1.0 - t / duration


def next_point(scene: Scene, strategy: str, t: float, rng: random.Random,
               guidance_boxes: Sequence[BoundingBox] = (),
               duration: float = 60.0,
               box_weighting: str = "per-box") -> InteractionPoint:
    """One interaction point; guided degrades to random without boxes."""
    guided = strategy == "guided" and guidance_boxes
    if guided and rng.random() < guidance_probability(t, duration):
        if box_weighting == "area":
            areas = [b.area for b in guidance_boxes]
            box = rng.choices(guidance_boxes, weights=areas, k=1)[0]
        else:
            box = guidance_boxes[rng.randrange(len(guidance_boxes))]
        x = box.x + rng.random() * box.w
        y = box.y + rng.random() * box.h
    else:
        x = rng.random() * scene.width
        y = rng.random() * scene.height
    return InteractionPoint(scene_id=scene.scene_id, t=t, x=x, y=y)


def is_effective(point: InteractionPoint, annotations: Sequence[Annotation]) -> bool:
    """True when the point lands inside any interactable element's box."""
    return any(a.box.contains_point(point.x, point.y) for a in annotations)


def coverage(points: Sequence[InteractionPoint],
             annotations: Sequence[Annotation]) -> float:
    """Fraction of elements touched by at least one point; 1.0 with none."""
    if not annotations:
        return 1.0
    covered = sum(
        1 for a in annotations
        if any(a.box.contains_point(p.x, p.y) for p in points))
    return covered / len(annotations)


@dataclass
class SimulationTrace:
    config: SimulationConfig
    minutes: list[float]
    # aggregate cumulative series averaged over runs then scenes
    effective_count: list[float]
    coverage: list[float]
    per_scene: dict[str, dict] = field(default_factory=dict)
    guided_fallback: list[str] = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "config": {
                "duration": self.config.duration,
                "interval": self.config.interval,
                "runs": self.config.runs,
                "seed": self.config.seed,
                "strategy": self.config.strategy,
                "box_weighting": self.config.box_weighting,
            },
            "minutes": self.minutes,
            "effective_count": self.effective_count,
            "coverage": self.coverage,
            "per_scene": self.per_scene,
            "guided_fallback": sorted(self.guided_fallback),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["minute", "effective_count", "coverage"])
        for m, e, c in zip(self.minutes, self.effective_count, self.coverage):
            writer.writerow([f"{m:g}", f"{e:.6f}", f"{c:.6f}"])
        return buf.getvalue()


def derive_seed(seed: int, run: int, scene_id: str) -> int:
    blob = f"{seed}:{run}:{scene_id}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


def _run_series(scene: Scene, annotations: Sequence[Annotation],
                guidance_boxes: Sequence[BoundingBox], config: SimulationConfig,
                run: int) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative (effective_count, coverage) per minute for one run."""
    rng = random.Random(derive_seed(config.seed, run, scene.scene_id))
    steps = int(round(config.duration / config.interval))
    xs, ys = np.empty(steps), np.empty(steps)
    for k in range(steps):
        t = (k + 1) * config.interval
        point = next_point(scene, config.strategy, t, rng,
                           guidance_boxes=guidance_boxes,
                           duration=config.duration,
                           box_weighting=config.box_weighting)
        xs[k], ys[k] = point.x, point.y

    boxes = np.asarray([a.box.as_tuple() for a in annotations],
                       dtype=np.float64).reshape(-1, 4)
    effective = np.cumsum(kernels.points_in_any_box(xs, ys, boxes).astype(np.float64))
    if len(annotations) == 0:
        cov = np.ones(steps)
    else:
        first_hit = kernels.first_hit_index(xs, ys, boxes)
        covered_at = np.zeros(steps)
        for idx in first_hit:
            if idx >= 0:
                covered_at[idx] += 1
        cov = np.cumsum(covered_at) / len(annotations)
    return effective, cov


def simulate(scenes: Sequence[Scene],
             annotations_by_scene: Mapping[str, Sequence[Annotation]],
             detections_by_scene: Mapping[str, Sequence[BoundingBox]] | None,
             config: SimulationConfig) -> SimulationTrace:
    """Simulate every scene x run and average per-minute cumulative metrics.

    Guided simulation without detections for a scene degrades to random for
    that scene (logged). Ground truths are the scene's interactable
    annotations only.
    """
    steps = int(round(config.duration / config.interval))
    minutes = [(k + 1) * config.interval for k in range(steps)]

    per_scene_mean_eff: dict[str, np.ndarray] = {}
    per_scene_mean_cov: dict[str, np.ndarray] = {}
    all_eff, all_cov = [], []
    fallback_scenes: list[str] = []

    for scene in scenes:
        anns = [a for a in annotations_by_scene.get(scene.scene_id, ())
                if a.interactable]
        if not anns:
            log.info("scene %s has no interactable elements; coverage pinned at 1.0",
                     scene.scene_id)
        guidance: Sequence[BoundingBox] = ()
        if config.strategy == "guided":
            guidance = tuple((detections_by_scene or {}).get(scene.scene_id, ()))
            if not guidance:
                fallback_scenes.append(scene.scene_id)
                log.warning("scene %s: guided strategy without detections; "
                            "falling back to random sampling", scene.scene_id)
        run_eff, run_cov = [], []
        for run in range(config.runs):
            eff, cov = _run_series(scene, anns, guidance, config, run)
            run_eff.append(eff)
            run_cov.append(cov)
            all_eff.append(eff)
            all_cov.append(cov)
        per_scene_mean_eff[scene.scene_id] = np.mean(run_eff, axis=0)
        per_scene_mean_cov[scene.scene_id] = np.mean(run_cov, axis=0)

    # scenes-then-runs vs runs-then-scenes must agree (associativity check)
    agg_eff = np.mean(list(per_scene_mean_eff.values()), axis=0)
    agg_cov = np.mean(list(per_scene_mean_cov.values()), axis=0)
    flat_eff = np.mean(all_eff, axis=0)
    flat_cov = np.mean(all_cov, axis=0)
    assert np.allclose(agg_eff, flat_eff, atol=1e-12)
    assert np.allclose(agg_cov, flat_cov, atol=1e-12)

    per_scene = {
        sid: {"effective_count": [float(v) for v in per_scene_mean_eff[sid]],
              "coverage": [float(v) for v in per_scene_mean_cov[sid]]}
        for sid in per_scene_mean_eff
    }
    return SimulationTrace(
        config=config,
        minutes=minutes,
        effective_count=[float(v) for v in agg_eff],
        coverage=[float(v) for v in agg_cov],
        per_scene=per_scene,
        guided_fallback=fallback_scenes,
    )
