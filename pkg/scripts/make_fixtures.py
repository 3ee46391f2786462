#!/usr/bin/env python3
"""Freeze the deterministic pipeline fixtures.

Writes, under tests/data/:
  images/<scene>.png      committed scene screenshots (stable bytes)
  replay_store/           recorded chat + grounding responses for the
                          scripted scenarios, keyed by canonical request
  golden/<scene>.json     detection output frozen from the recorded run

Re-run only when the scenarios, prompt templates, or pipeline change;
commit the result. The acceptance suite replays this store and compares
bytes against the goldens.
"""

from __future__ import annotations

import shutil
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO))

from igekit.pipeline import PipelineConfig, ProviderBundle, run_pipeline
from igekit.providers.chat import ChatClient, RecordingChatBackend, ScriptedChatBackend
from igekit.providers.grounding import (
    GroundingClient,
    RecordingGroundingBackend,
    SyntheticGroundingBackend,
)
from igekit.providers.replay import ReplayStore
from tests.pipeline_fixtures import ALL_SCENARIOS, load_scenario_with_image, solid_png

DATA = REPO / "tests" / "data"
IMAGE_COLORS = {
    "baseball-01": (20, 40, 80),
    "donut-01": (90, 60, 30),
    "gallery-01": (200, 200, 200),
}


def main() -> None:
    images_dir = DATA / "images"
    store_dir = DATA / "replay_store"
    golden_dir = DATA / "golden"
    images_dir.mkdir(parents=True, exist_ok=True)
    for stale in (store_dir, golden_dir):
        if stale.exists():
            shutil.rmtree(stale)
    golden_dir.mkdir(parents=True)

    for name, color in IMAGE_COLORS.items():
        target = images_dir / f"{name}.png"
        if not target.exists():  # keep byte-stable once committed
            target.write_bytes(solid_png(960, 540, color))

    store = ReplayStore(store_dir)
    for name in ALL_SCENARIOS:
        scenario = load_scenario_with_image(name, images_dir)
        providers = ProviderBundle(
            chat=ChatClient(RecordingChatBackend(
                ScriptedChatBackend(scenario.chat_script), store)),
            grounding=GroundingClient(RecordingGroundingBackend(
                SyntheticGroundingBackend(scenario.ground_rules), store)),
        )
        result = run_pipeline(scenario.scene, scenario.image, scenario.store_text,
                              providers, PipelineConfig())
        (golden_dir / f"{name}.json").write_bytes(result.to_json_bytes())
        print(f"{name}: {len(result.detections)} detections, "
              f"{result.iterations} iteration(s)")

    n_records = sum(1 for _ in store_dir.rglob("*.json"))
    print(f"replay store: {n_records} records in {store_dir}")


if __name__ == "__main__":
    main()
