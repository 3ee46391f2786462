"""Scripted end-to-end scenarios for pipeline tests and the frozen corpus.

Each scenario bundles a scene, its (tiny) screenshot payload, the app store
text, a scripted chat backend, and synthetic grounding rules. The same
definitions drive the unit tests, the recorded replay store, and the golden
detection files.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

from igekit.dataset import Scene
from igekit.geometry import BoundingBox, ScoredBox
from igekit.pipeline import PipelineConfig, ProviderBundle
from igekit.providers.chat import ChatClient, ScriptedChatBackend
from igekit.providers.grounding import GroundingClient, SyntheticGroundingBackend
from igekit.providers.payloads import ImagePayload


def solid_png(width: int, height: int, rgb: tuple[int, int, int]) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.new("RGB", (width, height), rgb).save(buf, format="PNG")
    return buf.getvalue()


@dataclass
class Scenario:
    scene: Scene
    image: ImagePayload
    store_text: str
    chat_script: dict
    ground_rules: list


def _j(**kwargs) -> str:
    return json.dumps(kwargs)


BASEBALL_BOX = ScoredBox(BoundingBox(420, 200, 60, 60), 0.92)
BAT_BOX = ScoredBox(BoundingBox(100, 300, 40, 160), 0.84)
DONUT_BOX = ScoredBox(BoundingBox(100, 80, 50, 50), 0.9)
MUG_BOX = ScoredBox(BoundingBox(300, 300, 40, 40), 0.7)


def baseball_scenario(image: ImagePayload | None = None) -> Scenario:
    """Two candidates, both grounded and verified in one iteration."""
    scene = Scene(scene_id="baseball-01", app_id="app-slugger", width=960,
                  height=540, image_uri="baseball-01.png")
    store_text = ("Slugger Cage VR drops you into a neon batting cage. "
                  "Swing the bat, time the pitch, chase high scores. "
                  "Genres: Sports, Arcade. Supports most PC headsets. English.")
    script = {
        "PI.1": _j(app_name="Slugger Cage VR", genres=["sports", "arcade"],
                   content_theme="batting cage practice",
                   device_support="PC headsets",
                   gameplay="swing a bat to hit pitched balls",
                   interaction_mechanisms="grab and swing with controllers",
                   language="English"),
        "PI.2": _j(scene_summary="A neon batting cage: a baseball hovers over "
                                 "the plate, a bat leans on the fence, a "
                                 "scoreboard glows in the back."),
        "PII.1": _j(candidates=["baseball", "bat"]),
        "PII.2": _j(dimensions=[
            {"candidate": "baseball", "dimensions": ["color", "size", "shape", "location"]},
            {"candidate": "bat", "dimensions": ["color", "shape", "location"]},
        ]),
        "PII.3": _j(questions=[
            {"candidate": "baseball", "dimension": "color", "question": "What color is the ball?"},
            {"candidate": "baseball", "dimension": "size", "question": "How big is the ball?"},
            {"candidate": "baseball", "dimension": "shape", "question": "What shape is the ball?"},
            {"candidate": "baseball", "dimension": "location", "question": "Where does the ball hover?"},
            {"candidate": "bat", "dimension": "color", "question": "What color is the bat?"},
            {"candidate": "bat", "dimension": "shape", "question": "What shape is the bat?"},
            {"candidate": "bat", "dimension": "location", "question": "Where does the bat rest?"},
        ]),
        "PII.4": _j(candidates=[
            {"name": "baseball",
             "answers": [
                 {"dimension": "color", "question": "What color is the ball?",
                  "answer": "white with black stitching"},
                 {"dimension": "size", "question": "How big is the ball?", "answer": "small"},
                 {"dimension": "shape", "question": "What shape is the ball?", "answer": "spherical"},
                 {"dimension": "location", "question": "Where does the ball hover?",
                  "answer": "over the home plate"},
             ],
             "description": "a small white baseball with black stitching "
                            "hovering over the home plate"},
            {"name": "bat",
             "answers": [
                 {"dimension": "color", "question": "What color is the bat?", "answer": "wooden brown"},
                 {"dimension": "shape", "question": "What shape is the bat?", "answer": "long and tapered"},
                 {"dimension": "location", "question": "Where does the bat rest?",
                  "answer": "leaning on the cage fence"},
             ],
             "description": "a wooden brown bat leaning on the cage fence"},
        ]),
        "PII.5": _j(verdict="match", reason="the crop shows the described element"),
        "PII.7": _j(confident=True, concerns=""),
        "PIII": _j(interactable=True, rationale="the app is about hitting and "
                                                "swinging these"),
    }
    rules = [("baseball", [BASEBALL_BOX]), ("bat", [BAT_BOX])]
    return Scenario(scene=scene,
                    image=image or ImagePayload(solid_png(960, 540, (20, 40, 80)),
                                                source="baseball-01.png"),
                    store_text=store_text, chat_script=script, ground_rules=rules)


def donut_scenario(image: ImagePayload | None = None) -> Scenario:
    """Exercises the reflection loop: one miss refined into a second pass."""
    scene = Scene(scene_id="donut-01", app_id="app-bakery", width=960,
                  height=540, image_uri="donut-01.png")
    store_text = ("Bakery Rush VR: run a pastry counter, hand out donuts and "
                  "drinks before the queue melts down. Genre: Simulation.")

    def pii1(req):
        if req.slots.get("feedback"):
            return _j(candidates=["coffee mug"])
        return _j(candidates=["donut", "coffee mug"])

    def pii4(req):
        if req.slots.get("feedback"):
            return _j(candidates=[{
                "name": "coffee mug",
                "answers": [
                    {"dimension": "material", "question": "What is the mug made of?",
                     "answer": "white ceramic"},
                    {"dimension": "location", "question": "Where does the mug sit?",
                     "answer": "left edge of the counter"},
                ],
                "description": "a white ceramic mug with steam on the left "
                               "edge of the counter"}])
        return _j(candidates=[
            {"name": "donut",
             "answers": [
                 {"dimension": "color", "question": "What does the donut look like?",
                  "answer": "glazed with colorful sprinkles"},
                 {"dimension": "location", "question": "Where is the donut?",
                  "answer": "middle of the display tray"},
             ],
             "description": "a glazed donut topped with colorful sprinkles in "
                            "the middle of the display tray"},
            {"name": "coffee mug",
             "answers": [
                 {"dimension": "location", "question": "Where is the mug?",
                  "answer": "next to the register"},
             ],
             "description": "a coffee mug next to the register"},
        ])

    def pii2(req):
        if "ceramic" in req.slots.get("candidates", "") or "coffee mug" == req.slots.get("candidates", "").strip("- \n"):
            return _j(dimensions=[{"candidate": "coffee mug",
                                   "dimensions": ["material", "location"]}])
        return _j(dimensions=[
            {"candidate": "donut", "dimensions": ["color", "location"]},
            {"candidate": "coffee mug", "dimensions": ["location"]},
        ])

    def pii3(req):
        listing = req.slots["candidates_with_dimensions"]
        if "donut" in listing:
            return _j(questions=[
                {"candidate": "donut", "dimension": "color",
                 "question": "What does the donut look like?"},
                {"candidate": "donut", "dimension": "location", "question": "Where is the donut?"},
                {"candidate": "coffee mug", "dimension": "location", "question": "Where is the mug?"},
            ])
        return _j(questions=[
            {"candidate": "coffee mug", "dimension": "material",
             "question": "What is the mug made of?"},
            {"candidate": "coffee mug", "dimension": "location",
             "question": "Where does the mug sit?"},
        ])

    def pii7(req):
        if "missed" in req.slots["ledger_summary"]:
            return _j(confident=False,
                      concerns="the mug description is too vague to locate; "
                               "mention material and exact position")
        return _j(confident=True, concerns="")

    script = {
        "PI.1": _j(app_name="Bakery Rush VR", genres=["simulation"],
                   content_theme="pastry counter service", device_support="",
                   gameplay="serve pastries and drinks to customers",
                   interaction_mechanisms="grab and hand over items",
                   language="English"),
        "PI.2": _j(scene_summary="A pastry counter: a sprinkled donut on a "
                                 "display tray, a coffee mug by the register, "
                                 "a menu board behind."),
        "PII.1": pii1,
        "PII.2": pii2,
        "PII.3": pii3,
        "PII.4": pii4,
        "PII.5": _j(verdict="match", reason="crop matches the description"),
        "PII.6": _j(verdict="missing_detection",
                    reason="a mug is visible near the counter but the "
                           "description lacks distinguishing detail"),
        "PII.7": pii7,
        "PIII": _j(interactable=True, rationale="counter items are meant to be "
                                                "picked up and served"),
    }
    rules = [("donut", [DONUT_BOX]), ("white ceramic mug", [MUG_BOX])]
    return Scenario(scene=scene,
                    image=image or ImagePayload(solid_png(960, 540, (90, 60, 30)),
                                                source="donut-01.png"),
                    store_text=store_text, chat_script=script, ground_rules=rules)


def gallery_scenario(image: ImagePayload | None = None) -> Scenario:
    """A scene with nothing to act on: zero candidates, empty detections."""
    scene = Scene(scene_id="gallery-01", app_id="app-gallery", width=960,
                  height=540, image_uri="gallery-01.png")
    store_text = ("Quiet Gallery: drift through a sealed exhibition hall. "
                  "Pure viewing, no hands needed.")
    script = {
        "PI.1": _j(app_name="Quiet Gallery", genres=["experience"],
                   content_theme="art exhibition walkthrough", device_support="",
                   gameplay="look around; nothing is manipulated",
                   interaction_mechanisms="gaze only", language="English"),
        "PI.2": _j(scene_summary="A sealed gallery hall with paintings behind "
                                 "glass; nothing within reach."),
        "PII.1": _j(candidates=[]),
    }
    return Scenario(scene=scene,
                    image=image or ImagePayload(solid_png(960, 540, (200, 200, 200)),
                                                source="gallery-01.png"),
                    store_text=store_text, chat_script=script, ground_rules=[])


ALL_SCENARIOS = {
    "baseball-01": baseball_scenario,
    "donut-01": donut_scenario,
    "gallery-01": gallery_scenario,
}


def scripted_providers(scenario: Scenario) -> ProviderBundle:
    return ProviderBundle(
        chat=ChatClient(ScriptedChatBackend(scenario.chat_script)),
        grounding=GroundingClient(SyntheticGroundingBackend(scenario.ground_rules)),
    )


def load_scenario_with_image(name: str, images_dir: Path) -> Scenario:
    build = ALL_SCENARIOS[name]
    image = ImagePayload.from_file(images_dir / f"{name}.png")
    return build(image=image)
