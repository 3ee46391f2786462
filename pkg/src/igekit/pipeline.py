"""Three-stage detection of interactable elements in one VR scene.

Stage 1 comprehends app-level and scene-level context; stage 2 mines
candidate descriptions, grounds them to boxes, and verifies/refines them in
a bounded reviewer-gated loop; stage 3 classifies interactability in
context. Output detections are post-processed by the oversize filter and
class-agnostic NMS.

Candidates are tracked in a per-run ledger keyed by case-folded description
text: rejected candidates are never revisited, verified candidates persist
across loop iterations, and still-missing candidates retry only through a
refined (new) description.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Mapping

from igekit.dataset import Scene
from igekit.errors import CropError, ParseError, ProviderError
from igekit.geometry import BoundingBox, ScoredBox, filter_oversized, nms_indices
from igekit.providers import templates
from igekit.providers.chat import ChatClient
from igekit.providers.grounding import GroundingClient, GroundRequest
from igekit.providers.payloads import ImagePayload

log = logging.getLogger(__name__)

GLOBAL_CONTEXT_FIELDS = ("app_name", "genres", "content_theme", "device_support",
                         "gameplay", "interaction_mechanisms", "language")


@dataclass(frozen=True)
class GlobalContext:
    app_name: str = ""
    genres: tuple[str, ...] = ()
    content_theme: str = ""
    device_support: str = ""
    gameplay: str = ""
    interaction_mechanisms: str = ""
    language: str = ""

    def render(self) -> str:
        parts = []
        for name in GLOBAL_CONTEXT_FIELDS:
            value = getattr(self, name)
            if name == "genres":
                value = ", ".join(value)
            parts.append(f"{name}: {value}")
        return "\n".join(parts)


@dataclass(frozen=True)
class LocalContext:
    scene_summary: str = ""


@dataclass(frozen=True)
class SceneContext:
    global_ctx: GlobalContext = field(default_factory=GlobalContext)
    local_ctx: LocalContext = field(default_factory=LocalContext)


@dataclass(frozen=True)
class CharacteristicsDescription:
    candidate_name: str
    dimensions: tuple[dict, ...]  # {dimension_name, question, answer}
    cd_text: str

    @property
    def key(self) -> str:
        return self.cd_text.casefold()


STATUSES = ("unground", "detected", "verified", "rejected", "missed")


@dataclass(frozen=True)
class CandidateState:
    cd: CharacteristicsDescription
    boxes: tuple[ScoredBox, ...] = ()
    status: str = "unground"
    advisor_notes: str = ""
    iteration: int = 1


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    category: str
    interactable: bool
    confidence: float
    cd_text: str
    iterations_used: int


@dataclass(frozen=True)
class PipelineConfig:
    max_iterations: int = 3
    ablate_context: bool = False
    ablate_reflection: bool = False
    ablate_classification: bool = False
    crop_pad_fraction: float = 0.1
    oversize_fraction: float = 0.9
    nms_iou: float = 0.7
    demo_seed: int = 0


@dataclass
class ProviderBundle:
    chat: ChatClient
    grounding: GroundingClient


@dataclass
class SceneResult:
    scene_id: str
    detections: list[Detection]
    iterations: int
    chat_calls: int
    ground_calls: int
    stage_calls: Counter

    def to_doc(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "detections": [
                {"x": d.box.x, "y": d.box.y, "w": d.box.w, "h": d.box.h,
                 "score": d.confidence, "category": d.category,
                 "interactable": d.interactable,
                 "provenance": {"cd_text": d.cd_text,
                                "iterations_used": d.iterations_used}}
                for d in self.detections
            ],
            "stats": {
                "iterations": self.iterations,
                "chat_calls": self.chat_calls,
                "ground_calls": self.ground_calls,
                "stage_calls": dict(sorted(self.stage_calls.items())),
            },
        }

    def to_json_bytes(self) -> bytes:
        return (json.dumps(self.to_doc(), sort_keys=True, indent=2,
                           ensure_ascii=True) + "\n").encode("utf-8")


class ScenePipeline:
    """Runs the full chain for a single scene; one instance per scene."""

    def __init__(self, scene: Scene, image: ImagePayload, store_text: str,
                 providers: ProviderBundle, config: PipelineConfig):
        self.scene = scene
        self.image = image
        self.store_text = store_text
        self.providers = providers
        self.config = config
        self.stage_calls: Counter = Counter()
        self.ground_calls = 0
        self.demos = templates.select_demos(config.demo_seed)

    # -- plumbing ------------------------------------------------------------

    def _ask(self, template_id: str, slots: Mapping[str, str],
             images=(), with_demos: bool = False) -> dict:
        self.stage_calls[templates.TEMPLATES[template_id].stage] += 1
        demos = self.demos if with_demos else ()
        return self.providers.chat.ask(template_id, slots, images=images, demos=demos)

    # -- stage 1: context ------------------------------------------------------

    def comprehend_context(self) -> SceneContext:
        if self.config.ablate_context:
            return SceneContext()
        if self.store_text.strip():
            doc = self._ask("PI.1", {"store_text": self.store_text}, with_demos=True)
            global_ctx = GlobalContext(
                app_name=doc["app_name"], genres=tuple(doc["genres"]),
                content_theme=doc["content_theme"],
                device_support=doc["device_support"], gameplay=doc["gameplay"],
                interaction_mechanisms=doc["interaction_mechanisms"],
                language=doc["language"])
        else:
            log.warning("scene %s: empty store text; using degenerate app context",
                        self.scene.scene_id)
            global_ctx = GlobalContext()
        doc = self._ask("PI.2", {"global_context": global_ctx.render()},
                        images=(self.image,))
        return SceneContext(global_ctx=global_ctx,
                            local_ctx=LocalContext(scene_summary=doc["scene_summary"]))

    # -- stage 2: mining / grounding / reflection ------------------------------

    def mine_characteristics(self, ctx: SceneContext,
                             feedback: str = "") -> list[CharacteristicsDescription]:
        slots = {"global_context": ctx.global_ctx.render(),
                 "local_context": ctx.local_ctx.scene_summary,
                 "feedback": feedback}
        listed = self._ask("PII.1", slots, images=(self.image,), with_demos=True)
        candidates = listed["candidates"]
        if not candidates:
            return []

        dims_doc = self._ask("PII.2", {
            "global_context": slots["global_context"],
            "local_context": slots["local_context"],
            "candidates": "\n".join(f"- {c}" for c in candidates),
        }, images=(self.image,))
        dims_by_candidate = {d["candidate"]: d["dimensions"]
                             for d in dims_doc["dimensions"]}

        listing = "\n".join(
            f"- {c}: {', '.join(dims_by_candidate.get(c, [])) or 'appearance'}"
            for c in candidates)
        q_doc = self._ask("PII.3", {"candidates_with_dimensions": listing})
        questions_text = "\n".join(
            f"- [{q['candidate']}] ({q['dimension']}) {q['question']}"
            for q in q_doc["questions"])

        a_doc = self._ask("PII.4", {
            "global_context": slots["global_context"],
            "local_context": slots["local_context"],
            "questions": questions_text,
            "feedback": feedback,
        }, images=(self.image,), with_demos=True)

        out: list[CharacteristicsDescription] = []
        seen: set[str] = set()
        for item in a_doc["candidates"]:
            dims = tuple({"dimension_name": a["dimension"], "question": a["question"],
                          "answer": a["answer"]} for a in item["answers"])
            cd = CharacteristicsDescription(candidate_name=item["name"],
                                            dimensions=dims,
                                            cd_text=item["description"])
            if cd.key not in seen:
                seen.add(cd.key)
                out.append(cd)
        return out

    def detect_candidates(self, cds: list[CharacteristicsDescription],
                          iteration: int) -> list[CandidateState]:
        if not cds:
            return []
        req = GroundRequest(image=self.image,
                            descriptions=tuple(cd.cd_text for cd in cds))
        resp = self.providers.grounding.ground(
            req, image_size=(self.scene.width, self.scene.height))
        self.ground_calls += 1
        states = []
        for cd, boxes in zip(cds, resp.results):
            status = "detected" if boxes else "missed"
            states.append(CandidateState(cd=cd, boxes=boxes, status=status,
                                         iteration=iteration))
        return states

    def _verify_detected(self, state: CandidateState) -> CandidateState:
        kept, notes = [], []
        for sb in state.boxes:
            try:
                crop = self.image.crop(sb.box, self.scene.width, self.scene.height,
                                       pad_fraction=self.config.crop_pad_fraction)
            except CropError as exc:
                notes.append(f"box {sb.box.as_tuple()}: crop failed ({exc})")
                continue
            doc = self._ask("PII.5", {"cd_text": state.cd.cd_text},
                            images=(crop, self.image))
            if doc["verdict"] == "match":
                kept.append(sb)
            else:
                notes.append(f"box {sb.box.as_tuple()}: {doc['reason'] or 'mismatch'}")
        if kept:
            return replace(state, boxes=tuple(kept), status="verified",
                           advisor_notes="; ".join(notes))
        return replace(state, boxes=(), status="rejected",
                       advisor_notes="; ".join(notes) or "no box survived verification")

    def _diagnose_missed(self, state: CandidateState,
                         detected_boxes: list[ScoredBox],
                         detected_names: list[str]) -> tuple[CandidateState, str]:
        overlay = self.image.overlay([sb.box for sb in detected_boxes])
        summary = "\n".join(
            f"- {name}: ({sb.box.x:.0f}, {sb.box.y:.0f}, {sb.box.w:.0f}, {sb.box.h:.0f})"
            for name, sb in zip(detected_names, detected_boxes)) or "(nothing detected)"
        doc = self._ask("PII.6", {"cd_text": state.cd.cd_text,
                                  "detected_summary": summary}, images=(overlay,))
        if doc["verdict"] == "hallucination":
            return (replace(state, status="rejected",
                            advisor_notes=doc["reason"] or "diagnosed as hallucination"), "")
        note = doc["reason"] or "likely missed by the detector"
        return replace(state, advisor_notes=note), f"{state.cd.candidate_name}: {note}"

    def reflect(self, new_states: list[CandidateState],
                ledger: dict[str, CandidateState]) -> tuple[dict, bool, str]:
        """Verify newly detected, diagnose newly missed, ask the reviewer.

        Returns (updated ledger, reviewer confident, feedback for re-mining).
        """
        for state in new_states:
            if state.status == "detected":
                ledger[state.cd.key] = self._verify_detected(state)
        # Diagnosis of misses sees everything verified so far drawn on the scene.
        anchors = [(s.cd.candidate_name, sb)
                   for s in ledger.values() if s.status in ("verified", "detected")
                   for sb in s.boxes]
        miss_notes: list[str] = []
        for state in new_states:
            if state.status == "missed":
                names = [n for n, _ in anchors]
                boxes = [b for _, b in anchors]
                updated, note = self._diagnose_missed(state, boxes, names)
                ledger[state.cd.key] = updated
                if note:
                    miss_notes.append(note)

        if not ledger:
            return ledger, True, ""
        lines = [f"- {s.cd.candidate_name} | {s.status} | {s.advisor_notes or '-'}"
                 for s in ledger.values()]
        doc = self._ask("PII.7", {"ledger_summary": "\n".join(lines)})
        feedback_parts = miss_notes + ([doc["concerns"]] if doc["concerns"] else [])
        return ledger, doc["confident"], "\n".join(feedback_parts)

    # -- stage 3: interactability ---------------------------------------------

    def classify_interactability(self, ctx: SceneContext,
                                 verified: list[CandidateState]) -> dict[str, tuple[bool, str]]:
        out: dict[str, tuple[bool, str]] = {}
        for state in verified:
            if self.config.ablate_classification:
                out[state.cd.key] = (True, "classification disabled")
                continue
            try:
                doc = self._ask("PIII", {
                    "global_context": ctx.global_ctx.render(),
                    "local_context": ctx.local_ctx.scene_summary,
                    "candidate_name": state.cd.candidate_name,
                    "cd_text": state.cd.cd_text,
                }, images=(self.image,), with_demos=True)
                out[state.cd.key] = (doc["interactable"], doc["rationale"])
            except ParseError:
                log.warning("scene %s: unparseable interactability answer for %r; "
                            "defaulting to interactable", self.scene.scene_id,
                            state.cd.candidate_name)
                out[state.cd.key] = (True, "unparseable answer; recall-favoring default")
        return out

    # -- orchestration ----------------------------------------------------------

    def run(self) -> SceneResult:
        ctx = self.comprehend_context()
        ledger: dict[str, CandidateState] = {}
        feedback = ""
        iterations = 0
        for iteration in range(1, self.config.max_iterations + 1):
            iterations = iteration
            cds = self.mine_characteristics(ctx, feedback=feedback if iteration > 1 else "")
            new_cds = [cd for cd in cds if cd.key not in ledger]
            # A refined description supersedes its still-missed predecessor
            # (same candidate name, new text at iteration+1).
            for cd in new_cds:
                name = cd.candidate_name.casefold()
                for key, state in list(ledger.items()):
                    if state.status == "missed" and state.cd.candidate_name.casefold() == name:
                        del ledger[key]
            new_states = self.detect_candidates(new_cds, iteration)

            if self.config.ablate_reflection:
                for state in new_states:
                    if state.status == "detected":
                        ledger[state.cd.key] = replace(state, status="verified")
                    else:
                        ledger[state.cd.key] = state
                break

            ledger, confident, feedback = self.reflect(new_states, ledger)
            if confident:
                break

        verified = [s for s in ledger.values() if s.status == "verified"]
        decisions = self.classify_interactability(ctx, verified)

        detections: list[Detection] = []
        for state in verified:
            interactable, _rationale = decisions[state.cd.key]
            for sb in state.boxes:
                clamped = sb.box.clamped(self.scene.width, self.scene.height)
                if clamped is None:
                    continue
                detections.append(Detection(
                    box=clamped, category=state.cd.candidate_name,
                    interactable=interactable, confidence=sb.score,
                    cd_text=state.cd.cd_text, iterations_used=state.iteration))

        scored = [ScoredBox(d.box, d.confidence) for d in detections]
        surviving = filter_oversized(scored, self.scene.width, self.scene.height,
                                     self.config.oversize_fraction)
        survivor_ids = {id(sb) for sb in surviving}
        detections = [d for d, sb in zip(detections, scored) if id(sb) in survivor_ids]

        scored = [ScoredBox(d.box, d.confidence) for d in detections]
        keep = nms_indices(scored, self.config.nms_iou)
        detections = [detections[i] for i in keep]

        return SceneResult(
            scene_id=self.scene.scene_id,
            detections=detections,
            iterations=iterations,
            chat_calls=int(sum(self.stage_calls.values())),
            ground_calls=self.ground_calls,
            stage_calls=self.stage_calls,
        )


def run_pipeline(scene: Scene, image: ImagePayload, store_text: str,
                 providers: ProviderBundle,
                 config: PipelineConfig | None = None) -> SceneResult:
    return ScenePipeline(scene, image, store_text, providers,
                         config or PipelineConfig()).run()


def run_batch(jobs: list[tuple[Scene, ImagePayload, str]],
              providers: ProviderBundle, config: PipelineConfig | None = None
              ) -> tuple[list[SceneResult], dict[str, str]]:
    """Run many scenes with per-scene failure isolation.

    Returns (results, failures) where failures maps scene_id to the error
    message; a failed scene never aborts the batch.
    """
    results: list[SceneResult] = []
    failures: dict[str, str] = {}
    for scene, image, store_text in jobs:
        try:
            results.append(run_pipeline(scene, image, store_text, providers, config))
        except (ProviderError, CropError) as exc:
            log.error("scene %s failed: %s", scene.scene_id, exc)
            failures[scene.scene_id] = f"{type(exc).__name__}: {exc}"
    return results, failures
