"""Versioned prompt-template registry.

Templates are authored text assets under ``igekit/prompts`` using
``string.Template`` placeholders (``${name}``), so literal JSON braces in the
prompt body need no escaping. Lines starting with ``#:`` are asset metadata
and are stripped before rendering. Rendering the same slots is byte-stable.
``validate_registry`` cross-checks each asset's placeholder set against the
declaration here and runs at import of the chat client.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from importlib import resources
from string import Template

_ASSET_PACKAGE = "igekit.prompts"
_META_PREFIX = "#:"
_IDENT_RE = re.compile(r"\$(?:\{([_a-z][_a-z0-9]*)\}|([_a-z][_a-z0-9]*))", re.IGNORECASE)


@dataclass(frozen=True)
class TemplateSpec:
    template_id: str
    asset: str
    placeholders: frozenset[str]
    schema_id: str
    stage: str
    uses_demos: bool = False


TEMPLATES: dict[str, TemplateSpec] = {
    spec.template_id: spec
    for spec in [
        TemplateSpec("PI.1", "PI_1.txt",
                     frozenset({"store_text", "demonstrations"}),
                     "global_context", "context", uses_demos=True),
        TemplateSpec("PI.2", "PI_2.txt",
                     frozenset({"global_context"}),
                     "local_context", "context"),
        TemplateSpec("PII.1", "PII_1.txt",
                     frozenset({"global_context", "local_context", "feedback",
                                "demonstrations"}),
                     "candidate_list", "mining", uses_demos=True),
        TemplateSpec("PII.2", "PII_2.txt",
                     frozenset({"global_context", "local_context", "candidates"}),
                     "dimension_map", "mining"),
        TemplateSpec("PII.3", "PII_3.txt",
                     frozenset({"candidates_with_dimensions"}),
                     "question_list", "mining"),
        TemplateSpec("PII.4", "PII_4.txt",
                     frozenset({"global_context", "local_context", "questions",
                                "feedback", "demonstrations"}),
                     "characteristic_answers", "mining", uses_demos=True),
        TemplateSpec("PII.5", "PII_5.txt",
                     frozenset({"cd_text"}),
                     "verification_verdict", "reflection"),
        TemplateSpec("PII.6", "PII_6.txt",
                     frozenset({"cd_text", "detected_summary"}),
                     "miss_diagnosis", "reflection"),
        TemplateSpec("PII.7", "PII_7.txt",
                     frozenset({"ledger_summary"}),
                     "advisor_verdict", "reflection"),
        TemplateSpec("PIII", "PIII.txt",
                     frozenset({"global_context", "local_context",
                                "candidate_name", "cd_text", "demonstrations"}),
                     "interactability_decision", "classification", uses_demos=True),
    ]
}


def _asset_text(asset: str) -> str:
    return resources.files(_ASSET_PACKAGE).joinpath(asset).read_text(encoding="utf-8")


def template_body(template_id: str) -> str:
    spec = TEMPLATES[template_id]
    lines = [ln for ln in _asset_text(spec.asset).splitlines()
             if not ln.startswith(_META_PREFIX)]
    return "\n".join(lines).strip() + "\n"


def placeholders_in(text: str) -> frozenset[str]:
    return frozenset(m.group(1) or m.group(2) for m in _IDENT_RE.finditer(text))


def render(template_id: str, slots: dict[str, str]) -> str:
    """Fill every placeholder; unknown template or missing slot raises."""
    if template_id not in TEMPLATES:
        raise KeyError(f"unknown template {template_id!r}")
    body = template_body(template_id)
    try:
        return Template(body).substitute({k: str(v) for k, v in slots.items()})
    except KeyError as exc:
        raise KeyError(f"template {template_id}: unfilled placeholder {exc}") from exc


def validate_registry() -> None:
    """Assert every asset's placeholders match its declaration."""
    for spec in TEMPLATES.values():
        found = placeholders_in(template_body(spec.template_id))
        if found != spec.placeholders:
            raise AssertionError(
                f"template {spec.template_id}: asset placeholders {sorted(found)} "
                f"!= declared {sorted(spec.placeholders)}")


def demo_pool() -> list[str]:
    doc = json.loads(_asset_text("demos.json"))
    return list(doc["demonstrations"])


def select_demos(seed: int, k: int = 3) -> tuple[str, ...]:
    """Seeded-random selection from the demonstration pool."""
    pool = demo_pool()
    rng = random.Random(seed)
    return tuple(rng.sample(pool, min(k, len(pool))))


def format_demos(demos: tuple[str, ...]) -> str:
    if not demos:
        return ""
    return "Worked examples:\n" + "\n".join(f"- {d}" for d in demos)
