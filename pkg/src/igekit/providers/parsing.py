"""Tolerant extraction of structured answers from model text.

Models wrap JSON in code fences or prose; ``parse_structured`` strips fences,
scans for the first decodable JSON object or array, and validates the result
against the schema registered for the template's output.
"""

from __future__ import annotations

import json
import re
from typing import Any, Callable

from igekit.errors import ParseError

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n?|```", re.MULTILINE)


def extract_json(raw: str) -> Any:
    """First JSON object/array embedded in raw text, or ParseError."""
    text = _FENCE_RE.sub("\n", raw)
    decoder = json.JSONDecoder()
    for match in re.finditer(r"[\[{]", text):
        try:
            value, _ = decoder.raw_decode(text, match.start())
            return value
        except json.JSONDecodeError:
            continue
    raise ParseError("no JSON value found in model output", raw=raw)


def _fail(schema_id: str, why: str, raw: str) -> ParseError:
    return ParseError(f"schema {schema_id}: {why}", raw=raw)


def _str_field(doc: dict, key: str, schema_id: str, raw: str,
               required: bool = True, allow_empty: bool = True) -> str:
    if key not in doc:
        if required:
            raise _fail(schema_id, f"missing key '{key}'", raw)
        return ""
    value = doc[key]
    if isinstance(value, list):
        value = ", ".join(str(v) for v in value)
    value = str(value).strip() if value is not None else ""
    if not value and not allow_empty:
        raise _fail(schema_id, f"key '{key}' must be non-empty", raw)
    return value


def _validate_global_context(doc: Any, raw: str) -> dict:
    if not isinstance(doc, dict):
        raise _fail("global_context", "expected an object", raw)
    genres = doc.get("genres", [])
    if isinstance(genres, str):
        genres = [g.strip() for g in genres.split(",") if g.strip()]
    if not isinstance(genres, list):
        raise _fail("global_context", "'genres' must be a list", raw)
    out = {"genres": [str(g) for g in genres]}
    for key in ("app_name", "content_theme", "device_support", "gameplay",
                "interaction_mechanisms", "language"):
        out[key] = _str_field(doc, key, "global_context", raw, required=False)
    return out


def _validate_local_context(doc: Any, raw: str) -> dict:
    if not isinstance(doc, dict):
        raise _fail("local_context", "expected an object", raw)
    return {"scene_summary": _str_field(doc, "scene_summary", "local_context",
                                        raw, allow_empty=False)}


def _validate_candidate_list(doc: Any, raw: str) -> dict:
    if not isinstance(doc, dict) or not isinstance(doc.get("candidates"), list):
        raise _fail("candidate_list", "expected {'candidates': [...]}", raw)
    names = [str(c).strip() for c in doc["candidates"]]
    return {"candidates": [n for n in names if n]}


def _validate_dimension_map(doc: Any, raw: str) -> dict:
    if not isinstance(doc, dict) or not isinstance(doc.get("dimensions"), list):
        raise _fail("dimension_map", "expected {'dimensions': [...]}", raw)
    out = []
    for item in doc["dimensions"]:
        if not isinstance(item, dict) or "candidate" not in item:
            raise _fail("dimension_map", "each entry needs 'candidate'", raw)
        dims = item.get("dimensions", [])
        if not isinstance(dims, list):
            raise _fail("dimension_map", "'dimensions' must be a list", raw)
        out.append({"candidate": str(item["candidate"]).strip(),
                    "dimensions": [str(d).strip() for d in dims if str(d).strip()]})
    return {"dimensions": out}


def _validate_question_list(doc: Any, raw: str) -> dict:
    if not isinstance(doc, dict) or not isinstance(doc.get("questions"), list):
        raise _fail("question_list", "expected {'questions': [...]}", raw)
    out = []
    for item in doc["questions"]:
        if not isinstance(item, dict):
            raise _fail("question_list", "each entry must be an object", raw)
        out.append({
            "candidate": _str_field(item, "candidate", "question_list", raw,
                                    allow_empty=False),
            "dimension": _str_field(item, "dimension", "question_list", raw),
            "question": _str_field(item, "question", "question_list", raw,
                                   allow_empty=False),
        })
    return {"questions": out}


def _validate_characteristic_answers(doc: Any, raw: str) -> dict:
    if not isinstance(doc, dict) or not isinstance(doc.get("candidates"), list):
        raise _fail("characteristic_answers", "expected {'candidates': [...]}", raw)
    out = []
    for item in doc["candidates"]:
        if not isinstance(item, dict):
            raise _fail("characteristic_answers", "each entry must be an object", raw)
        name = _str_field(item, "name", "characteristic_answers", raw,
                          allow_empty=False)
        answers_raw = item.get("answers", [])
        if not isinstance(answers_raw, list):
            raise _fail("characteristic_answers", "'answers' must be a list", raw)
        answers = []
        for a in answers_raw:
            if not isinstance(a, dict):
                raise _fail("characteristic_answers", "answers entries must be objects", raw)
            answers.append({
                "dimension": _str_field(a, "dimension", "characteristic_answers", raw),
                "question": _str_field(a, "question", "characteristic_answers", raw),
                "answer": _str_field(a, "answer", "characteristic_answers", raw),
            })
        description = _str_field(item, "description", "characteristic_answers",
                                 raw, required=False)
        if not description:
            description = "; ".join(a["answer"] for a in answers if a["answer"])
        if not description:
            raise _fail("characteristic_answers",
                        f"candidate '{name}' has neither description nor answers", raw)
        out.append({"name": name, "answers": answers, "description": description})
    return {"candidates": out}


_TRUE_WORDS = {"true", "yes", "match", "interactable", "confident"}
_FALSE_WORDS = {"false", "no", "mismatch", "non-interactable", "unconfident"}


def _as_bool(value: Any, schema_id: str, key: str, raw: str) -> bool:
    if isinstance(value, bool):
        return value
    word = str(value).strip().lower()
    if word in _TRUE_WORDS:
        return True
    if word in _FALSE_WORDS:
        return False
    raise _fail(schema_id, f"key '{key}' is not a recognizable boolean: {value!r}", raw)


def _validate_verification_verdict(doc: Any, raw: str) -> dict:
    if not isinstance(doc, dict):
        raise _fail("verification_verdict", "expected an object", raw)
    verdict = _str_field(doc, "verdict", "verification_verdict", raw,
                         allow_empty=False).lower()
    if verdict not in ("match", "mismatch"):
        raise _fail("verification_verdict", f"verdict must be match|mismatch, got {verdict!r}", raw)
    return {"verdict": verdict,
            "reason": _str_field(doc, "reason", "verification_verdict", raw, required=False)}


def _validate_miss_diagnosis(doc: Any, raw: str) -> dict:
    if not isinstance(doc, dict):
        raise _fail("miss_diagnosis", "expected an object", raw)
    verdict = _str_field(doc, "verdict", "miss_diagnosis", raw,
                         allow_empty=False).lower().replace(" ", "_")
    if verdict not in ("hallucination", "missing_detection"):
        raise _fail("miss_diagnosis",
                    f"verdict must be hallucination|missing_detection, got {verdict!r}", raw)
    return {"verdict": verdict,
            "reason": _str_field(doc, "reason", "miss_diagnosis", raw, required=False)}


def _validate_advisor_verdict(doc: Any, raw: str) -> dict:
    if not isinstance(doc, dict) or "confident" not in doc:
        raise _fail("advisor_verdict", "expected {'confident': bool, ...}", raw)
    return {"confident": _as_bool(doc["confident"], "advisor_verdict", "confident", raw),
            "concerns": _str_field(doc, "concerns", "advisor_verdict", raw, required=False)}


def _validate_interactability_decision(doc: Any, raw: str) -> dict:
    if not isinstance(doc, dict) or "interactable" not in doc:
        raise _fail("interactability_decision", "expected {'interactable': bool, ...}", raw)
    return {"interactable": _as_bool(doc["interactable"], "interactability_decision",
                                     "interactable", raw),
            "rationale": _str_field(doc, "rationale", "interactability_decision",
                                    raw, required=False)}


SCHEMAS: dict[str, Callable[[Any, str], dict]] = {
    "global_context": _validate_global_context,
    "local_context": _validate_local_context,
    "candidate_list": _validate_candidate_list,
    "dimension_map": _validate_dimension_map,
    "question_list": _validate_question_list,
    "characteristic_answers": _validate_characteristic_answers,
    "verification_verdict": _validate_verification_verdict,
    "miss_diagnosis": _validate_miss_diagnosis,
    "advisor_verdict": _validate_advisor_verdict,
    "interactability_decision": _validate_interactability_decision,
}


def parse_structured(raw: str, schema_id: str) -> dict:
    """Extract the first JSON value in raw text and validate it."""
    if schema_id not in SCHEMAS:
        raise KeyError(f"unknown schema {schema_id!r}")
    return SCHEMAS[schema_id](extract_json(raw), raw)
