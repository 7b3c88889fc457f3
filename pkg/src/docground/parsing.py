"""Structured extraction of (answer text, box) from noisy model output.

Models are asked for bare JSON but routinely wrap it in markdown fences,
prose, or Python-flavored syntax. parse_prediction never raises; every
outcome is encoded in the prediction's status:

* ``clean``      -- strict JSON object with a content/value string and an
                    in-range 4-number position.
* ``recovered``  -- usable after repair: non-strict literal parsing (single
                    quotes, trailing commas), case-insensitive keys, numeric
                    strings in the position, coerced content, or clamping of
                    out-of-range coordinates.
* ``text_only``  -- usable answer text but no usable box.
* ``failed``     -- nothing usable at all.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass

from .geometry import NormBox, PromptBox, from_prompt_box, round_half_up

_FENCE = re.compile(r"^\s*```[a-zA-Z]*\s*$", re.MULTILINE)


class JsonExtractError(ValueError):
    """No balanced {...} region parsed as a JSON object."""


@dataclass(frozen=True)
class Prediction:
    content: str
    box: NormBox | None
    status: str  # "clean" | "recovered" | "text_only" | "failed"
    raw: str

    def to_json_dict(self) -> dict:
        return {
            "content": self.content,
            "box": self.box.as_list() if self.box is not None else None,
            "status": self.status,
        }


def _strip_fences(text: str) -> str:
    return _FENCE.sub("", text)


def _balanced_regions(text: str):
    """Yield every balanced {...} substring, ordered by start position.

    Brace counting skips over JSON string literals, including escaped quotes.
    """
    opens = [i for i, ch in enumerate(text) if ch == "{"]
    for start in opens:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    yield text[start : i + 1]
                    break


def extract_json_object(raw: str) -> str:
    """Return the first balanced brace region that parses as a JSON object.

    Markdown code fences are stripped first. Raises JsonExtractError when no
    region parses.
    """
    for candidate in _balanced_regions(_strip_fences(raw)):
        try:
            if isinstance(json.loads(candidate), dict):
                return candidate
        except Exception:
            continue
    raise JsonExtractError("no parseable JSON object found")


def _extract_mapping(raw: str) -> tuple[dict | None, bool]:
    """Find the first brace region readable as a mapping.

    Returns (mapping, needed_repair): strict JSON first, then a Python
    literal fallback that tolerates single quotes and trailing commas.
    """
    for candidate in _balanced_regions(_strip_fences(raw)):
        try:
            obj = json.loads(candidate)
            if isinstance(obj, dict):
                return obj, False
        except Exception:
            pass
        try:
            obj = ast.literal_eval(candidate)
            if isinstance(obj, dict):
                return obj, True
        except Exception:
            pass
    return None, False


def _lookup(obj: dict, *names: str) -> tuple[object, bool]:
    """Exact key match first, then case-insensitive. Returns (value, fuzzy)."""
    for name in names:
        if name in obj:
            return obj[name], False
    lowered = {str(k).lower(): v for k, v in obj.items()}
    for name in names:
        if name in lowered:
            return lowered[name], True
    return None, False


def _coerce_position(value) -> tuple[list[int] | None, bool]:
    """Validate a position payload into 4 rounded ints; bool flags repairs."""
    if isinstance(value, tuple):
        value = list(value)
    if not isinstance(value, list) or len(value) != 4:
        return None, False
    out = []
    repaired = False
    for v in value:
        if isinstance(v, bool):
            return None, False
        if isinstance(v, str):
            try:
                v = float(v)
            except ValueError:
                return None, False
            repaired = True
        if not isinstance(v, (int, float)) or v != v or v in (float("inf"), float("-inf")):
            return None, False
        out.append(round_half_up(float(v)))
    return out, repaired


def parse_prediction(raw: str) -> Prediction:
    """Total parser: every input yields a Prediction, never an exception."""
    obj, repaired = _extract_mapping(raw)

    if obj is not None:
        content, fuzzy_key = _lookup(obj, "content", "value")
        coerced_content = False
        if content is not None and not isinstance(content, str):
            content = json.dumps(content, ensure_ascii=False) if isinstance(content, (dict, list)) else str(content)
            coerced_content = True
        if isinstance(content, str) and content.strip():
            pos_value, fuzzy_pos = _lookup(obj, "position")
            position, pos_repaired = _coerce_position(pos_value)
            if position is None:
                return Prediction(content=content, box=None, status="text_only", raw=raw)
            box, clamped = from_prompt_box(PromptBox(*position))
            recovered = repaired or fuzzy_key or fuzzy_pos or coerced_content or pos_repaired or clamped
            return Prediction(
                content=content,
                box=box,
                status="recovered" if recovered else "clean",
                raw=raw,
            )

    # Prose fallback: keep the full trimmed response as the answer text.
    text = raw.strip()
    if text:
        return Prediction(content=text, box=None, status="text_only", raw=raw)
    return Prediction(content="", box=None, status="failed", raw=raw)
