"""Prompt construction for the three querying strategies.

All strategies share the same JSON-answer instruction block; chain-of-thought
prepends worked QA exemplars and the anchor strategy prepends OCR words with
their page positions. Prompts are plain deterministic strings -- byte-for-byte
stability is part of the record/replay contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .dataset import OcrToken
from .errors import ConfigError
from .geometry import PromptBox, to_prompt_box
from .locator import reading_order

STRATEGIES = ("zero_shot", "cot", "anchors")

ZERO_SHOT_TEMPLATE = (
    "Based only on the document image, answer the following question:\n"
    "Question: {question}\n"
    "Provide ONLY a JSON response in the following format:\n"
    "{{\n"
    '  "content": "answer",\n'
    '  "position": [x, y, w, h]\n'
    "}}\n"
    "Each position value MUST be in the range [0, 1000]."
)


@dataclass(frozen=True)
class PromptSpec:
    strategy: str = "zero_shot"
    exemplars: tuple[tuple[str, str, PromptBox], ...] = ()
    anchor_budget: int = 100
    question_field: str = "question"  # or "rephrased_question"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown prompt strategy {self.strategy!r}")
        if self.strategy == "cot" and not self.exemplars:
            raise ConfigError("cot strategy requires at least one exemplar")
        if self.strategy == "anchors" and self.anchor_budget < 1:
            raise ConfigError("anchors strategy requires anchor_budget >= 1")
        if self.question_field not in ("question", "rephrased_question"):
            raise ConfigError(f"unknown question field {self.question_field!r}")


def build_zero_shot(question: str) -> str:
    if not question.strip():
        raise ConfigError("question must be nonempty")
    return ZERO_SHOT_TEMPLATE.format(question=question)


def exemplar_line(question: str, answer: str, box: PromptBox) -> str:
    # json.dumps handles quote escaping inside the answer; braces pass through.
    return 'Q: "%s" A: {"value":%s, "position": [%d, %d, %d, %d]}' % (
        question,
        json.dumps(answer, ensure_ascii=False),
        box.x,
        box.y,
        box.w,
        box.h,
    )


def build_cot(question: str, exemplars: Sequence[tuple[str, str, PromptBox]]) -> str:
    if not exemplars:
        raise ConfigError("cot prompt requires at least one exemplar")
    lines = [exemplar_line(q, a, box) for q, a, box in exemplars]
    return "\n".join(lines) + "\n\n" + build_zero_shot(question)


def anchor_line(token: OcrToken) -> str:
    pb = to_prompt_box(token.box)
    return 'The word "%s" is at [%d, %d, %d, %d]' % (token.text, pb.x, pb.y, pb.w, pb.h)


def build_anchors(question: str, tokens: Sequence[OcrToken], budget: int) -> str:
    if budget < 1:
        raise ConfigError("anchor budget must be >= 1")
    body = build_zero_shot(question)
    ordered = reading_order(tokens)[:budget]
    if not ordered:
        return body
    return "\n".join(anchor_line(t) for t in ordered) + "\n\n" + body


def build_prompt(spec: PromptSpec, question: str, tokens: Sequence[OcrToken] = ()) -> str:
    """Dispatch on the spec's strategy."""
    if spec.strategy == "zero_shot":
        return build_zero_shot(question)
    if spec.strategy == "cot":
        return build_cot(question, spec.exemplars)
    return build_anchors(question, tokens, spec.anchor_budget)
