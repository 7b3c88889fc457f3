"""Corpus ingestion: a newline-delimited JSON interchange format.

Each line is one JSON object discriminated by a "kind" field:

* ``{"kind": "doc", "doc_id": ..., "pages": [{"image", "w", "h"}, ...],
  "tokens": [{"t", "page", "box": [x, y, w, h]}, ...]}``
* ``{"kind": "qa", "qa_id": ..., "doc_id": ..., "question": ...,
  "rephrased_question": ..., "answer": ..., "boxes": [{"page", "box"}, ...],
  "split": "train"|"val"|"test" (optional)}``

Boxes on the wire are integer thousandths ``[x, y, w, h]`` in ``[0, 1000]``;
in memory everything is a normalized corner-form NormBox. By default an
out-of-range box is a hard validation failure; pass ``strict=False`` to clamp
with a warning instead.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, CorpusFormatError, DataError, ValidationError
from .geometry import NormBox, PromptBox, from_prompt_box, round_half_up, to_prompt_box

logger = logging.getLogger(__name__)

SPLIT_LABELS = ("train", "val", "test")


@dataclass(frozen=True)
class OcrToken:
    text: str
    box: NormBox
    page: int


@dataclass(frozen=True)
class PageInfo:
    image: str
    width: int
    height: int


@dataclass(frozen=True)
class DocumentRecord:
    doc_id: str
    pages: tuple[PageInfo, ...]
    tokens: tuple[OcrToken, ...]


@dataclass(frozen=True)
class QaRecord:
    qa_id: str
    doc_id: str
    question: str
    rephrased_question: str
    answer_value: str
    answer_boxes: tuple[tuple[int, NormBox], ...]
    split_hint: str | None = None


@dataclass(frozen=True)
class Corpus:
    documents: dict[str, DocumentRecord]
    qas: tuple[QaRecord, ...]

    def document_for(self, qa: QaRecord) -> DocumentRecord:
        return self.documents[qa.doc_id]


def _require(obj: dict, key: str, kind: type, line: int):
    if key not in obj:
        raise CorpusFormatError(f"missing field {key!r}", line)
    value = obj[key]
    if kind is int and isinstance(value, bool):
        raise CorpusFormatError(f"field {key!r} must be an integer", line)
    if not isinstance(value, kind):
        raise CorpusFormatError(f"field {key!r} has wrong type {type(value).__name__}", line)
    return value


def _wire_box(raw, line: int, strict: bool, owner: str) -> NormBox:
    if not isinstance(raw, list) or len(raw) != 4 or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in raw
    ):
        raise CorpusFormatError(f"box must be a list of 4 integers, got {raw!r}", line)
    box, clamped = from_prompt_box(PromptBox(*raw))
    if clamped:
        if strict:
            raise ValidationError(f"{owner}: box {raw} out of range [0, 1000]")
        logger.warning("%s: box %s out of range, clamped", owner, raw)
    return box


def _parse_doc(obj: dict, line: int, strict: bool) -> DocumentRecord:
    doc_id = _require(obj, "doc_id", str, line)
    pages = []
    for p in _require(obj, "pages", list, line):
        if not isinstance(p, dict):
            raise CorpusFormatError("page descriptor must be an object", line)
        page = PageInfo(
            image=_require(p, "image", str, line),
            width=_require(p, "w", int, line),
            height=_require(p, "h", int, line),
        )
        if page.width <= 0 or page.height <= 0:
            raise ValidationError(f"doc {doc_id!r}: page pixel dims must be positive")
        pages.append(page)
    tokens = []
    for t in _require(obj, "tokens", list, line):
        if not isinstance(t, dict):
            raise CorpusFormatError("token must be an object", line)
        text = _require(t, "t", str, line)
        page_idx = _require(t, "page", int, line)
        token = OcrToken(
            text=text,
            box=_wire_box(t.get("box"), line, strict, f"doc {doc_id!r} token {text!r}"),
            page=page_idx,
        )
        if not token.text.strip():
            raise ValidationError(f"doc {doc_id!r}: token with empty text")
        if token.page < 0 or token.page >= len(pages):
            raise ValidationError(f"doc {doc_id!r}: token page {token.page} out of range")
        tokens.append(token)
    return DocumentRecord(doc_id=doc_id, pages=tuple(pages), tokens=tuple(tokens))


def _parse_qa(obj: dict, line: int, strict: bool) -> QaRecord:
    qa_id = _require(obj, "qa_id", str, line)
    boxes = []
    for b in _require(obj, "boxes", list, line):
        if not isinstance(b, dict):
            raise CorpusFormatError("answer box must be an object", line)
        page_idx = _require(b, "page", int, line)
        boxes.append((page_idx, _wire_box(b.get("box"), line, strict, f"qa {qa_id!r}")))
    split = obj.get("split")
    if split is not None and split not in SPLIT_LABELS:
        raise CorpusFormatError(f"unknown split label {split!r}", line)
    qa = QaRecord(
        qa_id=qa_id,
        doc_id=_require(obj, "doc_id", str, line),
        question=_require(obj, "question", str, line),
        rephrased_question=_require(obj, "rephrased_question", str, line),
        answer_value=_require(obj, "answer", str, line),
        answer_boxes=tuple(boxes),
        split_hint=split,
    )
    if not qa.answer_value:
        raise ValidationError(f"qa {qa_id!r}: empty answer value")
    return qa


def load_corpus(path: str | Path, strict: bool = True) -> Corpus:
    """Read and validate a corpus file.

    Raises CorpusFormatError (with the line number) for unparseable lines and
    ValidationError (naming the offending qa_id/doc_id) for invariant
    violations.
    """
    path = Path(path)
    documents: dict[str, DocumentRecord] = {}
    qas: list[QaRecord] = []
    try:
        fh = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read corpus file {path}: {exc}") from exc
    with fh:
        for lineno, raw_line in enumerate(fh, start=1):
            if not raw_line.strip():
                continue
            try:
                obj = json.loads(raw_line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON: {exc.msg}", lineno) from exc
            if not isinstance(obj, dict):
                raise CorpusFormatError("line is not a JSON object", lineno)
            kind = obj.get("kind")
            if kind == "doc":
                doc = _parse_doc(obj, lineno, strict)
                if doc.doc_id in documents:
                    raise ValidationError(f"duplicate doc_id {doc.doc_id!r}")
                documents[doc.doc_id] = doc
            elif kind == "qa":
                qas.append(_parse_qa(obj, lineno, strict))
            else:
                raise CorpusFormatError(f"unknown kind {kind!r}", lineno)

    seen_qa: set[str] = set()
    for qa in qas:
        if qa.qa_id in seen_qa:
            raise ValidationError(f"duplicate qa_id {qa.qa_id!r}")
        seen_qa.add(qa.qa_id)
        doc = documents.get(qa.doc_id)
        if doc is None:
            raise ValidationError(f"qa {qa.qa_id!r} references unknown doc_id {qa.doc_id!r}")
        for page_idx, _ in qa.answer_boxes:
            if page_idx < 0 or page_idx >= len(doc.pages):
                raise ValidationError(
                    f"qa {qa.qa_id!r}: answer box page {page_idx} out of range for doc {qa.doc_id!r}"
                )
    return Corpus(documents=documents, qas=tuple(qas))


def _doc_to_wire(doc: DocumentRecord) -> dict:
    return {
        "kind": "doc",
        "doc_id": doc.doc_id,
        "pages": [{"image": p.image, "w": p.width, "h": p.height} for p in doc.pages],
        "tokens": [
            {"t": t.text, "page": t.page, "box": to_prompt_box(t.box).as_list()}
            for t in doc.tokens
        ],
    }


def _qa_to_wire(qa: QaRecord) -> dict:
    obj = {
        "kind": "qa",
        "qa_id": qa.qa_id,
        "doc_id": qa.doc_id,
        "question": qa.question,
        "rephrased_question": qa.rephrased_question,
        "answer": qa.answer_value,
        "boxes": [{"page": p, "box": to_prompt_box(b).as_list()} for p, b in qa.answer_boxes],
    }
    if qa.split_hint is not None:
        obj["split"] = qa.split_hint
    return obj


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Serialize back to the interchange format (docs first, then QAs)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for doc in corpus.documents.values():
            fh.write(json.dumps(_doc_to_wire(doc), ensure_ascii=False) + "\n")
        for qa in corpus.qas:
            fh.write(json.dumps(_qa_to_wire(qa), ensure_ascii=False) + "\n")


def filter_single_box(corpus: Corpus) -> Corpus:
    """Keep only QAs whose answer is a single box; documents are retained."""
    kept = tuple(qa for qa in corpus.qas if len(qa.answer_boxes) == 1)
    return Corpus(documents=dict(corpus.documents), qas=kept)


def split(
    corpus: Corpus,
    seed: int,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
) -> tuple[Corpus, Corpus, Corpus]:
    """Partition into train/val/test corpora.

    When every QA carries a split hint the hints are honored exactly.
    Otherwise documents (never individual QAs) are shuffled deterministically
    by ``seed`` and dealt out by the given fractions, so no page can leak
    across splits.
    """
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ConfigError(f"fractions must be three positive numbers, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must sum to 1, got {fractions}")

    if corpus.qas and all(qa.split_hint is not None for qa in corpus.qas):
        parts = []
        for label in SPLIT_LABELS:
            qas = tuple(qa for qa in corpus.qas if qa.split_hint == label)
            docs = {qa.doc_id: corpus.documents[qa.doc_id] for qa in qas}
            parts.append(Corpus(documents=docs, qas=qas))
        return parts[0], parts[1], parts[2]

    doc_ids = sorted(corpus.documents)
    rng = random.Random(seed)
    rng.shuffle(doc_ids)
    n = len(doc_ids)
    n_train = round_half_up(fractions[0] * n)
    n_val = round_half_up((fractions[0] + fractions[1]) * n) - n_train
    assignments = {
        "train": set(doc_ids[:n_train]),
        "val": set(doc_ids[n_train : n_train + n_val]),
        "test": set(doc_ids[n_train + n_val :]),
    }
    parts = []
    for label in SPLIT_LABELS:
        ids = assignments[label]
        docs = {d: corpus.documents[d] for d in corpus.documents if d in ids}
        qas = tuple(qa for qa in corpus.qas if qa.doc_id in ids)
        parts.append(Corpus(documents=docs, qas=qas))
    return parts[0], parts[1], parts[2]
