"""Batch export of pooled vision/text embeddings for grounded QA corpora.

Walks a corpus of documents and QA pairs, pushes each QA's answer-page image
and its text through a pretrained SigLIP-style backbone, and writes the
pooled vectors to an EMB1 binary file keyed by qa_id, in corpus order.

The corpus and EMB1 layouts are implemented here from their documented wire
formats rather than imported from the consuming toolkit, so this side of the
interchange stays an independent check on the contract:

    EMB1: magic "EMB1" | u8 version=1 | u32 Dv | u32 Dt | u32 record count
    per record: u16 qa_id byte length | qa_id UTF-8 | Dv float32 visual |
                Dt float32 text | u8 has_target | 4 float32 corners when
                has_target=1
    (all integers little-endian, floats IEEE-754 little-endian)
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

TEXT_MODES = ("question", "answer", "question_plus_answer")
SEP = " [SEP] "

_EMB_MAGIC = b"EMB1"
_EMB_VERSION = 1


@dataclass(frozen=True)
class ExportJob:
    corpus: Path
    backbone: str  # model hub id or local checkpoint directory
    out: Path
    text_mode: str = "question_plus_answer"
    batch_size: int = 8
    device: str = "cpu"

    def __post_init__(self):
        if self.text_mode not in TEXT_MODES:
            raise ValueError(f"text_mode must be one of {TEXT_MODES}, got {self.text_mode!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class ExportResult:
    out: Path
    provenance: Path
    dv: int
    dt: int
    n_records: int
    exclusions: tuple[str, ...]  # qa_ids skipped because their image is missing


@dataclass(frozen=True)
class _QaItem:
    qa_id: str
    image: Path
    text: str
    target: tuple[float, float, float, float] | None


def _clamp_wire(v: int) -> int:
    return 0 if v < 0 else 1000 if v > 1000 else v


def _target_corners(boxes, split) -> tuple[tuple[float, ...] | None, int]:
    """Ground-truth corners (train/val QAs only) plus the page to encode.

    Multi-box answers use the union of the boxes on the first box's page; the
    page image fed to the backbone is that same page. Unboxed QAs fall back
    to page 0 and carry no target.
    """
    if not boxes:
        return None, 0
    page = boxes[0]["page"]
    xs1, ys1, xs2, ys2 = [], [], [], []
    for b in boxes:
        if b["page"] != page:
            continue
        x, y, w, h = (_clamp_wire(v) for v in b["box"])
        xs1.append(x)
        ys1.append(y)
        xs2.append(min(x + w, 1000))
        ys2.append(min(y + h, 1000))
    corners = (min(xs1) / 1000.0, min(ys1) / 1000.0, max(xs2) / 1000.0, max(ys2) / 1000.0)
    if split == "test":
        return None, page
    return corners, page


def _read_corpus(path: Path):
    """Minimal reader for the newline-delimited JSON corpus interchange.

    Returns (pages by doc_id, QA dicts in file order). Token lists are
    ignored -- only page image paths and QA text/boxes matter here.
    """
    pages: dict[str, list[str]] = {}
    qas: list[dict] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: not valid JSON: {exc}") from exc
            kind = obj.get("kind")
            if kind == "doc":
                pages[obj["doc_id"]] = [p["image"] for p in obj["pages"]]
            elif kind == "qa":
                qas.append(obj)
            else:
                raise ValueError(f"{path}:{line_no}: unknown record kind {kind!r}")
    return pages, qas


def _collect_items(job: ExportJob, pages, qas) -> tuple[list[_QaItem], list[str]]:
    root = job.corpus.parent
    items: list[_QaItem] = []
    exclusions: list[str] = []
    for qa in qas:
        qa_id = qa["qa_id"]
        doc_pages = pages.get(qa["doc_id"])
        if doc_pages is None:
            raise ValueError(f"qa {qa_id!r} references unknown doc {qa['doc_id']!r}")
        target, page = _target_corners(qa.get("boxes") or [], qa.get("split"))
        if not 0 <= page < len(doc_pages):
            raise ValueError(f"qa {qa_id!r}: box page {page} out of range for doc {qa['doc_id']!r}")
        image = root / doc_pages[page]
        if not image.is_file():
            logger.warning("qa %s: page image %s missing, skipped", qa_id, image)
            exclusions.append(qa_id)
            continue
        if job.text_mode == "question":
            text = qa["question"]
        elif job.text_mode == "answer":
            text = qa["answer"]
        else:
            text = qa["question"] + SEP + qa["answer"]
        items.append(_QaItem(qa_id=qa_id, image=image, text=text, target=target))
    return items, exclusions


def _write_emb1(path: Path, dv: int, dt: int, rows) -> None:
    with path.open("wb") as fh:
        fh.write(_EMB_MAGIC)
        fh.write(struct.pack("<B", _EMB_VERSION))
        fh.write(struct.pack("<III", dv, dt, len(rows)))
        for qa_id, visual, text, target in rows:
            qa_bytes = qa_id.encode("utf-8")
            fh.write(struct.pack("<H", len(qa_bytes)))
            fh.write(qa_bytes)
            fh.write(np.asarray(visual, dtype="<f4").tobytes())
            fh.write(np.asarray(text, dtype="<f4").tobytes())
            if target is None:
                fh.write(struct.pack("<B", 0))
            else:
                fh.write(struct.pack("<B", 1))
                fh.write(np.asarray(target, dtype="<f4").tobytes())


def _preprocess_summary(processor) -> dict:
    image = {}
    ip = getattr(processor, "image_processor", None)
    if ip is not None:
        d = ip.to_dict()
        image = {
            k: d[k]
            for k in ("size", "resample", "rescale_factor", "image_mean", "image_std")
            if k in d
        }
    tok = getattr(processor, "tokenizer", None)
    text = {"padding": "max_length", "truncation": True}
    if tok is not None:
        text["model_max_length"] = tok.model_max_length
    return {"image": image, "text": text}


def export(job: ExportJob) -> ExportResult:
    """Run the backbone over every QA and write the embedding file.

    A missing page image skips that QA with a warning and lands in the
    result's exclusion list (also recorded in the provenance sidecar); a
    backbone that fails to load aborts the whole export.
    """
    import torch
    from PIL import Image
    from transformers import AutoProcessor, SiglipModel

    pages, qas = _read_corpus(job.corpus)
    items, exclusions = _collect_items(job, pages, qas)

    processor = AutoProcessor.from_pretrained(job.backbone)
    model = SiglipModel.from_pretrained(job.backbone).to(job.device).eval()
    dv = model.config.vision_config.hidden_size
    dt = model.config.text_config.hidden_size

    # single-threaded inference keeps reduction order, and therefore the
    # output bytes, stable across runs
    torch.set_num_threads(1)

    rows = []
    with torch.no_grad():
        for start in range(0, len(items), job.batch_size):
            chunk = items[start : start + job.batch_size]
            images = [Image.open(it.image).convert("RGB") for it in chunk]
            batch = processor(
                images=images,
                text=[it.text for it in chunk],
                padding="max_length",
                truncation=True,
                return_tensors="pt",
            )
            visual = model.get_image_features(
                pixel_values=batch["pixel_values"].to(job.device)
            ).pooler_output
            text = model.get_text_features(
                input_ids=batch["input_ids"].to(job.device)
            ).pooler_output
            for it, v, t in zip(chunk, visual, text):
                rows.append((it.qa_id, v.cpu().numpy(), t.cpu().numpy(), it.target))

    _write_emb1(job.out, dv, dt, rows)

    provenance_path = job.out.with_suffix(job.out.suffix + ".json")
    provenance = {
        "backbone": job.backbone,
        "preprocess": _preprocess_summary(processor),
        "text_mode": job.text_mode,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "exclusions": exclusions,
    }
    provenance_path.write_text(json.dumps(provenance, indent=2) + "\n", encoding="utf-8")

    return ExportResult(
        out=job.out,
        provenance=provenance_path,
        dv=dv,
        dt=dt,
        n_records=len(rows),
        exclusions=tuple(exclusions),
    )
