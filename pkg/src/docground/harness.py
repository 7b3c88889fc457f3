"""Evaluation harness: ingest -> prompt -> query -> parse -> localize -> score.

A run walks every single-box QA of a corpus in qa_id order, obtains the
model's raw response (live or from a recorded transcript store), parses it,
chooses a box according to the configured localizer, and scores ANLS plus
IoU.  Every intermediate lands in artifacts.jsonl; the report files are
derived views shaped like a results table (architecture / prompting / ANLS /
MeanIoU).
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path

from .client import ModelEndpoint, RetryPolicy, TranscriptStore, VlmClient, replay_query
from .dataset import Corpus, QaRecord, filter_single_box, load_corpus
from .errors import ConfigError, DataError, ReplayMissError
from .formats import read_embeddings
from .geometry import NormBox, PromptBox, iou, to_prompt_box
from .locator import locate
from .parsing import parse_prediction
from .prompting import STRATEGIES, PromptSpec, build_prompt
from .regressor import load_checkpoint, predict
from .text_metrics import DEFAULT_ANLS, AnlsConfig, anls_corpus, anls_single

LOCALIZERS = ("model_box", "docexplainer", "ocr_baseline")

_PROMPT_LABELS = {"zero_shot": "Zero-shot", "cot": "CoT", "anchors": "Anchors"}
_DEFAULT_EXEMPLAR_COUNT = 2


@dataclass(frozen=True)
class RunConfig:
    corpus: Path
    endpoint: ModelEndpoint
    localizer: str = "model_box"
    strategy: str = "zero_shot"
    # cot only; empty means auto-pick per QA, excluding the evaluated document
    exemplars: tuple[tuple[str, str, PromptBox], ...] = ()
    anchor_budget: int = 100
    question_field: str = "question"
    replay_store: Path | None = None
    record_store: Path | None = None
    checkpoint: Path | None = None
    embeddings: Path | None = None
    anls: AnlsConfig = DEFAULT_ANLS
    out_dir: Path = Path(".")
    seed: int = 0

    def __post_init__(self) -> None:
        if self.localizer not in LOCALIZERS:
            raise ConfigError(f"localizer must be one of {LOCALIZERS}, got {self.localizer!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown prompt strategy {self.strategy!r}")
        if self.question_field not in ("question", "rephrased_question"):
            raise ConfigError(f"unknown question field {self.question_field!r}")
        if self.strategy == "anchors" and self.anchor_budget < 1:
            raise ConfigError("anchors strategy requires anchor_budget >= 1")
        if self.localizer == "docexplainer":
            if self.checkpoint is None:
                raise ConfigError("localizer 'docexplainer' requires a checkpoint path")
            if self.embeddings is None:
                raise ConfigError("localizer 'docexplainer' requires an embeddings path")
        if self.replay_store is not None and self.record_store is not None:
            raise ConfigError("record_store has no effect in replay mode; set only one")


@dataclass(frozen=True)
class ReportRow:
    architecture: str
    prompting: str
    anls: float
    mean_iou: float
    n_qas: int
    n_parse_failures: int
    n_located: int

    def to_json_dict(self) -> dict:
        return {
            "architecture": self.architecture,
            "prompting": self.prompting,
            "anls": self.anls,
            "mean_iou": self.mean_iou,
            "n_qas": self.n_qas,
            "n_parse_failures": self.n_parse_failures,
            "n_located": self.n_located,
        }


def architecture_label(endpoint_name: str, localizer: str) -> str:
    if localizer == "docexplainer":
        return f"{endpoint_name} + DocExplainer"
    if localizer == "ocr_baseline":
        return f"{endpoint_name} + Naive OCR"
    return endpoint_name


def pick_cot_exemplars(
    corpus: Corpus,
    exclude_doc_id: str | None = None,
    k: int = _DEFAULT_EXEMPLAR_COUNT,
    seed: int = 0,
) -> tuple[tuple[str, str, object], ...]:
    """Deterministically pick (question, answer, PromptBox) exemplar triples.

    Single-box QAs from other documents are eligible; QAs hinted as train
    data are preferred so evaluation answers never leak into the prompt.
    """
    pool = [
        qa
        for qa in corpus.qas
        if len(qa.answer_boxes) == 1 and qa.doc_id != exclude_doc_id
    ]
    hinted = [qa for qa in pool if qa.split_hint == "train"]
    if hinted:
        pool = hinted
    pool.sort(key=lambda qa: qa.qa_id)
    random.Random(seed).shuffle(pool)
    return tuple(
        (qa.question, qa.answer_value, to_prompt_box(qa.answer_boxes[0][1]))
        for qa in pool[:k]
    )


def _prompt_for(cfg: RunConfig, corpus: Corpus, qa: QaRecord, tokens) -> str:
    exemplars = cfg.exemplars
    if cfg.strategy == "cot" and not exemplars:
        exemplars = pick_cot_exemplars(corpus, exclude_doc_id=qa.doc_id, seed=cfg.seed)
        if not exemplars:
            raise DataError(f"no usable CoT exemplars for qa {qa.qa_id!r}")
    spec = PromptSpec(
        strategy=cfg.strategy,
        exemplars=exemplars,
        anchor_budget=cfg.anchor_budget,
        question_field=cfg.question_field,
    )
    question = qa.rephrased_question if cfg.question_field == "rephrased_question" else qa.question
    return build_prompt(spec, question, tokens)


def run_eval(cfg: RunConfig) -> tuple[ReportRow, list[dict]]:
    """Evaluate one (endpoint, prompting, localizer) cell; write artifacts.jsonl."""
    corpus = filter_single_box(load_corpus(cfg.corpus))
    corpus_dir = Path(cfg.corpus).parent

    replay_store = TranscriptStore(cfg.replay_store) if cfg.replay_store else None
    client = None
    if replay_store is None:
        record = TranscriptStore(cfg.record_store) if cfg.record_store else None
        client = VlmClient(cfg.endpoint, store=record, retry=RetryPolicy())

    ckpt = None
    emb_by_qa: dict = {}
    if cfg.localizer == "docexplainer":
        ckpt = load_checkpoint(cfg.checkpoint)
        emb_by_qa = read_embeddings(cfg.embeddings).by_qa_id()

    artifacts: list[dict] = []
    anls_pairs: list[tuple[str, str]] = []
    iou_values: list[float] = []
    n_parse_failures = 0
    n_located = 0

    for qa in sorted(corpus.qas, key=lambda q: q.qa_id):
        doc = corpus.documents[qa.doc_id]
        gt_page, gt_box = qa.answer_boxes[0]
        image = corpus_dir / doc.pages[gt_page].image
        prompt = _prompt_for(cfg, corpus, qa, doc.tokens)

        if replay_store is not None:
            try:
                response = replay_query(replay_store, cfg.endpoint, prompt, image)
            except ReplayMissError as exc:
                raise ReplayMissError(
                    f"qa {qa.qa_id!r}: {exc.args[0]}", key=exc.key
                ) from exc
        else:
            response = client.query(prompt, image)

        pred = parse_prediction(response)
        if pred.status == "failed":
            n_parse_failures += 1

        located_box: NormBox | None = None
        located_page: int | None = None
        locate_mode = None
        if cfg.localizer == "model_box":
            located_box = pred.box
            located_page = gt_page if pred.box is not None else None
        elif cfg.localizer == "docexplainer":
            rec = emb_by_qa.get(qa.qa_id)
            if rec is None:
                raise DataError(f"embeddings file has no record for qa {qa.qa_id!r}")
            located_box = predict(ckpt, rec)
            located_page = gt_page
        else:  # ocr_baseline
            match = locate(pred.content, doc.tokens)
            locate_mode = match.mode
            located_box = match.box
            located_page = match.page

        if located_box is not None:
            n_located += 1
        if located_box is None or located_page != gt_page:
            qa_iou = 0.0
        else:
            qa_iou = iou(located_box, gt_box)

        qa_anls = anls_single(pred.content, qa.answer_value, cfg.anls)
        anls_pairs.append((pred.content, qa.answer_value))
        iou_values.append(qa_iou)
        artifact = {
            "qa_id": qa.qa_id,
            "doc_id": qa.doc_id,
            "question": qa.question,
            "answer_value": qa.answer_value,
            "prompt_sha256": hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
            "response": response,
            "prediction": pred.to_json_dict(),
            "located_box": list(located_box.as_list()) if located_box else None,
            "located_page": located_page,
            "locate_mode": locate_mode,
            "gt_box": list(gt_box.as_list()),
            "gt_page": gt_page,
            "anls": qa_anls,
            "iou": qa_iou,
        }
        artifacts.append(artifact)

    n = len(artifacts)
    row = ReportRow(
        architecture=architecture_label(cfg.endpoint.name, cfg.localizer),
        prompting=_PROMPT_LABELS[cfg.strategy],
        anls=anls_corpus(anls_pairs, cfg.anls),
        mean_iou=(sum(iou_values) / n) if n else 0.0,
        n_qas=n,
        n_parse_failures=n_parse_failures,
        n_located=n_located,
    )

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "artifacts.jsonl").open("w", encoding="utf-8") as fh:
        for artifact in artifacts:
            fh.write(json.dumps(artifact, ensure_ascii=False) + "\n")
    return row, artifacts


_REPORT_FIELDS = ("architecture", "prompting", "anls", "mean_iou", "n_qas",
                  "n_parse_failures", "n_located")


def _metric_text(value: float) -> str:
    """Render 0.691 as .691, table-style."""
    s = f"{value:.3f}"
    return s[1:] if s.startswith("0.") else s


def _rank_marks(values: list[float]) -> list[str]:
    """Per row: 'best', 'second', or '' for a metric column (ties share rank)."""
    marks = [""] * len(values)
    if not values:
        return marks
    best = max(values)
    second = max((v for v in values if v < best), default=None)
    for i, v in enumerate(values):
        if v == best:
            marks[i] = "best"
        elif second is not None and v == second:
            marks[i] = "second"
    return marks


def _decorate(text: str, mark: str) -> str:
    if mark == "best":
        return f"**{text}**"
    if mark == "second":
        return f"<u>{text}</u>"
    return text


def render_report(rows: list[ReportRow], fmt: str) -> str:
    if fmt == "csv":
        lines = [",".join(_REPORT_FIELDS)]
        for row in rows:
            d = row.to_json_dict()
            lines.append(",".join(
                repr(d[k]) if isinstance(d[k], float) else str(d[k])
                for k in _REPORT_FIELDS
            ))
        return "\n".join(lines) + "\n"
    if fmt == "json":
        return json.dumps([r.to_json_dict() for r in rows], ensure_ascii=False, indent=2) + "\n"
    if fmt != "markdown":
        raise ConfigError(f"unknown report format {fmt!r}; use csv, json, or markdown")

    header = ["Architecture", "Prompting", "ANLS", "MeanIoU", "QAs",
              "Parse failures", "Located"]
    anls_marks = _rank_marks([r.anls for r in rows])
    iou_marks = _rank_marks([r.mean_iou for r in rows])
    body = [
        [
            row.architecture,
            row.prompting,
            _decorate(_metric_text(row.anls), anls_marks[i]),
            _decorate(_metric_text(row.mean_iou), iou_marks[i]),
            str(row.n_qas),
            str(row.n_parse_failures),
            str(row.n_located),
        ]
        for i, row in enumerate(rows)
    ]
    widths = [max(len(header[c]), *(len(r[c]) for r in body)) if body else len(header[c])
              for c in range(len(header))]
    def fmt_line(cells: list[str]) -> str:
        return "| " + " | ".join(c.ljust(widths[i]) for i, c in enumerate(cells)) + " |"
    lines = [fmt_line(header), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    lines.extend(fmt_line(r) for r in body)
    return "\n".join(lines) + "\n"


def write_reports(rows: list[ReportRow], out_dir: str | Path) -> dict[str, Path]:
    """Write report.csv / report.json / report.md and return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for fmt, name in (("csv", "report.csv"), ("json", "report.json"), ("markdown", "report.md")):
        p = out / name
        p.write_text(render_report(rows, fmt), encoding="utf-8")
        paths[fmt] = p
    return paths
