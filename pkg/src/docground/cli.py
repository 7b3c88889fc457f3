"""Command-line entry point.

Every subcommand accepts ``--config run.json`` plus per-flag overrides;
flags win over the config file.  Exit codes: 0 success, 1 configuration
error, 2 data/validation error, 3 transport error, 4 replay miss.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .client import FLAVORS, ModelEndpoint, RetryPolicy, TranscriptStore, VlmClient, replay_query
from .dataset import filter_single_box, load_corpus, save_corpus
from .errors import (
    ConfigError,
    DataError,
    ReplayMissError,
    TransportError,
)
from .formats import read_embeddings
from .geometry import PromptBox
from .harness import (
    LOCALIZERS,
    ReportRow,
    RunConfig,
    pick_cot_exemplars,
    render_report,
    run_eval,
    write_reports,
)
from .locator import locate
from .parsing import parse_prediction
from .prompting import STRATEGIES, PromptSpec, build_prompt
from .regressor import TEXT_MODES, TrainConfig, load_checkpoint, predict_many, save_checkpoint, train
from .text_metrics import AnlsConfig


class _Parser(argparse.ArgumentParser):
    """argparse reports usage problems by raising; the CLI maps them to exit 1."""

    def error(self, message):
        raise ConfigError(message)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def _pick(flag_value, config: dict, key: str, default=None):
    """Flag wins; then the config file; then the default."""
    if flag_value is not None:
        return flag_value
    return config.get(key, default)


def _endpoint_from(config: dict) -> ModelEndpoint:
    ep = config.get("endpoint")
    if not isinstance(ep, dict):
        raise ConfigError("config must define an 'endpoint' object (name, base_url, flavor)")
    known = {"name", "base_url", "flavor", "auth_env", "max_concurrency", "timeout", "model"}
    extra = set(ep) - known
    if extra:
        raise ConfigError(f"unknown endpoint fields: {sorted(extra)}")
    try:
        return ModelEndpoint(**ep)
    except TypeError as exc:
        raise ConfigError(f"bad endpoint config: {exc}") from exc


def _prompt_fields_from(config: dict, args) -> dict:
    """Prompt strategy settings shared by RunConfig and the prompt command."""
    pc = dict(config.get("prompt", {}))
    exemplars = []
    for entry in pc.get("exemplars", []):
        try:
            q, a, (x, y, w, h) = entry
            exemplars.append((q, a, PromptBox(int(x), int(y), int(w), int(h))))
        except (TypeError, ValueError) as exc:
            raise ConfigError(
                f"bad exemplar {entry!r}: expected [question, answer, [x, y, w, h]]"
            ) from exc
    return {
        "strategy": _pick(getattr(args, "strategy", None), pc, "strategy", "zero_shot"),
        "exemplars": tuple(exemplars),
        "anchor_budget": int(_pick(getattr(args, "anchor_budget", None), pc, "anchor_budget", 100)),
        "question_field": _pick(
            getattr(args, "question_field", None), pc, "question_field", "question"
        ),
    }


def _anls_from(config: dict) -> AnlsConfig:
    ac = config.get("anls", {})
    if not isinstance(ac, dict):
        raise ConfigError("'anls' config must be an object")
    try:
        return AnlsConfig(**ac)
    except TypeError as exc:
        raise ConfigError(f"bad anls config: {exc}") from exc


def _read_text(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


# ---------------------------------------------------------------- subcommands


def cmd_ingest(args) -> int:
    corpus = load_corpus(args.corpus, strict=not args.lenient)
    summary = {
        "documents": len(corpus.documents),
        "pages": sum(len(d.pages) for d in corpus.documents.values()),
        "tokens": sum(len(d.tokens) for d in corpus.documents.values()),
        "qas": len(corpus.qas),
        "single_box_qas": len(filter_single_box(corpus).qas),
    }
    if args.out:
        save_corpus(corpus, args.out)
        summary["written"] = args.out
    print(json.dumps(summary, ensure_ascii=False))
    return 0


def cmd_prompt(args) -> int:
    config = _load_config(args.config)
    corpus_path = _pick(args.corpus, config, "corpus")
    if corpus_path is None:
        raise ConfigError("a corpus path is required (flag --corpus or config 'corpus')")
    corpus = load_corpus(corpus_path)
    by_id = {qa.qa_id: qa for qa in corpus.qas}
    qa = by_id.get(args.qa)
    if qa is None:
        raise DataError(f"no QA with id {args.qa!r}")
    fields = _prompt_fields_from(config, args)
    if fields["strategy"] == "cot" and not fields["exemplars"]:
        seed = int(_pick(args.seed, config, "seed", 0))
        exemplars = pick_cot_exemplars(corpus, exclude_doc_id=qa.doc_id, seed=seed)
        if not exemplars:
            raise DataError(f"no usable CoT exemplars for qa {qa.qa_id!r}")
        fields["exemplars"] = exemplars
    spec = PromptSpec(**fields)
    question = qa.rephrased_question if spec.question_field == "rephrased_question" else qa.question
    tokens = corpus.documents[qa.doc_id].tokens
    print(build_prompt(spec, question, tokens))
    return 0


def cmd_query(args) -> int:
    config = _load_config(args.config)
    endpoint = _endpoint_from(config)
    prompt = _read_text(args.prompt)
    image = _pick(args.image, config, "image")
    if image is None:
        raise ConfigError("an --image is required")
    replay = _pick(args.replay, config, "replay")
    if replay:
        response = replay_query(TranscriptStore(replay), endpoint, prompt, image)
    else:
        record = _pick(args.record, config, "record")
        store = TranscriptStore(record) if record else None
        response = VlmClient(endpoint, store=store, retry=RetryPolicy()).query(prompt, image)
    print(response)
    return 0


def cmd_parse(args) -> int:
    pred = parse_prediction(_read_text(args.input))
    print(json.dumps(pred.to_json_dict(), ensure_ascii=False))
    return 0


def cmd_locate(args) -> int:
    corpus = load_corpus(args.corpus)
    doc = corpus.documents.get(args.doc)
    if doc is None:
        raise DataError(f"no document with id {args.doc!r}")
    match = locate(args.text, doc.tokens)
    print(json.dumps(
        {
            "mode": match.mode,
            "page": match.page,
            "box": list(match.box.as_list()) if match.box else None,
            "matched_span": match.matched_span,
        },
        ensure_ascii=False,
    ))
    return 0


def cmd_train(args) -> int:
    config = _load_config(args.config)
    tc = dict(config.get("train", {}))
    overrides = {
        "latent_dim": args.latent_dim,
        "hidden_dim": args.hidden_dim,
        "learning_rate": args.learning_rate,
        "batch_size": args.batch_size,
        "epochs": args.epochs,
        "seed": args.seed,
        "text_mode": args.text_mode,
    }
    for key, value in overrides.items():
        if value is not None:
            tc[key] = value
    try:
        cfg = TrainConfig(**tc)
    except TypeError as exc:
        raise ConfigError(f"bad train config: {exc}") from exc
    emb_path = _pick(args.embeddings, config, "embeddings")
    if emb_path is None:
        raise ConfigError("an embeddings path is required (flag --embeddings or config 'embeddings')")
    records = read_embeddings(emb_path).records
    val_path = _pick(args.val, config, "val")
    val = read_embeddings(val_path).records if val_path else ()
    ckpt, history = train(records, val, cfg)
    out = _pick(args.out, config, "out", "checkpoint.dxv0")
    save_checkpoint(out, ckpt)
    print(json.dumps(
        {
            "checkpoint": str(out),
            "best_epoch": ckpt.epoch,
            "val_mean_iou": ckpt.val_mean_iou,
            "train_loss": ckpt.train_loss,
            "history": history,
        },
        ensure_ascii=False,
    ))
    return 0


def cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    emb = read_embeddings(args.embeddings)
    boxes = predict_many(ckpt, emb.records)
    lines = [
        json.dumps({"qa_id": rec.qa_id, "box": list(box.as_list())}, ensure_ascii=False)
        for rec, box in zip(emb.records, boxes)
    ]
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_evaluate(args) -> int:
    config = _load_config(args.config)
    corpus = _pick(args.corpus, config, "corpus")
    if corpus is None:
        raise ConfigError("a corpus path is required (flag --corpus or config 'corpus')")
    replay = _pick(args.replay, config, "replay")
    record = _pick(args.record, config, "record")
    checkpoint = _pick(args.checkpoint, config, "checkpoint")
    embeddings = _pick(args.embeddings, config, "embeddings")
    cfg = RunConfig(
        corpus=Path(corpus),
        endpoint=_endpoint_from(config),
        localizer=_pick(args.localizer, config, "localizer", "model_box"),
        **_prompt_fields_from(config, args),
        replay_store=Path(replay) if replay else None,
        record_store=Path(record) if record else None,
        checkpoint=Path(checkpoint) if checkpoint else None,
        embeddings=Path(embeddings) if embeddings else None,
        anls=_anls_from(config),
        out_dir=Path(_pick(args.out, config, "out", ".")),
        seed=int(_pick(args.seed, config, "seed", 0)),
    )
    row, _ = run_eval(cfg)
    write_reports([row], cfg.out_dir)
    sys.stdout.write(render_report([row], "markdown"))
    return 0


def cmd_report(args) -> int:
    rows: list[ReportRow] = []
    for path in args.rows:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read report rows from {path}: {exc}") from exc
        if isinstance(data, dict):
            data = [data]
        for entry in data:
            try:
                rows.append(ReportRow(**entry))
            except TypeError as exc:
                raise DataError(f"{path}: bad report row {entry!r}: {exc}") from exc
    text = render_report(rows, args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="docground", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a corpus file and print summary stats")
    p.add_argument("corpus")
    p.add_argument("--lenient", action="store_true", help="clamp out-of-range boxes instead of failing")
    p.add_argument("--out", help="write the normalized corpus here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("prompt", help="print the prompt that would be sent for one QA")
    p.add_argument("--config")
    p.add_argument("--corpus")
    p.add_argument("--qa", required=True, help="qa_id to build the prompt for")
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--question-field", dest="question_field",
                   choices=("question", "rephrased_question"))
    p.add_argument("--anchor-budget", dest="anchor_budget", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("query", help="send one prompt+image to the endpoint (or replay it)")
    p.add_argument("--config", required=True, help="JSON file defining the endpoint")
    p.add_argument("--prompt", help="prompt text file ('-' for stdin)")
    p.add_argument("--image")
    p.add_argument("--replay", help="transcript store to replay from")
    p.add_argument("--record", help="transcript store to append to")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("parse", help="parse a raw model response into a prediction")
    p.add_argument("--input", help="response text file ('-' for stdin)")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("locate", help="find answer text among a document's OCR tokens")
    p.add_argument("--corpus", required=True)
    p.add_argument("--doc", required=True)
    p.add_argument("--text", required=True)
    p.set_defaults(func=cmd_locate)

    p = sub.add_parser("train", help="train the box regressor on an embedding file")
    p.add_argument("--config")
    p.add_argument("--embeddings", help="EMB1 file with targets")
    p.add_argument("--val", help="EMB1 file used for checkpoint selection")
    p.add_argument("--out", help="checkpoint path (default checkpoint.dxv0)")
    p.add_argument("--latent-dim", dest="latent_dim", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--text-mode", dest="text_mode", choices=TEXT_MODES)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict boxes for every record in an embedding file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="run the full pipeline and write reports")
    p.add_argument("--config")
    p.add_argument("--corpus")
    p.add_argument("--localizer", choices=LOCALIZERS)
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--question-field", dest="question_field",
                   choices=("question", "rephrased_question"))
    p.add_argument("--anchor-budget", dest="anchor_budget", type=int)
    p.add_argument("--replay")
    p.add_argument("--record")
    p.add_argument("--checkpoint")
    p.add_argument("--embeddings")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="merge row files into one rendered report")
    p.add_argument("rows", nargs="+", help="report.json files (or single row objects)")
    p.add_argument("--format", default="markdown", choices=("csv", "json", "markdown"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ReplayMissError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
