#!/usr/bin/env python3
"""Best-effort converter from BoundingDocs-style dumps to the corpus format.

This is a standalone helper, not part of the installed package: the toolkit
itself only ever reads its own newline-delimited JSON interchange format,
and this script produces that format from a JSONL export of the public
BoundingDocs dataset (e.g. `datasets.Dataset.to_json(...)` output, one
document row per line).

Expected row shape (fields are probed defensively; extras are ignored):

    {
      "doc_id": "...",                      # or "id"
      "Q&A": [                              # or "questions" / "qa";
        {                                   # may itself be a JSON string
          "question": "...",
          "rephrased_question": "...",      # optional, falls back to question
          "answers": [
            {"value": "...",
             "location": [[x, y, w, h], ...],   # thousandths of the page
             "page": 1}                         # 1-based by default
          ]
        }, ...
      ],
      "doc_images": ["page1.png", ...],     # strings or {"path": ...} dicts
      "doc_ocr": [                          # one entry per page; each word is
        [["word", [x, y, w, h]], ...],      # a [text, box] pair or a dict with
        ...                                 # text/Text/word/t + box/bbox keys
      ]
    }

Box components given as floats <= 1.0 are treated as page fractions and
scaled to thousandths. Page pixel sizes are not present in these dumps, so
pages are written with a placeholder size (the evaluation pipeline never
reads it; only embedding export opens image files, and it uses the actual
pixels). Rows that do not fit are reported with their line number and, with
--skip-bad, skipped rather than aborting the run.

Usage:
    python3 scripts/convert_boundingdocs.py rows.jsonl -o corpus.jsonl \
        [--split train] [--page-base 1] [--skip-bad] [--limit N]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


class RowError(ValueError):
    pass


def _doc_id(row) -> str:
    for key in ("doc_id", "id"):
        if key in row:
            return str(row[key])
    raise RowError("no doc_id/id field")


def _qa_list(row):
    for key in ("Q&A", "questions", "qa"):
        if key in row:
            value = row[key]
            if isinstance(value, str):
                value = json.loads(value)
            if not isinstance(value, list):
                raise RowError(f"{key} is not a list")
            return value
    raise RowError("no Q&A/questions/qa field")


def _wire_component(v, what) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise RowError(f"{what}: non-numeric box component {v!r}")
    if isinstance(v, float) and abs(v) <= 1.0:
        v = v * 1000.0
    n = int(round(v))
    return 0 if n < 0 else 1000 if n > 1000 else n


def _wire_box(raw, what) -> list[int]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise RowError(f"{what}: box is not a 4-list: {raw!r}")
    x, y, w, h = (_wire_component(v, what) for v in raw)
    # keep extents inside the page after clamping the origin
    return [x, y, min(w, 1000 - x), min(h, 1000 - y)]


def _image_name(entry, doc_id, index) -> str:
    if isinstance(entry, str) and entry:
        return entry
    if isinstance(entry, dict):
        for key in ("path", "file", "filename", "image"):
            if isinstance(entry.get(key), str) and entry[key]:
                return Path(entry[key]).name
    return f"{doc_id}_page{index}.png"


def _token_fields(word, what):
    if isinstance(word, (list, tuple)) and len(word) == 2:
        return word[0], word[1]
    if isinstance(word, dict):
        text = next((word[k] for k in ("text", "Text", "word", "t") if k in word), None)
        box = next((word[k] for k in ("box", "bbox", "position", "location") if k in word), None)
        if text is not None and box is not None:
            return text, box
    raise RowError(f"{what}: unrecognized OCR word entry {word!r}")


def convert_row(row, page_base, split):
    doc_id = _doc_id(row)
    images = row.get("doc_images") or []
    ocr = row.get("doc_ocr") or []
    n_pages = max(len(images), len(ocr), 1)

    pages = [
        {"image": _image_name(images[i] if i < len(images) else None, doc_id, i),
         "w": 1000, "h": 1000}
        for i in range(n_pages)
    ]

    tokens = []
    for page_idx, page_words in enumerate(ocr):
        if not isinstance(page_words, list):
            raise RowError(f"doc_ocr page {page_idx} is not a list")
        for word in page_words:
            text, box = _token_fields(word, f"doc {doc_id} ocr page {page_idx}")
            tokens.append({
                "t": str(text),
                "page": page_idx,
                "box": _wire_box(box, f"doc {doc_id} token {text!r}"),
            })

    doc_line = {"kind": "doc", "doc_id": doc_id, "pages": pages, "tokens": tokens}

    qa_lines = []
    dropped_answers = 0
    for q_idx, entry in enumerate(_qa_list(row)):
        if not isinstance(entry, dict) or "question" not in entry:
            raise RowError(f"doc {doc_id} QA {q_idx}: no question field")
        answers = entry.get("answers") or []
        if not answers:
            raise RowError(f"doc {doc_id} QA {q_idx}: no answers")
        dropped_answers += max(0, len(answers) - 1)
        first = answers[0]
        boxes = []
        for loc in first.get("location") or []:
            page = first.get("page", page_base) - page_base
            if not 0 <= page < n_pages:
                raise RowError(f"doc {doc_id} QA {q_idx}: page {first.get('page')} out of range")
            boxes.append({"page": page, "box": _wire_box(loc, f"doc {doc_id} QA {q_idx}")})
        qa_line = {
            "kind": "qa",
            "qa_id": f"{doc_id}-q{q_idx}",
            "doc_id": doc_id,
            "question": str(entry["question"]),
            "rephrased_question": str(entry.get("rephrased_question") or entry["question"]),
            "answer": str(first.get("value", "")),
            "boxes": boxes,
        }
        if split:
            qa_line["split"] = split
        qa_lines.append(qa_line)

    return doc_line, qa_lines, dropped_answers


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("input", type=Path, help="JSONL dump, one document row per line")
    ap.add_argument("-o", "--out", type=Path, required=True)
    ap.add_argument("--split", choices=("train", "val", "test"),
                    help="stamp every converted QA with this split label")
    ap.add_argument("--page-base", type=int, default=1, choices=(0, 1),
                    help="page numbering base used by the answer locations")
    ap.add_argument("--skip-bad", action="store_true",
                    help="skip rows that fail to convert instead of aborting")
    ap.add_argument("--limit", type=int, help="convert at most N rows")
    ap.add_argument("--no-validate", action="store_true",
                    help="skip re-reading the output with the package validator")
    args = ap.parse_args(argv)

    n_docs = n_qas = n_bad = n_dropped = 0
    with args.input.open("r", encoding="utf-8") as src, \
            args.out.open("w", encoding="utf-8") as dst:
        for line_no, line in enumerate(src, start=1):
            line = line.strip()
            if not line:
                continue
            if args.limit is not None and n_docs >= args.limit:
                break
            try:
                row = json.loads(line)
                doc_line, qa_lines, dropped = convert_row(row, args.page_base, args.split)
            except (RowError, json.JSONDecodeError, KeyError, TypeError) as exc:
                msg = f"row {line_no}: {exc}"
                if not args.skip_bad:
                    print(f"error: {msg} (use --skip-bad to continue)", file=sys.stderr)
                    return 1
                print(f"skipped {msg}", file=sys.stderr)
                n_bad += 1
                continue
            dst.write(json.dumps(doc_line, ensure_ascii=False) + "\n")
            for qa_line in qa_lines:
                dst.write(json.dumps(qa_line, ensure_ascii=False) + "\n")
            n_docs += 1
            n_qas += len(qa_lines)
            n_dropped += dropped

    print(f"converted {n_docs} documents / {n_qas} QAs to {args.out}"
          + (f" ({n_bad} rows skipped)" if n_bad else ""))
    if n_dropped:
        print(f"note: {n_dropped} extra answer variants dropped (first value kept)")

    if not args.no_validate:
        try:
            from docground.dataset import load_corpus
        except ImportError:
            print("note: docground not importable, skipping validation", file=sys.stderr)
            return 0
        corpus = load_corpus(args.out, strict=False)
        print(f"validated: {len(corpus.documents)} documents, {len(corpus.qas)} QAs load cleanly")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
