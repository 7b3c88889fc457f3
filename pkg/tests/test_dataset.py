import json
import logging

import pytest

from docground.dataset import (
    Corpus,
    filter_single_box,
    load_corpus,
    save_corpus,
    split,
)
from docground.errors import ConfigError, CorpusFormatError, ValidationError


def doc_line(doc_id, n_pages=1, tokens=None):
    pages = [{"image": f"{doc_id}_p{i}.png", "w": 800, "h": 1000} for i in range(n_pages)]
    return {
        "kind": "doc",
        "doc_id": doc_id,
        "pages": pages,
        "tokens": tokens if tokens is not None else [
            {"t": "hello", "page": 0, "box": [100, 100, 80, 20]},
            {"t": "world", "page": 0, "box": [200, 100, 80, 20]},
        ],
    }


def qa_line(qa_id, doc_id, boxes=None, split=None, answer="world"):
    obj = {
        "kind": "qa",
        "qa_id": qa_id,
        "doc_id": doc_id,
        "question": "What comes after hello?",
        "rephrased_question": "Which word follows hello?",
        "answer": answer,
        "boxes": boxes if boxes is not None else [{"page": 0, "box": [200, 100, 80, 20]}],
    }
    if split:
        obj["split"] = split
    return obj


def write_corpus(path, objs):
    path.write_text("\n".join(json.dumps(o) for o in objs) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def small_corpus(tmp_path):
    objs = [doc_line(f"d{i}") for i in range(3)]
    objs += [qa_line(f"q{i:02d}", f"d{i % 3}") for i in range(10)]
    # one multi-box QA for the single-box filter to drop
    objs[-1]["boxes"].append({"page": 0, "box": [100, 100, 80, 20]})
    return write_corpus(tmp_path / "corpus.jsonl", objs)


def test_load_corpus_happy_path(small_corpus):
    corpus = load_corpus(small_corpus)
    assert len(corpus.documents) == 3
    assert len(corpus.qas) == 10
    doc = corpus.documents["d0"]
    assert doc.pages[0].image == "d0_p0.png"
    t = doc.tokens[0]
    assert t.text == "hello"
    assert t.box.as_tuple() == (0.1, 0.1, 0.18, 0.12)
    qa = corpus.qas[0]
    assert qa.answer_value == "world"
    assert qa.answer_boxes[0][0] == 0
    assert corpus.document_for(qa) is corpus.documents[qa.doc_id]


def test_blank_lines_ignored(tmp_path):
    p = tmp_path / "c.jsonl"
    body = json.dumps(doc_line("d0")) + "\n\n" + json.dumps(qa_line("q0", "d0")) + "\n"
    p.write_text(body, encoding="utf-8")
    corpus = load_corpus(p)
    assert len(corpus.qas) == 1


def test_invalid_json_names_line(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text(json.dumps(doc_line("d0")) + "\n{not json\n", encoding="utf-8")
    with pytest.raises(CorpusFormatError, match="line 2"):
        load_corpus(p)


def test_unknown_kind(tmp_path):
    p = write_corpus(tmp_path / "c.jsonl", [{"kind": "mystery"}])
    with pytest.raises(CorpusFormatError, match="unknown kind"):
        load_corpus(p)


def test_missing_field_names_line(tmp_path):
    bad = qa_line("q0", "d0")
    del bad["question"]
    p = write_corpus(tmp_path / "c.jsonl", [doc_line("d0"), bad])
    with pytest.raises(CorpusFormatError, match="line 2.*question"):
        load_corpus(p)


def test_dangling_doc_reference(tmp_path):
    p = write_corpus(tmp_path / "c.jsonl", [doc_line("d0"), qa_line("q0", "ghost")])
    with pytest.raises(ValidationError, match="ghost"):
        load_corpus(p)


def test_duplicate_ids(tmp_path):
    p = write_corpus(tmp_path / "c.jsonl", [doc_line("d0"), doc_line("d0")])
    with pytest.raises(ValidationError, match="duplicate doc_id"):
        load_corpus(p)
    p2 = write_corpus(
        tmp_path / "c2.jsonl", [doc_line("d0"), qa_line("q0", "d0"), qa_line("q0", "d0")]
    )
    with pytest.raises(ValidationError, match="duplicate qa_id"):
        load_corpus(p2)


def test_answer_page_out_of_range(tmp_path):
    p = write_corpus(
        tmp_path / "c.jsonl",
        [doc_line("d0"), qa_line("q0", "d0", boxes=[{"page": 3, "box": [0, 0, 10, 10]}])],
    )
    with pytest.raises(ValidationError, match="q0.*page 3"):
        load_corpus(p)


def test_out_of_range_box_strict_vs_lenient(tmp_path, caplog):
    p = write_corpus(
        tmp_path / "c.jsonl",
        [doc_line("d0"), qa_line("q0", "d0", boxes=[{"page": 0, "box": [990, 0, 50, 10]}])],
    )
    with pytest.raises(ValidationError, match="q0"):
        load_corpus(p)
    with caplog.at_level(logging.WARNING):
        corpus = load_corpus(p, strict=False)
    assert "clamped" in caplog.text
    _, box = corpus.qas[0].answer_boxes[0]
    assert box.x2 == 1.0  # clamped at the page edge


def test_non_integer_box_rejected(tmp_path):
    p = write_corpus(
        tmp_path / "c.jsonl",
        [doc_line("d0", tokens=[{"t": "x", "page": 0, "box": [0.5, 0, 10, 10]}])],
    )
    with pytest.raises(CorpusFormatError, match="4 integers"):
        load_corpus(p)


def test_round_trip(small_corpus, tmp_path):
    corpus = load_corpus(small_corpus)
    out = tmp_path / "copy.jsonl"
    save_corpus(corpus, out)
    again = load_corpus(out)
    assert again.documents == corpus.documents
    assert again.qas == corpus.qas


def test_filter_single_box(small_corpus):
    corpus = load_corpus(small_corpus)
    only = filter_single_box(corpus)
    assert len(only.qas) == 9
    assert set(only.documents) == set(corpus.documents)  # docs are kept
    assert all(len(qa.answer_boxes) == 1 for qa in only.qas)


def make_big_corpus(n_docs=20, qas_per_doc=2):
    objs = [doc_line(f"d{i:02d}") for i in range(n_docs)]
    objs += [
        qa_line(f"q{i:02d}_{j}", f"d{i:02d}") for i in range(n_docs) for j in range(qas_per_doc)
    ]
    return objs


def test_split_partitions_by_document(tmp_path):
    p = write_corpus(tmp_path / "c.jsonl", make_big_corpus())
    corpus = load_corpus(p)
    train, val, test = split(corpus, seed=7)
    ids = [set(c.documents) for c in (train, val, test)]
    assert ids[0] | ids[1] | ids[2] == set(corpus.documents)
    assert not (ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2])
    # fractions (.8/.1/.1) of 20 documents
    assert (len(ids[0]), len(ids[1]), len(ids[2])) == (16, 2, 2)
    # QAs travel with their document and are returned unchanged
    all_qas = train.qas + val.qas + test.qas
    assert sorted(q.qa_id for q in all_qas) == sorted(q.qa_id for q in corpus.qas)
    assert set(all_qas) == set(corpus.qas)


def test_split_deterministic_and_seed_sensitive(tmp_path):
    p = write_corpus(tmp_path / "c.jsonl", make_big_corpus())
    corpus = load_corpus(p)
    a = split(corpus, seed=7)
    b = split(corpus, seed=7)
    c = split(corpus, seed=8)
    assert [set(x.documents) for x in a] == [set(x.documents) for x in b]
    assert [set(x.documents) for x in a] != [set(x.documents) for x in c]


def test_split_honors_hints(tmp_path):
    objs = [doc_line("d0"), doc_line("d1"), doc_line("d2")]
    objs += [
        qa_line("q0", "d0", split="train"),
        qa_line("q1", "d1", split="val"),
        qa_line("q2", "d2", split="test"),
        qa_line("q3", "d0", split="train"),
    ]
    corpus = load_corpus(write_corpus(tmp_path / "c.jsonl", objs))
    train, val, test = split(corpus, seed=0)
    assert [q.qa_id for q in train.qas] == ["q0", "q3"]
    assert [q.qa_id for q in val.qas] == ["q1"]
    assert [q.qa_id for q in test.qas] == ["q2"]


def test_split_bad_fractions(tmp_path):
    corpus = load_corpus(write_corpus(tmp_path / "c.jsonl", make_big_corpus(4, 1)))
    with pytest.raises(ConfigError):
        split(corpus, seed=0, fractions=(0.5, 0.5, 0.5))
    with pytest.raises(ConfigError):
        split(corpus, seed=0, fractions=(1.0, 0.0, 0.0))


def test_bad_split_label(tmp_path):
    p = write_corpus(tmp_path / "c.jsonl", [doc_line("d0"), qa_line("q0", "d0", split="dev")])
    with pytest.raises(CorpusFormatError, match="dev"):
        load_corpus(p)
