import json
import struct

import numpy as np
import pytest

from docground.errors import ValidationError
from docground.formats import (
    EmbeddingRecord,
    read_checkpoint_blob,
    read_embeddings,
    write_checkpoint_blob,
    write_embeddings,
)
from docground.geometry import NormBox


def rec(qa_id, dv=3, dt=2, target=None, fill=1.0):
    return EmbeddingRecord(
        qa_id=qa_id,
        visual=np.full(dv, fill, dtype=np.float32),
        text=np.full(dt, fill / 2, dtype=np.float32),
        target=target,
    )


def hand_built_emb1():
    """The embedding layout assembled with struct, independent of the writer."""
    blob = b"EMB1"
    blob += struct.pack("<B", 1)
    blob += struct.pack("<III", 3, 2, 2)  # Dv=3 Dt=2 count=2
    # record 1: with target
    blob += struct.pack("<H", 2) + b"qa"
    blob += struct.pack("<3f", 1.0, 1.0, 1.0)
    blob += struct.pack("<2f", 0.5, 0.5)
    blob += struct.pack("<B", 1)
    blob += struct.pack("<4f", 0.1, 0.2, 0.3, 0.4)
    # record 2: no target, UTF-8 id
    ident = "qé".encode("utf-8")
    blob += struct.pack("<H", len(ident)) + ident
    blob += struct.pack("<3f", 2.0, 2.0, 2.0)
    blob += struct.pack("<2f", 1.0, 1.0)
    blob += struct.pack("<B", 0)
    return blob


def test_reader_accepts_hand_built_bytes(tmp_path):
    p = tmp_path / "x.emb"
    p.write_bytes(hand_built_emb1())
    emb = read_embeddings(p)
    assert (emb.dv, emb.dt) == (3, 2)
    assert [r.qa_id for r in emb.records] == ["qa", "qé"]
    first = emb.records[0]
    assert first.target is not None
    assert first.target.as_list() == pytest.approx([0.1, 0.2, 0.3, 0.4], abs=1e-7)
    assert emb.records[1].target is None
    assert emb.by_qa_id()["qa"] is first


def test_writer_matches_hand_built_bytes(tmp_path):
    p = tmp_path / "x.emb"
    write_embeddings(
        p,
        [
            rec("qa", target=NormBox(
                float(np.float32(0.1)), float(np.float32(0.2)),
                float(np.float32(0.3)), float(np.float32(0.4)))),
            rec("qé", fill=2.0),
        ],
        dv=3,
        dt=2,
    )
    assert p.read_bytes() == hand_built_emb1()


def test_embeddings_roundtrip(tmp_path):
    p = tmp_path / "r.emb"
    records = [
        rec("a", target=NormBox(0.0, 0.0, 0.5, 0.5)),
        rec("b"),
        rec("答え", target=NormBox(0.25, 0.25, 0.75, 1.0)),
    ]
    write_embeddings(p, records, dv=3, dt=2)
    back = read_embeddings(p)
    assert [r.qa_id for r in back.records] == ["a", "b", "答え"]
    for orig, got in zip(records, back.records):
        np.testing.assert_array_equal(got.visual, orig.visual)
        np.testing.assert_array_equal(got.text, orig.text)
        if orig.target is None:
            assert got.target is None
        else:
            assert got.target.as_list() == pytest.approx(orig.target.as_list(), abs=1e-7)


def test_write_rejects_shape_mismatch(tmp_path):
    with pytest.raises(ValidationError, match="Dv"):
        write_embeddings(tmp_path / "x.emb", [rec("a", dv=4)], dv=3, dt=2)


def test_read_rejects_bad_magic(tmp_path):
    p = tmp_path / "x.emb"
    p.write_bytes(b"NOPE" + hand_built_emb1()[4:])
    with pytest.raises(ValidationError, match="not an EMB1"):
        read_embeddings(p)


def test_read_rejects_bad_version(tmp_path):
    blob = bytearray(hand_built_emb1())
    blob[4] = 9
    p = tmp_path / "x.emb"
    p.write_bytes(bytes(blob))
    with pytest.raises(ValidationError, match="version"):
        read_embeddings(p)


def test_read_rejects_truncation(tmp_path):
    p = tmp_path / "x.emb"
    p.write_bytes(hand_built_emb1()[:-3])
    with pytest.raises(ValidationError, match="truncated"):
        read_embeddings(p)


def test_read_rejects_trailing_bytes(tmp_path):
    p = tmp_path / "x.emb"
    p.write_bytes(hand_built_emb1() + b"\x00")
    with pytest.raises(ValidationError, match="trailing"):
        read_embeddings(p)


def test_read_rejects_non_finite(tmp_path):
    p = tmp_path / "x.emb"
    bad = rec("a")
    bad = EmbeddingRecord(
        qa_id="a", visual=np.array([1.0, np.nan, 0.0], dtype=np.float32),
        text=bad.text, target=None,
    )
    write_embeddings(p, [bad], dv=3, dt=2)
    with pytest.raises(ValidationError, match="non-finite"):
        read_embeddings(p)


def test_read_rejects_bad_target_box(tmp_path):
    blob = bytearray(hand_built_emb1())
    # corrupt record 1's target: x2 < x1
    offset = 4 + 1 + 12 + 2 + 2 + 12 + 8 + 1
    blob[offset : offset + 16] = struct.pack("<4f", 0.9, 0.2, 0.3, 0.4)
    p = tmp_path / "x.emb"
    p.write_bytes(bytes(blob))
    with pytest.raises(ValidationError, match="qa"):
        read_embeddings(p)


def hand_built_ckpt(header: dict, matrices):
    blob = b"DXV0" + struct.pack("<B", 1)
    hdr = dict(header)
    hdr["matrices"] = [{"name": n, "shape": list(a.shape)} for n, a in matrices]
    hb = json.dumps(hdr, ensure_ascii=False).encode("utf-8")
    blob += struct.pack("<I", len(hb)) + hb
    for _, a in matrices:
        blob += np.asarray(a, dtype="<f4").tobytes()
    return blob


def test_checkpoint_blob_matches_hand_built(tmp_path):
    mats = [("W", np.arange(6, dtype=np.float64).reshape(2, 3)), ("b", np.ones(3))]
    header = {"config": {"epochs": 2}, "epoch": 1, "metrics": {"val_mean_iou": 0.5}}
    p = tmp_path / "c.dxv0"
    write_checkpoint_blob(p, header, mats)
    assert p.read_bytes() == hand_built_ckpt(header, mats)

    got_header, got = read_checkpoint_blob(p)
    assert got_header["config"] == {"epochs": 2}
    assert got_header["epoch"] == 1
    np.testing.assert_array_equal(got["W"], np.arange(6).reshape(2, 3))
    np.testing.assert_array_equal(got["b"], np.ones(3))
    assert got["W"].dtype == np.float64  # widened for in-memory math


def test_checkpoint_rejects_bad_magic_and_trailing(tmp_path):
    mats = [("b", np.ones(2))]
    p = tmp_path / "c.dxv0"
    write_checkpoint_blob(p, {"epoch": 0}, mats)
    data = p.read_bytes()
    p.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(ValidationError, match="not a DXV0"):
        read_checkpoint_blob(p)
    p.write_bytes(data + b"!")
    with pytest.raises(ValidationError, match="trailing"):
        read_checkpoint_blob(p)


def test_checkpoint_rejects_non_finite_matrix(tmp_path):
    p = tmp_path / "c.dxv0"
    write_checkpoint_blob(p, {"epoch": 0}, [("b", np.array([1.0, np.inf]))])
    with pytest.raises(ValidationError, match="non-finite"):
        read_checkpoint_blob(p)
