"""Release gate: the toolkit's headline guarantees, checked in one place.

Each test covers one guarantee end to end -- metric oracles, conversion
round-trips, gradient correctness, trainability, locator exactness, parser
robustness, and byte-stable replayed evaluation runs -- and prints a single
``acceptance <name>: PASS|FAIL`` line straight to the terminal, bypassing
pytest capture, so any full-suite log shows the gate at a glance.
"""

import contextlib
import hashlib
import json
import random
import time
from pathlib import Path

import numpy as np
import pytest

from docground.client import ModelEndpoint
from docground.dataset import OcrToken
from docground.geometry import (
    NormBox,
    PromptBox,
    from_prompt_box,
    iou,
    to_prompt_box,
    union_box,
)
from docground.harness import LOCALIZERS, RunConfig, run_eval, write_reports
from docground.locator import locate
from docground.parsing import Prediction, parse_prediction
from docground.regressor import TrainConfig, save_checkpoint, train
from docground.text_metrics import anls_corpus, levenshtein, normalize_text

from numgrad import draw_case, worst_relative_error
from synth import make_affine_records
from test_text_metrics import naive_levenshtein

DATA = Path(__file__).parent / "data"
GOLDEN = DATA / "golden"


@pytest.fixture
def gate(capsys):
    """Print one summary line per criterion on the real terminal.

    pytest captures stdout, so an ordinary print would surface only on
    failure; disabling capture for the single line keeps the gate visible
    in every log.
    """

    @contextlib.contextmanager
    def _gate(name):
        status = "FAIL"
        try:
            yield
            status = "PASS"
        finally:
            with capsys.disabled():
                print(f"\nacceptance {name}: {status}")

    return _gate


# --- text metrics ----------------------------------------------------------


def naive_anls(pred, gt):
    """Independent recomputation of the per-pair score from the naive DP."""
    p = normalize_text(pred)
    g = normalize_text(gt)
    longest = max(len(p), len(g))
    if longest == 0:
        return 1.0
    sim = 1.0 - naive_levenshtein(p, g) / longest
    return sim if sim >= 0.5 else 0.0


def test_levenshtein_agrees_with_naive_dp(gate):
    with gate("levenshtein-oracle"):
        rng = random.Random(20260823)
        alphabet = "abcdefAB -"

        def rand_text(cap):
            return "".join(rng.choice(alphabet) for _ in range(rng.randint(0, cap)))

        start = time.perf_counter()
        for _ in range(10_000):
            a, b = rand_text(64), rand_text(64)
            assert levenshtein(a, b) == naive_levenshtein(a, b)

        # corpus score recomputed from the naive distance; mix exact-ish,
        # unrelated, and missing predictions so both threshold branches and
        # the None rule are exercised
        qa_pairs = []
        for i in range(500):
            gt = rand_text(24)
            if i % 20 == 7:
                qa_pairs.append((None, gt))
            elif i % 2 == 0:
                chars = list(gt)
                for _ in range(rng.randint(0, 3)):
                    if chars:
                        chars[rng.randrange(len(chars))] = rng.choice(alphabet)
                qa_pairs.append(("".join(chars), gt))
            else:
                qa_pairs.append((rand_text(24), gt))
        expected = sum(
            0.0 if p is None else naive_anls(p, g) for p, g in qa_pairs
        ) / len(qa_pairs)
        assert abs(anls_corpus(qa_pairs) - expected) < 1e-12
        assert time.perf_counter() - start < 10.0


# --- geometry --------------------------------------------------------------


def rand_norm_box(rng):
    x1, x2 = sorted((rng.random(), rng.random()))
    y1, y2 = sorted((rng.random(), rng.random()))
    return NormBox(x1, y1, x2, y2)


def disjoint_pair(rng):
    """Two boxes separated by a guaranteed horizontal gap."""
    lx1, lx2 = sorted((rng.uniform(0.0, 0.45), rng.uniform(0.0, 0.45)))
    rx1, rx2 = sorted((rng.uniform(0.55, 1.0), rng.uniform(0.55, 1.0)))
    ly1, ly2 = sorted((rng.random(), rng.random()))
    ry1, ry2 = sorted((rng.random(), rng.random()))
    return NormBox(lx1, ly1, lx2, ly2), NormBox(rx1, ry1, rx2, ry2)


def test_iou_property_suite(gate):
    with gate("iou-properties"):
        rng = random.Random(991)
        start = time.perf_counter()
        for _ in range(10_000):
            a = rand_norm_box(rng)
            b = rand_norm_box(rng)
            ab = iou(a, b)
            assert ab == iou(b, a)
            assert 0.0 <= ab <= 1.0
            assert iou(a, a) == 1.0
            d1, d2 = disjoint_pair(rng)
            assert iou(d1, d2) == 0.0

        # box slid right by exactly half its width: overlap 1, union 3
        a = NormBox(0.1, 0.1, 0.3, 0.3)
        b = NormBox(0.2, 0.1, 0.4, 0.3)
        assert abs(iou(a, b) - 1.0 / 3.0) < 1e-12
        assert time.perf_counter() - start < 5.0


def test_prompt_box_round_trip_grid(gate):
    with gate("coordinate-round-trip"):
        # x and w interact only with each other inside the conversion (same
        # for y and h), so sweeping every (offset, extent) pair on each axis
        # covers every distinct rounding case of the full 4-coordinate grid.
        grid = range(0, 1001, 7)
        failures = 0
        checked = 0
        for a in grid:
            for b in grid:
                if a + b > 1000:
                    break
                for pb in (PromptBox(a, 0, b, 1000), PromptBox(0, a, 1000, b)):
                    nb, clamped = from_prompt_box(pb)
                    if clamped or to_prompt_box(nb) != pb:
                        failures += 1
                    checked += 1
        assert checked > 20_000
        assert failures == 0


# --- regressor -------------------------------------------------------------


def test_gradients_match_finite_differences(gate):
    with gate("gradcheck"):
        rng = np.random.default_rng(7)
        start = time.perf_counter()
        worst = 0.0
        for _ in range(100):
            params, V, T, Y = draw_case(rng, dv=8, dt=8, latent=4, hidden=4)
            worst = max(worst, worst_relative_error(params, V, T, Y, eps=1e-5))
        elapsed = time.perf_counter() - start
        assert worst < 1e-4, f"worst relative gradient error {worst:.3e}"
        assert elapsed < 60.0


def test_overfit_synthetic_affine_targets(gate):
    with gate("overfit"):
        records = make_affine_records(seed=123, n=32, dv=16, dt=16, noise=0.01)
        cfg = TrainConfig(
            latent_dim=32,
            hidden_dim=32,
            learning_rate=5e-3,
            batch_size=32,
            epochs=200,
            seed=7,
        )
        start = time.perf_counter()
        ckpt, history = train(records, records, cfg)
        elapsed = time.perf_counter() - start
        best = max(h["train_mean_iou"] for h in history)
        assert best > 0.8, f"best train MeanIoU {best:.3f}"
        violations = sum(
            1
            for prev, cur in zip(history, history[1:])
            if cur["train_loss"] > prev["train_loss"]
        )
        assert violations <= 5, f"loss rose on {violations} epochs"
        assert elapsed < 60.0


def test_training_is_bit_reproducible(gate, tmp_path):
    with gate("train-determinism"):
        records = make_affine_records(seed=5, n=12, dv=8, dt=8)
        cfg = TrainConfig(
            latent_dim=8,
            hidden_dim=8,
            learning_rate=5e-3,
            batch_size=6,
            epochs=10,
            seed=21,
        )
        digests = []
        for name in ("first.dxv0", "second.dxv0"):
            ckpt, _ = train(records, records[:4], cfg)
            path = tmp_path / name
            save_checkpoint(path, ckpt)
            digests.append(hashlib.sha256(path.read_bytes()).hexdigest())
        assert digests[0] == digests[1]


# --- locator ---------------------------------------------------------------


def planted_corpus(n_docs):
    """Documents of filler rows with a unique answer run spliced into one row.

    Answer words occur nowhere else in their document, so a full match can
    only land on the planted run and its union box is the ground truth.
    """
    rng = random.Random(31415)
    filler = [
        "amount", "total", "invoice", "date", "summary", "page",
        "item", "rate", "tax", "due", "order", "ref",
    ]
    docs = []
    for d in range(n_docs):
        n_rows = rng.randint(3, 6)
        rows = [
            [rng.choice(filler) for _ in range(rng.randint(4, 8))]
            for _ in range(n_rows)
        ]
        k = rng.randint(1, 4)
        answer_words = [f"ans{d:03d}w{j}" for j in range(k)]
        target_row = rng.randrange(n_rows)
        offset = rng.randint(0, len(rows[target_row]) - k)
        rows[target_row][offset : offset + k] = answer_words

        tokens = []
        planted = []
        for r, words in enumerate(rows):
            y = 0.08 + r * 0.12
            x = 0.05
            for c, word in enumerate(words):
                tok = OcrToken(text=word, box=NormBox(x, y, x + 0.07, y + 0.03), page=0)
                tokens.append(tok)
                if r == target_row and offset <= c < offset + k:
                    planted.append(tok)
                x += 0.085
        docs.append((answer_words, tokens, union_box([t.box for t in planted])))
    return docs


def test_ocr_locator_exactness(gate):
    with gate("ocr-locator"):
        start = time.perf_counter()
        docs = planted_corpus(200)

        full_hits = 0
        total_iou = 0.0
        for answer_words, tokens, gt_box in docs:
            m = locate(" ".join(answer_words), tokens)
            if m.mode == "full":
                full_hits += 1
                total_iou += iou(m.box, gt_box)
        assert full_hits == 200
        assert total_iou / 200 == 1.0

        # perturbed so the full phrase is absent: keep the first word on even
        # documents, replace it on odd ones
        for d, (answer_words, tokens, _) in enumerate(docs):
            if d % 2 == 0:
                m = locate(answer_words[0] + " qqzz", tokens)
                assert m.mode == "first_word"
                assert m.box is not None
            else:
                m = locate("qqzz " + " ".join(answer_words), tokens)
                assert m.mode == "none"
                assert m.box is None
        assert time.perf_counter() - start < 5.0


# --- parser ----------------------------------------------------------------


def test_parser_survives_noisy_fixture_suite(gate):
    with gate("parser-robustness"):
        cases = json.loads((DATA / "noisy_cases.json").read_text(encoding="utf-8"))
        assert len(cases) == 50
        usable = 0
        for case in cases:
            pred = parse_prediction(case["raw"])
            assert isinstance(pred, Prediction)
            assert pred.status in ("clean", "recovered", "text_only", "failed")
            if pred.status in ("clean", "recovered"):
                usable += 1
        assert usable >= 45, f"only {usable}/50 cases usable"


# --- replayed evaluation ---------------------------------------------------


def golden_cfg(localizer, out_dir):
    endpoint = ModelEndpoint(
        name="golden-vlm", base_url="http://replay.invalid", flavor="openai_chat"
    )
    return RunConfig(
        corpus=GOLDEN / "corpus.jsonl",
        endpoint=endpoint,
        localizer=localizer,
        replay_store=GOLDEN / "transcripts.jsonl",
        checkpoint=GOLDEN / "regressor.dxv0" if localizer == "docexplainer" else None,
        embeddings=GOLDEN / "embeddings.emb" if localizer == "docexplainer" else None,
        out_dir=out_dir,
    )


def test_golden_replay_is_byte_stable(gate, tmp_path):
    with gate("golden-replay"):
        start = time.perf_counter()
        mean_ious = {}
        for localizer in LOCALIZERS:
            expected_dir = GOLDEN / "expected" / localizer
            for attempt in ("first", "second"):
                out = tmp_path / localizer / attempt
                out.mkdir(parents=True)
                row, _ = run_eval(golden_cfg(localizer, out))
                write_reports([row], out)
                for name in ("artifacts.jsonl", "report.csv", "report.json", "report.md"):
                    assert (out / name).read_bytes() == (expected_dir / name).read_bytes(), (
                        f"{localizer}/{attempt}/{name} drifted from the recorded bundle"
                    )
                mean_ious[localizer] = row.mean_iou
        assert mean_ious["ocr_baseline"] > mean_ious["model_box"]
        assert time.perf_counter() - start < 10.0
