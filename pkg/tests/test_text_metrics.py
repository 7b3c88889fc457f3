import pytest
from hypothesis import given, strategies as st

from docground.errors import ConfigError
from docground.text_metrics import (
    AnlsConfig,
    anls_corpus,
    anls_single,
    levenshtein,
    normalize_text,
)


def naive_levenshtein(a: str, b: str) -> int:
    """Reference implementation: the full (m+1)x(n+1) edit matrix.

    Kept deliberately naive and separate so the optimized two-row version in
    the package is checked against an independent derivation, not itself.
    """
    m, n = len(a), len(b)
    d = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        d[i][0] = i
    for j in range(n + 1):
        d[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost)
    return d[m][n]


def test_normalize_text():
    assert normalize_text("  Bailey   Group ") == "bailey group"
    assert normalize_text("2025-08-19") == "2025-08-19"
    assert normalize_text("June  30, 1966") == "june 30, 1966"


def test_normalize_text_idempotent():
    for s in ["  A\t\nB  ", "", "x", "ÅÉÎ  øü"]:
        once = normalize_text(s)
        assert normalize_text(once) == once


def test_normalize_flags():
    cfg = AnlsConfig(case_fold=False)
    assert normalize_text("  Bailey   Group ", cfg) == "Bailey Group"
    cfg = AnlsConfig(collapse_whitespace=False, case_fold=False, trim=False)
    assert normalize_text(" A  B ", cfg) == " A  B "


def test_levenshtein_known_values():
    assert levenshtein("", "abc") == 3
    assert levenshtein("kitten", "kitten") == 0
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein("flaw", "lawn") == 2


def test_levenshtein_unicode_scalars():
    # one substitution on code points, regardless of byte width
    assert levenshtein("naïve", "naive") == 1
    assert levenshtein("日本語", "日本") == 1


@given(st.text(max_size=24), st.text(max_size=24))
def test_levenshtein_matches_naive_dp(a, b):
    assert levenshtein(a, b) == naive_levenshtein(a, b)


@given(st.text(max_size=16), st.text(max_size=16), st.text(max_size=16))
def test_levenshtein_metric_properties(a, b, c):
    assert levenshtein(a, b) == levenshtein(b, a)
    assert levenshtein(a, a) == 0
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


def test_anls_single_known_values():
    assert anls_single("Bailey Group", "Bailey Group") == 1.0
    assert anls_single("xyz", "Bailey Group") == 0.0  # NLS below threshold
    assert anls_single("bailey grp", "bailey group") == pytest.approx(1 - 2 / 12)


def test_anls_single_empty_convention():
    assert anls_single("", "") == 1.0
    assert anls_single("   ", "") == 1.0  # normalizes to empty
    assert anls_single("", "abc") == 0.0


def test_anls_threshold_zero_keeps_raw_similarity():
    cfg = AnlsConfig(threshold=0.0)
    assert anls_single("xyz", "Bailey Group", cfg) == pytest.approx(1 - 11 / 12)


def test_anls_config_validation():
    with pytest.raises(ConfigError):
        AnlsConfig(threshold=1.5)
    with pytest.raises(ConfigError):
        AnlsConfig(threshold=-0.1)


@given(st.text(max_size=24), st.text(max_size=24))
def test_anls_single_range(pred, gt):
    cfg = AnlsConfig()
    score = anls_single(pred, gt, cfg)
    assert score == 0.0 or cfg.threshold <= score <= 1.0
    # score 1 iff normalized strings equal
    assert (score == 1.0) == (normalize_text(pred, cfg) == normalize_text(gt, cfg))


def test_anls_corpus_conventions():
    assert anls_corpus([("a", "a"), ("b", "b")]) == 1.0
    assert anls_corpus([("a", "a"), (None, "b")]) == 0.5
    assert anls_corpus([]) == 0.0


def test_anls_corpus_matches_mean_of_singles():
    import random

    rng = random.Random(2024)
    alphabet = "abcdef "
    pairs = [
        (
            "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 12))),
            "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 12))),
        )
        for _ in range(1000)
    ]
    expected = sum(anls_single(p, g) for p, g in pairs) / len(pairs)
    assert anls_corpus(pairs) == pytest.approx(expected, abs=1e-12)


def test_anls_corpus_permutation_invariant():
    pairs = [("abc", "abd"), ("x", "x"), (None, "y"), ("bailey grp", "bailey group")]
    assert anls_corpus(pairs) == pytest.approx(anls_corpus(list(reversed(pairs))))
