"""Textual accuracy metrics: Levenshtein distance and thresholded ANLS.

ANLS here is the scalar-string variant: each prediction is compared against a
single ground-truth string, the normalized similarity is thresholded, and the
corpus score is the plain mean over all QA pairs (missing predictions count
as zero).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ConfigError

_WHITESPACE = re.compile(r"\s+")


@dataclass(frozen=True)
class AnlsConfig:
    """Threshold and normalization policy for ANLS scoring.

    The similarity is kept only when it reaches ``threshold``; below that the
    pair scores 0. Normalization flags are applied in the order trim,
    collapse, case fold.
    """

    threshold: float = 0.5
    trim: bool = True
    collapse_whitespace: bool = True
    case_fold: bool = True

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"ANLS threshold must be in [0, 1], got {self.threshold}")


DEFAULT_ANLS = AnlsConfig()


def normalize_text(s: str, cfg: AnlsConfig = DEFAULT_ANLS) -> str:
    """Canonicalize a string before comparison. Idempotent."""
    if cfg.trim:
        s = s.strip()
    if cfg.collapse_whitespace:
        s = _WHITESPACE.sub(" ", s)
    if cfg.case_fold:
        s = s.casefold()
    return s


def levenshtein(a: str, b: str) -> int:
    """Minimal number of single-character edits transforming a into b.

    Two-row dynamic program over Unicode code points.
    """
    la, lb = len(a), len(b)
    if la < lb:
        a, b, la, lb = b, a, lb, la
    if lb == 0:
        return la
    row = list(range(lb + 1))
    for i in range(1, la + 1):
        prev = row[0]
        row[0] = i
        ca = a[i - 1]
        for j in range(1, lb + 1):
            cur = row[j]
            v = prev if ca == b[j - 1] else prev + 1
            u = cur + 1
            w = row[j - 1] + 1
            row[j] = v if v <= u and v <= w else (u if u <= w else w)
            prev = cur
    return row[lb]


def anls_single(pred: str, gt: str, cfg: AnlsConfig = DEFAULT_ANLS) -> float:
    """Thresholded normalized Levenshtein similarity for one QA pair.

    Both strings empty after normalization is an exact match (1.0).
    """
    p = normalize_text(pred, cfg)
    g = normalize_text(gt, cfg)
    longest = max(len(p), len(g))
    if longest == 0:
        return 1.0
    nls = 1.0 - levenshtein(p, g) / longest
    return nls if nls >= cfg.threshold else 0.0


def anls_corpus(pairs, cfg: AnlsConfig = DEFAULT_ANLS) -> float:
    """Mean anls_single over (pred, gt) pairs; pred None scores 0; [] -> 0."""
    total = 0.0
    n = 0
    for pred, gt in pairs:
        if pred is not None:
            total += anls_single(pred, gt, cfg)
        n += 1
    if n == 0:
        return 0.0
    return total / n
