"""Naive OCR-search localization baseline.

An answer is located by exact match of its normalized words against a
contiguous run of OCR tokens in reading order; if the full answer cannot be
found, the first word alone is tried. Matching is deliberately exact (after
trim / whitespace-collapse / case-fold) -- no fuzziness -- and a matched run
never crosses a page boundary.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

from .dataset import OcrToken
from .geometry import NormBox, union_box
from .text_metrics import AnlsConfig, normalize_text

_NORM = AnlsConfig()  # trim + collapse + case fold, threshold unused here


@dataclass(frozen=True)
class MatchResult:
    mode: str  # "full" | "first_word" | "none"
    box: NormBox | None = None
    page: int | None = None
    matched_span: tuple[int, int] | None = None  # (start index in reading order, token count)


def reading_order(tokens: Sequence[OcrToken]) -> list[OcrToken]:
    """Sort tokens by (page, row band, x1), stably.

    Rows are formed greedily while walking tokens in vertical-center order:
    a token joins the current row when its center is within half the smaller
    token height of the previous token's center.
    """
    by_page: dict[int, list[tuple[int, OcrToken]]] = defaultdict(list)
    for idx, tok in enumerate(tokens):
        by_page[tok.page].append((idx, tok))

    ordered: list[OcrToken] = []
    for page in sorted(by_page):
        entries = by_page[page]
        entries.sort(key=lambda e: ((e[1].box.y1 + e[1].box.y2) / 2.0, e[1].box.x1, e[0]))
        rows: list[tuple[int, float, int, OcrToken]] = []
        row_id = 0
        prev_center = prev_height = None
        for idx, tok in entries:
            center = (tok.box.y1 + tok.box.y2) / 2.0
            height = tok.box.y2 - tok.box.y1
            if prev_center is not None and abs(center - prev_center) >= 0.5 * min(height, prev_height):
                row_id += 1
            rows.append((row_id, tok.box.x1, idx, tok))
            prev_center, prev_height = center, height
        rows.sort(key=lambda r: (r[0], r[1], r[2]))
        ordered.extend(tok for _, _, _, tok in rows)
    return ordered


def _find_run(words: list[str], ordered: list[OcrToken], norm: list[str]) -> tuple[int, int] | None:
    k = len(words)
    for start in range(len(ordered) - k + 1):
        if norm[start] != words[0]:
            continue
        page = ordered[start].page
        if all(
            ordered[start + j].page == page and norm[start + j] == words[j]
            for j in range(1, k)
        ):
            return start, k
    return None


def locate(answer: str, tokens: Sequence[OcrToken]) -> MatchResult:
    """Find an answer string among OCR tokens.

    Returns mode "full" for a whole-answer match, "first_word" when only the
    answer's first word is found, "none" otherwise. Ties go to the first
    match in reading order.
    """
    words = normalize_text(answer, _NORM).split()
    if not words:
        return MatchResult(mode="none")
    ordered = reading_order(tokens)
    norm = [normalize_text(t.text, _NORM) for t in ordered]

    for candidate, mode in ((words, "full"), (words[:1], "first_word")):
        hit = _find_run(candidate, ordered, norm)
        if hit is not None:
            start, count = hit
            run = ordered[start : start + count]
            return MatchResult(
                mode=mode,
                box=union_box([t.box for t in run]),
                page=run[0].page,
                matched_span=(start, count),
            )
    return MatchResult(mode="none")
