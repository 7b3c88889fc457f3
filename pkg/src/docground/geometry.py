"""Bounding-box primitives shared by every stage of the pipeline.

Two coordinate conventions coexist:

* ``NormBox`` -- corner form ``(x1, y1, x2, y2)``, unitless fractions of the
  page in ``[0, 1]``. This is the canonical in-memory representation; all
  scoring happens on it.
* ``PromptBox`` -- top-left plus extent ``(x, y, w, h)``, integer thousandths
  of the page in ``[0, 1000]``. It exists only at the prompt/parse boundary,
  i.e. inside prompt text and model replies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class NormBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (0.0 <= self.x1 <= self.x2 <= 1.0 and 0.0 <= self.y1 <= self.y2 <= 1.0):
            raise ValueError(
                f"invalid NormBox ({self.x1}, {self.y1}, {self.x2}, {self.y2}): "
                "coordinates must satisfy 0 <= x1 <= x2 <= 1 and 0 <= y1 <= y2 <= 1"
            )

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


@dataclass(frozen=True)
class PromptBox:
    x: int
    y: int
    w: int
    h: int

    def as_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]


def round_half_up(value: float) -> int:
    """Round to the nearest integer, ties away from the floor (0.5 -> 1)."""
    return int(math.floor(value + 0.5))


def _clamp(value: float, lo: float, hi: float) -> float:
    return lo if value < lo else hi if value > hi else value


def from_prompt_box(pb: PromptBox) -> tuple[NormBox, bool]:
    """Convert a thousandths-of-page (x, y, w, h) box to a normalized corner box.

    Out-of-range inputs never fail: each component is clamped to [0, 1000] and
    the resulting corners to [0, 1]. The second element of the returned tuple
    is True when any clamping happened, so callers can downgrade parse status
    or reject the box under strict validation.
    """
    clamped = False
    vals = []
    for v in (pb.x, pb.y, pb.w, pb.h):
        c = int(_clamp(v, 0, 1000))
        if c != v:
            clamped = True
        vals.append(c)
    x, y, w, h = vals
    x1 = x / 1000.0
    y1 = y / 1000.0
    x2 = (x + w) / 1000.0
    y2 = (y + h) / 1000.0
    if x2 > 1.0:
        x2 = 1.0
        clamped = True
    if y2 > 1.0:
        y2 = 1.0
        clamped = True
    return NormBox(x1, y1, x2, y2), clamped


def to_prompt_box(nb: NormBox) -> PromptBox:
    """Inverse of from_prompt_box; exact on in-range integer-valued inputs."""
    return PromptBox(
        x=round_half_up(1000.0 * nb.x1),
        y=round_half_up(1000.0 * nb.y1),
        w=round_half_up(1000.0 * (nb.x2 - nb.x1)),
        h=round_half_up(1000.0 * (nb.y2 - nb.y1)),
    )


def iou(a: NormBox, b: NormBox) -> float:
    """Intersection-over-union of two normalized boxes.

    Returns 0.0 when the union has zero area (both boxes degenerate), so a
    degenerate prediction can never score as a match.
    """
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(0.0, ix) * max(0.0, iy)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def union_box(boxes: Sequence[NormBox]) -> NormBox:
    """Minimal axis-aligned box enclosing every input box."""
    if not boxes:
        raise ValueError("union_box requires at least one box")
    return NormBox(
        x1=min(b.x1 for b in boxes),
        y1=min(b.y1 for b in boxes),
        x2=max(b.x2 for b in boxes),
        y2=max(b.y2 for b in boxes),
    )


def mean_iou(pairs: Iterable[tuple[NormBox | None, NormBox]]) -> float:
    """Mean IoU over (predicted, ground-truth) pairs.

    A missing prediction contributes 0 -- failures are averaged in, not
    skipped. An empty input yields 0.0.
    """
    total = 0.0
    n = 0
    for pred, gt in pairs:
        if pred is not None:
            total += iou(pred, gt)
        n += 1
    if n == 0:
        return 0.0
    return total / n
