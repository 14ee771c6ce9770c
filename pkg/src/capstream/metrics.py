"""Evaluation of emitted frames against ground-truth gesture events.

An event counts as detected when at least one frame interval intersects
it; frames are matched greedily by overlap size and each frame may match
at most one event. A matched frame is correctly extracted when it fully
contains its event or reaches the IoU threshold.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .errors import InvalidParameterError


@dataclass(frozen=True)
class EventMatch:
    event_index: int
    frame_index: int | None
    overlap: int
    iou: float
    contains: bool


@dataclass
class DetectionReport:
    total_events: int
    detected_events: int
    detection_rate: float
    matches: list[EventMatch] = field(default_factory=list)


@dataclass
class ExtractionReport:
    total_detected: int
    correctly_framed: int
    extraction_rate: float
    iou_min: float
    containment_count: int
    iou_pass_count: int
    iou_values: list[float] = field(default_factory=list)


def _length(start: int, end: int) -> int:
    return end - start + 1


def _overlap(a: tuple[int, int], b: tuple[int, int]) -> int:
    lo = max(a[0], b[0])
    hi = min(a[1], b[1])
    return max(0, hi - lo + 1)


def _iou(a: tuple[int, int], b: tuple[int, int]) -> float:
    inter = _overlap(a, b)
    union = _length(*a) + _length(*b) - inter
    return inter / union if union else 0.0


def _match(frames: Sequence, events: Sequence) -> list[EventMatch]:
    """Greedy one-to-one matching by descending overlap size."""
    candidates = []
    for fi, frame in enumerate(frames):
        f_span = (frame.start, frame.end)
        for ei, ev in enumerate(events):
            e_span = (ev.start, ev.end)
            ov = _overlap(f_span, e_span)
            if ov > 0:
                candidates.append((ov, fi, ei))
    candidates.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_frames: set[int] = set()
    used_events: set[int] = set()
    assigned: dict[int, tuple[int, int]] = {}
    for ov, fi, ei in candidates:
        if fi in used_frames or ei in used_events:
            continue
        used_frames.add(fi)
        used_events.add(ei)
        assigned[ei] = (fi, ov)
    out = []
    for ei, ev in enumerate(events):
        e_span = (ev.start, ev.end)
        if ei in assigned:
            fi, ov = assigned[ei]
            f_span = (frames[fi].start, frames[fi].end)
            out.append(
                EventMatch(
                    event_index=ei,
                    frame_index=fi,
                    overlap=ov,
                    iou=_iou(f_span, e_span),
                    contains=f_span[0] <= e_span[0] and f_span[1] >= e_span[1],
                )
            )
        else:
            out.append(EventMatch(event_index=ei, frame_index=None, overlap=0, iou=0.0, contains=False))
    return out


def detection_rate(frames: Sequence, events: Sequence) -> DetectionReport:
    """Fraction of ground-truth events intersected by at least one frame."""
    matches = _match(frames, events)
    detected = sum(1 for m in matches if m.frame_index is not None)
    total = len(events)
    return DetectionReport(
        total_events=total,
        detected_events=detected,
        detection_rate=detected / total if total else 0.0,
        matches=matches,
    )


def extraction_rate(frames: Sequence, events: Sequence, iou_min: float = 0.8) -> ExtractionReport:
    """Fraction of detected events whose frame covers them (containment or IoU)."""
    if not 0.0 < iou_min <= 1.0:
        raise InvalidParameterError(f"iou_min must lie in (0, 1], got {iou_min}")
    matches = [m for m in _match(frames, events) if m.frame_index is not None]
    correct = sum(1 for m in matches if m.contains or m.iou >= iou_min)
    return ExtractionReport(
        total_detected=len(matches),
        correctly_framed=correct,
        extraction_rate=correct / len(matches) if matches else 0.0,
        iou_min=iou_min,
        containment_count=sum(1 for m in matches if m.contains),
        iou_pass_count=sum(1 for m in matches if m.iou >= iou_min),
        iou_values=[m.iou for m in matches],
    )
