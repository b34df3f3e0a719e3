"""
Timeline value types and interval algebra

Intervals are half-open [start, end) in seconds: touching intervals never
overlap and have IoU 0.
"""

import math
from typing import Iterable, List, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Absolute tolerance for time comparisons, in seconds
TIME_TOLERANCE = 1e-9

_FROZEN = ConfigDict(frozen=True, allow_inf_nan=False)


class TimeInterval(BaseModel):
    """Half-open span [start, end) on a video timeline"""
    model_config = _FROZEN

    start: float
    end: float

    @model_validator(mode="after")
    def _check_bounds(self) -> "TimeInterval":
        if self.start < 0:
            raise ValueError(f"interval start must be >= 0, got {self.start}")
        if self.end - self.start <= TIME_TOLERANCE:
            raise ValueError(f"interval must have positive length, got [{self.start}, {self.end})")
        return self

    @classmethod
    def of(cls, start: float, end: float) -> "TimeInterval":
        return cls(start=start, end=end)

    @property
    def length(self) -> float:
        return self.end - self.start

    @property
    def midpoint(self) -> float:
        return (self.start + self.end) / 2.0

    def intersection_length(self, other: "TimeInterval") -> float:
        return max(0.0, min(self.end, other.end) - max(self.start, other.start))


class ActionSegment(BaseModel):
    """A captioned interval; the unit of annotation and prediction"""
    model_config = _FROZEN

    interval: TimeInterval
    caption: str

    @field_validator("caption")
    @classmethod
    def _caption_not_blank(cls, value: str) -> str:
        value = value.strip()
        if not value:
            raise ValueError("caption must be non-empty")
        return value

    @classmethod
    def of(cls, start: float, end: float, caption: str) -> "ActionSegment":
        return cls(interval=TimeInterval(start=start, end=end), caption=caption)

    @property
    def start(self) -> float:
        return self.interval.start

    @property
    def end(self) -> float:
        return self.interval.end


class AnnotationRecord(BaseModel):
    """Ground truth of one video: label, duration and start-sorted segments"""
    model_config = _FROZEN

    video_id: str = Field(min_length=1)
    procedure_label: str
    duration: float = Field(gt=0)
    segments: Tuple[ActionSegment, ...]

    @field_validator("segments")
    @classmethod
    def _sort_segments(cls, value: Tuple[ActionSegment, ...]) -> Tuple[ActionSegment, ...]:
        return tuple(sorted(value, key=lambda s: (s.start, s.end)))

    @model_validator(mode="after")
    def _segments_within_duration(self) -> "AnnotationRecord":
        for index, segment in enumerate(self.segments):
            if segment.end > self.duration + TIME_TOLERANCE:
                raise ValueError(
                    f"segment {index} ends at {segment.end} beyond duration {self.duration}"
                )
        return self

    @property
    def captions(self) -> List[str]:
        return [s.caption for s in self.segments]

    @property
    def intervals(self) -> List[TimeInterval]:
        return [s.interval for s in self.segments]

    def frame_count(self, fps: float = 1.0) -> int:
        """Number of frames on the fps grid covering [0, duration)"""
        return max(1, math.ceil(self.duration * fps - TIME_TOLERANCE))


class FrameIndexRange(BaseModel):
    """Frames [first, last_exclusive) on the sampling grid"""
    model_config = _FROZEN

    first: int = Field(ge=0)
    last_exclusive: int

    @model_validator(mode="after")
    def _non_empty(self) -> "FrameIndexRange":
        if self.last_exclusive <= self.first:
            raise ValueError(f"empty frame range [{self.first}, {self.last_exclusive})")
        return self

    @property
    def count(self) -> int:
        return self.last_exclusive - self.first

    def as_range(self) -> range:
        return range(self.first, self.last_exclusive)


def iou(a: TimeInterval, b: TimeInterval) -> float:
    """Temporal intersection over union, in [0, 1]"""
    intersection = a.intersection_length(b)
    union = a.length + b.length - intersection
    return intersection / union


def merge_intervals(intervals: Iterable[TimeInterval]) -> List[Tuple[float, float]]:
    """Union of intervals as sorted, disjoint (start, end) pairs"""
    merged: List[Tuple[float, float]] = []
    for interval in sorted(intervals, key=lambda i: (i.start, i.end)):
        if merged and interval.start <= merged[-1][1]:
            last_start, last_end = merged[-1]
            merged[-1] = (last_start, max(last_end, interval.end))
        else:
            merged.append((interval.start, interval.end))
    return merged


def union_length(intervals: Iterable[TimeInterval]) -> float:
    return sum(end - start for start, end in merge_intervals(intervals))


def coverage_fraction(gt: Sequence[TimeInterval], pred: Sequence[TimeInterval]) -> float:
    """Share of the ground-truth union covered by the prediction union"""
    total = union_length(gt)
    if total <= 0:
        return 0.0

    gt_union = merge_intervals(gt)
    pred_union = merge_intervals(pred)
    covered = 0.0
    i = j = 0
    # two-pointer sweep over both sorted disjoint lists
    while i < len(gt_union) and j < len(pred_union):
        g_start, g_end = gt_union[i]
        p_start, p_end = pred_union[j]
        covered += max(0.0, min(g_end, p_end) - max(g_start, p_start))
        if g_end < p_end:
            i += 1
        else:
            j += 1
    return min(1.0, covered / total)


def seconds_to_frames(interval: TimeInterval, fps: float = 1.0) -> FrameIndexRange:
    """Frames whose cell [i/fps, (i+1)/fps) meets the interval"""
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    first = math.floor(interval.start * fps + TIME_TOLERANCE)
    last_exclusive = math.ceil(interval.end * fps - TIME_TOLERANCE)
    return FrameIndexRange(first=first, last_exclusive=max(last_exclusive, first + 1))
