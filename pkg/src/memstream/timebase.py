"""Time points, intervals, and bucket quantization on a stream timeline.

All times are integer milliseconds relative to the stream epoch (the start of
the subject's timeline), so clip arithmetic is exact.  Intervals are half-open
[start, end): adjacent clips are disjoint and bucketization is unambiguous.
Conversion to float seconds happens only at the metric boundary.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Optional

from .errors import ValidationError

MS_PER_SECOND = 1_000
MS_PER_MINUTE = 60_000
MS_PER_HOUR = 3_600_000
MS_PER_DAY = 86_400_000

# Year-less UTC timestamps (MM-DDTHH:MM:SSZ) need a year to be resolvable.
# Must be a non-leap year unless overridden by config.
DEFAULT_YEAR = 2025

_END_EPSILON = 1e-9  # matches the grounding metric's end-of-interval epsilon


@dataclass(frozen=True, order=True)
class TimePoint:
    """A point on the stream timeline, in milliseconds since the epoch."""

    millis: int

    def __post_init__(self) -> None:
        if not isinstance(self.millis, int):
            raise ValidationError(f"TimePoint millis must be int, got {type(self.millis).__name__}")
        if self.millis < 0:
            raise ValidationError(f"TimePoint must be non-negative, got {self.millis}")

    @classmethod
    def from_seconds(cls, seconds: float) -> "TimePoint":
        return cls(round(seconds * MS_PER_SECOND))

    @property
    def seconds(self) -> float:
        return self.millis / MS_PER_SECOND

    def shifted(self, delta_ms: int) -> "TimePoint":
        return TimePoint(self.millis + delta_ms)

    def render(self) -> str:
        """HH:MM:SS with an unbounded hour field (hour 83 is legal)."""
        return format_hms(self.millis // MS_PER_SECOND)

    def render_precise(self) -> str:
        """render() plus a .fff fraction whenever sub-second precision exists."""
        base = self.render()
        frac = self.millis % MS_PER_SECOND
        return f"{base}.{frac:03d}" if frac else base

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True, order=True)
class Interval:
    """Half-open time range [start, end). Zero-length intervals are rejected."""

    start: TimePoint
    end: TimePoint

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise ValidationError(f"interval start must precede end: [{self.start}, {self.end})")

    @classmethod
    def from_seconds(cls, start_s: float, end_s: float) -> "Interval":
        return cls(TimePoint.from_seconds(start_s), TimePoint.from_seconds(end_s))

    @classmethod
    def from_millis(cls, start_ms: int, end_ms: int) -> "Interval":
        return cls(TimePoint(start_ms), TimePoint(end_ms))

    @property
    def duration_ms(self) -> int:
        return self.end.millis - self.start.millis

    @property
    def duration_s(self) -> float:
        return self.duration_ms / MS_PER_SECOND

    def as_seconds(self) -> tuple[float, float]:
        return (self.start.seconds, self.end.seconds)

    def contains(self, other: "Interval") -> bool:
        return self.start <= other.start and other.end <= self.end

    def intersect(self, other: "Interval") -> Optional["Interval"]:
        """The overlapping piece, or None when disjoint (touching counts as disjoint)."""
        lo = max(self.start.millis, other.start.millis)
        hi = min(self.end.millis, other.end.millis)
        if lo >= hi:
            return None
        return Interval.from_millis(lo, hi)

    def __str__(self) -> str:
        return f"[{self.start}, {self.end})"


@dataclass(frozen=True)
class BucketSet:
    """Indices of fixed-size timeline buckets activated by some interval set."""

    bucket_size_s: int
    indices: frozenset[int]

    def __post_init__(self) -> None:
        if self.bucket_size_s <= 0:
            raise ValidationError(f"bucket size must be positive, got {self.bucket_size_s}")
        if any(k < 0 for k in self.indices):
            raise ValidationError("bucket indices must be non-negative")


def overlaps(a: Interval, b: Interval) -> bool:
    """True iff the half-open intervals share at least one instant."""
    return a.start.millis < b.end.millis and b.start.millis < a.end.millis


def hull(intervals: Iterable[Interval]) -> Interval:
    """Smallest interval containing every input. Errors on an empty input."""
    items = list(intervals)
    if not items:
        raise ValidationError("empty hull")
    lo = min(iv.start.millis for iv in items)
    hi = max(iv.end.millis for iv in items)
    return Interval.from_millis(lo, hi)


def merge_intervals(intervals: Iterable[Interval]) -> list[Interval]:
    """Union of intervals, merging overlapping or touching neighbours."""
    items = sorted(intervals, key=lambda iv: (iv.start.millis, iv.end.millis))
    merged: list[list[int]] = []
    for iv in items:
        if merged and iv.start.millis <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], iv.end.millis)
        else:
            merged.append([iv.start.millis, iv.end.millis])
    return [Interval.from_millis(lo, hi) for lo, hi in merged]


def bucket_span(start_s: float, end_s: float, bucket_size_s: float, total_s: float):
    """Bucket indices touched by [start_s, end_s) after clamping to [0, total_s).

    Returns None for pieces that clamp to nothing.  The end epsilon keeps the
    bucket containing the final instant while excluding exact boundary ends.
    """
    s = max(0.0, float(start_s))
    e = min(float(total_s), float(end_s))
    if s >= e:
        return None
    first = int(s // bucket_size_s)
    last = int((e - _END_EPSILON) // bucket_size_s)
    return range(first, last + 1)


def quantize(interval: Interval, bucket_size_s: int, total_s: float) -> BucketSet:
    """Activated bucket indices for one interval on a timeline of total_s seconds."""
    if bucket_size_s <= 0:
        raise ValidationError(f"bucket size must be positive, got {bucket_size_s}")
    if total_s <= 0:
        raise ValidationError(f"timeline length must be positive, got {total_s}")
    start_s, end_s = interval.as_seconds()
    span = bucket_span(start_s, end_s, bucket_size_s, total_s)
    indices = frozenset(span) if span is not None else frozenset()
    return BucketSet(bucket_size_s=bucket_size_s, indices=indices)


def format_hms(total_seconds: int) -> str:
    """Render whole seconds as HH:MM:SS with an unbounded two-plus digit hour."""
    if total_seconds < 0:
        raise ValidationError(f"cannot render negative time {total_seconds}")
    hours, rem = divmod(int(total_seconds), 3600)
    minutes, seconds = divmod(rem, 60)
    return f"{hours:02d}:{minutes:02d}:{seconds:02d}"


@dataclass(frozen=True)
class ParsedStamp:
    """A parsed manifest timestamp.

    ``absolute`` stamps are wall-clock UTC milliseconds and must be rebased to
    the stream epoch by the manifest loader; relative stamps already are.
    """

    millis: int
    absolute: bool


_DAY_RE = re.compile(r"^Day\s+(\d+)\s+(\d{1,3}):(\d{2}):(\d{2})(?:\.(\d{1,3}))?$")
_HMS_RE = re.compile(r"^(\d+):(\d{2}):(\d{2})(?:\.(\d{1,3}))?$")
_MMDD_RE = re.compile(r"^(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})Z$")
_ISO_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})Z$")


def _fraction_ms(digits: Optional[str]) -> int:
    if not digits:
        return 0
    return int(digits.ljust(3, "0")[:3])


def _hms_ms(hours: int, minutes: int, seconds: int, frac_ms: int) -> int:
    if minutes >= 60 or seconds >= 60:
        raise ValidationError(f"minutes/seconds out of range: {hours}:{minutes}:{seconds}")
    return hours * MS_PER_HOUR + minutes * MS_PER_MINUTE + seconds * MS_PER_SECOND + frac_ms


def parse_timestamp(text: str, year: int = DEFAULT_YEAR) -> ParsedStamp:
    """Parse a manifest timestamp in any accepted format.

    Accepted forms:
      * ``HH:MM:SS`` with unbounded hours, optional ``.ff`` fraction (relative)
      * ``Day d HH:MM:SS(.ff)`` anchoring Day 1 00:00:00 at epoch 0 (relative)
      * ``MM-DDTHH:MM:SSZ`` year-less UTC, year supplied via config (absolute)
      * ``YYYY-MM-DDTHH:MM:SSZ`` full UTC (absolute)
    """
    text = text.strip()
    m = _DAY_RE.match(text)
    if m:
        day = int(m.group(1))
        if day < 1:
            raise ValidationError(f"day index starts at 1: {text!r}")
        base = (day - 1) * MS_PER_DAY
        ms = _hms_ms(int(m.group(2)), int(m.group(3)), int(m.group(4)), _fraction_ms(m.group(5)))
        return ParsedStamp(base + ms, absolute=False)
    m = _MMDD_RE.match(text)
    if m:
        return ParsedStamp(_utc_ms(year, *(int(g) for g in m.groups())), absolute=True)
    m = _ISO_RE.match(text)
    if m:
        return ParsedStamp(_utc_ms(*(int(g) for g in m.groups())), absolute=True)
    m = _HMS_RE.match(text)
    if m:
        ms = _hms_ms(int(m.group(1)), int(m.group(2)), int(m.group(3)), _fraction_ms(m.group(4)))
        return ParsedStamp(ms, absolute=False)
    raise ValidationError(f"unrecognized timestamp format: {text!r}")


def _utc_ms(year: int, month: int, day: int, hour: int, minute: int, second: int) -> int:
    try:
        dt = datetime(year, month, day, hour, minute, second, tzinfo=timezone.utc)
    except ValueError as exc:
        raise ValidationError(f"invalid UTC timestamp: {exc}") from exc
    return int(dt.timestamp()) * MS_PER_SECOND
