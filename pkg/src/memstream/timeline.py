"""Stream manifests, temporal-scale metrics, and clip segmentation.

A manifest is the ordered clip metadata of one subject's stream.  From it we
derive the two scale metrics (total observed playback vs. the chronological
horizon it spans), classify whether the stream sits in the lifelong regime,
and cut observed clips into fixed-length perception windows.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .errors import DataError, ValidationError
from .timebase import (
    DEFAULT_YEAR,
    MS_PER_SECOND,
    Interval,
    TimePoint,
    parse_timestamp,
)

LIFELONG_MIN_DUR_S = 12 * 3600
LIFELONG_MIN_SPAN_S = 24 * 3600

RELATIVE_EPOCH_LABEL = "Day 1 00:00:00"


@dataclass(frozen=True)
class ClipMeta:
    """One observed clip: an interval on the stream timeline plus a media locator."""

    clip_id: str
    begin: TimePoint
    end: TimePoint
    source_uri: str = ""

    def __post_init__(self) -> None:
        if not self.clip_id:
            raise ValidationError("clip_id must be non-empty")
        if not self.begin < self.end:
            raise ValidationError(f"clip {self.clip_id!r}: begin must precede end")

    @property
    def interval(self) -> Interval:
        return Interval(self.begin, self.end)

    @property
    def duration_ms(self) -> int:
        return self.end.millis - self.begin.millis


@dataclass(frozen=True)
class StreamManifest:
    """Ordered, non-overlapping clips of one stream.

    Gaps between clips are the unobserved time; they are real time passing,
    not edited-out footage.  ``subject_centric`` is annotation metadata, not
    something computable from the clips.
    """

    stream_id: str
    clips: tuple[ClipMeta, ...]
    epoch_label: str = RELATIVE_EPOCH_LABEL
    subject_centric: bool = True

    def __post_init__(self) -> None:
        if not self.stream_id:
            raise ValidationError("stream_id must be non-empty")
        prev: Optional[ClipMeta] = None
        for clip in self.clips:
            if prev is not None:
                if clip.begin.millis <= prev.begin.millis:
                    raise ValidationError(
                        f"clips must be sorted by strictly increasing begin: "
                        f"{prev.clip_id!r} then {clip.clip_id!r}"
                    )
                if clip.begin.millis < prev.end.millis:
                    raise ValidationError(
                        f"clips must not overlap: {prev.clip_id!r} and {clip.clip_id!r}"
                    )
            prev = clip

    @property
    def total_span_ms(self) -> int:
        if not self.clips:
            return 0
        return self.clips[-1].end.millis - self.clips[0].begin.millis

    def clip_for(self, point: TimePoint) -> Optional[ClipMeta]:
        for clip in self.clips:
            if clip.begin.millis <= point.millis < clip.end.millis:
                return clip
        return None


@dataclass(frozen=True)
class ScaleReport:
    """Temporal scale of a stream: observed duration vs. chronological span."""

    t_dur_s: float
    t_span_s: float
    sparsity: float
    lifelong: bool

    def __post_init__(self) -> None:
        if self.t_dur_s > self.t_span_s + 1e-9:
            raise ValidationError(f"t_dur ({self.t_dur_s}) cannot exceed t_span ({self.t_span_s})")
        if not (0.0 <= self.sparsity < 1.0):
            raise ValidationError(f"sparsity must lie in [0, 1), got {self.sparsity}")


def compute_scale(manifest: StreamManifest) -> ScaleReport:
    """Scale metrics: t_dur sums clip playback, t_span is last end minus first begin."""
    if not manifest.clips:
        raise ValidationError("cannot compute scale of an empty manifest")
    t_dur_ms = sum(clip.duration_ms for clip in manifest.clips)
    t_span_ms = manifest.total_span_ms
    t_dur_s = t_dur_ms / MS_PER_SECOND
    t_span_s = t_span_ms / MS_PER_SECOND
    return ScaleReport(
        t_dur_s=t_dur_s,
        t_span_s=t_span_s,
        sparsity=(t_span_ms - t_dur_ms) / t_span_ms,
        lifelong=_lifelong(t_dur_s, t_span_s),
    )


def _lifelong(t_dur_s: float, t_span_s: float) -> bool:
    return t_dur_s >= LIFELONG_MIN_DUR_S and t_span_s >= LIFELONG_MIN_SPAN_S


def is_lifelong(report: ScaleReport) -> bool:
    """Lifelong regime: at least 12h observed and a span crossing a full day.

    The subject-centric criterion is a manifest metadata flag, not computed.
    """
    return _lifelong(report.t_dur_s, report.t_span_s)


def segment(manifest: StreamManifest, delta_t_s: float) -> list[Interval]:
    """Cut each observed clip into consecutive windows of delta_t seconds.

    The final window of a clip holds the remainder.  Windows never span
    manifest gaps: each clip is segmented independently, so every window is
    contiguously playable media.
    """
    if delta_t_s <= 0:
        raise ValidationError(f"delta_t must be positive, got {delta_t_s}")
    delta_ms = round(delta_t_s * MS_PER_SECOND)
    windows: list[Interval] = []
    for clip in manifest.clips:
        cursor = clip.begin.millis
        while cursor < clip.end.millis:
            upper = min(cursor + delta_ms, clip.end.millis)
            windows.append(Interval.from_millis(cursor, upper))
            cursor = upper
    return windows


# ---------------------------------------------------------------------------
# Manifest ingestion


def manifest_from_rows(
    rows: Sequence[dict],
    stream_id: str,
    year: int = DEFAULT_YEAR,
) -> StreamManifest:
    """Build a manifest from parsed JSON rows: {"clip_id", "begin", "end", "source_uri"}.

    Absolute (UTC) timestamps are rebased so the first clip begins at epoch 0
    and the original wall-clock begin becomes the epoch label.
    """
    if not rows:
        raise DataError("manifest contains no clips")
    parsed = []
    for i, row in enumerate(rows):
        try:
            begin = parse_timestamp(str(row["begin"]), year=year)
            end = parse_timestamp(str(row["end"]), year=year)
        except KeyError as exc:
            raise DataError(f"manifest row {i} missing field {exc}") from exc
        clip_id = str(row.get("clip_id") or f"clip{i:04d}")
        parsed.append((clip_id, begin, end, str(row.get("source_uri", ""))))

    kinds = {stamp.absolute for _, stamp, _, _ in parsed}
    if len(kinds) != 1:
        raise DataError("manifest mixes absolute and relative timestamps")
    absolute = kinds.pop()
    if absolute:
        epoch_ms = min(stamp.millis for _, stamp, _, _ in parsed)
        epoch_label = str(rows[0]["begin"]).strip()
    else:
        epoch_ms = 0
        epoch_label = RELATIVE_EPOCH_LABEL

    clips = []
    for clip_id, begin, end, uri in parsed:
        clips.append(
            ClipMeta(
                clip_id=clip_id,
                begin=TimePoint(begin.millis - epoch_ms),
                end=TimePoint(end.millis - epoch_ms),
                source_uri=uri,
            )
        )
    clips.sort(key=lambda c: c.begin.millis)
    return StreamManifest(stream_id=stream_id, clips=tuple(clips), epoch_label=epoch_label)


def load_manifest(path: Union[str, Path], stream_id: Optional[str] = None, year: int = DEFAULT_YEAR) -> StreamManifest:
    """Load the JSON manifest format: an array of clip rows."""
    path = Path(path)
    try:
        rows = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(rows, list):
        raise DataError(f"{path}: manifest must be a JSON array of clips")
    return manifest_from_rows(rows, stream_id=stream_id or path.stem, year=year)


def save_manifest(manifest: StreamManifest, path: Union[str, Path]) -> None:
    rows = [
        {
            "clip_id": clip.clip_id,
            "begin": clip.begin.render_precise(),
            "end": clip.end.render_precise(),
            "source_uri": clip.source_uri,
        }
        for clip in manifest.clips
    ]
    Path(path).write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")


def manifest_from_tsv(
    source: Union[str, Path, Iterable[str]],
    stream_id: str,
    year: int = DEFAULT_YEAR,
) -> StreamManifest:
    """Ingest tab-separated clip tables: index, begin, end[, duration_seconds].

    When a duration column is present it is authoritative playback length and
    the clip end is derived as begin + duration (broadcast end stamps can
    include pauses that are not playback).  Thousands separators are accepted.
    """
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = list(source)

    parsed = []
    first_begin_text = None
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split("\t")]
        if len(fields) < 3:
            raise DataError(f"TSV row needs at least 3 columns: {raw!r}")
        if not parsed and not _looks_like_stamp(fields[1], year):
            continue  # header row
        try:
            begin = parse_timestamp(fields[1], year=year)
            if len(fields) >= 4 and fields[3]:
                dur_s = int(fields[3].replace(",", ""))
                end_ms = begin.millis + dur_s * MS_PER_SECOND
            else:
                end = parse_timestamp(fields[2], year=year)
                if end.absolute != begin.absolute:
                    raise DataError(f"row mixes absolute and relative stamps: {raw!r}")
                end_ms = end.millis
            clip_id = f"clip{int(fields[0].lstrip('#')):04d}"
        except ValueError as exc:
            raise DataError(f"malformed TSV row {raw!r}: {exc}") from exc
        if first_begin_text is None:
            first_begin_text = fields[1]
        parsed.append((clip_id, begin, end_ms))

    if not parsed:
        raise DataError("TSV manifest contains no clip rows")

    kinds = {begin.absolute for _, begin, _ in parsed}
    if len(kinds) != 1:
        raise DataError("TSV manifest mixes absolute and relative timestamps")
    if kinds.pop():
        epoch_ms = min(begin.millis for _, begin, _ in parsed)
        epoch_label = first_begin_text
    else:
        epoch_ms = 0
        epoch_label = RELATIVE_EPOCH_LABEL

    clips = tuple(
        ClipMeta(
            clip_id=clip_id,
            begin=TimePoint(begin.millis - epoch_ms),
            end=TimePoint(end_ms - epoch_ms),
        )
        for clip_id, begin, end_ms in sorted(parsed, key=lambda item: item[1].millis)
    )
    return StreamManifest(stream_id=stream_id, clips=clips, epoch_label=epoch_label)


def _looks_like_stamp(text: str, year: int = DEFAULT_YEAR) -> bool:
    try:
        parse_timestamp(text, year=year)
        return True
    except ValidationError:
        return False
