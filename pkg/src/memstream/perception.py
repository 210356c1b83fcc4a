"""Passive perception and on-demand inspection of time ranges.

Vision backends caption one window at a time with window-relative anchors;
alignment shifts every anchor onto the global stream timeline with exact
carry arithmetic.  The shift is a pure token rewrite, so it is implemented
deterministically rather than via a model call.
"""
from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .errors import GapError, ValidationError
from .timebase import Interval, TimePoint, format_hms
from .timeline import StreamManifest, segment

logger = logging.getLogger(__name__)

SOURCE_PASSIVE = "passive"
SOURCE_INSPECT = "inspect"
SOURCE_SEARCH = "search"

# [HH:MM:SS] with a two-or-more digit unbounded hour field.
ANCHOR_RE = re.compile(r"\[(\d{2,}):(\d{2}):(\d{2})\]")

ANCHOR_DRIFT_TOLERANCE_S = 1  # caption rounding slack when checking anchors


@dataclass(frozen=True)
class Observation:
    """Timestamp-aligned text evidence about one interval of the stream."""

    interval: Interval
    text: str
    source: str = SOURCE_PASSIVE
    question: Optional[str] = None
    no_evidence: bool = False

    def __post_init__(self) -> None:
        if self.source not in (SOURCE_PASSIVE, SOURCE_INSPECT, SOURCE_SEARCH):
            raise ValidationError(f"unknown observation source {self.source!r}")


def align_time(raw_text: str, offset: Union[TimePoint, int]) -> str:
    """Shift every [HH:MM:SS] anchor by the offset, carrying seconds/minutes.

    Everything outside the anchors is byte-identical to the input.  Tokens
    shaped like anchors but with out-of-range minutes or seconds are left
    unmodified and flagged.
    """
    offset_s = offset.millis // 1000 if isinstance(offset, TimePoint) else int(offset)
    if offset_s < 0:
        raise ValidationError(f"offset must be non-negative, got {offset_s}")

    def _shift(match: re.Match) -> str:
        hours, minutes, seconds = (int(g) for g in match.groups())
        if minutes >= 60 or seconds >= 60:
            logger.warning("malformed timestamp token left unmodified: %s", match.group(0))
            return match.group(0)
        total = hours * 3600 + minutes * 60 + seconds + offset_s
        return f"[{format_hms(total)}]"

    return ANCHOR_RE.sub(_shift, raw_text)


def anchor_seconds(text: str) -> list[int]:
    """Whole-second values of all well-formed anchors in the text."""
    out = []
    for match in ANCHOR_RE.finditer(text):
        hours, minutes, seconds = (int(g) for g in match.groups())
        if minutes < 60 and seconds < 60:
            out.append(hours * 3600 + minutes * 60 + seconds)
    return out


def _check_anchors(obs: Observation) -> None:
    lo = obs.interval.start.millis / 1000 - ANCHOR_DRIFT_TOLERANCE_S
    hi = obs.interval.end.millis / 1000 + ANCHOR_DRIFT_TOLERANCE_S
    stray = [s for s in anchor_seconds(obs.text) if not (lo <= s <= hi)]
    if stray:
        logger.warning(
            "observation %s has %d anchor(s) outside its interval: %s",
            obs.interval,
            len(stray),
            stray[:5],
        )


def _observe_piece(
    vision,
    clip,
    piece: Interval,
    question: Optional[str],
    source: str,
) -> Observation:
    from .prompts import NO_EVIDENCE_SENTINEL

    raw = vision.describe_clip(
        clip.source_uri, piece, question, media_origin_ms=clip.begin.millis
    )
    if raw.strip() == NO_EVIDENCE_SENTINEL:
        return Observation(interval=piece, text="", source=source, question=question, no_evidence=True)
    aligned = align_time(raw, piece.start)
    obs = Observation(interval=piece, text=aligned, source=source, question=question)
    _check_anchors(obs)
    return obs


def mm_inspect(
    manifest: StreamManifest,
    ranges: Sequence[Interval],
    question: Optional[str] = None,
    *,
    vision,
) -> list[Observation]:
    """Describe every (range ∩ clip) piece and align its anchors globally.

    Ranges are clipped to clip boundaries before sampling.  A range lying
    entirely inside a manifest gap raises GapError after all other ranges are
    processed; the exception carries the completed observations.
    """
    source = SOURCE_PASSIVE if question is None else SOURCE_INSPECT
    observations: list[Observation] = []
    gap_ranges: list[Interval] = []
    for rng in ranges:
        pieces = []
        for clip in manifest.clips:
            piece = rng.intersect(clip.interval)
            if piece is not None:
                pieces.append((clip, piece))
        if not pieces:
            gap_ranges.append(rng)
            continue
        for clip, piece in pieces:
            observations.append(_observe_piece(vision, clip, piece, question, source))
    if gap_ranges:
        raise GapError(gap_ranges, observations)
    return observations


def run_perception_phase(
    manifest: StreamManifest,
    delta_t_s: float,
    bank,
    *,
    vision,
    memory_llm,
    embedder,
    parallelism: int = 1,
    extra_observations: Sequence[Observation] = (),
):
    """Phase one: caption every segment window and consolidate into the bank.

    Captioning may run concurrently, but consolidation is applied strictly in
    ascending window order, so the resulting bank is independent of the
    completion schedule.  ``extra_observations`` (e.g. pre-made transcript
    text) are merged into that order by interval start.
    """
    from .memory import mem_manage

    if not manifest.clips:
        raise ValidationError("cannot run perception over an empty manifest")
    windows = segment(manifest, delta_t_s)

    def _window_obs(window: Interval) -> Observation:
        clip = manifest.clip_for(window.start)
        assert clip is not None  # windows come from clips
        return _observe_piece(vision, clip, window, None, SOURCE_PASSIVE)

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            observations = list(pool.map(_window_obs, windows))
    else:
        observations = [_window_obs(w) for w in windows]

    merged = sorted(
        list(observations) + list(extra_observations),
        key=lambda o: (o.interval.start.millis, o.interval.end.millis),
    )
    for obs in merged:
        if not obs.text.strip():
            continue
        bank = mem_manage(bank, obs, memory_llm=memory_llm, embedder=embedder)
    return bank
