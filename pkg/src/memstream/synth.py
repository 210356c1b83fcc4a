"""Deterministic synthetic streams with planted evidence.

Two task shapes are planted: needles (one unique fleeting event answers the
question) and multi-hop chains (several events sharing a marker, spread over
clips separated by gaps, that must all be found and ordered).  Everything is
seeded: the same spec always yields byte-identical manifests, event maps, and
question sets, and clue annotations equal the planted intervals exactly.

No media is generated; the scripted vision backend reads the event map, and
each clip's source_uri points at it.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .dataset import CATEGORIES, QACTriplet
from .errors import ValidationError
from .timebase import Interval, TimePoint
from .timeline import ClipMeta, StreamManifest

DEFAULT_VOCABULARY = (
    "amber kite", "crimson heron", "silver falcon", "cobalt lantern", "ivory compass",
    "scarlet umbrella", "golden trumpet", "violet bicycle", "emerald suitcase", "copper kettle",
    "turquoise parrot", "magenta scooter", "onyx telescope", "pearl accordion", "ruby snowglobe",
    "sapphire drone", "bronze weathervane", "lavender canoe", "teal typewriter", "maroon banjo",
    "indigo moth", "coral sundial", "olive gramophone", "plum kaleidoscope", "slate harmonica",
    "lemon zeppelin", "mint gargoyle", "peach metronome", "navy tricycle", "rose sextant",
    "jade hourglass", "ochre marionette", "lilac periscope", "cherry tuba", "azure windmill",
    "hazel spyglass", "sienna pinwheel", "fuchsia anvil", "beige stopwatch", "mauve catapult",
)

_NEEDLE_TAILS = (
    "is unveiled near the stage",
    "tips over by the doorway",
    "gets repaired on the workbench",
    "is raffled off to the crowd",
    "falls into the fountain",
    "is traded for a sandwich",
    "lights up unexpectedly",
    "goes missing from the shelf",
)

_CHAIN_TAILS = (
    "is packed into a crate",
    "travels across town",
    "is unpacked at the market",
    "changes hands again",
    "ends up on display",
)

_FILLER_PHRASES = (
    "someone tidies the counter",
    "a delivery arrives outside",
    "music plays from a speaker",
    "two people chat about weekend plans",
    "a kettle boils in the background",
    "rain starts tapping the window",
    "a dog naps under the table",
    "pages of a notebook get flipped",
)


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters; identical specs produce identical outputs."""

    seed: int = 0
    n_clips: int = 6
    clip_len_s: int = 1800
    gap_len_s: int = 600
    n_needles: int = 5
    n_multihop: int = 2
    hops_per_chain: int = 2
    event_len_s: int = 10
    fillers_per_clip: int = 2
    stream_id: str = "synth"
    vocabulary: tuple[str, ...] = DEFAULT_VOCABULARY

    def __post_init__(self) -> None:
        if self.n_clips < 1 or self.clip_len_s < 1 or self.gap_len_s < 0:
            raise ValidationError("n_clips and clip_len_s must be positive, gap_len_s non-negative")
        if self.n_needles < 0 or self.n_multihop < 0:
            raise ValidationError("event counts must be non-negative")
        if self.hops_per_chain < 2:
            raise ValidationError("chains need at least 2 hops")
        if self.n_multihop > 0 and self.n_clips < self.hops_per_chain:
            raise ValidationError("not enough clips to separate chain hops")
        if self.event_len_s < 2 or self.event_len_s >= self.clip_len_s:
            raise ValidationError("event_len_s must be >= 2 and shorter than a clip")


@dataclass(frozen=True)
class SynthStream:
    manifest: StreamManifest
    events: tuple[tuple[Interval, str], ...]
    qacs: tuple[QACTriplet, ...]


def generate(spec: SynthSpec, events_uri: str = "events.json") -> SynthStream:
    """Plant needles and chains on a gapped timeline and derive their questions."""
    needed = spec.n_needles + spec.n_multihop
    if needed > len(spec.vocabulary):
        raise ValidationError(
            f"vocabulary smaller than required distinct events: need {needed}, have {len(spec.vocabulary)}"
        )
    rng = random.Random(spec.seed)
    markers = rng.sample(list(spec.vocabulary), needed)

    stride_ms = (spec.clip_len_s + spec.gap_len_s) * 1000
    clips = tuple(
        ClipMeta(
            clip_id=f"clip{i:03d}",
            begin=TimePoint(i * stride_ms),
            end=TimePoint(i * stride_ms + spec.clip_len_s * 1000),
            source_uri=f"{events_uri}#clip{i:03d}",
        )
        for i in range(spec.n_clips)
    )
    manifest = StreamManifest(stream_id=spec.stream_id, clips=clips)

    placed: list[tuple[Interval, str]] = []

    def _place_event(clip_index: int, phrase: str) -> Interval:
        clip = clips[clip_index]
        clip_len = spec.clip_len_s
        for _ in range(1000):
            offset_s = rng.randrange(0, clip_len - spec.event_len_s + 1)
            start_ms = clip.begin.millis + offset_s * 1000
            iv = Interval.from_millis(start_ms, start_ms + spec.event_len_s * 1000)
            if all(not _strict_overlap(iv, other) for other, _ in placed):
                placed.append((iv, phrase))
                return iv
        raise ValidationError(f"could not place event in clip {clip_index}; clips too crowded")

    qacs: list[QACTriplet] = []
    category_cycle = 0

    for i in range(spec.n_needles):
        marker = markers[i]
        tail = _NEEDLE_TAILS[rng.randrange(len(_NEEDLE_TAILS))]
        phrase = f"the {marker} {tail}"
        clip_index = rng.randrange(spec.n_clips)
        iv = _place_event(clip_index, phrase)
        qacs.append(
            QACTriplet(
                qac_id=f"synth-n{i:03d}",
                question=f"What happens involving '{marker}'?",
                answer=phrase,
                clues=(iv,),
                category=CATEGORIES[category_cycle % len(CATEGORIES)],
                subset="day",
            )
        )
        category_cycle += 1

    for j in range(spec.n_multihop):
        marker = markers[spec.n_needles + j]
        hop_clips = sorted(rng.sample(range(spec.n_clips), spec.hops_per_chain))
        hop_events = []
        for h, clip_index in enumerate(hop_clips):
            tail = _CHAIN_TAILS[h % len(_CHAIN_TAILS)]
            phrase = f"the {marker} {tail}"
            iv = _place_event(clip_index, phrase)
            hop_events.append((iv, phrase))
        hop_events.sort(key=lambda item: item[0].start.millis)
        qacs.append(
            QACTriplet(
                qac_id=f"synth-m{j:03d}",
                question=f"In chronological order, what happens involving '{marker}'?",
                answer="; ".join(phrase for _, phrase in hop_events),
                clues=tuple(iv for iv, _ in hop_events),
                category=CATEGORIES[category_cycle % len(CATEGORIES)],
                subset="day",
            )
        )
        category_cycle += 1

    for clip_index in range(spec.n_clips):
        for _ in range(spec.fillers_per_clip):
            phrase = _FILLER_PHRASES[rng.randrange(len(_FILLER_PHRASES))]
            _place_event(clip_index, phrase)

    events = tuple(sorted(placed, key=lambda item: (item[0].start.millis, item[1])))
    return SynthStream(manifest=manifest, events=events, qacs=tuple(qacs))


def _strict_overlap(a: Interval, b: Interval) -> bool:
    return a.start.millis < b.end.millis and b.start.millis < a.end.millis
