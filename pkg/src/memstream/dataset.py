"""Question-answer-clue corpora: ingestion, derived statistics, and splits.

Every question is grounded by explicit clue intervals, the evidence needed to
answer it.  Clue spans drive two bucket families (per-clue duration and the
whole question's evidence certificate) and the chronological train/validation
split that keeps validation clues strictly later than training ones.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

from .errors import DataError, ValidationError
from .timebase import Interval

SUBSETS = ("day", "week", "month")

CATEGORIES = (
    "counting",
    "causal_reasoning",
    "entity_recognition",
    "temporal_reasoning",
    "hallucination_detection",
    "event_recognition",
    "language_content_recall",
    "attribute_recognition",
    "social_interaction",
    "state_change",
    "event_tracking",
)

# Certificate buckets in seconds; each boundary belongs to the upper bucket.
CERTIFICATE_BUCKETS = (
    ("short", 0, 600),
    ("medium", 600, 3600),
    ("long", 3600, 36000),
    ("ultra", 36000, math.inf),
)

CLUE_BUCKETS = (
    ("short", 0, 90),
    ("medium", 90, 540),
    ("long", 540, math.inf),
)


@dataclass(frozen=True)
class QuestionFlags:
    hallucination_sensitive: bool = False
    time_duration: bool = False

    def names(self) -> tuple[str, ...]:
        out = []
        if self.hallucination_sensitive:
            out.append("hallucination_sensitive")
        if self.time_duration:
            out.append("time_duration")
        return tuple(out)


@dataclass(frozen=True)
class QACTriplet:
    """One grounded question: text, answer, clue intervals, and labels."""

    qac_id: str
    question: str
    answer: str
    clues: tuple[Interval, ...]
    category: str
    subset: str
    flags: QuestionFlags = field(default_factory=QuestionFlags)

    def __post_init__(self) -> None:
        if not self.qac_id or not self.question.strip() or not self.answer.strip():
            raise ValidationError("qac_id, question, and answer must be non-empty")
        if not self.clues:
            raise ValidationError(f"{self.qac_id}: clues must be non-empty")
        starts = [c.start.millis for c in self.clues]
        if starts != sorted(starts):
            raise ValidationError(f"{self.qac_id}: clues must be sorted by start")
        if self.subset not in SUBSETS:
            raise ValidationError(f"{self.qac_id}: subset must be one of {SUBSETS}")
        if self.category not in CATEGORIES:
            raise ValidationError(f"{self.qac_id}: unknown category {self.category!r}")

    @property
    def earliest_clue_start_ms(self) -> int:
        return self.clues[0].start.millis

    @property
    def latest_clue_end_ms(self) -> int:
        return max(c.end.millis for c in self.clues)


def normalize_category(text: str) -> str:
    """Map display names like 'Causal Reasoning' or 'Hallucination Det.' onto
    the canonical snake_case labels."""
    key = text.strip().lower().replace(".", "").replace("-", " ")
    key = "_".join(key.split())
    synonyms = {
        "hallucination_det": "hallucination_detection",
        "lang_content_recall": "language_content_recall",
    }
    key = synonyms.get(key, key)
    if key not in CATEGORIES:
        raise ValidationError(f"unknown question category {text!r}")
    return key


@dataclass(frozen=True)
class CertificateClass:
    """Evidence-span class of one question: hull duration plus its bucket."""

    duration_s: float
    bucket: str

    def __post_init__(self) -> None:
        if _bucket_of(self.duration_s, CERTIFICATE_BUCKETS) != self.bucket:
            raise ValidationError(
                f"bucket {self.bucket!r} inconsistent with duration {self.duration_s}s"
            )


def _bucket_of(duration_s: float, buckets) -> str:
    for name, lo, hi in buckets:
        if lo <= duration_s < hi:
            return name
    raise ValidationError(f"negative duration {duration_s}")


def certificate_of(triplet: QACTriplet) -> CertificateClass:
    """Certificate = clue hull length: latest clue end minus earliest start."""
    duration_s = (triplet.latest_clue_end_ms - triplet.earliest_clue_start_ms) / 1000.0
    return CertificateClass(duration_s=duration_s, bucket=_bucket_of(duration_s, CERTIFICATE_BUCKETS))


def clue_bucket(clue: Interval) -> str:
    """Duration bucket of a single clue interval."""
    return _bucket_of(clue.duration_s, CLUE_BUCKETS)


@dataclass(frozen=True)
class SplitResult:
    train: tuple[QACTriplet, ...]
    val: tuple[QACTriplet, ...]
    gap_s: float  # earliest val clue start minus latest train clue end


def chronological_split(triplets: Sequence[QACTriplet], train_fraction: float = 0.3) -> SplitResult:
    """Time-ordered split: the earliest fraction trains, the rest validates.

    Questions are ordered by their earliest clue start (ties broken by id), so
    validation clues cannot sit before training ones; random splits would leak
    nearby context across the boundary.
    """
    if len(triplets) < 2:
        raise ValidationError(f"need at least 2 triplets to split, got {len(triplets)}")
    if not (0.0 < train_fraction < 1.0):
        raise ValidationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    ordered = sorted(triplets, key=lambda t: (t.earliest_clue_start_ms, t.qac_id))
    n_train = math.floor(train_fraction * len(ordered))
    train = tuple(ordered[:n_train])
    val = tuple(ordered[n_train:])
    if train and val:
        gap_s = (min(t.earliest_clue_start_ms for t in val) - max(t.latest_clue_end_ms for t in train)) / 1000.0
    else:
        gap_s = 0.0
    return SplitResult(train=train, val=val, gap_s=gap_s)


# ---------------------------------------------------------------------------
# Corpus IO and statistics


def triplet_from_dict(row: dict) -> QACTriplet:
    try:
        clues = tuple(
            sorted(
                (Interval.from_seconds(float(pair[0]), float(pair[1])) for pair in row["clues"]),
                key=lambda iv: iv.start.millis,
            )
        )
        flags_raw = row.get("flags") or {}
        return QACTriplet(
            qac_id=str(row["qac_id"]),
            question=str(row["question"]),
            answer=str(row["answer"]),
            clues=clues,
            category=normalize_category(str(row["category"])),
            subset=str(row["subset"]),
            flags=QuestionFlags(
                hallucination_sensitive=bool(flags_raw.get("hallucination_sensitive", False)),
                time_duration=bool(flags_raw.get("time_duration", False)),
            ),
        )
    except KeyError as exc:
        raise DataError(f"question row missing field {exc}") from exc


def triplet_to_dict(triplet: QACTriplet) -> dict:
    return {
        "qac_id": triplet.qac_id,
        "question": triplet.question,
        "answer": triplet.answer,
        "clues": [[iv.start.seconds, iv.end.seconds] for iv in triplet.clues],
        "category": triplet.category,
        "subset": triplet.subset,
        "flags": {
            "hallucination_sensitive": triplet.flags.hallucination_sensitive,
            "time_duration": triplet.flags.time_duration,
        },
    }


def load_qac(path: Union[str, Path]) -> list[QACTriplet]:
    path = Path(path)
    try:
        rows = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(rows, list):
        raise DataError(f"{path}: question file must be a JSON array")
    triplets = [triplet_from_dict(row) for row in rows]
    ids = [t.qac_id for t in triplets]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise DataError(f"{path}: duplicate question ids: {dupes}")
    return triplets


def save_qac(triplets: Iterable[QACTriplet], path: Union[str, Path]) -> None:
    rows = [triplet_to_dict(t) for t in triplets]
    Path(path).write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")


def qac_index(triplets: Iterable[QACTriplet]) -> dict[str, QACTriplet]:
    return {t.qac_id: t for t in triplets}


def corpus_stats(triplets: Sequence[QACTriplet]) -> dict:
    """Corpus statistics shaped like the published dataset table.

    The certificate is reported from the clue hull; the summed-clue-length
    alternative is included alongside since the two readings differ for
    multi-clue questions.
    """
    all_clues = [clue for t in triplets for clue in t.clues]
    clue_counts = {name: 0 for name, _, _ in CLUE_BUCKETS}
    for clue in all_clues:
        clue_counts[clue_bucket(clue)] += 1
    cert_counts = {name: 0 for name, _, _ in CERTIFICATE_BUCKETS}
    sum_durations = []
    for t in triplets:
        cert_counts[certificate_of(t).bucket] += 1
        sum_durations.append(sum(c.duration_s for c in t.clues))
    subset_counts = {name: 0 for name in SUBSETS}
    for t in triplets:
        subset_counts[t.subset] += 1
    category_counts: dict[str, int] = {}
    for t in triplets:
        category_counts[t.category] = category_counts.get(t.category, 0) + 1
    return {
        "total_questions": len(triplets),
        "total_clues": len(all_clues),
        "clue_buckets": clue_counts,
        "avg_clue_duration_s": (sum(c.duration_s for c in all_clues) / len(all_clues)) if all_clues else 0.0,
        "certificate_buckets": cert_counts,
        "avg_certificate_hull_s": (
            sum((t.latest_clue_end_ms - t.earliest_clue_start_ms) / 1000.0 for t in triplets) / len(triplets)
            if triplets
            else 0.0
        ),
        "avg_certificate_sum_s": (sum(sum_durations) / len(sum_durations)) if sum_durations else 0.0,
        "subset_counts": subset_counts,
        "category_counts": dict(sorted(category_counts.items())),
    }
