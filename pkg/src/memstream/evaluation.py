"""Scoring: quantized grounding overlap, judge-scored accuracy, aggregation.

Continuous-boundary temporal IoU collapses on lifelong streams (a 600s clue
against a 100h timeline scores near zero for any misalignment), so grounding
is measured on bucketized time: quantize both interval sets into N-second
units and take the set IoU, as a percentage.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .dataset import QACTriplet
from .errors import DataError, ValidationError
from .prompts import build_judge_prompt
from .timebase import Interval, bucket_span

logger = logging.getLogger(__name__)

SMOOTHING_MAP = {0: 0.0, 1: 0.0, 2: 0.0, 3: 0.5, 4: 1.0, 5: 1.0}

_FINAL_SCORE_RE = re.compile(r"Final Score:\s*([0-5])\b", re.IGNORECASE)
_SECONDS_PAIR_RE = re.compile(r"(\d+(?:\.\d+)?)\s*seconds?\s*-\s*(\d+(?:\.\d+)?)\s*seconds?")

RETRY_REMINDER = (
    "Your previous reply did not follow the required output format. "
    "Reply again, strictly ending with the line 'Final Score:' followed by "
    "a single integer from 0 to 5 on the next line."
)

IntervalLike = Union[Interval, Sequence[float]]


def _second_pairs(intervals: Iterable[IntervalLike]) -> list[tuple[float, float]]:
    pairs = []
    for item in intervals:
        if isinstance(item, Interval):
            pairs.append(item.as_seconds())
        else:
            seq = tuple(item)
            if len(seq) != 2:
                raise ValidationError(f"interval must be a (start, end) pair: {item!r}")
            pairs.append((float(seq[0]), float(seq[1])))
    return pairs


def _bucketize(pairs: Sequence[tuple[float, float]], n_s: float, total_s: float) -> set[int]:
    buckets: set[int] = set()
    for start_s, end_s in pairs:
        span = bucket_span(start_s, end_s, n_s, total_s)
        if span is not None:
            buckets.update(span)
    return buckets


def ref_at_n(
    pred: Iterable[IntervalLike],
    gt: Iterable[IntervalLike],
    total_s: float,
    n_s: float,
) -> float:
    """Bucketized grounding overlap between predicted and true interval sets.

    Both sets are quantized into n_s-second buckets over a total_s-second
    timeline (out-of-range parts clamped, empty pieces skipped); the score is
    100 x |P∩G| / |P∪G|, and 0.0 when both bucket sets are empty.
    """
    if n_s <= 0:
        raise ValidationError(f"bucket size must be positive, got {n_s}")
    if total_s <= 0:
        raise ValidationError(f"total duration must be positive, got {total_s}")
    buckets_pred = _bucketize(_second_pairs(pred), n_s, total_s)
    buckets_gt = _bucketize(_second_pairs(gt), n_s, total_s)
    if not buckets_pred and not buckets_gt:
        return 0.0
    return 100.0 * (len(buckets_pred & buckets_gt) / len(buckets_pred | buckets_gt))


# ---------------------------------------------------------------------------
# Judge scoring


@dataclass(frozen=True)
class JudgeVerdict:
    """One judged answer: raw 0-5 rubric score plus its smoothed value."""

    raw_score: int
    smoothed: float
    analysis: str
    valid: bool = True
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.valid:
            if self.raw_score not in SMOOTHING_MAP:
                raise ValidationError(f"raw judge score must be 0..5, got {self.raw_score}")
            if self.smoothed != SMOOTHING_MAP[self.raw_score]:
                raise ValidationError("smoothed value inconsistent with the smoothing map")


def smooth_score(raw_score: int) -> float:
    """4 or 5 count as correct, 3 as half credit, 0-2 as incorrect."""
    if raw_score not in SMOOTHING_MAP:
        raise ValidationError(f"raw judge score must be 0..5, got {raw_score}")
    return SMOOTHING_MAP[raw_score]


def parse_judge_reply(text: str) -> Optional[tuple[int, str]]:
    """(score, analysis) if the reply carries a parsable final score."""
    match = _FINAL_SCORE_RE.search(text)
    if not match:
        return None
    score = int(match.group(1))
    analysis = text[: match.start()].strip()
    if analysis.lower().startswith("analysis:"):
        analysis = analysis[len("analysis:") :].strip()
    return score, analysis


def judge_answer(
    question: str,
    gt_answer: str,
    candidate: str,
    flags: Sequence[str] = (),
    *,
    judge,
    aliases: str = "",
) -> JudgeVerdict:
    """Score a candidate answer against the ground truth with the judge model.

    The hallucination-sensitive and time-duration special rules live in the
    prompt text itself; ``flags`` ride along on the verdict for reporting.
    An unparseable reply is re-asked once; a second failure yields an invalid
    verdict that aggregation excludes (and counts).
    """
    for name, value in (("question", question), ("gt_answer", gt_answer), ("candidate", candidate)):
        if not str(value).strip():
            raise ValidationError(f"{name} must be non-empty")
    prompt = build_judge_prompt(question, gt_answer, candidate, aliases=aliases)
    messages = [{"role": "user", "content": prompt}]
    reply = judge.complete(messages)
    parsed = parse_judge_reply(reply)
    if parsed is None:
        logger.warning("judge reply unparseable; re-asking once")
        retry_messages = messages + [
            {"role": "assistant", "content": reply},
            {"role": "user", "content": RETRY_REMINDER},
        ]
        reply = judge.complete(retry_messages)
        parsed = parse_judge_reply(reply)
    if parsed is None:
        return JudgeVerdict(
            raw_score=0,
            smoothed=0.0,
            analysis=f"unparseable judge output: {reply[:200]}",
            valid=False,
            flags=tuple(flags),
        )
    score, analysis = parsed
    return JudgeVerdict(
        raw_score=score,
        smoothed=smooth_score(score),
        analysis=analysis,
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# Aggregation


@dataclass(frozen=True)
class EvalRecord:
    """Per-question evaluation inputs: verdict, predictions, grounding scores."""

    qac_id: str
    verdict: Optional[JudgeVerdict]
    pred_intervals: tuple[tuple[float, float], ...] = ()
    ref: Mapping[int, float] = field(default_factory=dict)
    rounds: Optional[int] = None


@dataclass(frozen=True)
class GroupStats:
    count: int
    accuracy: float
    mean_ref: Mapping[int, float]


@dataclass(frozen=True)
class EvalReport:
    """Aggregate accuracy and grounding, with category/split breakdowns."""

    n: int
    accuracy: float
    mean_ref: Mapping[int, float]
    per_category: Mapping[str, GroupStats]
    per_split: Mapping[str, GroupStats]
    avg_rounds: Optional[float]
    excluded: int
    per_question: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "mean_ref": {str(k): v for k, v in self.mean_ref.items()},
            "per_category": {
                name: {"count": g.count, "accuracy": g.accuracy, "mean_ref": {str(k): v for k, v in g.mean_ref.items()}}
                for name, g in sorted(self.per_category.items())
            },
            "per_split": {
                name: {"count": g.count, "accuracy": g.accuracy, "mean_ref": {str(k): v for k, v in g.mean_ref.items()}}
                for name, g in sorted(self.per_split.items())
            },
            "avg_rounds": self.avg_rounds,
            "excluded": self.excluded,
            "per_question": list(self.per_question),
        }


def _group_stats(records: Sequence[EvalRecord], ref_ns: Sequence[int]) -> GroupStats:
    scored = [r.verdict.smoothed for r in records if r.verdict is not None and r.verdict.valid]
    accuracy = 100.0 * sum(scored) / len(scored) if scored else 0.0
    mean_ref = {}
    for n in ref_ns:
        vals = [r.ref[n] for r in records if n in r.ref]
        mean_ref[n] = sum(vals) / len(vals) if vals else 0.0
    return GroupStats(count=len(records), accuracy=accuracy, mean_ref=mean_ref)


def aggregate(records: Sequence[EvalRecord], qac_index: Mapping[str, QACTriplet]) -> EvalReport:
    """Fold per-question records into overall and per-category/per-split means.

    Every record must reference a known question id; invalid verdicts are
    excluded from accuracy and reported via ``excluded``.
    """
    unknown = sorted({r.qac_id for r in records} - set(qac_index))
    if unknown:
        raise DataError(f"records reference unknown question ids: {unknown}")
    ref_ns = sorted({n for r in records for n in r.ref})
    overall = _group_stats(records, ref_ns)
    excluded = sum(1 for r in records if r.verdict is not None and not r.verdict.valid)

    by_category: dict[str, list[EvalRecord]] = {}
    by_split: dict[str, list[EvalRecord]] = {}
    for record in records:
        triplet = qac_index[record.qac_id]
        by_category.setdefault(triplet.category, []).append(record)
        by_split.setdefault(triplet.subset, []).append(record)

    rounds = [r.rounds for r in records if r.rounds is not None]
    per_question = tuple(
        {
            "qac_id": r.qac_id,
            "raw_score": r.verdict.raw_score if r.verdict and r.verdict.valid else None,
            "smoothed": r.verdict.smoothed if r.verdict and r.verdict.valid else None,
            "valid": bool(r.verdict.valid) if r.verdict else False,
            "ref": {str(n): r.ref[n] for n in sorted(r.ref)},
            "rounds": r.rounds,
            "category": qac_index[r.qac_id].category,
            "subset": qac_index[r.qac_id].subset,
        }
        for r in sorted(records, key=lambda r: r.qac_id)
    )
    return EvalReport(
        n=len(records),
        accuracy=overall.accuracy,
        mean_ref=overall.mean_ref,
        per_category={name: _group_stats(group, ref_ns) for name, group in by_category.items()},
        per_split={name: _group_stats(group, ref_ns) for name, group in by_split.items()},
        avg_rounds=sum(rounds) / len(rounds) if rounds else None,
        excluded=excluded,
        per_question=per_question,
    )


def render_table(
    rows: Mapping[str, Union[EvalReport, GroupStats]],
    ref_ns: Sequence[int] = (60, 300, 600),
) -> str:
    """Plain-text results table: one row per method or split label."""
    headers = ["Method", "N", "Acc"] + [f"Ref@{n}" for n in ref_ns] + ["Avg. Rounds"]
    body = []
    for label, row in rows.items():
        count = row.n if isinstance(row, EvalReport) else row.count
        rounds = row.avg_rounds if isinstance(row, EvalReport) else None
        cells = [label, str(count), f"{row.accuracy:.2f}"]
        for n in ref_ns:
            cells.append(f"{row.mean_ref.get(n, 0.0):.2f}")
        cells.append(f"{rounds:.2f}" if rounds is not None else "-")
        body.append(cells)
    widths = [
        max(len(headers[i]), *(len(row[i]) for row in body)) if body else len(headers[i])
        for i in range(len(headers))
    ]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    lines.append("  ".join("-" * widths[i] for i in range(len(headers))))
    for row in body:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Prediction files


def parse_grounding_reply(text: str) -> list[tuple[float, float]]:
    """Parse the 'xx.xx seconds - xx.xx seconds and ...' grounding format."""
    return [(float(a), float(b)) for a, b in _SECONDS_PAIR_RE.findall(text)]


def load_predictions(path: Union[str, Path]) -> dict[str, dict]:
    """Prediction JSONL: {qac_id, answer, intervals: [[a, b], ...] | 'grounding text'}."""
    out: dict[str, dict] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "qac_id" not in row:
                raise DataError(f"{path}:{lineno}: missing qac_id")
            intervals = row.get("intervals", [])
            if isinstance(intervals, str):
                pairs = parse_grounding_reply(intervals)
            else:
                pairs = [(float(p[0]), float(p[1])) for p in intervals]
            out[str(row["qac_id"])] = {
                "answer": str(row.get("answer", "")),
                "intervals": pairs,
            }
    return out
