"""The memory bank: overlap-driven consolidation and grouped retrieval.

The bank is the agent's belief state: temporally disjoint language summaries
with embeddings.  Consolidation merges any observation that overlaps existing
entries into a single hull-spanning entry, which preserves disjointness by
induction.  Banks are immutable values; every update returns a new bank, so
snapshots and per-question overlays are free and the shared base can never be
corrupted by a reader.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DataError, ValidationError
from .perception import Observation
from .prompts import PromptSet, fill
from .timebase import Interval, hull, overlaps

logger = logging.getLogger(__name__)

NO_MEMORY_NOTICE = "No memory available"

DEFAULT_TOP_K = 5
CANDIDATE_POOL_FACTOR = 4  # vector-search pool ahead of the reranker


@dataclass(frozen=True, eq=False)
class MemoryEntry:
    """One consolidated summary covering a disjoint slice of the timeline."""

    entry_id: str
    interval: Interval
    summary: str
    embedding: np.ndarray = field(repr=False)
    provenance: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.summary.strip():
            raise ValidationError("memory entry summary must be non-empty")


@dataclass(frozen=True)
class MemoryBank:
    """Immutable set of temporally disjoint entries plus their vectors."""

    entries: tuple[MemoryEntry, ...] = ()
    next_id: int = 0

    def __post_init__(self) -> None:
        starts = [e.interval.start.millis for e in self.entries]
        if starts != sorted(starts):
            raise ValidationError("bank entries must be sorted by interval start")

    @property
    def dim(self) -> Optional[int]:
        return int(self.entries[0].embedding.shape[0]) if self.entries else None


@dataclass(frozen=True)
class RetrievalHit:
    """One reranked retrieval result.

    ``similarity`` is the squared Euclidean distance between query and entry
    embeddings (smaller is closer); ``rerank_rank`` is 1-based within top-k.
    """

    entry: MemoryEntry
    similarity: float
    rerank_rank: int

    def __post_init__(self) -> None:
        if self.rerank_rank < 1:
            raise ValidationError("rerank_rank is 1-based")


@dataclass(frozen=True)
class SearchResult:
    """Global summary plus the per-interval evidence that produced it."""

    summary: str
    evidence: tuple[tuple[Interval, str], ...] = ()
    hits: tuple[RetrievalHit, ...] = ()


def _obs_ref(obs: Observation) -> str:
    return f"{obs.source}:{obs.interval.start.millis}-{obs.interval.end.millis}"


def mem_manage(bank: MemoryBank, obs: Observation, *, memory_llm, embedder) -> MemoryBank:
    """Merge-or-insert consolidation of one observation.

    Entries that temporally overlap the observation are replaced by a single
    entry whose summary condenses theirs plus the new text and whose interval
    is the hull of everything merged; otherwise the observation is inserted
    as-is.  On summarizer/embedder failure the original bank is returned
    unchanged to the caller (the error propagates).
    """
    if not obs.text.strip():
        raise ValidationError("cannot consolidate an observation with empty text")
    overlapping = [e for e in bank.entries if overlaps(e.interval, obs.interval)]
    if not overlapping:
        summary = obs.text
        interval = obs.interval
        provenance: tuple[str, ...] = (_obs_ref(obs),)
    else:
        summary = memory_llm.merge([e.summary for e in overlapping] + [obs.text])
        if not summary.strip():
            summary = "\n".join([e.summary for e in overlapping] + [obs.text])
        interval = hull([e.interval for e in overlapping] + [obs.interval])
        provenance = tuple(
            dict.fromkeys(
                [ref for e in overlapping for ref in e.provenance] + [_obs_ref(obs)]
            )
        )
    embedding = np.asarray(embedder.embed([summary])[0], dtype=np.float32)
    if bank.dim is not None and embedding.shape[0] != bank.dim:
        raise ValidationError(
            f"embedding dimension {embedding.shape[0]} does not match bank dimension {bank.dim}"
        )
    entry = MemoryEntry(
        entry_id=f"e{bank.next_id:06d}",
        interval=interval,
        summary=summary,
        embedding=embedding,
        provenance=provenance,
    )
    kept = [e for e in bank.entries if e not in overlapping]
    entries = tuple(sorted(kept + [entry], key=lambda e: e.interval.start.millis))
    return MemoryBank(entries=entries, next_id=bank.next_id + 1)


def mem_search(
    bank: MemoryBank,
    queries: Sequence[str],
    summarize_query: str,
    k: int = DEFAULT_TOP_K,
    *,
    embedder,
    reranker,
    memory_llm,
) -> SearchResult:
    """Grouped hierarchical retrieval over the bank.

    Per query: vector search a 4k candidate pool, rerank to top-k, then group
    the kept hits by entry interval.  Each group is filter-summarized against
    the summarize query (groups condensing to nothing are dropped) and the
    surviving (interval, summary) evidence is summarized once globally.
    """
    queries = [str(q).strip() for q in queries]
    if not queries or any(not q for q in queries):
        raise ValidationError("queries must be non-empty strings")
    if k < 1:
        raise ValidationError("k must be >= 1")
    if not bank.entries:
        return SearchResult(summary=NO_MEMORY_NOTICE)

    hits: list[RetrievalHit] = []
    group_queries: dict[tuple[int, int], list[str]] = {}
    grouped: dict[tuple[int, int], list[MemoryEntry]] = {}
    for query in queries:
        qvec = np.asarray(embedder.embed([query])[0], dtype=np.float32)
        scored = []
        for entry in bank.entries:
            delta = entry.embedding.astype(np.float32) - qvec
            scored.append((float(np.dot(delta, delta)), entry.interval.start.millis, entry))
        scored.sort(key=lambda item: (item[0], item[1]))
        pool = scored[: CANDIDATE_POOL_FACTOR * k]
        candidates = [(str(entry.interval), entry.summary) for _, _, entry in pool]
        order = reranker.rerank(query, candidates, k)
        for rank, idx in enumerate(order[:k], start=1):
            if not 0 <= idx < len(pool):
                logger.warning("reranker returned out-of-range index %d; skipping", idx)
                continue
            dist, _, entry = pool[idx]
            hits.append(RetrievalHit(entry=entry, similarity=dist, rerank_rank=rank))
            key = (entry.interval.start.millis, entry.interval.end.millis)
            grouped.setdefault(key, [])
            if entry not in grouped[key]:
                grouped[key].append(entry)
            group_queries.setdefault(key, [])
            if query not in group_queries[key]:
                group_queries[key].append(query)

    evidence: list[tuple[Interval, str]] = []
    for key in sorted(grouped):
        entries = grouped[key]
        text = "\n".join(e.summary for e in entries)
        query_text = "; ".join(group_queries[key])
        summary = memory_llm.filter_summary(query_text, summarize_query, text).strip()
        if not summary:
            continue
        evidence.append((entries[0].interval, summary))

    if not evidence:
        return SearchResult(summary=NO_MEMORY_NOTICE, hits=tuple(hits))

    lines = [f"From {iv.start} to {iv.end}: {summary}" for iv, summary in evidence]
    global_summary = memory_llm.global_summary(summarize_query, "\n".join(lines)).strip()
    if not global_summary:
        global_summary = "\n".join(lines)
    return SearchResult(summary=global_summary, evidence=tuple(evidence), hits=tuple(hits))


# ---------------------------------------------------------------------------
# LLM adapters for the summarizer and reranker roles


class PromptedMemoryLLM:
    """Memory maintenance backed by a chat model and the default templates."""

    def __init__(self, chat_backend, prompts: Optional[PromptSet] = None):
        self.chat = chat_backend
        self.prompts = prompts or PromptSet()

    def merge(self, texts: Sequence[str]) -> str:
        prompt = fill(self.prompts.merge, text="\n\n".join(texts))
        return self.chat.complete([{"role": "user", "content": prompt}]).strip()

    def filter_summary(self, query: str, summarize_query: str, text: str) -> str:
        prompt = fill(
            self.prompts.memory_filter,
            query=query,
            summarize_query=summarize_query,
            text=text,
        )
        return self.chat.complete([{"role": "user", "content": prompt}]).strip()

    def global_summary(self, summarize_query: str, text: str) -> str:
        return self.filter_summary(summarize_query, summarize_query, text)


class LLMReranker:
    """Rerank via a numbered-candidate prompt; falls back to retrieval order."""

    def __init__(self, chat_backend, prompts: Optional[PromptSet] = None):
        self.chat = chat_backend
        self.prompts = prompts or PromptSet()

    def rerank(self, query: str, candidates: Sequence[tuple[str, str]], k: int) -> list[int]:
        listing = "\n".join(
            f"{i + 1}. ({interval}) {text}" for i, (interval, text) in enumerate(candidates)
        )
        prompt = fill(self.prompts.rerank, query=query, candidates=listing, k=str(k))
        reply = self.chat.complete([{"role": "user", "content": prompt}])
        picked = []
        for token in re.findall(r"\d+", reply):
            idx = int(token) - 1
            if 0 <= idx < len(candidates) and idx not in picked:
                picked.append(idx)
        if not picked:
            logger.warning("reranker reply had no usable indices; keeping retrieval order")
            picked = list(range(len(candidates)))
        return picked[:k]


# ---------------------------------------------------------------------------
# Persistence: entries.jsonl + vectors.bin (+ meta.json)

_VECTORS_FILE = "vectors.bin"
_ENTRIES_FILE = "entries.jsonl"
_META_FILE = "meta.json"


def save_bank(bank: MemoryBank, directory: Union[str, Path]) -> None:
    """Write the bank as entries.jsonl plus a little-endian float32 matrix.

    vectors.bin starts with one JSON header line carrying the dimension and
    entry-id order, followed by the row-major raw float32 data.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with (directory / _ENTRIES_FILE).open("w", encoding="utf-8") as fh:
        for entry in bank.entries:
            fh.write(
                json.dumps(
                    {
                        "entry_id": entry.entry_id,
                        "start_ms": entry.interval.start.millis,
                        "end_ms": entry.interval.end.millis,
                        "summary": entry.summary,
                        "provenance": list(entry.provenance),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    dim = bank.dim or 0
    header = json.dumps(
        {"dim": dim, "entry_ids": [e.entry_id for e in bank.entries], "dtype": "<f4"},
        sort_keys=True,
    ).encode("utf-8")
    with (directory / _VECTORS_FILE).open("wb") as fh:
        fh.write(header + b"\n")
        if bank.entries:
            matrix = np.stack([e.embedding.astype("<f4") for e in bank.entries])
            fh.write(matrix.tobytes(order="C"))
    (directory / _META_FILE).write_text(
        json.dumps({"next_id": bank.next_id, "entries": len(bank.entries)}, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_bank(directory: Union[str, Path]) -> MemoryBank:
    directory = Path(directory)
    entries_path = directory / _ENTRIES_FILE
    vectors_path = directory / _VECTORS_FILE
    if not entries_path.is_file() or not vectors_path.is_file():
        raise DataError(f"{directory} is not a memory bank directory")
    rows = []
    with entries_path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    with vectors_path.open("rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        raw = fh.read()
    dim = int(header["dim"])
    order = list(header["entry_ids"])
    if [r["entry_id"] for r in rows] != order:
        raise DataError("entries.jsonl order does not match the vector header")
    if dim:
        matrix = np.frombuffer(raw, dtype="<f4").reshape(len(order), dim)
    else:
        matrix = np.zeros((len(order), 0), dtype=np.float32)
    entries = []
    for i, row in enumerate(rows):
        entries.append(
            MemoryEntry(
                entry_id=row["entry_id"],
                interval=Interval.from_millis(int(row["start_ms"]), int(row["end_ms"])),
                summary=row["summary"],
                embedding=np.array(matrix[i], dtype=np.float32),
                provenance=tuple(row.get("provenance", [])),
            )
        )
    meta = json.loads((directory / _META_FILE).read_text(encoding="utf-8")) if (directory / _META_FILE).is_file() else {}
    next_id = int(meta.get("next_id", len(entries)))
    return MemoryBank(entries=tuple(entries), next_id=next_id)


def bank_digest(bank: MemoryBank) -> str:
    """Stable content hash over entries and vectors."""
    h = hashlib.sha256()
    for entry in bank.entries:
        h.update(entry.entry_id.encode())
        h.update(str(entry.interval.start.millis).encode())
        h.update(str(entry.interval.end.millis).encode())
        h.update(entry.summary.encode())
        h.update("|".join(entry.provenance).encode())
        h.update(entry.embedding.astype("<f4").tobytes())
    h.update(str(bank.next_id).encode())
    return h.hexdigest()
