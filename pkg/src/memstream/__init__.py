"""memstream: a lifelong-stream agent runtime with a consolidated memory bank.

Two-phase architecture over very long, sparse streams: a passive perception
pass captions fixed-length windows and consolidates them into a temporally
disjoint memory bank; a recursive control loop then answers questions by
searching that memory, inspecting concrete time ranges, and finishing with a
grounded answer.  The evaluation stack scores answers with an LLM judge
(smoothed 0/0.5/1) and grounding with bucketized interval IoU (Ref@N).
"""
from .controller import (
    AgentAction,
    AgentTrace,
    ControlRuntime,
    StepRecord,
    enforce_guards,
    extract_grounding,
    run_control_loop,
    write_trace,
)
from .dataset import (
    CATEGORIES,
    CertificateClass,
    QACTriplet,
    QuestionFlags,
    SplitResult,
    certificate_of,
    chronological_split,
    clue_bucket,
    corpus_stats,
    load_qac,
    qac_index,
    save_qac,
)
from .errors import (
    DataError,
    GapError,
    MemstreamError,
    ToolArgumentError,
    TransportError,
    ValidationError,
)
from .evaluation import (
    SMOOTHING_MAP,
    EvalRecord,
    EvalReport,
    JudgeVerdict,
    aggregate,
    judge_answer,
    parse_grounding_reply,
    ref_at_n,
    render_table,
    smooth_score,
)
from .memory import (
    MemoryBank,
    MemoryEntry,
    RetrievalHit,
    SearchResult,
    bank_digest,
    load_bank,
    mem_manage,
    mem_search,
    save_bank,
)
from .perception import Observation, align_time, mm_inspect, run_perception_phase
from .synth import SynthSpec, SynthStream, generate
from .timebase import BucketSet, Interval, TimePoint, hull, overlaps, quantize
from .timeline import (
    ClipMeta,
    ScaleReport,
    StreamManifest,
    compute_scale,
    is_lifelong,
    load_manifest,
    manifest_from_tsv,
    segment,
)

__version__ = "0.1.0"
