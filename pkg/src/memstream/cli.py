"""Command-line operator surface.

Subcommands: synth, perceive, ask, eval, split, stats.  All state flows
through explicit files (manifest JSON, question JSON, bank directories,
trace/report files), so every run is reproducible; under scripted backends
identical inputs give identical output digests.

Exit codes: 0 success, 2 validation error, 3 transport error, 4 data error.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import dataset as ds
from . import evaluation as ev
from .backends import (
    BlindController,
    OpenAIChatClient,
    OpenAIEmbeddingClient,
    OpenAIVisionClient,
    OracleController,
    ScriptedEmbedder,
    ScriptedJudge,
    ScriptedMemoryLLM,
    ScriptedReranker,
    ScriptedVision,
    SubprocessFrameProvider,
    backend_config_from_dict,
    load_event_map,
    load_run_config,
    save_event_map,
)
from .backends.config import (
    ROLE_CONTROLLER,
    ROLE_EMBEDDER,
    ROLE_JUDGE,
    ROLE_MEMORY,
    ROLE_PERCEPTION,
    ROLE_RERANKER,
    RunConfig,
)
from .controller import ControlRuntime, extract_grounding, run_control_loop, write_trace
from .errors import DataError, MemstreamError, TransportError, ValidationError
from .memory import (
    LLMReranker,
    MemoryBank,
    PromptedMemoryLLM,
    bank_digest,
    load_bank,
    save_bank,
)
from .perception import run_perception_phase
from .prompts import PromptSet, load_prompt_set
from .synth import SynthSpec, generate
from .timeline import compute_scale, load_manifest, manifest_from_tsv, save_manifest

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_TRANSPORT = 3
EXIT_DATA = 4


@dataclass
class Runtime:
    """Concrete backends for every role, assembled from config."""

    vision: object
    controller: object
    memory_llm: object
    embedder: object
    reranker: object
    judge: object
    prompts: PromptSet
    scripted: bool

    def control_runtime(self) -> ControlRuntime:
        return ControlRuntime(
            controller=self.controller,
            vision=self.vision,
            memory_llm=self.memory_llm,
            embedder=self.embedder,
            reranker=self.reranker,
            prompts=self.prompts,
        )


def build_runtime(cfg: RunConfig, base_dir: Path) -> Runtime:
    prompt_dir = Path(base_dir) / cfg.prompt_dir if cfg.prompt_dir else None
    prompts = load_prompt_set(prompt_dir)
    roles = dict(cfg.roles)
    for role in (ROLE_PERCEPTION, ROLE_CONTROLLER, ROLE_MEMORY, ROLE_RERANKER, ROLE_JUDGE, ROLE_EMBEDDER):
        roles.setdefault(role, {"kind": "scripted"})

    all_scripted = all(r.get("kind", "scripted") == "scripted" for r in roles.values())

    def _chat(role: str) -> object:
        spec = roles[role]
        if spec.get("kind") == "openai":
            return OpenAIChatClient(backend_config_from_dict(spec))
        return None

    # Vision
    vspec = roles[ROLE_PERCEPTION]
    if vspec.get("kind") == "openai":
        command = vspec.get("frame_command")
        if not command:
            raise ValidationError("perception_mllm needs a frame_command for frame extraction")
        provider = SubprocessFrameProvider(
            command, fps=float(vspec.get("fps", 0.5)), max_frames=int(vspec.get("max_frames", 64))
        )
        config = backend_config_from_dict(vspec, extra_keys=frozenset({"frame_command", "fps", "max_frames"}))
        vision = OpenAIVisionClient(config, provider, prompts=prompts)
    else:
        events_path = vspec.get("events")
        events = load_event_map(base_dir / events_path) if events_path else ()
        vision = ScriptedVision(events)

    # Controller
    cspec = roles[ROLE_CONTROLLER]
    if cspec.get("kind") == "openai":
        controller = OpenAIChatClient(backend_config_from_dict(cspec))
    else:
        policy = cspec.get("policy", "oracle")
        if policy == "blind":
            controller = BlindController()
        elif policy == "oracle":
            controller = OracleController(top_k=cfg.top_k)
        else:
            raise ValidationError(f"unknown scripted controller policy {policy!r}")

    mem_chat = _chat(ROLE_MEMORY)
    memory_llm = PromptedMemoryLLM(mem_chat, prompts) if mem_chat else ScriptedMemoryLLM()
    rerank_chat = _chat(ROLE_RERANKER)
    reranker = LLMReranker(rerank_chat, prompts) if rerank_chat else ScriptedReranker()
    judge = _chat(ROLE_JUDGE) or ScriptedJudge()

    espec = roles[ROLE_EMBEDDER]
    if espec.get("kind") == "openai":
        embedder = OpenAIEmbeddingClient(backend_config_from_dict(espec))
    else:
        embedder = ScriptedEmbedder()

    return Runtime(
        vision=vision,
        controller=controller,
        memory_llm=memory_llm,
        embedder=embedder,
        reranker=reranker,
        judge=judge,
        prompts=prompts,
        scripted=all_scripted,
    )


def _clock_for(runtime: Runtime):
    if runtime.scripted:
        return lambda: 0.0  # deterministic traces -> stable file digests
    import time

    return time.monotonic


def _load_manifest_arg(path: str, year: int):
    p = Path(path)
    if p.suffix.lower() in (".tsv", ".txt"):
        return manifest_from_tsv(p, stream_id=p.stem, year=year)
    return load_manifest(p, year=year)


# ---------------------------------------------------------------------------
# Commands


def cmd_synth(args: argparse.Namespace) -> int:
    raw = json.loads(Path(args.spec).read_text(encoding="utf-8")) if args.spec else {}
    if "vocabulary" in raw:
        raw["vocabulary"] = tuple(raw["vocabulary"])
    spec = SynthSpec(**raw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stream = generate(spec)
    save_manifest(stream.manifest, out / "manifest.json")
    save_event_map(stream.events, out / "events.json")
    ds.save_qac(stream.qacs, out / "qac.json")
    print(
        f"wrote {len(stream.manifest.clips)} clips, {len(stream.events)} events, "
        f"{len(stream.qacs)} questions to {out}"
    )
    return EXIT_OK


def cmd_perceive(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    runtime = build_runtime(cfg, Path(args.config).parent if args.config else Path.cwd())
    manifest = _load_manifest_arg(args.manifest, cfg.year)
    delta = args.delta_t if args.delta_t is not None else cfg.delta_t_s
    bank = run_perception_phase(
        manifest,
        delta,
        MemoryBank(),
        vision=runtime.vision,
        memory_llm=runtime.memory_llm,
        embedder=runtime.embedder,
        parallelism=cfg.parallelism,
    )
    save_bank(bank, args.out)
    scale = compute_scale(manifest)
    print(
        f"bank: {len(bank.entries)} entries -> {args.out} (digest {bank_digest(bank)[:12]})\n"
        f"t_dur: {scale.t_dur_s:.0f}s  t_span: {scale.t_span_s:.0f}s  "
        f"sparsity: {scale.sparsity:.3f}  lifelong: {scale.lifelong}"
    )
    return EXIT_OK


def cmd_ask(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    runtime = build_runtime(cfg, Path(args.config).parent if args.config else Path.cwd())
    manifest = _load_manifest_arg(args.manifest, cfg.year)
    bank = load_bank(args.bank)
    max_steps = args.max_steps if args.max_steps is not None else cfg.max_steps
    trace = run_control_loop(
        args.question,
        manifest,
        bank,
        max_steps,
        runtime=runtime.control_runtime(),
        top_k=cfg.top_k,
        clock=_clock_for(runtime),
    )
    if args.trace:
        write_trace(trace, args.trace)
    print(trace.final_answer)
    print(f"rounds_used: {trace.rounds_used}", file=sys.stderr)
    return EXIT_OK


def _eval_one_agent(qac, manifest, bank, runtime: Runtime, cfg: RunConfig, out_dir: Path):
    trace = run_control_loop(
        qac.question,
        manifest,
        bank,
        cfg.max_steps,
        runtime=runtime.control_runtime(),
        top_k=cfg.top_k,
        clock=_clock_for(runtime),
    )
    write_trace(trace, out_dir / "traces" / f"{qac.qac_id}.jsonl")
    pred = [iv.as_seconds() for iv in extract_grounding(trace)]
    return qac, trace.final_answer, pred, trace.rounds_used


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    runtime = build_runtime(cfg, Path(args.config).parent if args.config else Path.cwd())
    triplets = ds.load_qac(args.qac)
    index = ds.qac_index(triplets)
    manifest = _load_manifest_arg(args.manifest, cfg.year)
    total_s = compute_scale(manifest).t_span_s
    ref_ns = tuple(int(n) for n in args.ref_n.split(",")) if args.ref_n else cfg.ref_n
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    answers: dict[str, tuple[str, list, Optional[int]]] = {}
    if args.predictions:
        label = args.label or "predictions"
        preds = ev.load_predictions(args.predictions)
        unknown = sorted(set(preds) - set(index))
        if unknown:
            raise DataError(f"predictions reference unknown question ids: {unknown}")
        for qac in triplets:
            row = preds.get(qac.qac_id, {"answer": "", "intervals": []})
            answers[qac.qac_id] = (row["answer"], row["intervals"], None)
    else:
        label = args.label or "agent"
        if not args.bank:
            raise ValidationError("agent-mode evaluation needs --bank (or pass --predictions)")
        bank = load_bank(args.bank)
        jobs = sorted(triplets, key=lambda t: t.qac_id)
        if cfg.parallelism > 1:
            with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
                results = list(
                    pool.map(
                        lambda q: _eval_one_agent(q, manifest, bank, runtime, cfg, out_dir),
                        jobs,
                    )
                )
        else:
            results = [_eval_one_agent(q, manifest, bank, runtime, cfg, out_dir) for q in jobs]
        for qac, answer, pred, rounds in results:
            answers[qac.qac_id] = (answer, pred, rounds)

    aliases = Path(args.aliases).read_text(encoding="utf-8") if args.aliases else ""
    records = []
    for qac in triplets:
        answer, pred, rounds = answers[qac.qac_id]
        if answer.strip():
            verdict = ev.judge_answer(
                qac.question, qac.answer, answer, qac.flags.names(),
                judge=runtime.judge, aliases=aliases,
            )
        else:
            verdict = ev.JudgeVerdict(raw_score=0, smoothed=0.0, analysis="empty candidate answer")
        ref = {n: ev.ref_at_n(pred, qac.clues, total_s, n) for n in ref_ns}
        records.append(
            ev.EvalRecord(
                qac_id=qac.qac_id,
                verdict=verdict,
                pred_intervals=tuple((float(a), float(b)) for a, b in pred),
                ref=ref,
                rounds=rounds,
            )
        )

    report = ev.aggregate(records, index)
    (out_dir / "report.json").write_text(
        json.dumps({label: report.to_dict()}, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    rows: dict = {label: report}
    if len(report.per_split) > 1:
        for split_name in sorted(report.per_split):
            rows[f"{label} ({split_name})"] = report.per_split[split_name]
    table = ev.render_table(rows, ref_ns)
    (out_dir / "report.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    if report.excluded:
        print(f"excluded {report.excluded} question(s) with unparseable judge output", file=sys.stderr)
    return EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    triplets = ds.load_qac(args.qac)
    result = ds.chronological_split(triplets, args.fraction)
    print(f"train: {len(result.train)}  val: {len(result.val)}  temporal_gap_s: {result.gap_s:.3f}")
    if args.out_train:
        ds.save_qac(result.train, args.out_train)
    if args.out_val:
        ds.save_qac(result.val, args.out_val)
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    triplets = ds.load_qac(args.qac)
    stats = ds.corpus_stats(triplets)
    if args.json:
        print(json.dumps(stats, indent=2, sort_keys=True))
        return EXIT_OK
    print(f"Total questions: {stats['total_questions']}")
    print(f"Total clue intervals: {stats['total_clues']} (avg {stats['avg_clue_duration_s']:.2f}s)")
    for name, count in stats["clue_buckets"].items():
        print(f"  clue {name}: {count}")
    print("Temporal certificates (clue hull):")
    for name, count in stats["certificate_buckets"].items():
        print(f"  certificate {name}: {count}")
    print(
        f"  avg hull: {stats['avg_certificate_hull_s']:.2f}s  "
        f"avg summed clues: {stats['avg_certificate_sum_s']:.2f}s"
    )
    print("Questions by subset:")
    for name, count in stats["subset_counts"].items():
        print(f"  {name}: {count}")
    print("Questions by category:")
    for name, count in stats["category_counts"].items():
        print(f"  {name}: {count}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memstream",
        description="Lifelong-stream agent runtime and evaluation harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic stream with planted questions")
    p.add_argument("--spec", help="JSON file of generator parameters (defaults used when omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("perceive", help="run the perception pass and persist the memory bank")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--out", required=True, help="bank output directory")
    p.add_argument("--delta-t", type=float, dest="delta_t", help="window length in seconds")
    p.set_defaults(func=cmd_perceive)

    p = sub.add_parser("ask", help="answer one question over a persisted bank")
    p.add_argument("--question", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--max-steps", type=int, dest="max_steps")
    p.add_argument("--trace", help="write the step trace JSONL here")
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("eval", help="score an agent run or an external prediction file")
    p.add_argument("--qac", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--bank", help="bank directory (agent mode)")
    p.add_argument("--predictions", help="prediction JSONL (skips the agent)")
    p.add_argument("--out", required=True)
    p.add_argument("--ref-n", dest="ref_n", help="comma-separated grounding resolutions")
    p.add_argument("--label", help="row label in the report table")
    p.add_argument("--aliases", help="proper-noun comparison table passed into the judge prompt")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("split", help="chronological train/validation split")
    p.add_argument("--qac", required=True)
    p.add_argument("--fraction", type=float, default=0.3)
    p.add_argument("--out-train", dest="out_train")
    p.add_argument("--out-val", dest="out_val")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("stats", help="corpus statistics (clue/certificate buckets, splits)")
    p.add_argument("--qac", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValidationError, MemstreamError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
