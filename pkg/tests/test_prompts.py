from __future__ import annotations

from memstream.backends.config import ALL_ROLES, default_role_models, load_run_config
from memstream.prompts import (
    CAPTION_PROMPT,
    CONTROL_PROMPT,
    INSPECT_PROMPT,
    MEMORY_FILTER_PROMPT,
    NO_EVIDENCE_SENTINEL,
    TIMESTAMP_SHIFT_PROMPT,
    PromptSet,
    build_control_prompt,
    fill,
    load_prompt_set,
)


def test_templates_carry_their_placeholders():
    assert "{question}" in INSPECT_PROMPT
    assert "{caption}" in TIMESTAMP_SHIFT_PROMPT and "{HH:MM:SS}" in TIMESTAMP_SHIFT_PROMPT
    assert "{query}" in MEMORY_FILTER_PROMPT and "{summarize_query}" in MEMORY_FILTER_PROMPT
    assert "{VIDEO_LENGTH}" in CONTROL_PROMPT and "{QUESTION_PLACEHOLDER}" in CONTROL_PROMPT
    assert "maximum of 10 timestamps" in CAPTION_PROMPT
    assert NO_EVIDENCE_SENTINEL in INSPECT_PROMPT


def test_control_prompt_names_the_three_tools_and_guard_rule():
    assert "memory_search_tool" in CONTROL_PROMPT
    assert "video_inspect_tool" in CONTROL_PROMPT
    assert "`finish`" in CONTROL_PROMPT
    assert "three times consecutively" in CONTROL_PROMPT


def test_build_control_prompt_substitutes_both_slots():
    prompt = build_control_prompt("where is the kite?", 5400.0)
    assert "Total video length: 5400 seconds." in prompt
    assert prompt.rstrip().endswith("Question: where is the kite?")
    assert "{VIDEO_LENGTH}" not in prompt and "{QUESTION_PLACEHOLDER}" not in prompt


def test_fill_is_literal_replacement():
    assert fill("a {x} b {x} {y}", x="1", y="{x}") == "a 1 b 1 {x}"


def test_prompt_overrides_from_directory(tmp_path):
    (tmp_path / "caption.txt").write_text("custom caption instructions")
    prompts = load_prompt_set(tmp_path)
    assert prompts.caption == "custom caption instructions"
    assert prompts.control == PromptSet().control  # untouched roles keep defaults


def test_default_role_models_cover_all_roles():
    defaults = default_role_models()
    assert set(defaults) == set(ALL_ROLES)
    assert defaults["memory_llm"]["temperature"] == 0.1
    assert defaults["reranker_llm"]["temperature"] == 0.0
    assert defaults["embedder"]["model_id"] == "text-embedding-3-large"


def test_scripted_shorthand_expands_to_all_roles(tmp_path):
    import json

    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"mode": "scripted", "events": "ev.json", "policy": "blind"}))
    cfg = load_run_config(cfg_path)
    assert set(cfg.roles) == set(ALL_ROLES)
    assert all(r["kind"] == "scripted" for r in cfg.roles.values())
    assert cfg.roles["controller"]["policy"] == "blind"


def test_run_config_defaults():
    cfg = load_run_config(None)
    assert cfg.delta_t_s == 300.0
    assert cfg.max_steps == 5
    assert cfg.top_k == 5
    assert cfg.ref_n == (60, 300, 600)
