"""Default prompt templates for every model role.

Templates are plain UTF-8 text with named placeholders.  Any of them can be
overridden by dropping a file of the same name (plus ``.txt``) into a template
directory passed to :func:`load_prompt_set`.  Placeholders are substituted
with ``str.replace`` so braces elsewhere in the text are inert.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional, Union

# Sentinel returned by the inspect prompt when a time range holds nothing
# relevant; surfaced as a no-evidence result rather than a failure.
NO_EVIDENCE_SENTINEL = "Error: Cannot find corresponding result in the given time range."

CAPTION_PROMPT = """You are a multimodal video understanding assistant. Generate a detailed caption for the given video clip.

Requirements:
1. Analyze the visual information, including actions, expressions, scene elements, objects, and people.
2. Describe any visible text in the video (subtitles, signs, etc.).
3. Include absolute timestamps [HH:MM:SS] at key actions, changes, or events, at the start of the sentence or segment.
   - Only mark the most significant moments, with a maximum of 10 timestamps.
4. Use natural language, at least one sentence per segment, and avoid repeating information.
5. Do not speculate; describe only what is directly observable.

Provide the final caption with absolute timestamps at the most important points."""

TIMESTAMP_SHIFT_PROMPT = """You are given:
1) A block of text that may contain multiple timestamps in the format [HH:MM:SS]
2) A time offset in the format HH:MM:SS

Task:
- Shift EVERY timestamp in the text by the given offset.
- A timestamp [HH:MM:SS] represents a time duration, not a clock time.
- The offset should be ADDED to each timestamp.
- Properly handle carry-over for seconds and minutes.
- Preserve the original [HH:MM:SS] format (always two digits per field).
- Do NOT modify any part of the text other than the timestamps.
- Do NOT add, remove, or rephrase any text.

If the text contains no timestamps, return the original text unchanged.

Text:
{caption}

Time offset:
{HH:MM:SS}

Output only the modified text. Do not include any other content."""

INSPECT_PROMPT = """Carefully watch the video. Pay close attention to the cause and sequence of events,
the details and movements of objects, and the actions and poses of people.

Based on your observations, answer the question using only information that can be
directly verified from the video.

When relevant, you MAY insert time anchors from the video into your answer
to support your reasoning. Time anchors must be in the format [HH:MM:SS] and should
correspond exactly to the moment shown in the video.

Do NOT invent timestamps. If you are uncertain about the exact time, omit the time anchor.

If no relevant content is found within the given time range, return exactly:
`Error: Cannot find corresponding result in the given time range.`

Question: {question}"""

MEMORY_FILTER_PROMPT = """You are summarizing retrieved video memory.

Search query (for retrieval):
{query}

Filtering / summarization query (IMPORTANT):
{summarize_query}

Below are memory snippets retrieved from the same video segment.
Only keep information that is directly useful for answering the filtering query.

Rules:
- If the content does NOT help answer the filtering query, return an empty string.
- Be concise and factual.
- Do NOT speculate.
- If useful, produce ONE concise sentence.

Memory snippets:
{text}"""

CONTROL_PROMPT = """You are a helpful assistant who answers multi-step questions by sequentially invoking functions.
Follow the explicit THINK -> ACT -> OBSERVE loop.

For each step, you MUST explicitly output the following structured sections:

[REASONING]
Briefly and clearly explain your decision at a high level.
Do NOT reveal hidden chain-of-thought or token-level reasoning.
Summarize only the relevant considerations.

[ACTION]
Call exactly one function that moves you closer to the final answer,
or state that no function call is needed.

[OBSERVATION]
Summarize the result returned by the function call in a concise and factual manner.

You MUST plan before each function call and reflect on previous observations,
but your reasoning must be expressed only as a concise, human-readable summary.

Only pass arguments that come verbatim from the user or from earlier function outputs.
Never invent arguments.

Continue the loop until the user's query is fully resolved.
When finished, output the final answer or call `finish` if required.

If you are uncertain about code structure or video content, use the available tools
rather than guessing.

Timestamps may be formatted as 'HH:MM:SS'.

Carefully read the timestamps and visual descriptions retrieved during your analysis.
Pay close attention to the temporal and causal order of events, object attributes and movements,
and people's actions and poses.

You may use the following tools whenever the available information is insufficient:

- To retrieve high-level and previously observed information about the video
  without specifying timestamps, use `memory_search_tool` if available.
  Avoid calling `memory_search_tool` three times consecutively.

- If relevant time ranges are obtained from memory, or if no memory is available,
  use `video_inspect_tool` with a list of time ranges
  (list[tuple[HH:MM:SS, HH:MM:SS]]) to inspect the video clips in more detail.

- You may call `video_inspect_tool` multiple times with different or more focused
  time ranges as your understanding of the video improves.

- After gathering sufficient visual evidence, output the final answer using `finish`.
  Call `finish` only once.

Based on your observations and tool outputs, provide a concise answer that directly addresses
the question. If the available information is insufficient, thinking deeply and answer the question using general world knowledge.

Total video length: {VIDEO_LENGTH} seconds.

Question: {QUESTION_PLACEHOLDER}"""

JUDGE_PROMPT = """As an AI assistant, your task is to evaluate a candidate answer in comparison to a given correct answer.
The question itself, the correct ground truth answer, and the candidate answer will be provided to you.
The following is a comparison table of some proper nouns; matching any one of them is considered correct.

You must FIRST provide a brief analysis explaining the semantic similarity between the groundtruth
and the candidate answer.

THEN, on a new line, output the final score.

Scoring criteria:

- 0: No similarity.
  The candidate answer is completely irrelevant, contradictory, or does not address the question at all.

- 1: Very low similarity.
  The candidate answer mentions a related topic or keyword, but fails to answer the question
  and does not convey the main meaning of the groundtruth.

- 2: Low similarity.
  The candidate answer addresses the question in a limited way, capturing some minor aspects,
  but misses or misrepresents the core idea or key facts of the groundtruth.

- 3: Moderate similarity.
  The candidate answer captures the main idea of the groundtruth,
  but omits several important details or includes noticeable inaccuracies.

- 4: High similarity.
  The candidate answer correctly captures the main idea and most key details of the groundtruth,
  with only minor omissions, simplifications, or non-critical inaccuracies.

- 5: Complete similarity.
  The candidate answer is semantically equivalent to the groundtruth,
  covering all essential information with no meaningful omissions or errors.

Special Rules:

- Hallucination-sensitive questions:
Score 5 only if all required items are correct;
if any item is incorrect, missing, or hallucinated, score 0 (no partial credit).

- Time-duration questions:
Allow errors within the range defined by the question; answers outside the range should receive score 0.

Output format (strictly follow):
Analysis:
<your analysis>

Final Score:
<an integer from 0 to 5>

Question: {HERE IS THE QUESTION}
Ground truth answer: {HERE IS THE GT ANSWER}
Candidate answer: {HERE IS THE PRED ANSWER}
Your response: """

# Rerank and merge prompts have no published wording; these are this
# project's own, pinned here so runs are comparable.
RERANK_PROMPT = """You are ranking retrieved video memory entries by relevance to a query.

Query:
{query}

Candidates (numbered, each with its time interval):
{candidates}

Select the {k} most relevant candidates. Reply with their numbers only,
most relevant first, comma-separated (for example: 2, 5, 1)."""

MERGE_PROMPT = """You are consolidating overlapping video memory entries into one.

Combine the notes below into a single coherent summary of the covered time
range. Preserve every [HH:MM:SS] time anchor exactly as written. Do not
speculate and do not drop distinct events.

Notes:
{text}"""

FORCED_FINISH_PROMPT = """The step budget is exhausted. You must answer now.
Based on everything observed so far, output your best final answer to the
question as plain text. Do not call any tools."""


@dataclass(frozen=True)
class PromptSet:
    """The active template per role; defaults can be overridden from files."""

    caption: str = CAPTION_PROMPT
    timestamp_shift: str = TIMESTAMP_SHIFT_PROMPT
    inspect: str = INSPECT_PROMPT
    memory_filter: str = MEMORY_FILTER_PROMPT
    control: str = CONTROL_PROMPT
    judge: str = JUDGE_PROMPT
    rerank: str = RERANK_PROMPT
    merge: str = MERGE_PROMPT
    forced_finish: str = FORCED_FINISH_PROMPT


def load_prompt_set(template_dir: Optional[Union[str, Path]] = None) -> PromptSet:
    """Defaults, with any ``<field>.txt`` files in template_dir overriding."""
    prompts = PromptSet()
    if template_dir is None:
        return prompts
    directory = Path(template_dir)
    overrides = {}
    for field in fields(PromptSet):
        candidate = directory / f"{field.name}.txt"
        if candidate.is_file():
            overrides[field.name] = candidate.read_text(encoding="utf-8")
    return replace(prompts, **overrides)


def fill(template: str, **values: str) -> str:
    """Substitute ``{name}`` placeholders literally (no format-spec parsing)."""
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", str(value))
    return out


def build_judge_prompt(question: str, gt_answer: str, candidate: str, aliases: str = "") -> str:
    """Judge prompt with the three slots filled.

    When an alias table is supplied it is inserted after the sentence that
    announces it; with no aliases the template bytes are untouched apart from
    the three substitutions.
    """
    prompt = JUDGE_PROMPT
    if aliases:
        marker = "matching any one of them is considered correct.\n"
        prompt = prompt.replace(marker, marker + aliases.rstrip("\n") + "\n", 1)
    prompt = prompt.replace("{HERE IS THE QUESTION}", question)
    prompt = prompt.replace("{HERE IS THE GT ANSWER}", gt_answer)
    prompt = prompt.replace("{HERE IS THE PRED ANSWER}", candidate)
    return prompt


def build_control_prompt(question: str, video_length_s: float, template: str = CONTROL_PROMPT) -> str:
    total = int(video_length_s) if float(video_length_s).is_integer() else video_length_s
    out = template.replace("{VIDEO_LENGTH}", str(total))
    return out.replace("{QUESTION_PLACEHOLDER}", question)
