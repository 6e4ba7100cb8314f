"""Deterministic scripted models for offline runs and fixtures.

The scripted extractor and judge stand in for real LLMs.  They parse
the same prompts the real models would receive and produce plausible
outputs, but every response is a pure function of (model id, prompt
text), so recorded cassettes and end-to-end replays are reproducible
down to the byte.

Extractor quality is steered by the model id: an id containing
"strong", "medium", or "weak" picks that tier; any other id is hashed
onto a tier.  Weaker tiers hallucinate entities, drift off the relation
list, and emit malformed or duplicate lines at fixed rates.

The position-biased judge always prefers the first presented output.
It exists to demonstrate (and test) that shuffling candidate slots
cancels positional bias once verdicts are mapped back to model space.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Callable

from .gateway import CompletionRequest
from .prompts import stable_rng
from .triples import normalize_text, parse_output, token_subsequence

_CONTEXT_MARKER = "\n\nContext:\n"
_OUTPUTS_MARKER = "\n\nModel Outputs:\n"
_RELATIONS_MARKER = "\nRelation Types:\n"
_SLOT_RE = re.compile(r"^Model (\d+) Output:$", re.MULTILINE)

# A judge prompt always ends with one of the two closing questions.
_JUDGE_TAILS = ("Your ranking:", "Your evaluation and ranking:")


# --- prompt dissection -------------------------------------------------------

def _relation_names(prompt: str) -> list[str]:
    at = prompt.find(_RELATIONS_MARKER)
    if at < 0:
        return []
    line = prompt[at + len(_RELATIONS_MARKER):].split("\n", 1)[0]
    return [name.strip() for name in line.split(",") if name.strip()]


def _extraction_context(prompt: str) -> str:
    # Context is the final section; rfind survives marker-like text in
    # earlier sections, and a suffix is still safe to sample spans from.
    at = prompt.rfind(_CONTEXT_MARKER)
    return prompt[at + len(_CONTEXT_MARKER):] if at >= 0 else ""


def _judge_context(prompt: str) -> str:
    outputs_at = prompt.rfind(_OUTPUTS_MARKER)
    if outputs_at < 0:
        return ""
    ctx_at = prompt.rfind(_CONTEXT_MARKER, 0, outputs_at)
    if ctx_at < 0:
        return ""
    return prompt[ctx_at + len(_CONTEXT_MARKER):outputs_at]


def _slot_outputs(prompt: str) -> list[str]:
    """The per-slot candidate texts, in slot order, "(no triples)" as ""."""
    outputs_at = prompt.rfind(_OUTPUTS_MARKER)
    if outputs_at < 0:
        return []
    section = prompt[outputs_at + len(_OUTPUTS_MARKER):]
    for tail in _JUDGE_TAILS:
        cut = section.rfind("\n\n" + tail)
        if cut >= 0:
            section = section[:cut]
            break
    matches = list(_SLOT_RE.finditer(section))
    outputs = []
    for i, match in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(section)
        text = section[match.end():end].strip("\n")
        outputs.append("" if text.strip() == "(no triples)" else text)
    return outputs


def looks_like_judge_prompt(prompt: str) -> bool:
    return _OUTPUTS_MARKER in prompt and prompt.rstrip().endswith(_JUDGE_TAILS)


# --- the extractor -----------------------------------------------------------

@dataclass(frozen=True)
class ExtractorProfile:
    """Failure rates for one quality tier; rates are per emitted line."""

    tier: str
    triple_target: int
    hallucination_rate: float
    offlist_rate: float
    nonconform_rate: float
    duplicate_rate: float
    commentary_rate: float


_TIERS = {
    "strong": ExtractorProfile("strong", 6, 0.0, 0.0, 0.0, 0.0, 0.0),
    "medium": ExtractorProfile("medium", 4, 0.2, 0.05, 0.1, 0.1, 0.0),
    "weak": ExtractorProfile("weak", 3, 0.45, 0.2, 0.3, 0.25, 0.5),
}


def profile_for(model_id: str) -> ExtractorProfile:
    lowered = model_id.lower()
    for tier in _TIERS:
        if tier in lowered:
            return _TIERS[tier]
    digest = hashlib.sha256(model_id.encode("utf-8")).digest()
    return _TIERS[tuple(_TIERS)[digest[0] % len(_TIERS)]]


def _span_words(context: str) -> list[str]:
    """Context words usable in triple fields.

    Edge punctuation is stripped (normalization discards it anyway, so
    grounding is unaffected) and words that would normalize to nothing,
    or would unbalance the triple grammar, are dropped.
    """
    words = []
    for word in context.split():
        word = word.strip(".,;:!?()[]{}\"'")
        if word and any(ch.isalnum() for ch in word) and "(" not in word and ")" not in word:
            words.append(word)
    return words


def _pick_span(rng, words: list[str]) -> str:
    start = rng.randrange(len(words))
    length = rng.randint(1, min(3, len(words) - start))
    return " ".join(words[start:start + length])


def _ungrounded_phrase(rng, context_tokens: list[str]) -> str:
    phrase = f"sector {rng.randrange(10, 100)} overlay"
    while token_subsequence(normalize_text(phrase).split(), context_tokens):
        phrase += " x"
    return phrase


def scripted_extract(model_id: str, prompt: str) -> str:
    """Deterministic extraction output for a rendered prompt."""
    profile = profile_for(model_id)
    relations = sorted(_relation_names(prompt)) or ["relatedTo"]
    context = _extraction_context(prompt)
    words = _span_words(context)
    if not words:
        return ""
    context_tokens = normalize_text(context).split()
    rng = stable_rng("scripted-extract", model_id, prompt)

    lines: list[str] = []
    conforming: list[str] = []
    if rng.random() < profile.commentary_rate:
        lines.append("Here are the triples I found in the text:")
    for _ in range(max(1, min(profile.triple_target, len(words)))):
        relation = rng.choice(relations)
        if rng.random() < profile.offlist_rate:
            relation = "relatedTo"
        subject = _pick_span(rng, words)
        obj = _pick_span(rng, words)
        if rng.random() < profile.hallucination_rate:
            obj = _ungrounded_phrase(rng, context_tokens)
        if rng.random() < profile.nonconform_rate:
            lines.append(rng.choice([
                f"{relation} - {subject} - {obj}",
                f"{relation}({subject}, {obj}",
                f"{relation}({subject}, )",
            ]))
        else:
            line = f"{relation}({subject}, {obj})"
            lines.append(line)
            conforming.append(line)
    if conforming and rng.random() < profile.duplicate_rate:
        lines.append(rng.choice(conforming))
    return "\n".join(lines)


# --- the judges --------------------------------------------------------------

def _score_slot(text: str, context_tokens: list[str], relations: set[str]) -> tuple[int, int, int]:
    """(correctness, relevance, coverage) on the judge's 1..10 scale."""
    parsed = parse_output(text)
    candidates = parsed.candidate_line_count
    if candidates == 0:
        return 1, 1, 0
    conforming = len(parsed.triples) + len(parsed.duplicate_lines)
    grounded = 0
    for triple in parsed.triples:
        subject_ok = token_subsequence(normalize_text(triple.subject).split(), context_tokens)
        object_ok = token_subsequence(normalize_text(triple.object).split(), context_tokens)
        if subject_ok and object_ok and triple.relation.casefold() in relations:
            grounded += 1
    correctness = max(1, round(10 * conforming / candidates))
    relevance = max(1, round(10 * grounded / len(parsed.triples))) if parsed.triples else 1
    coverage = min(10, grounded)
    return correctness, relevance, coverage


def _format_ranking(order: list[int], capitalized: bool) -> str:
    label = "Model" if capitalized else "model"
    entries = "; ".join(f"{rank}: {label} {slot}" for rank, slot in enumerate(order, start=1))
    return f"[{entries}]"


def scripted_judge(model_id: str, prompt: str) -> str:
    """Content-based verdict: score each slot, rank by total score.

    Ties break by correctness, then relevance, then coverage, then slot
    order.  Fair-style prompts get the full evaluation block; basic
    prompts get just the bracketed ranking.
    """
    del model_id  # the scripted judge has a single persona
    relations = {name.casefold() for name in _relation_names(prompt)}
    context_tokens = normalize_text(_judge_context(prompt)).split()
    slots = _slot_outputs(prompt)
    scored = []
    for slot, text in enumerate(slots, start=1):
        correctness, relevance, coverage = _score_slot(text, context_tokens, relations)
        total = correctness + relevance + coverage
        scored.append((slot, correctness, relevance, coverage, total))
    order = [
        slot
        for slot, *_ in sorted(
            scored, key=lambda s: (-s[4], -s[1], -s[2], -s[3], s[0])
        )
    ]
    if prompt.rstrip().endswith("Your evaluation and ranking:"):
        evaluation = "\n".join(
            f"Model {slot}: Correctness = {c}, Relevance = {r}, Coverage = {cov}, Total = {total}"
            for slot, c, r, cov, total in scored
        )
        return f"Evaluation:\n{evaluation}\nRanking:\n{_format_ranking(order, capitalized=True)}"
    return f"Ranking:\n{_format_ranking(order, capitalized=False)}"


def position_biased_judge(model_id: str, prompt: str) -> str:
    """A judge that ranks slots in presentation order, content unseen."""
    del model_id
    slots = list(range(1, len(_slot_outputs(prompt)) + 1))
    return f"Ranking:\n{_format_ranking(slots, capitalized=False)}"


# --- the provider ------------------------------------------------------------

_JUDGES: dict[str, Callable[[str, str], str]] = {
    "scripted": scripted_judge,
    "biased": position_biased_judge,
}


@dataclass(frozen=True)
class ScriptedProvider:
    """Gateway provider backed by the scripted models.

    Judge prompts are recognized by shape and routed to the configured
    judge style; everything else goes to the extractor.
    """

    judge_style: str = "scripted"

    def __post_init__(self) -> None:
        if self.judge_style not in _JUDGES:
            raise ValueError(f"judge_style must be one of {sorted(_JUDGES)}")

    def __call__(self, request: CompletionRequest) -> str:
        if looks_like_judge_prompt(request.prompt_text):
            return _JUDGES[self.judge_style](request.model_id, request.prompt_text)
        return scripted_extract(request.model_id, request.prompt_text)
