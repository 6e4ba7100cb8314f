"""Reference-based evaluation: text metrics, grounding checks, combined score.

All similarity metrics take texts that already went through
``normalize_text`` (the pipeline serializes each triple set canonically
and normalizes it before scoring).  Every metric raises EmptyReference
on an empty reference and returns 0.0 for an empty candidate.

The combined score min-max normalizes each metric column across the
configurations being compared, flips the hallucination column (lower is
better), and averages the five normalized values on a 0-100 scale.
Format conformance is reported alongside but never enters the combined
score.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean
from typing import Iterable, Mapping, Protocol, Sequence

from .errors import EmptyInput, EmptyReference, ProviderFailure
from .ontology import Ontology
from .triples import Triple, TripleSet, canonical_serialize, normalize_text, parse_output, stem, token_subsequence

BLEU_EPSILON = 1e-9
METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5

ACCURACY_METRICS = ("bleu", "rouge_l", "meteor", "embed_sim")


# --- n-gram precision metrics ------------------------------------------------

def _ngrams(tokens: Sequence[str], order: int) -> Counter:
    return Counter(
        tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1)
    )


def bleu_score(candidate: str, reference: str, epsilon: float = BLEU_EPSILON) -> float:
    """Sentence BLEU with modified 1..4-gram precisions and brevity penalty.

    Each precision gets additive-epsilon smoothing,
    ``(matches + eps) / (total + eps)``; an order with no candidate
    n-grams at all scores the bare epsilon floor.  Identical texts score
    exactly 1.0; texts sharing no unigram score at most the floor.
    """
    ref_tokens = reference.split()
    if not ref_tokens:
        raise EmptyReference("BLEU reference is empty")
    cand_tokens = candidate.split()
    if not cand_tokens:
        return 0.0
    log_sum = 0.0
    for order in range(1, 5):
        cand_counts = _ngrams(cand_tokens, order)
        total = sum(cand_counts.values())
        if total == 0:
            precision = epsilon
        else:
            ref_counts = _ngrams(ref_tokens, order)
            clipped = sum(
                min(count, ref_counts[gram]) for gram, count in cand_counts.items()
            )
            precision = (clipped + epsilon) / (total + epsilon)
        log_sum += math.log(precision)
    geometric_mean = math.exp(log_sum / 4.0)
    c, r = len(cand_tokens), len(ref_tokens)
    brevity = 1.0 if c > r else math.exp(1.0 - r / c)
    return brevity * geometric_mean


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for tok_a in a:
        row = [0]
        for j, tok_b in enumerate(b, start=1):
            if tok_a == tok_b:
                row.append(prev[j - 1] + 1)
            else:
                row.append(max(row[j - 1], prev[j]))
        prev = row
    return prev[len(b)]


def rouge_l_score(candidate: str, reference: str) -> float:
    """ROUGE-L F1 from the longest common subsequence of tokens."""
    ref_tokens = reference.split()
    if not ref_tokens:
        raise EmptyReference("ROUGE-L reference is empty")
    cand_tokens = candidate.split()
    if not cand_tokens:
        return 0.0
    lcs = _lcs_length(cand_tokens, ref_tokens)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand_tokens)
    recall = lcs / len(ref_tokens)
    return 2.0 * precision * recall / (precision + recall)


def _meteor_align(cand: Sequence[str], ref: Sequence[str]) -> dict[int, int]:
    """Two-stage unigram alignment: exact matches first, then stem matches.

    Each stage walks the candidate left to right and takes the first
    still-unmatched reference token, so the alignment is deterministic.
    """
    matched_ref = [False] * len(ref)
    alignment: dict[int, int] = {}
    for ci, token in enumerate(cand):
        for ri, ref_token in enumerate(ref):
            if not matched_ref[ri] and ref_token == token:
                alignment[ci] = ri
                matched_ref[ri] = True
                break
    for ci, token in enumerate(cand):
        if ci in alignment:
            continue
        token_stem = stem(token)
        for ri, ref_token in enumerate(ref):
            if not matched_ref[ri] and stem(ref_token) == token_stem:
                alignment[ci] = ri
                matched_ref[ri] = True
                break
    return alignment


def meteor_score(
    candidate: str,
    reference: str,
    alpha: float = METEOR_ALPHA,
    beta: float = METEOR_BETA,
    gamma: float = METEOR_GAMMA,
) -> float:
    """Unigram METEOR with a fragmentation penalty.

    F = P*R / (alpha*P + (1-alpha)*R), penalty = gamma*(chunks/m)^beta,
    score = F * (1 - penalty).  Identical m-token texts therefore score
    1 - gamma * (1/m)^beta, not quite 1.
    """
    ref_tokens = reference.split()
    if not ref_tokens:
        raise EmptyReference("METEOR reference is empty")
    cand_tokens = candidate.split()
    if not cand_tokens:
        return 0.0
    alignment = _meteor_align(cand_tokens, ref_tokens)
    matches = len(alignment)
    if matches == 0:
        return 0.0
    precision = matches / len(cand_tokens)
    recall = matches / len(ref_tokens)
    f_mean = precision * recall / (alpha * precision + (1.0 - alpha) * recall)
    chunks = 0
    previous: tuple[int, int] | None = None
    for ci in sorted(alignment):
        if previous is None or ci != previous[0] + 1 or alignment[ci] != previous[1] + 1:
            chunks += 1
        previous = (ci, alignment[ci])
    penalty = gamma * (chunks / matches) ** beta
    return f_mean * (1.0 - penalty)


# --- embedding similarity ----------------------------------------------------

class EmbeddingProvider(Protocol):
    """Maps a token to one fixed-dimension vector, deterministically."""

    def vector(self, token: str) -> Sequence[float]: ...


class HashingEmbeddingProvider:
    """Deterministic stand-in encoder: unit vectors derived from sha256.

    Useful for tests and offline runs; not a semantic model.  The same
    token always maps to the same vector on every platform.
    """

    def __init__(self, dim: int = 16) -> None:
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim
        self._cache: dict[str, tuple[float, ...]] = {}

    def vector(self, token: str) -> tuple[float, ...]:
        cached = self._cache.get(token)
        if cached is not None:
            return cached
        values: list[float] = []
        counter = 0
        while len(values) < self.dim:
            digest = hashlib.sha256(f"{counter}\x1f{token}".encode("utf-8")).digest()
            for i in range(0, len(digest) - 3, 4):
                (raw,) = struct.unpack_from(">I", digest, i)
                values.append(raw / 2**31 - 1.0)
                if len(values) == self.dim:
                    break
            counter += 1
        norm = math.sqrt(sum(v * v for v in values))
        if norm == 0.0:
            values[0] = 1.0
            norm = 1.0
        vec = tuple(v / norm for v in values)
        self._cache[token] = vec
        return vec


def _cosine(a: Sequence[float], b: Sequence[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    norm_a = math.sqrt(sum(x * x for x in a))
    norm_b = math.sqrt(sum(y * y for y in b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return max(-1.0, min(1.0, dot / (norm_a * norm_b)))


def embedding_similarity_score(
    candidate: str, reference: str, provider: EmbeddingProvider
) -> float:
    """Greedy token-level embedding F1, clamped to [0, 1].

    Precision averages each candidate token's best cosine against the
    reference tokens; recall is the mirror image; F1 combines them.
    """
    ref_tokens = reference.split()
    if not ref_tokens:
        raise EmptyReference("embedding similarity reference is empty")
    cand_tokens = candidate.split()
    if not cand_tokens:
        return 0.0
    try:
        cand_vecs = [provider.vector(t) for t in cand_tokens]
        ref_vecs = [provider.vector(t) for t in ref_tokens]
    except Exception as exc:
        raise ProviderFailure(f"embedding provider failed: {exc}") from exc
    precision = fmean(max(_cosine(cv, rv) for rv in ref_vecs) for cv in cand_vecs)
    recall = fmean(max(_cosine(rv, cv) for cv in cand_vecs) for rv in ref_vecs)
    if precision + recall == 0.0:
        return 0.0
    f1 = 2.0 * precision * recall / (precision + recall)
    return max(0.0, min(1.0, f1))


# --- hallucination -----------------------------------------------------------

@dataclass(frozen=True)
class HallucinationFlags:
    """Per-field grounding verdicts; the triple flag is their disjunction."""

    subject_flag: bool
    relation_flag: bool
    object_flag: bool

    @property
    def triple_flag(self) -> bool:
        return self.subject_flag or self.relation_flag or self.object_flag


def hallucination_assess(triple: Triple, context: str, ontology: Ontology) -> HallucinationFlags:
    """Flag fields that are not grounded in the context or ontology.

    Subject and object must occur in the normalized context as a
    contiguous token run (an empty normalized field counts as
    ungrounded); the relation must be an ontology relation type,
    compared case-insensitively.
    """
    context_tokens = normalize_text(context).split()

    def ungrounded(text: str) -> bool:
        tokens = normalize_text(text).split()
        return not tokens or not token_subsequence(tokens, context_tokens)

    known_relations = {r.casefold() for r in ontology.relation_types}
    return HallucinationFlags(
        subject_flag=ungrounded(triple.subject),
        relation_flag=triple.relation.casefold() not in known_relations,
        object_flag=ungrounded(triple.object),
    )


def format_conformance_rate(raw: str) -> float:
    """Fraction of non-empty output lines accepted by the triple grammar.

    Duplicates count as accepted (they parsed fine); an output with no
    candidate lines conforms vacuously (1.0).
    """
    parsed = parse_output(raw)
    candidates = parsed.candidate_line_count
    if candidates == 0:
        return 1.0
    return (candidates - len(parsed.nonconforming_lines)) / candidates


# --- normalization and the combined score ------------------------------------

def min_max_normalize(values: Sequence[float]) -> list[float]:
    """Scale values to [0, 1]; a constant column maps to all 0.5."""
    if not values:
        raise ValueError("cannot normalize an empty sequence")
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.5] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


@dataclass(frozen=True)
class MetricVector:
    """One configuration's metric outcomes, all in [0, 1]."""

    bleu: float
    rouge_l: float
    meteor: float
    embed_sim: float
    hallucination_rate: float
    format_conformance: float

    def __post_init__(self) -> None:
        for name in ("bleu", "rouge_l", "meteor", "embed_sim", "hallucination_rate", "format_conformance"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {value}")


def combined_scores(matrix: Mapping[object, MetricVector]) -> dict[object, float]:
    """Average the normalized metric columns on a 0-100 scale.

    Accuracy columns enter as-is; the hallucination column enters as
    1 - normalized value so that lower rates help.  With a single
    configuration every column normalizes to 0.5 and the score is 50.
    """
    if not matrix:
        raise EmptyInput("combined_scores needs at least one configuration")
    keys = list(matrix)
    normalized_columns = {
        name: min_max_normalize([getattr(matrix[k], name) for k in keys])
        for name in (*ACCURACY_METRICS, "hallucination_rate")
    }
    scores: dict[object, float] = {}
    for idx, key in enumerate(keys):
        parts = [normalized_columns[name][idx] for name in ACCURACY_METRICS]
        parts.append(1.0 - normalized_columns["hallucination_rate"][idx])
        scores[key] = fmean(parts) * 100.0
    return scores


def normalized_columns(matrix: Mapping[object, MetricVector]) -> dict[object, dict[str, float]]:
    """Per-configuration normalized metric values, for report emission."""
    if not matrix:
        raise EmptyInput("nothing to normalize")
    keys = list(matrix)
    columns = {
        name: min_max_normalize([getattr(matrix[k], name) for k in keys])
        for name in (*ACCURACY_METRICS, "hallucination_rate")
    }
    return {
        key: {name: columns[name][idx] for name in columns} for idx, key in enumerate(keys)
    }


# --- configuration-level evaluation ------------------------------------------

@dataclass(frozen=True)
class EvalSample:
    """Everything needed to score one prompt of one configuration."""

    prompt_id: str
    context: str
    candidate: TripleSet
    reference: TripleSet


@dataclass(frozen=True)
class ComponentRates:
    """Hallucination rates broken down by triple field."""

    subject_rate: float
    relation_rate: float
    object_rate: float


@dataclass(frozen=True)
class FlaggedTriple:
    """Audit record for one assessed triple."""

    prompt_id: str
    rendered: str
    flags: HallucinationFlags


@dataclass(frozen=True)
class ConfigurationEvaluation:
    metrics: MetricVector
    components: ComponentRates
    flagged: tuple[FlaggedTriple, ...]
    scored_prompts: int
    skipped_prompts: int


def evaluate_configuration(
    samples: Sequence[EvalSample],
    ontology: Ontology,
    provider: EmbeddingProvider,
) -> ConfigurationEvaluation:
    """Score one (model, strategy) configuration across its prompts.

    Accuracy metrics compare the normalized canonical serializations of
    candidate and reference per prompt and are macro-averaged; prompts
    whose reference holds no triples are skipped there.  Hallucination
    and conformance aggregate over all triples and candidate lines.
    """
    bleu_vals: list[float] = []
    rouge_vals: list[float] = []
    meteor_vals: list[float] = []
    embed_vals: list[float] = []
    flagged: list[FlaggedTriple] = []
    triple_total = 0
    flag_counts = {"subject": 0, "relation": 0, "object": 0, "triple": 0}
    accepted_lines = 0
    candidate_lines = 0
    skipped = 0
    for sample in samples:
        candidate_lines += sample.candidate.candidate_line_count
        accepted_lines += len(sample.candidate.triples) + len(sample.candidate.duplicate_lines)
        for triple in sample.candidate.triples:
            flags = hallucination_assess(triple, sample.context, ontology)
            flagged.append(FlaggedTriple(sample.prompt_id, triple.render(), flags))
            triple_total += 1
            flag_counts["subject"] += flags.subject_flag
            flag_counts["relation"] += flags.relation_flag
            flag_counts["object"] += flags.object_flag
            flag_counts["triple"] += flags.triple_flag
        if not sample.reference.triples:
            skipped += 1
            continue
        cand_text = normalize_text(canonical_serialize(sample.candidate))
        ref_text = normalize_text(canonical_serialize(sample.reference))
        bleu_vals.append(bleu_score(cand_text, ref_text))
        rouge_vals.append(rouge_l_score(cand_text, ref_text))
        meteor_vals.append(meteor_score(cand_text, ref_text))
        embed_vals.append(embedding_similarity_score(cand_text, ref_text, provider))
    metrics = MetricVector(
        bleu=fmean(bleu_vals) if bleu_vals else 0.0,
        rouge_l=fmean(rouge_vals) if rouge_vals else 0.0,
        meteor=fmean(meteor_vals) if meteor_vals else 0.0,
        embed_sim=fmean(embed_vals) if embed_vals else 0.0,
        hallucination_rate=flag_counts["triple"] / triple_total if triple_total else 0.0,
        format_conformance=accepted_lines / candidate_lines if candidate_lines else 1.0,
    )
    components = ComponentRates(
        subject_rate=flag_counts["subject"] / triple_total if triple_total else 0.0,
        relation_rate=flag_counts["relation"] / triple_total if triple_total else 0.0,
        object_rate=flag_counts["object"] / triple_total if triple_total else 0.0,
    )
    return ConfigurationEvaluation(
        metrics=metrics,
        components=components,
        flagged=tuple(flagged),
        scored_prompts=len(samples) - skipped,
        skipped_prompts=skipped,
    )


# --- report ------------------------------------------------------------------

REPORT_FIELDS = (
    "extractor",
    "strategy",
    "bleu",
    "rouge_l",
    "meteor",
    "embed_sim",
    "hallucination_rate",
    "format_conformance",
    "bleu_norm",
    "rouge_l_norm",
    "meteor_norm",
    "embed_sim_norm",
    "hallucination_rate_norm",
    "combined",
    "subject_rate",
    "relation_rate",
    "object_rate",
)


@dataclass(frozen=True)
class EvaluationReport:
    """Raw, normalized, and combined results per (extractor, strategy)."""

    rows: dict[tuple[str, str], MetricVector]
    normalized: dict[tuple[str, str], dict[str, float]]
    combined: dict[tuple[str, str], float]
    components: dict[tuple[str, str], ComponentRates]

    @classmethod
    def build(
        cls,
        rows: Mapping[tuple[str, str], MetricVector],
        components: Mapping[tuple[str, str], ComponentRates] | None = None,
    ) -> "EvaluationReport":
        rows = dict(rows)
        if not rows:
            raise EmptyInput("an evaluation report needs at least one configuration")
        empty = ComponentRates(0.0, 0.0, 0.0)
        return cls(
            rows=rows,
            normalized=normalized_columns(rows),
            combined=combined_scores(rows),
            components={k: (components or {}).get(k, empty) for k in rows},
        )

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, lineterminator="\n")
            writer.writeheader()
            for key in sorted(self.rows):
                extractor, strategy = key
                metrics = self.rows[key]
                norm = self.normalized[key]
                comp = self.components[key]
                writer.writerow(
                    {
                        "extractor": extractor,
                        "strategy": strategy,
                        "bleu": repr(metrics.bleu),
                        "rouge_l": repr(metrics.rouge_l),
                        "meteor": repr(metrics.meteor),
                        "embed_sim": repr(metrics.embed_sim),
                        "hallucination_rate": repr(metrics.hallucination_rate),
                        "format_conformance": repr(metrics.format_conformance),
                        "bleu_norm": repr(norm["bleu"]),
                        "rouge_l_norm": repr(norm["rouge_l"]),
                        "meteor_norm": repr(norm["meteor"]),
                        "embed_sim_norm": repr(norm["embed_sim"]),
                        "hallucination_rate_norm": repr(norm["hallucination_rate"]),
                        "combined": repr(self.combined[key]),
                        "subject_rate": repr(comp.subject_rate),
                        "relation_rate": repr(comp.relation_rate),
                        "object_rate": repr(comp.object_rate),
                    }
                )

    def to_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for key in sorted(self.rows):
                extractor, strategy = key
                metrics = self.rows[key]
                comp = self.components[key]
                fh.write(
                    json.dumps(
                        {
                            "extractor": extractor,
                            "strategy": strategy,
                            "metrics": {
                                "bleu": metrics.bleu,
                                "rouge_l": metrics.rouge_l,
                                "meteor": metrics.meteor,
                                "embed_sim": metrics.embed_sim,
                                "hallucination_rate": metrics.hallucination_rate,
                                "format_conformance": metrics.format_conformance,
                            },
                            "normalized": self.normalized[key],
                            "combined": self.combined[key],
                            "components": {
                                "subject_rate": comp.subject_rate,
                                "relation_rate": comp.relation_rate,
                                "object_rate": comp.object_rate,
                            },
                        },
                        sort_keys=True,
                        ensure_ascii=False,
                    )
                )
                fh.write("\n")


def write_flagged_triples(flagged: Iterable[FlaggedTriple], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in flagged:
            fh.write(
                json.dumps(
                    {
                        "prompt_id": item.prompt_id,
                        "triple": item.rendered,
                        "subject_flag": item.flags.subject_flag,
                        "relation_flag": item.flags.relation_flag,
                        "object_flag": item.flags.object_flag,
                        "triple_flag": item.flags.triple_flag,
                    },
                    sort_keys=True,
                    ensure_ascii=False,
                )
            )
            fh.write("\n")
