"""Reference-free ranking: judge prompts, verdicts, and rank statistics.

Three judging methods share one pipeline:

* ``basic``: rank the candidate outputs, nothing else.
* ``fair``: score Correctness, Relevance, and Coverage per candidate
  (ties break in that order), then rank.
* ``randomized_fair``: the fair prompt with the candidate slots permuted
  by a seed-derived shuffle; parsed rankings are mapped back to the
  original model space, which cancels positional bias in aggregate.

A model's expectation score is the average rank the judge assigned it,
E(m) = sum(i * P_m(i)) / sum(P_m(i)) over the rank histogram; lower is
better.  Judge rankings are compared against a reference ranking with
Spearman's rho and Kendall's tau.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    AllVerdictsMalformed,
    EmptyHistogram,
    MalformedVerdict,
    MismatchedModels,
    MissingVerdict,
)
from .gateway import CompletionRequest, LLMGateway
from .ontology import Ontology
from .prompts import stable_rng
from .triples import TripleSet, canonical_serialize

logger = logging.getLogger(__name__)


class JudgeMethod(Enum):
    BASIC = "basic"
    FAIR = "fair"
    RANDOMIZED_FAIR = "randomized_fair"

    @classmethod
    def parse(cls, text: str) -> "JudgeMethod":
        try:
            return cls(text.strip().lower().replace("-", "_"))
        except ValueError:
            raise ValueError(f"unknown judge method {text!r}") from None


@dataclass(frozen=True)
class CandidateSet:
    """The competing answers for one prompt, in a fixed model order."""

    prompt_id: str
    answers: tuple[tuple[str, TripleSet], ...]

    def __post_init__(self) -> None:
        ids = [model_id for model_id, _ in self.answers]
        if len(ids) < 2:
            raise ValueError("a candidate set needs at least two models")
        if len(set(ids)) != len(ids):
            raise ValueError("candidate model ids must be distinct")

    @property
    def model_ids(self) -> tuple[str, ...]:
        return tuple(model_id for model_id, _ in self.answers)

    @property
    def mu(self) -> int:
        return len(self.answers)


@dataclass(frozen=True)
class CriterionScores:
    correctness: float
    relevance: float
    coverage: float
    total: float


@dataclass(frozen=True)
class JudgeVerdict:
    """One parsed judge response, ranking models in original space."""

    prompt_id: str
    method: JudgeMethod
    judge_model: str
    ranking: dict[str, int]
    scores: dict[str, CriterionScores] | None = None
    shuffle_map: dict[int, str] | None = None
    raw_excerpt: str = ""

    def __post_init__(self) -> None:
        ranks = sorted(self.ranking.values())
        if ranks != list(range(1, len(self.ranking) + 1)):
            raise ValueError(f"ranking must be a permutation of 1..mu, got {self.ranking}")
        if self.method is JudgeMethod.RANDOMIZED_FAIR and self.shuffle_map is None:
            raise ValueError("randomized_fair verdicts must carry their shuffle map")


# --- prompt templates --------------------------------------------------------

_BASIC_TEMPLATE = """Instruction:
You are a judge who ranks {mu} models from 1 to {mu} on a triple extraction task. You must assign 1 to the model with the best answer and {mu} to the model with the worst answer. Your ranking should be provided directly in this format: [{ranking_hint}].

Ranking Criteria:

Correctness:
The triples must conform to the format relation(subject, object) and must accurately reflect relationships stated in the context. Models with significant formatting errors should be penalized.

Coverage:
The number of correct triples extracted. More correct triples are better, but avoid penalizing slight redundancies unless they detract from the overall relevance.

Relevance:
The triples must be relevant to the specified entity and relation types and should align well with the specific context provided.

Edge Cases:
If a model extracts many triples but includes incorrect or redundant ones, balance accuracy and redundancy in your ranking. Correctness should be prioritized, followed by Relevance, then Coverage.

Entity Types:
{entity_types}

Relation Types:
{relation_types}

Context:
{context}

Model Outputs:
{model_outputs}

Your ranking:"""

_FAIR_TEMPLATE = """Instruction:
You are a judge tasked with evaluating and ranking {mu} models based on their performance in a triple extraction task. Your role is to ensure fairness, impartiality, and accuracy by independently evaluating each model's output without any positional bias. Do not assume that any model is better or worse simply because of its position in the list - all models must be treated equally.

Evaluation Guidelines:

1. Independence of Evaluation:
Evaluate each model independently without comparing it to others until all models are scored. Avoid assumptions based on position or order in the list.

2. Evaluation Criteria:

a. Correctness of Triples (Highest Priority):
- Triples must strictly conform to the format relation(subject, object).
- Relationships must match the given relation types provided below.
- Triples containing fabricated or hallucinated relationships must result in a significant penalty.

b. Relevance:
- Triples must accurately reflect relationships mentioned in the context.
- Irrelevant triples or hallucinations must receive a lower score.

c. Coverage:
- The number of correct triples extracted. Higher coverage is better only if triples meet correctness and relevance criteria.

3. Ranking Process:
- Step 1: Independently evaluate each model's output and assign scores (from 1 to 10) for each criterion: Correctness, Relevance, and Coverage. Summarize the total score for each model.
- Step 2: Rank all {mu} models from 1 (best) to {mu} (worst) based solely on their total scores.
- Break ties by prioritizing Correctness first, then Relevance, and finally Coverage.

Important Note:
Treat all models equally regardless of position. Your goal is to be an impartial judge. Avoid positional bias and ensure the evaluation reflects only the quality of the model outputs.

Output Format:
Provide your output strictly in this format:
Evaluation:
{evaluation_hint}
Ranking:
[{ranking_hint}]

Entity Types:
{entity_types}

Relation Types:
{relation_types}

Context:
{context}

Model Outputs:
{model_outputs}

Your evaluation and ranking:"""


def _ranking_hint(mu: int, capitalized: bool) -> str:
    label = "Model X" if capitalized else "model x"
    return "; ".join(f"{i}: {label}" for i in range(1, mu + 1))


def _evaluation_hint(mu: int) -> str:
    return "\n".join(
        f"Model {i}: Correctness = X, Relevance = X, Coverage = X, Total = Y"
        for i in range(1, mu + 1)
    )


def _model_outputs_block(slot_answers: Sequence[TripleSet]) -> str:
    blocks = []
    for slot, answer in enumerate(slot_answers, start=1):
        serialized = canonical_serialize(answer) or "(no triples)"
        blocks.append(f"Model {slot} Output:\n{serialized}")
    return "\n\n".join(blocks)


def shuffle_permutation(seed: int, prompt_id: str, mu: int) -> list[int]:
    """Seed-derived slot assignment: permutation[slot] = original index."""
    permutation = list(range(mu))
    stable_rng(seed, prompt_id, "judge-shuffle").shuffle(permutation)
    return permutation


def build_judge_prompt(
    method: JudgeMethod,
    ontology: Ontology,
    context: str,
    candidates: CandidateSet,
    seed: int = 0,
    permutation: Sequence[int] | None = None,
) -> tuple[str, dict[int, str] | None]:
    """Render a judge prompt; returns (text, slot -> model_id map or None).

    Basic and fair present candidates in their original order and return
    no shuffle map.  Randomized fair permutes the slots (seed-derived
    unless an explicit permutation is given); with the identity
    permutation it renders byte-identically to fair.
    """
    mu = candidates.mu
    if method is JudgeMethod.RANDOMIZED_FAIR:
        if permutation is None:
            permutation = shuffle_permutation(seed, candidates.prompt_id, mu)
        if sorted(permutation) != list(range(mu)):
            raise ValueError(f"permutation must rearrange 0..{mu - 1}, got {permutation}")
        order = list(permutation)
        shuffle_map = {slot + 1: candidates.answers[order[slot]][0] for slot in range(mu)}
    else:
        order = list(range(mu))
        shuffle_map = None
    slot_answers = [candidates.answers[i][1] for i in order]
    template = _BASIC_TEMPLATE if method is JudgeMethod.BASIC else _FAIR_TEMPLATE
    text = template.format(
        mu=mu,
        ranking_hint=_ranking_hint(mu, capitalized=method is not JudgeMethod.BASIC),
        evaluation_hint=_evaluation_hint(mu),
        entity_types=", ".join(sorted(ontology.entity_types)),
        relation_types=", ".join(sorted(ontology.relation_types)),
        context=context,
        model_outputs=_model_outputs_block(slot_answers),
    )
    return text, shuffle_map


# --- verdict parsing ---------------------------------------------------------

_BRACKET_RE = re.compile(r"\[([^\[\]]+)\]")
_RANK_ENTRY_RE = re.compile(r"^\s*(\d+)\s*[:.\-]\s*model\s*(\d+)\s*$", re.IGNORECASE)
_SCORE_LINE_RE = re.compile(
    r"model\s*(\d+)\s*:\s*correctness\s*=\s*(\d+(?:\.\d+)?)\s*,\s*"
    r"relevance\s*=\s*(\d+(?:\.\d+)?)\s*,\s*coverage\s*=\s*(\d+(?:\.\d+)?)\s*,\s*"
    r"total\s*=\s*(\d+(?:\.\d+)?)",
    re.IGNORECASE,
)


def _parse_bracket(content: str, mu: int) -> dict[int, int] | None:
    """Parse "1: Model 5; ..." content into rank -> slot, or None."""
    entries = [e for e in content.split(";") if e.strip()]
    if len(entries) != mu:
        return None
    ranks: dict[int, int] = {}
    for entry in entries:
        match = _RANK_ENTRY_RE.match(entry.replace("\n", " "))
        if not match:
            return None
        rank, slot = int(match.group(1)), int(match.group(2))
        if not (1 <= rank <= mu and 1 <= slot <= mu):
            return None
        if rank in ranks or slot in ranks.values():
            return None
        ranks[rank] = slot
    return ranks


def parse_verdict(
    raw: str,
    shuffle_map: Mapping[int, str] | None,
    mu: int,
    model_ids: Sequence[str],
    prompt_id: str = "",
    method: JudgeMethod = JudgeMethod.BASIC,
    judge_model: str = "",
) -> JudgeVerdict:
    """Extract the final ranking bracket and map slots back to models.

    Tolerant of case and whitespace; prefers the last bracket after a
    "Ranking:" label but accepts a bare bracket (basic judges often
    reply with the bracket alone).  Raises MalformedVerdict when no
    bracket parses, ranks are duplicated, or the count is not mu.
    """
    if len(model_ids) != mu:
        raise ValueError("model_ids must have length mu")
    parsed: list[tuple[int, dict[int, int]]] = []
    for match in _BRACKET_RE.finditer(raw):
        ranks = _parse_bracket(match.group(1), mu)
        if ranks is not None:
            parsed.append((match.start(), ranks))
    if not parsed:
        raise MalformedVerdict(
            f"no ranking bracket with {mu} distinct entries in verdict for {prompt_id or 'prompt'}"
        )
    label_positions = [m.start() for m in re.finditer(r"ranking\s*:", raw, re.IGNORECASE)]
    after_label = [item for item in parsed if any(pos < item[0] for pos in label_positions)]
    ranks = (after_label[-1] if after_label else parsed[-1])[1]

    def slot_to_model(slot: int) -> str:
        if shuffle_map is not None:
            return shuffle_map[slot]
        return model_ids[slot - 1]

    ranking = {slot_to_model(slot): rank for rank, slot in ranks.items()}
    scores: dict[str, CriterionScores] | None = None
    score_matches = _SCORE_LINE_RE.findall(raw)
    if score_matches:
        scores = {}
        for slot_text, correctness, relevance, coverage, total in score_matches:
            slot = int(slot_text)
            if 1 <= slot <= mu:
                scores[slot_to_model(slot)] = CriterionScores(
                    correctness=float(correctness),
                    relevance=float(relevance),
                    coverage=float(coverage),
                    total=float(total),
                )
        if not scores:
            scores = None
    return JudgeVerdict(
        prompt_id=prompt_id,
        method=method,
        judge_model=judge_model,
        ranking=ranking,
        scores=scores,
        shuffle_map=dict(shuffle_map) if shuffle_map is not None else None,
        raw_excerpt=raw[-400:],
    )


# --- rank statistics ---------------------------------------------------------

class RankHistogram:
    """Counts of how often each model landed at each rank 1..mu."""

    def __init__(self, model_ids: Sequence[str], mu: int) -> None:
        if len(set(model_ids)) != len(model_ids):
            raise ValueError("model ids must be distinct")
        self.mu = mu
        self.counts: dict[str, list[int]] = {m: [0] * mu for m in model_ids}

    def add(self, ranking: Mapping[str, int]) -> None:
        if set(ranking) != set(self.counts):
            raise MismatchedModels(
                f"ranking covers {sorted(ranking)}, histogram covers {sorted(self.counts)}"
            )
        for model_id, rank in ranking.items():
            if not (1 <= rank <= self.mu):
                raise ValueError(f"rank {rank} outside 1..{self.mu}")
            self.counts[model_id][rank - 1] += 1

    def total(self, model_id: str) -> int:
        return sum(self.counts[model_id])

    @property
    def verdict_count(self) -> int:
        totals = {self.total(m) for m in self.counts}
        if len(totals) > 1:
            raise ValueError("histogram is unbalanced across models")
        return totals.pop() if totals else 0


def expectation_score(histogram: RankHistogram) -> dict[str, float]:
    """E(m) = sum(rank * count) / sum(count); lower is better."""
    if not histogram.counts:
        raise EmptyHistogram("histogram has no models")
    scores: dict[str, float] = {}
    for model_id, counts in histogram.counts.items():
        mass = sum(counts)
        if mass == 0:
            raise EmptyHistogram(f"model {model_id!r} has no rank observations")
        scores[model_id] = sum((i + 1) * c for i, c in enumerate(counts)) / mass
    return scores


def expectation_ranking(histogram: RankHistogram) -> dict[str, int]:
    """Rank models by expectation score; ties break on model id."""
    scores = expectation_score(histogram)
    ordered = sorted(scores, key=lambda m: (scores[m], m))
    return {model_id: rank for rank, model_id in enumerate(ordered, start=1)}


@dataclass(frozen=True)
class CorrelationResult:
    spearman_rho: float
    kendall_tau: float


def rank_correlations(a: Mapping[str, int], b: Mapping[str, int]) -> "CorrelationResult":
    """Spearman's rho and Kendall's tau between two tie-free rankings.

    rho = 1 - 6*sum(d^2) / (n(n^2-1)); tau = (C - D) / (n(n-1)/2).
    Both stay exact because the arithmetic is integral until one final
    division.
    """
    if set(a) != set(b):
        raise MismatchedModels(f"rankings cover different models: {sorted(a)} vs {sorted(b)}")
    models = sorted(a)
    n = len(models)
    if n < 2:
        raise ValueError("need at least two models to correlate rankings")
    for ranking in (a, b):
        if sorted(ranking.values()) != list(range(1, n + 1)):
            raise ValueError("rankings must be tie-free permutations of 1..n")
    d_squared = sum((a[m] - b[m]) ** 2 for m in models)
    rho = 1.0 - (6 * d_squared) / (n * (n * n - 1))
    concordant = 0
    discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            product = (a[models[i]] - a[models[j]]) * (b[models[i]] - b[models[j]])
            if product > 0:
                concordant += 1
            elif product < 0:
                discordant += 1
    tau = (concordant - discordant) / (n * (n - 1) // 2)
    return CorrelationResult(spearman_rho=rho, kendall_tau=tau)


# --- the judging round -------------------------------------------------------

@dataclass(frozen=True)
class JudgeRoundResult:
    verdicts: dict[str, JudgeVerdict]
    histogram: RankHistogram
    expectation: dict[str, float]
    ranking: dict[str, int]
    warnings: tuple[str, ...]


def judge_round(
    candidate_sets: Sequence[CandidateSet],
    contexts: Mapping[str, str],
    ontology: Ontology,
    method: JudgeMethod,
    judge_model: str,
    gateway: LLMGateway,
    seed: int = 0,
    max_tokens: int = 2048,
) -> JudgeRoundResult:
    """Judge every prompt once and aggregate the rank histogram.

    A verdict that fails to parse is retried once; a second failure
    skips that prompt with a warning.  If every prompt fails,
    AllVerdictsMalformed is raised; judging zero prompts reaches the
    empty-histogram error instead.
    """
    if candidate_sets:
        model_set = set(candidate_sets[0].model_ids)
        for cs in candidate_sets:
            if set(cs.model_ids) != model_set:
                raise MismatchedModels(
                    f"candidate set {cs.prompt_id} covers {sorted(cs.model_ids)}, "
                    f"expected {sorted(model_set)}"
                )
        model_ids = candidate_sets[0].model_ids
        mu = candidate_sets[0].mu
    else:
        model_ids = ()
        mu = 0
    verdicts: dict[str, JudgeVerdict] = {}
    warnings: list[str] = []
    for cs in candidate_sets:
        context = contexts[cs.prompt_id]
        verdict: JudgeVerdict | None = None
        failure = ""
        for _attempt in range(2):
            text, shuffle_map = build_judge_prompt(method, ontology, context, cs, seed)
            raw = gateway.complete(
                CompletionRequest(
                    model_id=judge_model, prompt_text=text, max_tokens=max_tokens
                )
            )
            try:
                verdict = parse_verdict(
                    raw,
                    shuffle_map,
                    cs.mu,
                    cs.model_ids,
                    prompt_id=cs.prompt_id,
                    method=method,
                    judge_model=judge_model,
                )
                break
            except MalformedVerdict as exc:
                failure = str(exc)
        if verdict is None:
            message = f"skipping {cs.prompt_id}: verdict malformed after retry ({failure})"
            logger.warning(message)
            warnings.append(message)
            continue
        verdicts[cs.prompt_id] = verdict
    if candidate_sets and not verdicts:
        raise AllVerdictsMalformed(
            f"all {len(candidate_sets)} verdicts malformed for judge {judge_model}"
        )
    histogram = RankHistogram(model_ids, mu)
    for verdict in verdicts.values():
        histogram.add(verdict.ranking)
    expectation = expectation_score(histogram)
    ranking = expectation_ranking(histogram)
    return JudgeRoundResult(
        verdicts=verdicts,
        histogram=histogram,
        expectation=expectation,
        ranking=ranking,
        warnings=tuple(warnings),
    )


def aggregate_best_answers(
    verdicts: Mapping[str, JudgeVerdict],
    candidate_sets: Sequence[CandidateSet],
) -> tuple[dict[str, TripleSet], TripleSet]:
    """Collect each prompt's rank-1 answer and union them.

    The union deduplicates by normalized triple identity across prompts,
    keeping the first occurrence in prompt order.
    """
    winners: dict[str, TripleSet] = {}
    for cs in sorted(candidate_sets, key=lambda c: c.prompt_id):
        verdict = verdicts.get(cs.prompt_id)
        if verdict is None:
            raise MissingVerdict(f"no verdict for prompt {cs.prompt_id}")
        best_model = min(verdict.ranking, key=lambda m: verdict.ranking[m])
        winners[cs.prompt_id] = dict(cs.answers)[best_model]
    union = []
    seen = set()
    for prompt_id in sorted(winners):
        for triple in winners[prompt_id].triples:
            if triple.identity() not in seen:
                seen.add(triple.identity())
                union.append(triple)
    return winners, TripleSet(prompt_id="aggregate", triples=tuple(union))


# --- ranking helpers and persistence -----------------------------------------

def ranking_from_scores(scores: Mapping[str, float], higher_is_better: bool = True) -> dict[str, int]:
    """Turn scores into ranks 1..n; ties break lexicographically."""
    ordered = sorted(
        scores, key=lambda m: ((-scores[m] if higher_is_better else scores[m]), m)
    )
    return {model_id: rank for rank, model_id in enumerate(ordered, start=1)}


def write_verdicts(verdicts: Iterable[JudgeVerdict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for verdict in sorted(verdicts, key=lambda v: v.prompt_id):
            fh.write(
                json.dumps(
                    {
                        "prompt_id": verdict.prompt_id,
                        "method": verdict.method.value,
                        "judge_model": verdict.judge_model,
                        "ranking": dict(sorted(verdict.ranking.items())),
                        "scores": {
                            m: {
                                "correctness": s.correctness,
                                "relevance": s.relevance,
                                "coverage": s.coverage,
                                "total": s.total,
                            }
                            for m, s in sorted(verdict.scores.items())
                        }
                        if verdict.scores
                        else None,
                        "shuffle_map": {str(k): v for k, v in sorted(verdict.shuffle_map.items())}
                        if verdict.shuffle_map
                        else None,
                    },
                    sort_keys=True,
                    ensure_ascii=False,
                )
            )
            fh.write("\n")


def write_correlation_table(
    rows: Sequence[tuple[str, str, CorrelationResult]], path: str | Path
) -> None:
    """Emit judge_model x method correlation rows as CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["judge_model", "method", "spearman_rho", "kendall_tau"])
        for judge_model, method, result in rows:
            writer.writerow(
                [judge_model, method, repr(result.spearman_rho), repr(result.kendall_tau)]
            )
