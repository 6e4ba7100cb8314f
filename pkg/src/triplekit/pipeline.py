"""Run orchestration: config files, run directories, and stage wiring.

A run config is a flat key=value file.  Every stage writes into one run
directory with a fixed layout:

    manifest.json            config echo, digests, artifact map
    chunks.jsonl             chunked corpus
    prompts/<strategy>.jsonl rendered prompts
    outputs/<model>__<strategy>.jsonl   raw completions
    triples/<model>__<strategy>.jsonl   parsed triple sets
    eval/                    reference-based metrics
    judge/                   reference-free verdicts and rank stats
    report.txt               human-readable summary

Nothing under the run directory carries a timestamp or an absolute
path, and the config digest ignores where the run is written, so two
replays of the same cassette into different directories are identical
byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import (
    DEFAULT_MAX_WORDS,
    DEFAULT_MIN_WORDS,
    Chunk,
    chunk_document,
    load_corpus,
    read_chunks,
    write_chunks,
)
from .errors import ConfigInvalid, MissingReference, MissingRun
from .gateway import MODES, CompletionRequest, LLMGateway, provider_from_env
from .judge import (
    CandidateSet,
    JudgeMethod,
    JudgeRoundResult,
    RankHistogram,
    aggregate_best_answers,
    expectation_ranking,
    expectation_score,
    judge_round,
    rank_correlations,
    ranking_from_scores,
    write_correlation_table,
    write_verdicts,
)
from .metrics import (
    ComponentRates,
    EvalSample,
    EvaluationReport,
    HashingEmbeddingProvider,
    MetricVector,
    combined_scores,
    evaluate_configuration,
    write_flagged_triples,
)
from .ontology import (
    Ontology,
    default_template,
    load_ontology_dir,
    merge_ontologies,
    ontologies_by_name,
)
from .prompts import (
    Demonstration,
    PromptSpec,
    Strategy,
    generate_prompt_set,
    read_demonstrations,
    read_prompts,
    write_prompts,
)
from .simulate import ScriptedProvider
from .triples import TripleSet, parse_output, read_triple_sets, write_triple_sets

_PROVIDERS = ("scripted", "env")
_JUDGE_STYLES = ("scripted", "biased")
_SLUG_RE = re.compile(r"[^A-Za-z0-9._-]")

_KNOWN_KEYS = frozenset(
    {
        "corpus",
        "ontology_dir",
        "extractors",
        "strategies",
        "mode",
        "cassette",
        "provider",
        "judge_style",
        "judge_model",
        "judge_method",
        "judge_strategy",
        "reference",
        "demonstrations",
        "seed",
        "max_words",
        "min_words",
        "max_tokens",
        "embed_dim",
        "strict",
    }
)


def slugify(name: str) -> str:
    """Filesystem-safe stand-in for a model or strategy name."""
    return _SLUG_RE.sub("_", name)


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat key=value lines; # starts a comment, blanks ignored."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key:
            raise ConfigInvalid(f"config line {lineno}: expected key=value, got {raw!r}")
        if key in mapping:
            raise ConfigInvalid(f"config line {lineno}: duplicate key {key!r}")
        mapping[key] = value
    return mapping


def _parse_int(mapping: Mapping[str, str], key: str, default: int, minimum: int = 0) -> int:
    raw = mapping.get(key)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigInvalid(f"{key} must be an integer, got {raw!r}") from None
    if value < minimum:
        raise ConfigInvalid(f"{key} must be >= {minimum}, got {value}")
    return value


def _parse_bool(mapping: Mapping[str, str], key: str, default: bool) -> bool:
    raw = mapping.get(key)
    if raw is None:
        return default
    lowered = raw.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    raise ConfigInvalid(f"{key} must be true or false, got {raw!r}")


def _parse_list(raw: str) -> tuple[str, ...]:
    return tuple(item.strip() for item in raw.split(",") if item.strip())


@dataclass(frozen=True)
class RunConfig:
    """A validated run configuration with paths resolved for use.

    ``digest`` fingerprints the raw key=value mapping, so it is stable
    across machines and independent of where outputs land.
    """

    corpus: Path
    ontology_dir: Path
    extractors: tuple[str, ...]
    strategies: tuple[Strategy, ...]
    mode: str
    cassette: Path | None
    provider: str
    judge_style: str
    judge_model: str
    judge_method: JudgeMethod
    judge_strategy: Strategy
    reference: Path | None
    demonstrations: Path | None
    seed: int
    max_words: int
    min_words: int
    max_tokens: int
    embed_dim: int
    strict: bool
    digest: str
    raw: dict[str, str] = field(compare=False, default_factory=dict)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str], base_dir: str | Path = ".") -> "RunConfig":
        base_dir = Path(base_dir)
        unknown = sorted(set(mapping) - _KNOWN_KEYS)
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {', '.join(unknown)}")
        missing = sorted(k for k in ("corpus", "ontology_dir", "extractors") if not mapping.get(k))
        if missing:
            raise ConfigInvalid(f"missing required config keys: {', '.join(missing)}")

        def resolve(key: str) -> Path | None:
            raw = mapping.get(key)
            if not raw:
                return None
            path = Path(raw)
            return path if path.is_absolute() else base_dir / path

        extractors = _parse_list(mapping["extractors"])
        if not extractors:
            raise ConfigInvalid("extractors must name at least one model")
        if len(set(extractors)) != len(extractors):
            raise ConfigInvalid("extractors must be distinct")
        slugs = [slugify(m) for m in extractors]
        if len(set(slugs)) != len(slugs):
            raise ConfigInvalid("extractor names collide after slugging for file names")

        try:
            strategies = tuple(
                Strategy.parse(s) for s in _parse_list(mapping.get("strategies", "zero_shot"))
            )
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from None
        if not strategies:
            raise ConfigInvalid("strategies must name at least one strategy")
        if len(set(strategies)) != len(strategies):
            raise ConfigInvalid("strategies must be distinct")

        mode = mapping.get("mode", "replay")
        if mode not in MODES:
            raise ConfigInvalid(f"mode must be one of {MODES}, got {mode!r}")
        cassette = resolve("cassette")
        if mode in ("replay", "record") and cassette is None:
            raise ConfigInvalid(f"{mode} mode needs a cassette path")

        provider = mapping.get("provider", "scripted")
        if provider not in _PROVIDERS:
            raise ConfigInvalid(f"provider must be one of {_PROVIDERS}, got {provider!r}")
        judge_style = mapping.get("judge_style", "scripted")
        if judge_style not in _JUDGE_STYLES:
            raise ConfigInvalid(
                f"judge_style must be one of {_JUDGE_STYLES}, got {judge_style!r}"
            )

        try:
            judge_method = JudgeMethod.parse(mapping.get("judge_method", "randomized_fair"))
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from None
        try:
            judge_strategy = (
                Strategy.parse(mapping["judge_strategy"])
                if mapping.get("judge_strategy")
                else strategies[0]
            )
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from None
        if judge_strategy not in strategies:
            raise ConfigInvalid(
                f"judge_strategy {judge_strategy.value!r} is not among the run strategies"
            )

        max_words = _parse_int(mapping, "max_words", DEFAULT_MAX_WORDS, minimum=1)
        min_words = _parse_int(mapping, "min_words", DEFAULT_MIN_WORDS, minimum=0)
        if min_words > max_words:
            raise ConfigInvalid(f"min_words {min_words} exceeds max_words {max_words}")

        digest = hashlib.sha256(
            json.dumps(dict(mapping), sort_keys=True, ensure_ascii=False).encode("utf-8")
        ).hexdigest()
        return cls(
            corpus=resolve("corpus"),
            ontology_dir=resolve("ontology_dir"),
            extractors=extractors,
            strategies=strategies,
            mode=mode,
            cassette=cassette,
            provider=provider,
            judge_style=judge_style,
            judge_model=mapping.get("judge_model", ""),
            judge_method=judge_method,
            judge_strategy=judge_strategy,
            reference=resolve("reference"),
            demonstrations=resolve("demonstrations"),
            seed=_parse_int(mapping, "seed", 0),
            max_words=max_words,
            min_words=min_words,
            max_tokens=_parse_int(mapping, "max_tokens", 1024, minimum=1),
            embed_dim=_parse_int(mapping, "embed_dim", 16, minimum=1),
            strict=_parse_bool(mapping, "strict", True),
            digest=digest,
            raw=dict(mapping),
        )

    @classmethod
    def from_file(cls, path: str | Path, overrides: Mapping[str, str] | None = None) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
        mapping = parse_config_text(text)
        for key, value in (overrides or {}).items():
            mapping[key] = value
        return cls.from_mapping(mapping, base_dir=path.parent)


def build_gateway(config: RunConfig) -> LLMGateway:
    provider = None
    if config.mode in ("record", "live"):
        if config.provider == "scripted":
            provider = ScriptedProvider(judge_style=config.judge_style)
        else:
            provider = provider_from_env()
    return LLMGateway(
        mode=config.mode,
        provider=provider,
        cassette_path=config.cassette,
        strict=config.strict,
    )


# --- the extraction stage ----------------------------------------------------

def _load_chunks(config: RunConfig) -> list[Chunk]:
    chunks: list[Chunk] = []
    for doc in load_corpus(config.corpus):
        chunks.extend(chunk_document(doc, config.max_words, config.min_words))
    return chunks


def _load_ontologies(config: RunConfig) -> dict[str, Ontology]:
    return ontologies_by_name(load_ontology_dir(config.ontology_dir))


def _load_pool(config: RunConfig) -> list[Demonstration]:
    if config.demonstrations is None:
        return []
    if not config.demonstrations.exists():
        raise MissingReference(f"demonstration pool not found: {config.demonstrations}")
    return read_demonstrations(config.demonstrations)


def _write_outputs(responses: Mapping[str, str], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for prompt_id in sorted(responses):
            fh.write(
                json.dumps(
                    {"prompt_id": prompt_id, "response_text": responses[prompt_id]},
                    sort_keys=True,
                    ensure_ascii=False,
                )
            )
            fh.write("\n")


def run_extraction(config: RunConfig, run_dir: str | Path) -> dict:
    """Chunk, prompt, complete, and parse; returns the run manifest."""
    run_dir = Path(run_dir)
    for sub in ("prompts", "outputs", "triples"):
        (run_dir / sub).mkdir(parents=True, exist_ok=True)

    chunks = _load_chunks(config)
    write_chunks(chunks, run_dir / "chunks.jsonl")
    ontologies = _load_ontologies(config)
    templates = [default_template(o) for o in ontologies.values()]
    pool = _load_pool(config)
    gateway = build_gateway(config)

    artifacts: dict = {
        "chunks": "chunks.jsonl",
        "prompts": {},
        "outputs": {},
        "triples": {},
    }
    prompt_counts: dict[str, int] = {}
    for strategy in config.strategies:
        prompts = generate_prompt_set(
            chunks, templates, ontologies, strategy, pool, config.seed
        )
        rel = f"prompts/{strategy.value}.jsonl"
        write_prompts(prompts, run_dir / rel)
        artifacts["prompts"][strategy.value] = rel
        prompt_counts[strategy.value] = len(prompts)
        artifacts["outputs"][strategy.value] = {}
        artifacts["triples"][strategy.value] = {}
        for model_id in config.extractors:
            requests = {
                p.prompt_id: CompletionRequest(
                    model_id=model_id,
                    prompt_text=p.rendered_text,
                    max_tokens=config.max_tokens,
                )
                for p in prompts
            }
            responses = gateway.complete_many(requests)
            slug = slugify(model_id)
            out_rel = f"outputs/{slug}__{strategy.value}.jsonl"
            _write_outputs(responses, run_dir / out_rel)
            artifacts["outputs"][strategy.value][model_id] = out_rel
            triple_sets = [
                parse_output(responses[pid], prompt_id=pid) for pid in sorted(responses)
            ]
            tri_rel = f"triples/{slug}__{strategy.value}.jsonl"
            write_triple_sets(triple_sets, run_dir / tri_rel)
            artifacts["triples"][strategy.value][model_id] = tri_rel

    manifest = {
        "config": config.raw,
        "config_digest": config.digest,
        "documents": sorted({c.doc_id for c in chunks}),
        "chunk_count": len(chunks),
        "prompt_counts": prompt_counts,
        "extractors": list(config.extractors),
        "strategies": [s.value for s in config.strategies],
        "ontologies": sorted(ontologies),
        "artifacts": artifacts,
    }
    with open(run_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")
    return manifest


def read_manifest(run_dir: str | Path) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise MissingRun(f"no manifest.json under {run_dir}; run the extract stage first")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _artifact(manifest: dict, run_dir: Path, *keys: str) -> Path:
    node = manifest["artifacts"]
    for key in keys:
        try:
            node = node[key]
        except (KeyError, TypeError):
            raise MissingRun(
                f"run at {run_dir} has no artifact {'/'.join(keys)}"
            ) from None
    return run_dir / node


def _contexts_for(prompts: Sequence[PromptSpec], chunks: Sequence[Chunk]) -> dict[str, str]:
    by_chunk = {c.chunk_id: c.text for c in chunks}
    return {p.prompt_id: by_chunk[p.chunk_id] for p in prompts}


# --- the reference evaluation stage ------------------------------------------

def _read_reference(config: RunConfig) -> dict[str, TripleSet]:
    if config.reference is None:
        raise MissingReference("config has no reference path; reference evaluation needs one")
    if not config.reference.exists():
        raise MissingReference(f"reference file not found: {config.reference}")
    return {ts.prompt_id: ts for ts in read_triple_sets(config.reference)}


def run_reference_eval(config: RunConfig, run_dir: str | Path) -> EvaluationReport:
    """Score every (extractor, strategy) configuration against reference.

    Hallucination grounding uses the union of the run's ontologies, so a
    relation is only flagged when no loaded ontology declares it.
    """
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    reference = _read_reference(config)
    chunks = read_chunks(_artifact(manifest, run_dir, "chunks"))
    ontology = merge_ontologies(list(_load_ontologies(config).values()))
    provider = HashingEmbeddingProvider(dim=config.embed_dim)

    (run_dir / "eval").mkdir(parents=True, exist_ok=True)
    rows: dict[tuple[str, str], MetricVector] = {}
    components: dict[tuple[str, str], ComponentRates] = {}
    for strategy in config.strategies:
        prompts = read_prompts(_artifact(manifest, run_dir, "prompts", strategy.value))
        contexts = _contexts_for(prompts, chunks)
        for model_id in config.extractors:
            triples_path = _artifact(manifest, run_dir, "triples", strategy.value, model_id)
            candidates = {ts.prompt_id: ts for ts in read_triple_sets(triples_path)}
            samples = []
            for prompt in prompts:
                pid = prompt.prompt_id
                candidate = candidates.get(pid, TripleSet(prompt_id=pid))
                ref = reference.get(pid, TripleSet(prompt_id=pid))
                samples.append(
                    EvalSample(
                        prompt_id=pid,
                        context=contexts[pid],
                        candidate=candidate,
                        reference=ref,
                    )
                )
            evaluation = evaluate_configuration(samples, ontology, provider)
            key = (model_id, strategy.value)
            rows[key] = evaluation.metrics
            components[key] = evaluation.components
            flag_rel = f"eval/flagged__{slugify(model_id)}__{strategy.value}.jsonl"
            write_flagged_triples(evaluation.flagged, run_dir / flag_rel)

    report = EvaluationReport.build(rows, components)
    report.to_csv(run_dir / "eval" / "report.csv")
    report.to_jsonl(run_dir / "eval" / "report.jsonl")
    return report


# --- the judge stage ---------------------------------------------------------

def _judge_reference_ranking(config: RunConfig, run_dir: Path) -> dict[str, int] | None:
    """Rank extractors by combined score at the judge strategy.

    Uses the eval stage's raw metrics, re-normalized within just the
    compared rows.  Returns None when the eval stage has not run.
    """
    report_path = run_dir / "eval" / "report.jsonl"
    if not report_path.exists():
        return None
    matrix: dict[str, MetricVector] = {}
    with open(report_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec["strategy"] != config.judge_strategy.value:
                continue
            matrix[rec["extractor"]] = MetricVector(**rec["metrics"])
    if set(matrix) != set(config.extractors):
        return None
    return ranking_from_scores(combined_scores(matrix), higher_is_better=True)


def run_judge_eval(config: RunConfig, run_dir: str | Path) -> JudgeRoundResult:
    """Judge the extractors' answers head to head at the judge strategy.

    Prompts are judged under their own ontology.  Writes verdicts, the
    rank histogram with expectation scores, each prompt's winning
    answer, and, when the reference evaluation has already run, rank
    correlations against the combined-score ranking.
    """
    run_dir = Path(run_dir)
    if len(config.extractors) < 2:
        raise ConfigInvalid("judging needs at least two extractors to compare")
    if not config.judge_model:
        raise ConfigInvalid("judging needs judge_model in the config")
    manifest = read_manifest(run_dir)
    strategy = config.judge_strategy
    prompts = read_prompts(_artifact(manifest, run_dir, "prompts", strategy.value))
    chunks = read_chunks(_artifact(manifest, run_dir, "chunks"))
    contexts = _contexts_for(prompts, chunks)
    ontologies = _load_ontologies(config)

    answers: dict[str, dict[str, TripleSet]] = {}
    for model_id in config.extractors:
        triples_path = _artifact(manifest, run_dir, "triples", strategy.value, model_id)
        answers[model_id] = {ts.prompt_id: ts for ts in read_triple_sets(triples_path)}

    def candidate_set(prompt: PromptSpec) -> CandidateSet:
        return CandidateSet(
            prompt_id=prompt.prompt_id,
            answers=tuple(
                (
                    model_id,
                    answers[model_id].get(
                        prompt.prompt_id, TripleSet(prompt_id=prompt.prompt_id)
                    ),
                )
                for model_id in config.extractors
            ),
        )

    gateway = build_gateway(config)
    # Default templates are named after their ontology, so the template
    # id tells us which ontology a prompt was rendered under.
    by_ontology: dict[str, list[PromptSpec]] = {}
    for prompt in prompts:
        by_ontology.setdefault(prompt.template_id, []).append(prompt)

    verdicts = {}
    warnings: list[str] = []
    for name in sorted(by_ontology):
        if name not in ontologies:
            raise MissingRun(
                f"prompts reference ontology {name!r} that is not in {config.ontology_dir}"
            )
        group = sorted(by_ontology[name], key=lambda p: p.prompt_id)
        result = judge_round(
            [candidate_set(p) for p in group],
            contexts,
            ontologies[name],
            config.judge_method,
            config.judge_model,
            gateway,
            seed=config.seed,
            max_tokens=config.max_tokens,
        )
        verdicts.update(result.verdicts)
        warnings.extend(result.warnings)

    histogram = RankHistogram(list(config.extractors), len(config.extractors))
    for verdict in verdicts.values():
        histogram.add(verdict.ranking)
    expectation = expectation_score(histogram)
    ranking = expectation_ranking(histogram)

    judge_dir = run_dir / "judge"
    judge_dir.mkdir(parents=True, exist_ok=True)
    write_verdicts(verdicts.values(), judge_dir / "verdicts.jsonl")
    winners, union = aggregate_best_answers(
        verdicts, [candidate_set(p) for p in prompts if p.prompt_id in verdicts]
    )
    write_triple_sets(
        (winners[pid] for pid in sorted(winners)), judge_dir / "winners.jsonl"
    )
    write_triple_sets([union], judge_dir / "aggregate.jsonl")

    summary = {
        "judge_model": config.judge_model,
        "method": config.judge_method.value,
        "strategy": strategy.value,
        "expectation": {m: expectation[m] for m in sorted(expectation)},
        "ranking": {m: ranking[m] for m in sorted(ranking)},
        "histogram": {m: histogram.counts[m] for m in sorted(histogram.counts)},
        "verdict_count": histogram.verdict_count,
        "warnings": sorted(warnings),
    }
    reference_ranking = _judge_reference_ranking(config, run_dir)
    if reference_ranking is not None:
        correlation = rank_correlations(ranking, reference_ranking)
        summary["reference_ranking"] = {
            m: reference_ranking[m] for m in sorted(reference_ranking)
        }
        summary["spearman_rho"] = correlation.spearman_rho
        summary["kendall_tau"] = correlation.kendall_tau
        write_correlation_table(
            [(config.judge_model, config.judge_method.value, correlation)],
            judge_dir / "correlations.csv",
        )
    with open(judge_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")
    return JudgeRoundResult(
        verdicts=verdicts,
        histogram=histogram,
        expectation=expectation,
        ranking=ranking,
        warnings=tuple(warnings),
    )


# --- the report --------------------------------------------------------------

def _format_eval_table(rows: list[dict]) -> list[str]:
    header = (
        "extractor", "strategy", "bleu", "rouge_l", "meteor",
        "embed_sim", "halluc", "format", "combined",
    )
    table = [header]
    for rec in rows:
        metrics = rec["metrics"]
        table.append(
            (
                rec["extractor"],
                rec["strategy"],
                f"{metrics['bleu']:.4f}",
                f"{metrics['rouge_l']:.4f}",
                f"{metrics['meteor']:.4f}",
                f"{metrics['embed_sim']:.4f}",
                f"{metrics['hallucination_rate']:.4f}",
                f"{metrics['format_conformance']:.4f}",
                f"{rec['combined']:.2f}",
            )
        )
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    return ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table]


def export_report(run_dir: str | Path) -> str:
    """Render report.txt from whatever stages have run; returns the text.

    Re-exporting without new stage output is byte-identical.
    """
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    lines = [
        "run summary",
        "===========",
        f"config digest: {manifest['config_digest']}",
        f"documents: {len(manifest['documents'])} ({', '.join(manifest['documents'])})",
        f"chunks: {manifest['chunk_count']}",
        "prompts: "
        + ", ".join(
            f"{s}={manifest['prompt_counts'][s]}" for s in sorted(manifest["prompt_counts"])
        ),
        f"extractors: {', '.join(manifest['extractors'])}",
        f"ontologies: {', '.join(manifest['ontologies'])}",
        "",
    ]

    eval_path = run_dir / "eval" / "report.jsonl"
    lines.append("reference evaluation")
    lines.append("--------------------")
    if eval_path.exists():
        rows = [
            json.loads(line)
            for line in eval_path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        rows.sort(key=lambda r: (r["extractor"], r["strategy"]))
        lines.extend(_format_eval_table(rows))
        best = max(rows, key=lambda r: (r["combined"], (r["extractor"], r["strategy"])))
        lines.append("")
        lines.append(
            f"best combined score: {best['combined']:.2f} "
            f"({best['extractor']}, {best['strategy']})"
        )
    else:
        lines.append("not run")
    lines.append("")

    judge_path = run_dir / "judge" / "summary.json"
    lines.append("judge evaluation")
    lines.append("----------------")
    if judge_path.exists():
        with open(judge_path, encoding="utf-8") as fh:
            summary = json.load(fh)
        lines.append(
            f"judge: {summary['judge_model']} ({summary['method']}, "
            f"strategy {summary['strategy']}, {summary['verdict_count']} verdicts)"
        )
        ordered = sorted(summary["ranking"], key=lambda m: summary["ranking"][m])
        for model_id in ordered:
            lines.append(
                f"  {summary['ranking'][model_id]}. {model_id} "
                f"(expected rank {summary['expectation'][model_id]:.4f})"
            )
        if "spearman_rho" in summary:
            lines.append(
                f"agreement with reference ranking: rho={summary['spearman_rho']:.4f}, "
                f"tau={summary['kendall_tau']:.4f}"
            )
        if summary["warnings"]:
            lines.append(f"warnings: {len(summary['warnings'])} prompt(s) skipped")
    else:
        lines.append("not run")
    lines.append("")

    text = "\n".join(lines)
    (run_dir / "report.txt").write_text(text, encoding="utf-8")
    return text
