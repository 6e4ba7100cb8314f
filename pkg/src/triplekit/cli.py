"""Command-line interface.

Every command maps cleanly onto a library call, so anything done here
can be scripted in Python instead.  Exit codes: 0 success, 1 usage or
configuration problems, 2 data problems (malformed or missing inputs),
3 provider faults.
"""

from __future__ import annotations

import argparse
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from .annotation import (
    ReviewSession,
    agreement_metrics,
    build_review_queue,
    mean_agreement,
    review_triples,
    sample_annotation_prompts,
)
from .corpus import (
    DEFAULT_MAX_WORDS,
    DEFAULT_MIN_WORDS,
    chunk_document,
    corpus_stats,
    load_corpus,
    read_chunks,
    write_chunks,
)
from .errors import ConfigError, ConfigInvalid, DataError, ProviderFault
from .ontology import default_template, load_ontology_dir, ontologies_by_name
from .pipeline import (
    RunConfig,
    export_report,
    run_extraction,
    run_judge_eval,
    run_reference_eval,
)
from .prompts import Strategy, generate_prompt_set, read_demonstrations, write_prompts
from .triples import TripleSet, read_triple_sets


def _package_version() -> str:
    try:
        return version("triplekit")
    except PackageNotFoundError:
        return "0.0.0"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this project reserves 2 for
    data problems, so usage errors exit 1 instead."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    for key in ("mode", "provider", "seed", "judge_style", "judge_model"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = str(value)
    if getattr(args, "method", None) is not None:
        overrides["judge_method"] = args.method
    for key in ("cassette", "reference"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = str(Path(value).absolute())
    return RunConfig.from_file(args.config, overrides)


# --- commands ----------------------------------------------------------------

def _cmd_ingest(args: argparse.Namespace) -> int:
    docs = load_corpus(args.corpus)
    chunks = []
    for doc in docs:
        chunks.extend(chunk_document(doc, args.max_words, args.min_words))
    write_chunks(chunks, args.out)
    print(f"wrote {len(chunks)} chunks from {len(docs)} documents to {args.out}")
    if args.stats:
        stats = corpus_stats(docs)
        print(
            f"pages={stats.pages} chars={stats.chars} words={stats.words} "
            f"sentences={stats.sentences} numeric_tokens={stats.numerics}"
        )
    return 0


def _cmd_prompts(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    try:
        strategy = Strategy.parse(args.strategy)
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from None
    ontologies = ontologies_by_name(load_ontology_dir(config.ontology_dir))
    templates = [default_template(o) for o in ontologies.values()]
    chunks = []
    for doc in load_corpus(config.corpus):
        chunks.extend(chunk_document(doc, config.max_words, config.min_words))
    pool = read_demonstrations(config.demonstrations) if config.demonstrations else []
    prompts = generate_prompt_set(chunks, templates, ontologies, strategy, pool, config.seed)
    write_prompts(prompts, args.out)
    print(f"wrote {len(prompts)} prompts ({strategy.value}) to {args.out}")
    return 0


def _cmd_extract(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    manifest = run_extraction(config, args.run_dir)
    total = sum(manifest["prompt_counts"].values())
    print(
        f"extracted with {len(manifest['extractors'])} model(s) over {total} prompt(s) "
        f"per model; run written to {args.run_dir}"
    )
    return 0


def _cmd_eval_ref(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    report = run_reference_eval(config, args.run_dir)
    best = max(report.combined, key=lambda k: (report.combined[k], k))
    print(f"evaluated {len(report.rows)} configuration(s); report under {args.run_dir}/eval")
    print(f"best combined score: {report.combined[best]:.2f} ({best[0]}, {best[1]})")
    return 0


def _cmd_judge(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    result = run_judge_eval(config, args.run_dir)
    ordered = sorted(result.ranking, key=lambda m: result.ranking[m])
    print(
        f"judged {result.histogram.verdict_count} prompt(s) with "
        f"{config.judge_model} ({config.judge_method.value})"
    )
    for model_id in ordered:
        print(
            f"  {result.ranking[model_id]}. {model_id} "
            f"(expected rank {result.expectation[model_id]:.4f})"
        )
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    print(export_report(args.run_dir))
    return 0


def _cmd_annotate_new(args: argparse.Namespace) -> int:
    triple_sets = read_triple_sets(args.triples)
    if args.sample is not None:
        prompt_ids = sorted({ts.prompt_id for ts in triple_sets})
        keep = set(sample_annotation_prompts(prompt_ids, args.sample, args.seed))
        triple_sets = [ts for ts in triple_sets if ts.prompt_id in keep]
    contexts = None
    if args.chunks:
        by_chunk = {c.chunk_id: c.text for c in read_chunks(args.chunks)}
        # Prompt ids embed their chunk id as everything before the last
        # "__" separator.
        contexts = {
            ts.prompt_id: by_chunk[cid]
            for ts in triple_sets
            if (cid := ts.prompt_id.rsplit("__", 1)[0]) in by_chunk
        }
    items = build_review_queue(triple_sets, contexts, source_model=args.source or "")
    session = ReviewSession.create(args.session, args.session_id, args.annotator, items)
    print(f"created session {args.session_id} with {len(items)} items at {args.session}")
    if not args.no_review:
        review_triples(session)
    return 0


def _cmd_annotate_resume(args: argparse.Namespace) -> int:
    session = ReviewSession.open(args.session)
    print(
        f"resuming session {session.session_id}: "
        f"{session.decided_count}/{len(session.items)} decided"
    )
    review_triples(session)
    return 0


def _cmd_annotate_export(args: argparse.Namespace) -> int:
    session = ReviewSession.open(args.session)
    session.export_reference(args.out)
    accepted = session.accepted_triple_sets()
    count = sum(len(ts.triples) for ts in accepted.values())
    print(f"exported {count} accepted triple(s) across {len(accepted)} prompt(s) to {args.out}")
    return 0


def _cmd_agree(args: argparse.Namespace) -> int:
    left = {ts.prompt_id: ts for ts in read_triple_sets(args.left)}
    right = {ts.prompt_id: ts for ts in read_triple_sets(args.right)}
    prompt_ids = sorted(set(left) | set(right))
    if not prompt_ids:
        raise DataError("both reference files are empty; nothing to compare")
    results = []
    for pid in prompt_ids:
        result = agreement_metrics(
            left.get(pid, TripleSet(prompt_id=pid)),
            right.get(pid, TripleSet(prompt_id=pid)),
        )
        results.append(result)
        print(
            f"{pid}: jaccard={result.jaccard:.4f} dice={result.dice:.4f} "
            f"overlap={result.overlap:.4f}"
        )
    mean = mean_agreement(results)
    print(
        f"mean over {len(results)} prompt(s): jaccard={mean.jaccard:.4f} "
        f"dice={mean.dice:.4f} overlap={mean.overlap:.4f}"
    )
    return 0


# --- parser wiring -----------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(
        prog="triplekit",
        description="Extract ontology-conformant triples from reports and evaluate them.",
    )
    parser.add_argument("--version", action="version", version=_package_version())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="chunk a corpus into model-sized pieces")
    p.add_argument("--corpus", required=True, help="corpus manifest JSON")
    p.add_argument("--out", required=True, help="output chunks JSONL")
    p.add_argument("--max-words", type=int, default=DEFAULT_MAX_WORDS)
    p.add_argument("--min-words", type=int, default=DEFAULT_MIN_WORDS)
    p.add_argument("--stats", action="store_true", help="print corpus statistics")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("prompts", help="render extraction prompts for one strategy")
    p.add_argument("--config", required=True)
    p.add_argument("--strategy", required=True, help="e.g. zero_shot, os, random_paragraph")
    p.add_argument("--out", required=True, help="output prompts JSONL")
    p.set_defaults(func=_cmd_prompts)

    p = sub.add_parser("extract", help="run the full extraction stage into a run directory")
    p.add_argument("--config", required=True)
    p.add_argument("--run-dir", required=True)
    p.add_argument("--mode", choices=("live", "record", "replay"))
    p.add_argument("--cassette")
    p.add_argument("--provider", choices=("scripted", "env"))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("eval-ref", help="score extractions against reference triples")
    p.add_argument("--config", required=True)
    p.add_argument("--run-dir", required=True)
    p.add_argument("--reference", help="override the config's reference path")
    p.set_defaults(func=_cmd_eval_ref)

    p = sub.add_parser("judge", help="rank extractors head to head with a judge model")
    p.add_argument("--config", required=True)
    p.add_argument("--run-dir", required=True)
    p.add_argument("--method", help="basic, fair, or randomized_fair")
    p.add_argument("--judge-model", dest="judge_model")
    p.add_argument("--judge-style", dest="judge_style", choices=("scripted", "biased"))
    p.add_argument("--mode", choices=("live", "record", "replay"))
    p.add_argument("--cassette")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_judge)

    p = sub.add_parser("report", help="render the run summary")
    p.add_argument("--run-dir", required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("annotate", help="review extracted triples by hand")
    annotate = p.add_subparsers(dest="annotate_command", required=True)

    pa = annotate.add_parser("new", help="start a review session from a triples file")
    pa.add_argument("--session", required=True, help="session log path (must not exist)")
    pa.add_argument("--session-id", default="session")
    pa.add_argument("--annotator", default="anonymous")
    pa.add_argument("--triples", required=True, help="triples JSONL to review")
    pa.add_argument("--chunks", help="chunks JSONL for context excerpts")
    pa.add_argument("--source", help="label for where the triples came from")
    pa.add_argument("--sample", type=int, help="review only this many prompts")
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--no-review", action="store_true", help="create the session and exit")
    pa.set_defaults(func=_cmd_annotate_new)

    pa = annotate.add_parser("resume", help="continue an interrupted session")
    pa.add_argument("--session", required=True)
    pa.set_defaults(func=_cmd_annotate_resume)

    pa = annotate.add_parser("export", help="write accepted triples as reference JSONL")
    pa.add_argument("--session", required=True)
    pa.add_argument("--out", required=True)
    pa.set_defaults(func=_cmd_annotate_export)

    p = sub.add_parser("agree", help="agreement between two reference files")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.set_defaults(func=_cmd_agree)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"triplekit: config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"triplekit: data error: {exc}", file=sys.stderr)
        return 2
    except ProviderFault as exc:
        print(f"triplekit: provider error: {exc}", file=sys.stderr)
        return 3
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    raise SystemExit(main())
