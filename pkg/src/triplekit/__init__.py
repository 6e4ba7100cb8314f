"""Triple extraction from demining reports, with two evaluation tracks.

The library turns report text into relation(subject, object) triples
via LLM prompting against a fixed ontology, then measures quality two
ways: against expert reference triples (n-gram and embedding metrics,
hallucination and format-conformance rates, a combined score) and
without references (an LLM judge ranking competing extractors, with
positional bias cancelled by candidate shuffling).
"""

from .annotation import (
    ACCEPT,
    REJECT,
    REJECT_REASONS,
    AgreementResult,
    ReviewItem,
    ReviewSession,
    agreement_metrics,
    build_review_queue,
    mean_agreement,
    review_triples,
    sample_annotation_prompts,
)
from .corpus import (
    Chunk,
    CorpusStats,
    Document,
    chunk_document,
    corpus_stats,
    count_numeric_tokens,
    document_stats,
    load_corpus,
    read_chunks,
    split_paragraphs,
    split_sentences,
    write_chunks,
)
from .errors import (
    ConfigError,
    ConfigInvalid,
    DataError,
    ProviderFault,
    TriplekitError,
)
from .gateway import (
    CompletionRequest,
    LLMGateway,
    provider_from_env,
    read_cassette,
    request_digest,
)
from .judge import (
    CandidateSet,
    CorrelationResult,
    JudgeMethod,
    JudgeVerdict,
    RankHistogram,
    aggregate_best_answers,
    build_judge_prompt,
    expectation_ranking,
    expectation_score,
    judge_round,
    parse_verdict,
    rank_correlations,
    ranking_from_scores,
    shuffle_permutation,
)
from .metrics import (
    EvalSample,
    EvaluationReport,
    HallucinationFlags,
    HashingEmbeddingProvider,
    MetricVector,
    bleu_score,
    combined_scores,
    embedding_similarity_score,
    evaluate_configuration,
    format_conformance_rate,
    hallucination_assess,
    meteor_score,
    min_max_normalize,
    rouge_l_score,
)
from .ontology import (
    Ontology,
    OntologyTemplate,
    default_template,
    load_ontology,
    load_ontology_dir,
    merge_ontologies,
)
from .pipeline import (
    RunConfig,
    export_report,
    run_extraction,
    run_judge_eval,
    run_reference_eval,
)
from .prompts import (
    Demonstration,
    PromptSpec,
    Strategy,
    build_extraction_prompt,
    derive_demonstrations,
    generate_prompt_set,
    retrieve_demonstration,
    stable_rng,
)
from .simulate import ScriptedProvider
from .triples import (
    Triple,
    TripleSet,
    canonical_serialize,
    normalize_text,
    parse_output,
    parse_triple_line,
    read_triple_sets,
    stem,
    token_subsequence,
    write_triple_sets,
)

__version__ = "0.1.0"

__all__ = [
    "ACCEPT",
    "REJECT",
    "REJECT_REASONS",
    "AgreementResult",
    "CandidateSet",
    "Chunk",
    "CompletionRequest",
    "ConfigError",
    "ConfigInvalid",
    "CorpusStats",
    "CorrelationResult",
    "DataError",
    "Demonstration",
    "Document",
    "EvalSample",
    "EvaluationReport",
    "HallucinationFlags",
    "HashingEmbeddingProvider",
    "JudgeMethod",
    "JudgeVerdict",
    "LLMGateway",
    "MetricVector",
    "Ontology",
    "OntologyTemplate",
    "PromptSpec",
    "ProviderFault",
    "RankHistogram",
    "ReviewItem",
    "ReviewSession",
    "RunConfig",
    "ScriptedProvider",
    "Strategy",
    "Triple",
    "TripleSet",
    "TriplekitError",
    "aggregate_best_answers",
    "agreement_metrics",
    "bleu_score",
    "build_extraction_prompt",
    "build_judge_prompt",
    "build_review_queue",
    "canonical_serialize",
    "chunk_document",
    "combined_scores",
    "corpus_stats",
    "count_numeric_tokens",
    "default_template",
    "derive_demonstrations",
    "document_stats",
    "embedding_similarity_score",
    "evaluate_configuration",
    "expectation_ranking",
    "expectation_score",
    "export_report",
    "format_conformance_rate",
    "generate_prompt_set",
    "hallucination_assess",
    "judge_round",
    "load_corpus",
    "load_ontology",
    "load_ontology_dir",
    "mean_agreement",
    "merge_ontologies",
    "meteor_score",
    "min_max_normalize",
    "normalize_text",
    "parse_output",
    "parse_triple_line",
    "parse_verdict",
    "provider_from_env",
    "rank_correlations",
    "ranking_from_scores",
    "read_cassette",
    "read_chunks",
    "read_triple_sets",
    "request_digest",
    "retrieve_demonstration",
    "review_triples",
    "rouge_l_score",
    "run_extraction",
    "run_judge_eval",
    "run_reference_eval",
    "sample_annotation_prompts",
    "shuffle_permutation",
    "split_paragraphs",
    "split_sentences",
    "stable_rng",
    "stem",
    "token_subsequence",
    "write_chunks",
    "write_triple_sets",
]
