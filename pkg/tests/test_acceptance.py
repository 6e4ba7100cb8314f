"""Release gate: the full guarantee suite, one printed verdict per check.

Run with ``pytest tests/test_acceptance.py -s`` to see the PASS/FAIL
lines.  Every expected value here is either hand arithmetic written out
in the test or an independent re-implementation of the property (window
scanning instead of sentinel joins, pair counting instead of closed
forms), so a silent regression in the library cannot also silently
repair its own oracle.
"""

import json
import math
import random
import string
import time
from contextlib import contextmanager
from itertools import combinations
from statistics import fmean

import pytest

from triplekit.annotation import agreement_metrics
from triplekit.corpus import Chunk
from triplekit.errors import NoEligibleDemonstration
from triplekit.gateway import LLMGateway
from triplekit.judge import (
    CandidateSet,
    JudgeMethod,
    RankHistogram,
    expectation_score,
    judge_round,
    rank_correlations,
)
from triplekit.metrics import (
    EvalSample,
    HashingEmbeddingProvider,
    MetricVector,
    bleu_score,
    combined_scores,
    embedding_similarity_score,
    evaluate_configuration,
    hallucination_assess,
    meteor_score,
    normalized_columns,
    rouge_l_score,
)
from triplekit.ontology import Ontology, default_template, load_ontology_dir, merge_ontologies
from triplekit.pipeline import (
    RunConfig,
    export_report,
    run_extraction,
    run_judge_eval,
    run_reference_eval,
)
from triplekit.prompts import (
    PARAGRAPH,
    SENTENCE,
    Demonstration,
    Strategy,
    generate_prompt_set,
    retrieve_demonstration,
)
from triplekit.simulate import position_biased_judge
from triplekit.triples import (
    Triple,
    TripleSet,
    canonical_serialize,
    normalize_text,
    parse_triple_line,
    read_triple_sets,
)

TOL = 1e-9


@contextmanager
def verdict(label, budget=None):
    """Print exactly one PASS/FAIL line for the wrapped block."""
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        if budget is not None:
            assert elapsed < budget, f"{label}: {elapsed:.2f}s over the {budget:.0f}s budget"
    except BaseException:
        print(f"FAIL  {label}")
        raise
    print(f"PASS  {label} ({elapsed:.2f}s)")


WORDS = (
    "area team survey mine device village district clearance sector report "
    "land road school bridge unit field hazard record province task map"
).split()


# --- 1. triple grammar -------------------------------------------------------

def _random_field(rng):
    parts = []
    for _ in range(rng.randint(1, 4)):
        roll = rng.random()
        if roll < 0.15:
            # thousands separators must survive the comma split
            parts.append(f"{rng.randint(1, 999)},{rng.randint(0, 999):03d}")
        elif roll < 0.30:
            inner = " ".join(rng.sample(WORDS, rng.randint(1, 2)))
            parts.append(f"({inner})")
        elif roll < 0.40:
            # a comma inside parentheses sits at depth 1, never splits
            parts.append(f"({rng.choice(WORDS)}, {rng.choice(WORDS)})")
        elif roll < 0.50:
            parts.append(f"{rng.choice(WORDS)}/{rng.choice(WORDS)}")
        else:
            parts.append(rng.choice(WORDS))
    return " ".join(parts)


def _random_relation(rng):
    first = rng.choice(string.ascii_letters)
    rest = "".join(
        rng.choice(string.ascii_letters + string.digits + "_")
        for _ in range(rng.randint(2, 12))
    )
    return first + rest


def test_triple_grammar_edge_cases_and_round_trip():
    with verdict("1 triple grammar: edge-case lines parse, 1000 round trips lossless", budget=1.0):
        cases = [
            (
                "CausedBy(infrastructure damage, old wartime munitions)",
                ("CausedBy", "infrastructure damage", "old wartime munitions"),
            ),
            (
                "hasReliabilityInfo(2,500,011 square meters, landmine/ERW affected areas)",
                ("hasReliabilityInfo", "2,500,011 square meters", "landmine/ERW affected areas"),
            ),
            (
                "hasAccidentOrganisationInfo(Quality of Life Survey (QLS), "
                "Department of Victim Assistance of CMAA)",
                (
                    "hasAccidentOrganisationInfo",
                    "Quality of Life Survey (QLS)",
                    "Department of Victim Assistance of CMAA",
                ),
            ),
        ]
        for line, fields in cases:
            parsed = parse_triple_line(line)
            assert parsed is not None, line
            assert (parsed.relation, parsed.subject, parsed.object) == fields

        rng = random.Random(20260823)
        for _ in range(1000):
            triple = Triple(
                relation=_random_relation(rng),
                subject=_random_field(rng),
                object=_random_field(rng),
            )
            parsed = parse_triple_line(triple.render())
            assert parsed is not None, triple.render()
            assert (parsed.relation, parsed.subject, parsed.object) == (
                triple.relation,
                triple.subject,
                triple.object,
            )


# --- 2. hallucination flags vs a window scanner ------------------------------

def _window_run(needle, haystack):
    """Contiguous-run containment by brute-force window comparison."""
    n = len(needle)
    return any(haystack[i : i + n] == needle for i in range(len(haystack) - n + 1))


def _scanner_flags(triple, context, ontology):
    hay = normalize_text(context).split()

    def ungrounded(text):
        tokens = normalize_text(text).split()
        return not tokens or not _window_run(tokens, hay)

    relations = {r.casefold() for r in ontology.relation_types}
    return (
        ungrounded(triple.subject),
        triple.relation.casefold() not in relations,
        ungrounded(triple.object),
    )


def _random_grounding_case(rng, ontology):
    ctx_words = [rng.choice(WORDS) for _ in range(rng.randint(8, 40))]
    if rng.random() < 0.3:
        ctx_words.insert(rng.randrange(len(ctx_words)), f"{rng.randint(1, 99)},{rng.randint(0, 999):03d}")
    context = " ".join(ctx_words)

    def field():
        roll = rng.random()
        if roll < 0.35:
            i = rng.randrange(len(ctx_words))
            j = min(len(ctx_words), i + rng.randint(1, 4))
            return " ".join(ctx_words[i:j])
        if roll < 0.50:
            # same tokens, different order: scattered, not a run
            picked = rng.sample(ctx_words, min(3, len(ctx_words)))
            return " ".join(picked)
        if roll < 0.65:
            i = rng.randrange(len(ctx_words))
            return ctx_words[i].rstrip("s") + "s"
        if roll < 0.75:
            return "..."
        return " ".join(rng.choice(("zurvan", "outworld", "qho")) for _ in range(rng.randint(1, 2)))

    in_relation = rng.random() < 0.6
    relation = rng.choice(sorted(ontology.relation_types)) if in_relation else "inventedRel"
    if in_relation and rng.random() < 0.5:
        relation = relation.upper()
    return Triple(relation=relation, subject=field(), object=field()), context


def test_hallucination_flags_match_window_scanner():
    with verdict("2 hallucination: 200 randomized cases agree with window scanner", budget=5.0):
        ontology = Ontology(
            name="toy",
            entity_types=frozenset({"Thing"}),
            relation_types=frozenset({"hasLocation", "clearedBy", "reports"}),
        )
        rng = random.Random(4)
        disagreements = 0
        for _ in range(200):
            triple, context = _random_grounding_case(rng, ontology)
            flags = hallucination_assess(triple, context, ontology)
            got = (flags.subject_flag, flags.relation_flag, flags.object_flag)
            if got != _scanner_flags(triple, context, ontology):
                disagreements += 1
        assert disagreements == 0


# --- 3. overlap metric hand values -------------------------------------------

def test_accuracy_metrics_match_hand_values():
    with verdict("3 metrics: 12 hand-computed pairs within 1e-9, identity and disjoint limits"):
        eps = 1e-9
        # BLEU, smoothing written out: p_n = (clipped + eps) / (total + eps)
        long_floor = (
            (10 + eps) * (9 + eps) * (8 + eps) * (7 + eps)
            / ((11 + eps) * (10 + eps) * (9 + eps) * (8 + eps))
        ) ** 0.25
        disjoint_floor = (
            (eps / (3 + eps)) * (eps / (2 + eps)) * (eps / (1 + eps)) * eps
        ) ** 0.25
        eleven = " ".join("abcdefghijk")
        ten = " ".join("abcdefghij")
        pairs = [
            (bleu_score, "the cat sat on the mat", "the cat is on the mat", 0.002540663741143586),
            (bleu_score, "the team cleared mines", "the team cleared mines near the old bridge", math.exp(-1.0)),
            (bleu_score, ten, eleven, math.exp(1.0 - 11 / 10)),
            (bleu_score, eleven, ten, long_floor),
            (bleu_score, "x y z", "p q r", disjoint_floor),
            (rouge_l_score, "a b c d e f", "a b x c d y e f", 6 / 7),
            (rouge_l_score, "the cat sat", "the cat sat on the mat", 2 / 3),
            (
                meteor_score,
                "the team cleared mines near the village yesterday",
                "the team cleared landmines near the village",
                0.8294209702660407,
            ),
            # two stem matches, one chunk: 1 - 0.5 * (1/2)^3
            (meteor_score, "cleared mines", "clearing mine", 0.9375),
            (
                meteor_score,
                "one two three four five six seven eight nine ten",
                "one two three four five six seven eight nine ten",
                1.0 - 0.5 * (1 / 10) ** 3,
            ),
        ]
        for fn, cand, ref, expected in pairs:
            assert fn(cand, ref) == pytest.approx(expected, abs=TOL), (fn.__name__, cand)

        # unit vectors at 0, 90, and 45 degrees: F1 = (2 + sqrt(2)) / 4
        class ToyProvider:
            table = {"a": (1.0, 0.0), "b": (0.0, 1.0), "c": (math.sqrt(0.5), math.sqrt(0.5))}

            def vector(self, token):
                return self.table[token]

        got = embedding_similarity_score("a b", "a c", ToyProvider())
        assert got == pytest.approx((2 + math.sqrt(2)) / 4, abs=TOL)
        provider = HashingEmbeddingProvider(dim=8)
        assert embedding_similarity_score("mine field", "mine field", provider) == pytest.approx(1.0, abs=TOL)

        text = "clearance teams removed forty seven devices"
        assert bleu_score(text, text) == 1.0
        assert rouge_l_score(text, text) == 1.0
        assert meteor_score(text, text) == pytest.approx(1.0 - 0.5 * (1 / 6) ** 3, abs=TOL)
        assert bleu_score("x y z", "p q r") <= disjoint_floor + TOL
        assert rouge_l_score("a b", "c d") == 0.0
        assert meteor_score("aaa bbb", "ccc ddd") == 0.0


# --- 4. combined score -------------------------------------------------------

def _vector(b, r, m, e, h, f=1.0):
    return MetricVector(
        bleu=b, rouge_l=r, meteor=m, embed_sim=e, hallucination_rate=h, format_conformance=f
    )


FIVE_CONFIGS = {
    "c1": _vector(0.2, 0.3, 0.25, 0.5, 0.10),
    "c2": _vector(0.4, 0.5, 0.45, 0.7, 0.05),
    "c3": _vector(0.6, 0.6, 0.55, 0.8, 0.20),
    "c4": _vector(0.8, 0.7, 0.65, 0.85, 0.0),
    "c5": _vector(0.1, 0.2, 0.15, 0.45, 0.40),
}
FIVE_CONFIGS_EXPECTED = {
    "c1": 28.357142857142858,
    "c2": 62.57142857142857,
    "c3": 73.78571428571429,
    "c4": 100.0,
    "c5": 0.0,
}
ACCURACY_NAMES = ("bleu", "rouge_l", "meteor", "embed_sim")


def _hand_combined(matrix):
    keys = list(matrix)
    out = {}
    columns = {}
    for name in ACCURACY_NAMES + ("hallucination_rate",):
        values = [getattr(matrix[k], name) for k in keys]
        lo, hi = min(values), max(values)
        columns[name] = [0.5 if hi == lo else (v - lo) / (hi - lo) for v in values]
    for i, key in enumerate(keys):
        parts = [columns[name][i] for name in ACCURACY_NAMES]
        parts.append(1.0 - columns["hallucination_rate"][i])
        out[key] = sum(parts) / 5 * 100
    return out


def test_combined_score_matches_hand_normalization():
    with verdict("4 combined score: 5x5 matrix equals hand-normalized means within 1e-9"):
        scores = combined_scores(FIVE_CONFIGS)
        hand = _hand_combined(FIVE_CONFIGS)
        assert set(scores) == set(FIVE_CONFIGS_EXPECTED)
        for key in scores:
            assert scores[key] == pytest.approx(hand[key], abs=TOL)
            assert scores[key] == pytest.approx(FIVE_CONFIGS_EXPECTED[key], abs=TOL)

        vec = _vector(0.4, 0.5, 0.6, 0.7, 0.1)
        flat = combined_scores({"a": vec, "b": vec, "c": vec})
        assert all(score == 50.0 for score in flat.values())
        flat_columns = normalized_columns({"a": vec, "b": vec})
        assert all(v == 0.5 for column in flat_columns.values() for v in column.values())

        perturbed = {
            key: _vector(v.bleu, v.rouge_l, v.meteor, v.embed_sim, v.hallucination_rate, f=0.123)
            for key, v in FIVE_CONFIGS.items()
        }
        assert combined_scores(perturbed) == scores


# --- 5. expectation over rank histograms -------------------------------------

def test_expectation_matches_brute_force():
    with verdict("5 expectation: brute-force rank-weighted mean within 1e-12"):
        rng = random.Random(11)
        for _ in range(50):
            mu = rng.randint(2, 6)
            models = [f"m{i}" for i in range(mu)]
            histogram = RankHistogram(models, mu)
            tally = {m: [0] * (mu + 1) for m in models}
            for _ in range(rng.randint(1, 12)):
                order = models[:]
                rng.shuffle(order)
                ranking = {model: rank for rank, model in enumerate(order, start=1)}
                histogram.add(ranking)
                for model, rank in ranking.items():
                    tally[model][rank] += 1
            scores = expectation_score(histogram)
            for model in models:
                numerator = sum(rank * count for rank, count in enumerate(tally[model]))
                denominator = sum(tally[model])
                assert scores[model] == pytest.approx(numerator / denominator, abs=1e-12)

        pinned = RankHistogram(["w", "x", "y"], 3)
        pinned.add({"w": 1, "x": 2, "y": 3})
        pinned.add({"w": 1, "x": 3, "y": 2})
        assert expectation_score(pinned)["w"] == 1.0

        for mu in (3, 4, 5):
            models = [f"m{i}" for i in range(mu)]
            uniform = RankHistogram(models, mu)
            for shift in range(mu):
                uniform.add({m: (i + shift) % mu + 1 for i, m in enumerate(models)})
            scores = expectation_score(uniform)
            assert all(s == pytest.approx((mu + 1) / 2, abs=1e-12) for s in scores.values())


# --- 6. rank correlations ----------------------------------------------------

def _pair_counted(a, b):
    models = sorted(a)
    n = len(models)
    d_squared = sum((a[m] - b[m]) ** 2 for m in models)
    rho = 1.0 - (6 * d_squared) / (n * (n * n - 1))
    concordant = discordant = 0
    for x, y in combinations(models, 2):
        product = (a[x] - a[y]) * (b[x] - b[y])
        if product > 0:
            concordant += 1
        elif product < 0:
            discordant += 1
    tau = (concordant - discordant) / (n * (n - 1) // 2)
    return rho, tau


def test_correlations_match_pair_counting():
    with verdict("6 correlations: anchors exact, 100 random pairs match pair counting"):
        identity = {f"m{i}": i for i in range(1, 6)}
        reversed_ = {f"m{i}": 6 - i for i in range(1, 6)}
        result = rank_correlations(identity, identity)
        assert (result.spearman_rho, result.kendall_tau) == (1.0, 1.0)
        result = rank_correlations(identity, reversed_)
        assert (result.spearman_rho, result.kendall_tau) == (-1.0, -1.0)
        swapped = dict(identity)
        swapped["m2"], swapped["m3"] = swapped["m3"], swapped["m2"]
        result = rank_correlations(identity, swapped)
        assert (result.spearman_rho, result.kendall_tau) == (0.9, 0.8)

        rng = random.Random(6)
        for _ in range(100):
            n = rng.randint(2, 8)
            models = [f"m{i}" for i in range(n)]
            first, second = list(range(1, n + 1)), list(range(1, n + 1))
            rng.shuffle(first)
            rng.shuffle(second)
            a = dict(zip(models, first))
            b = dict(zip(models, second))
            rho, tau = _pair_counted(a, b)
            result = rank_correlations(a, b)
            assert result.spearman_rho == rho
            assert result.kendall_tau == tau


# --- 7. position-bias mitigation ---------------------------------------------

def test_shuffling_neutralizes_a_position_biased_judge():
    with verdict("7 bias: basic judging pins slot order, shuffling flattens it", budget=10.0):
        models = [f"m{i}" for i in range(1, 6)]
        prompts = [f"bias:{i:04d}" for i in range(200)]
        candidate_sets = [
            CandidateSet(
                prompt_id=pid,
                answers=tuple(
                    (
                        mid,
                        TripleSet(
                            prompt_id=pid,
                            triples=(Triple(relation="rel", subject=f"s {mid}", object=f"o {mid}"),),
                        ),
                    )
                    for mid in models
                ),
            )
            for pid in prompts
        ]
        contexts = {pid: "ctx" for pid in prompts}
        ontology = Ontology(
            name="toy", entity_types=frozenset({"Thing"}), relation_types=frozenset({"rel"})
        )
        gateway = LLMGateway(
            mode="live", provider=lambda req: position_biased_judge("", req.prompt_text)
        )

        basic = judge_round(
            candidate_sets, contexts, ontology, JudgeMethod.BASIC, "biased-judge", gateway, seed=0
        )
        assert basic.expectation == {f"m{i}": float(i) for i in range(1, 6)}

        fair = judge_round(
            candidate_sets,
            contexts,
            ontology,
            JudgeMethod.RANDOMIZED_FAIR,
            "biased-judge",
            gateway,
            seed=0,
        )
        assert len(fair.verdicts) == 200 and not fair.warnings
        for expected, got in zip((2.95, 3.03, 3.13, 2.85, 3.04), (fair.expectation[m] for m in models)):
            assert got == pytest.approx(expected, abs=1e-12)
        assert all(abs(score - 3.0) <= 0.25 for score in fair.expectation.values())
        for v in fair.verdicts.values():
            # the judge ranked slots in order, so de-shuffling must send
            # the model shown in slot k to rank k, for every trial
            assert all(v.ranking[v.shuffle_map[slot]] == slot for slot in v.shuffle_map)


# --- 8. demonstration retrieval ----------------------------------------------

def _padded_contains(inner, outer):
    if not inner:
        return True
    return f" {inner} " in f" {outer} "


def _exhaustive_retrieve(pool, ontology_name, context, granularity):
    target = normalize_text(context)
    survivors = []
    for demo in pool:
        if demo.ontology_name != ontology_name or demo.granularity != granularity:
            continue
        text = normalize_text(demo.context)
        if _padded_contains(text, target) or _padded_contains(target, text):
            continue
        survivors.append(demo)
    if not survivors:
        return None
    return min(survivors, key=lambda d: (d.length, d.context, d.demo_id))


def _random_pool_case(rng, case_index):
    target_words = [rng.choice(WORDS) for _ in range(rng.randint(6, 20))]
    context = " ".join(target_words)
    granularity = rng.choice((SENTENCE, PARAGRAPH))
    pool = []
    for _ in range(rng.randint(3, 10)):
        demo_words = [rng.choice(WORDS) for _ in range(rng.randint(2, 25))]
        if rng.random() < 0.2:
            # embed the whole target so the demo contains it
            at = rng.randrange(len(demo_words) + 1)
            demo_words[at:at] = target_words
        pool.append(
            Demonstration(
                context=" ".join(demo_words),
                answer=(Triple(relation="rel", subject=rng.choice(WORDS), object=rng.choice(WORDS)),),
                ontology_name=rng.choice(("ont-a", "ont-b")),
                granularity=rng.choice((SENTENCE, PARAGRAPH)),
            )
        )
    if case_index % 2 == 0:
        # force the shortest eligible demo to overlap: a short slice of
        # the target always loses despite winning on length
        start = rng.randrange(len(target_words) - 1)
        pool.append(
            Demonstration(
                context=" ".join(target_words[start : start + 2]),
                answer=(Triple(relation="rel", subject="a", object="b"),),
                ontology_name="ont-a",
                granularity=granularity,
            )
        )
    return pool, context, granularity


def test_retrieval_matches_exhaustive_scan():
    with verdict("8 retrieval: 500 randomized pools match the exhaustive-scan pick"):
        rng = random.Random(8)
        for case_index in range(500):
            pool, context, granularity = _random_pool_case(rng, case_index)
            expected = _exhaustive_retrieve(pool, "ont-a", context, granularity)
            if expected is None:
                with pytest.raises(NoEligibleDemonstration):
                    retrieve_demonstration(pool, "ont-a", context, granularity)
            else:
                got = retrieve_demonstration(pool, "ont-a", context, granularity)
                assert got.demo_id == expected.demo_id, case_index


# --- 9. prompt-set cardinality -----------------------------------------------

def test_prompt_set_cardinality():
    with verdict("9 prompt set: 360 chunks x 7 templates yield 2520 unique prompts", budget=10.0):
        ontologies = {}
        templates = []
        for i in range(7):
            ontology = Ontology(
                name=f"ont{i}",
                entity_types=frozenset({"Thing", f"Kind{i}"}),
                relation_types=frozenset({f"rel{i}", "links"}),
            )
            ontologies[ontology.name] = ontology
            templates.append(default_template(ontology))
        rng = random.Random(9)
        chunks = []
        for d in range(12):
            doc_id = f"doc{d:02d}"
            for ordinal in range(30):
                text = f"{doc_id} part {ordinal} " + " ".join(
                    rng.choice(WORDS) for _ in range(12)
                )
                chunks.append(
                    Chunk(
                        chunk_id=f"{doc_id}:{ordinal:04d}",
                        doc_id=doc_id,
                        ordinal=ordinal,
                        text=text,
                        word_count=len(text.split()),
                    )
                )
        assert len(chunks) == 360

        prompts = generate_prompt_set(chunks, templates, ontologies, Strategy.ZERO_SHOT)
        assert len(prompts) == 2520
        assert len({p.prompt_id for p in prompts}) == 2520
        assert len({(p.chunk_id, p.template_id) for p in prompts}) == 2520
        assert len({p.rendered_text for p in prompts}) == 2520


# --- 10. agreement coefficients ----------------------------------------------

def _identity_set(prompt_id, indices):
    return TripleSet(
        prompt_id=prompt_id,
        triples=tuple(
            Triple(relation=f"r{i}", subject=f"s {i}", object=f"o {i}") for i in sorted(indices)
        ),
    )


def test_agreement_coefficients():
    with verdict("10 agreement: {a,b}/{b,c} gives (1/3, 1/2, 1/2); ordering holds on 1000 pairs"):
        result = agreement_metrics(_identity_set("p", {1, 2}), _identity_set("p", {2, 3}))
        assert (result.jaccard, result.dice, result.overlap) == (1 / 3, 1 / 2, 1 / 2)
        same = agreement_metrics(_identity_set("p", {1, 2, 3}), _identity_set("p", {1, 2, 3}))
        assert (same.jaccard, same.dice, same.overlap) == (1.0, 1.0, 1.0)
        disjoint = agreement_metrics(_identity_set("p", {1, 2}), _identity_set("p", {3, 4}))
        assert (disjoint.jaccard, disjoint.dice, disjoint.overlap) == (0.0, 0.0, 0.0)

        rng = random.Random(10)
        for _ in range(1000):
            a = {i for i in range(15) if rng.random() < 0.4}
            b = {i for i in range(15) if rng.random() < 0.4}
            result = agreement_metrics(_identity_set("p", a), _identity_set("p", b))
            assert result.overlap >= result.dice >= result.jaccard
            assert 0.0 <= result.jaccard <= 1.0


# --- 11. replay determinism --------------------------------------------------

def _stage_all(config, run_dir):
    run_extraction(config, run_dir)
    run_reference_eval(config, run_dir)
    run_judge_eval(config, run_dir)
    export_report(run_dir)


def test_replay_runs_are_byte_identical(fixtures_dir, tmp_path):
    with verdict("11 determinism: two replay runs produce byte-identical trees", budget=30.0):
        config = RunConfig.from_file(fixtures_dir / "run.cfg")
        run_dirs = []
        for name in ("first", "second"):
            run_dir = tmp_path / name
            run_dir.mkdir()
            _stage_all(config, run_dir)
            run_dirs.append(run_dir)
        first, second = run_dirs
        first_files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
        second_files = sorted(p.relative_to(second) for p in second.rglob("*") if p.is_file())
        assert first_files == second_files
        assert len(first_files) > 10
        for rel in first_files:
            assert (first / rel).read_bytes() == (second / rel).read_bytes(), rel


# --- 12. self-evaluation sanity ----------------------------------------------

def test_reference_scores_perfectly_against_itself(fixtures_dir, tmp_path):
    with verdict("12 self-evaluation: reference vs itself is perfect and fully grounded"):
        config = RunConfig.from_file(fixtures_dir / "run.cfg")
        run_extraction(config, tmp_path)
        chunk_text = {}
        with open(tmp_path / "chunks.jsonl", encoding="utf-8") as handle:
            for line in handle:
                record = json.loads(line)
                chunk_text[record["chunk_id"]] = record["text"]

        references = read_triple_sets(fixtures_dir / "reference.jsonl")
        assert references and all(ts.triples for ts in references)
        samples = [
            EvalSample(
                prompt_id=ts.prompt_id,
                context=chunk_text[ts.prompt_id.rsplit("__", 1)[0]],
                candidate=ts,
                reference=ts,
            )
            for ts in references
        ]
        ontology = merge_ontologies(load_ontology_dir(fixtures_dir / "ont"))
        result = evaluate_configuration(samples, ontology, HashingEmbeddingProvider(dim=16))

        metrics = result.metrics
        assert metrics.bleu == 1.0
        assert metrics.rouge_l == 1.0
        assert metrics.embed_sim == 1.0
        expected_meteor = fmean(
            1.0 - 0.5 * (1.0 / len(normalize_text(canonical_serialize(ts)).split())) ** 3
            for ts in references
        )
        assert metrics.meteor == pytest.approx(expected_meteor, abs=TOL)
        assert metrics.hallucination_rate == 0.0
        assert metrics.format_conformance == 1.0
        assert result.skipped_prompts == 0
