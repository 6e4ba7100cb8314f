"""Judge prompts, verdict parsing, rank statistics, and the judging round."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from triplekit.errors import (
    AllVerdictsMalformed,
    EmptyHistogram,
    MalformedVerdict,
    MismatchedModels,
    MissingVerdict,
)
from triplekit.gateway import LLMGateway
from triplekit.judge import (
    CandidateSet,
    CriterionScores,
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
    write_correlation_table,
    write_verdicts,
)
from triplekit.ontology import Ontology
from triplekit.triples import Triple, TripleSet

ONTOLOGY = Ontology(
    name="toy",
    entity_types=frozenset({"Organisation", "Location"}),
    relation_types=frozenset({"hasLocation"}),
)


def _answer(model_id, prompt_id="p1"):
    return TripleSet(
        prompt_id=prompt_id,
        triples=(Triple(relation="hasLocation", subject=f"site {model_id}", object=model_id),),
    )


def _candidates(model_ids, prompt_id="p1"):
    return CandidateSet(
        prompt_id=prompt_id,
        answers=tuple((m, _answer(m, prompt_id)) for m in model_ids),
    )


class TestJudgeMethod:
    @pytest.mark.parametrize(
        "text, member",
        [
            ("basic", JudgeMethod.BASIC),
            ("Fair", JudgeMethod.FAIR),
            ("randomized-fair", JudgeMethod.RANDOMIZED_FAIR),
            (" RANDOMIZED_FAIR ", JudgeMethod.RANDOMIZED_FAIR),
        ],
    )
    def test_parse(self, text, member):
        assert JudgeMethod.parse(text) is member

    def test_parse_rejects_unknown(self):
        with pytest.raises(ValueError):
            JudgeMethod.parse("strict")


class TestCandidateSet:
    def test_needs_two_distinct_models(self):
        with pytest.raises(ValueError):
            _candidates(["only"])
        with pytest.raises(ValueError):
            CandidateSet(prompt_id="p", answers=(("m", _answer("m")), ("m", _answer("m"))))

    def test_properties(self):
        cs = _candidates(["m1", "m2", "m3"])
        assert cs.model_ids == ("m1", "m2", "m3")
        assert cs.mu == 3


class TestPromptTemplates:
    def test_basic_prompt_shape(self):
        cs = _candidates(["m1", "m2"])
        text, shuffle_map = build_judge_prompt(JudgeMethod.BASIC, ONTOLOGY, "ctx text", cs)
        assert shuffle_map is None
        assert text.endswith("Your ranking:")
        assert "[1: model x; 2: model x]" in text
        assert "Ranking Criteria:" in text
        assert "ranks 2 models from 1 to 2" in text
        assert "Model 1 Output:\nhasLocation(site m1, m1)" in text
        assert "Model 2 Output:\nhasLocation(site m2, m2)" in text
        assert "Context:\nctx text" in text
        assert "Entity Types:\nLocation, Organisation" in text

    def test_fair_prompt_shape(self):
        cs = _candidates(["m1", "m2", "m3"])
        text, shuffle_map = build_judge_prompt(JudgeMethod.FAIR, ONTOLOGY, "ctx", cs)
        assert shuffle_map is None
        assert text.endswith("Your evaluation and ranking:")
        assert "Provide your output strictly in this format:" in text
        assert "[1: Model X; 2: Model X; 3: Model X]" in text
        assert (
            "Model 1: Correctness = X, Relevance = X, Coverage = X, Total = Y\n"
            "Model 2: Correctness = X, Relevance = X, Coverage = X, Total = Y\n"
            "Model 3: Correctness = X, Relevance = X, Coverage = X, Total = Y"
        ) in text
        assert "Break ties by prioritizing Correctness first, then Relevance, and finally Coverage." in text
        assert "without any positional bias" in text

    def test_empty_answer_renders_placeholder(self):
        cs = CandidateSet(
            prompt_id="p1",
            answers=(("m1", TripleSet(prompt_id="p1", triples=())), ("m2", _answer("m2"))),
        )
        text, _ = build_judge_prompt(JudgeMethod.BASIC, ONTOLOGY, "ctx", cs)
        assert "Model 1 Output:\n(no triples)" in text

    def test_identity_permutation_matches_fair_text(self):
        cs = _candidates(["m1", "m2", "m3"])
        fair_text, _ = build_judge_prompt(JudgeMethod.FAIR, ONTOLOGY, "ctx", cs)
        rand_text, shuffle_map = build_judge_prompt(
            JudgeMethod.RANDOMIZED_FAIR, ONTOLOGY, "ctx", cs, permutation=[0, 1, 2]
        )
        assert rand_text == fair_text
        assert shuffle_map == {1: "m1", 2: "m2", 3: "m3"}

    def test_explicit_permutation_reorders_slots(self):
        cs = _candidates(["m1", "m2", "m3"])
        text, shuffle_map = build_judge_prompt(
            JudgeMethod.RANDOMIZED_FAIR, ONTOLOGY, "ctx", cs, permutation=[2, 0, 1]
        )
        assert shuffle_map == {1: "m3", 2: "m1", 3: "m2"}
        assert "Model 1 Output:\nhasLocation(site m3, m3)" in text

    def test_bad_permutation_rejected(self):
        cs = _candidates(["m1", "m2"])
        with pytest.raises(ValueError):
            build_judge_prompt(
                JudgeMethod.RANDOMIZED_FAIR, ONTOLOGY, "ctx", cs, permutation=[0, 0]
            )


class TestShuffle:
    def test_frozen_permutations(self):
        assert shuffle_permutation(0, "p1", 5) == [3, 1, 2, 4, 0]
        assert shuffle_permutation(1, "p1", 5) == [0, 4, 2, 1, 3]

    def test_deterministic_and_seed_sensitive(self):
        assert shuffle_permutation(7, "x", 6) == shuffle_permutation(7, "x", 6)
        results = {tuple(shuffle_permutation(s, "x", 6)) for s in range(10)}
        assert len(results) > 1

    @given(st.integers(0, 1000), st.text(min_size=1, max_size=8), st.integers(2, 8))
    def test_always_a_permutation(self, seed, prompt_id, mu):
        assert sorted(shuffle_permutation(seed, prompt_id, mu)) == list(range(mu))


class TestParseVerdict:
    MODELS = ("m1", "m2", "m3")

    def _parse(self, raw, shuffle_map=None):
        return parse_verdict(raw, shuffle_map, 3, self.MODELS, prompt_id="p1")

    def test_bare_bracket(self):
        verdict = self._parse("[1: Model 2; 2: Model 1; 3: Model 3]")
        assert verdict.ranking == {"m2": 1, "m1": 2, "m3": 3}

    def test_tolerates_case_spacing_and_separators(self):
        verdict = self._parse("[ 1 - model 3 ;2:MODEL 1; 3 . Model 2 ]")
        assert verdict.ranking == {"m3": 1, "m1": 2, "m2": 3}

    def test_prefers_last_bracket_after_ranking_label(self):
        raw = (
            "[1: Model 1; 2: Model 2; 3: Model 3] is my draft.\n"
            "Ranking:\n[1: Model 3; 2: Model 2; 3: Model 1]"
        )
        verdict = self._parse(raw)
        assert verdict.ranking == {"m3": 1, "m2": 2, "m1": 3}

    def test_falls_back_to_last_parseable_bracket(self):
        raw = "notes [unrelated] more\n[1: Model 2; 2: Model 3; 3: Model 1]"
        verdict = self._parse(raw)
        assert verdict.ranking == {"m2": 1, "m3": 2, "m1": 3}

    def test_shuffle_map_restores_model_space(self):
        shuffle_map = {1: "m3", 2: "m1", 3: "m2"}
        verdict = parse_verdict(
            "[1: Model 1; 2: Model 2; 3: Model 3]",
            shuffle_map,
            3,
            self.MODELS,
            method=JudgeMethod.RANDOMIZED_FAIR,
        )
        assert verdict.ranking == {"m3": 1, "m1": 2, "m2": 3}
        assert verdict.shuffle_map == shuffle_map

    def test_scores_parsed_into_model_space(self):
        raw = (
            "Evaluation:\n"
            "Model 1: Correctness = 8, Relevance = 7, Coverage = 6, Total = 21\n"
            "Model 2: Correctness = 5, Relevance = 5, Coverage = 4, Total = 14\n"
            "Model 3: Correctness = 2, Relevance = 3, Coverage = 1, Total = 6\n"
            "Ranking:\n[1: Model 1; 2: Model 2; 3: Model 3]"
        )
        verdict = self._parse(raw)
        assert verdict.scores["m1"] == CriterionScores(8.0, 7.0, 6.0, 21.0)
        assert verdict.scores["m3"].total == 6.0

    @pytest.mark.parametrize(
        "raw",
        [
            "no bracket at all",
            "[1: Model 1; 2: Model 2]",  # wrong count
            "[1: Model 1; 1: Model 2; 3: Model 3]",  # duplicate rank
            "[1: Model 1; 2: Model 1; 3: Model 3]",  # duplicate slot
            "[1: Model 1; 2: Model 9; 3: Model 3]",  # slot out of range
            "[first: Model 1; second: Model 2; third: Model 3]",
        ],
    )
    def test_malformed(self, raw):
        with pytest.raises(MalformedVerdict):
            self._parse(raw)

    def test_model_ids_must_match_mu(self):
        with pytest.raises(ValueError):
            parse_verdict("[1: Model 1; 2: Model 2]", None, 2, ("m1",))

    def test_raw_excerpt_keeps_the_tail(self):
        raw = "x" * 500 + "\nRanking:\n[1: Model 1; 2: Model 2; 3: Model 3]"
        verdict = self._parse(raw)
        assert len(verdict.raw_excerpt) == 400
        assert verdict.raw_excerpt.endswith("Model 3]")


class TestJudgeVerdict:
    def test_ranking_must_be_permutation(self):
        with pytest.raises(ValueError):
            JudgeVerdict(
                prompt_id="p",
                method=JudgeMethod.BASIC,
                judge_model="j",
                ranking={"a": 1, "b": 3},
            )

    def test_randomized_fair_requires_shuffle_map(self):
        with pytest.raises(ValueError):
            JudgeVerdict(
                prompt_id="p",
                method=JudgeMethod.RANDOMIZED_FAIR,
                judge_model="j",
               ranking={"a": 1, "b": 2},
            )


@given(
    st.integers(0, 500),
    st.sampled_from(["pA", "pB", "pC"]),
    st.integers(2, 5),
)
def test_shuffled_prompt_round_trips_a_known_preference(seed, prompt_id, mu):
    """A judge that recognizes outputs by content must be immune to shuffling."""
    model_ids = [f"m{i}" for i in range(1, mu + 1)]
    cs = _candidates(model_ids, prompt_id)
    preference = sorted(model_ids, reverse=True)
    text, shuffle_map = build_judge_prompt(
        JudgeMethod.RANDOMIZED_FAIR, ONTOLOGY, "ctx", cs, seed=seed
    )
    slot_of = {model: slot for slot, model in shuffle_map.items()}
    # Respond like a judge that finds each model's payload in its slot.
    entries = "; ".join(
        f"{rank}: Model {slot_of[model]}" for rank, model in enumerate(preference, start=1)
    )
    verdict = parse_verdict(
        f"Ranking:\n[{entries}]",
        shuffle_map,
        mu,
        cs.model_ids,
        method=JudgeMethod.RANDOMIZED_FAIR,
    )
    assert verdict.ranking == {model: rank for rank, model in enumerate(preference, start=1)}
    for slot in range(1, mu + 1):
        payload = f"Model {slot} Output:\nhasLocation(site {shuffle_map[slot]}, {shuffle_map[slot]})"
        assert payload in text


class TestRankHistogram:
    def test_add_and_expectation_brute_force(self):
        rankings = [
            {"a": 1, "b": 2, "c": 3},
            {"a": 2, "b": 1, "c": 3},
            {"a": 1, "b": 3, "c": 2},
            {"a": 3, "b": 1, "c": 2},
        ]
        histogram = RankHistogram(["a", "b", "c"], 3)
        for ranking in rankings:
            histogram.add(ranking)
        expected = {
            m: sum(r[m] for r in rankings) / len(rankings) for m in ("a", "b", "c")
        }
        assert expectation_score(histogram) == expected
        assert histogram.verdict_count == 4

    def test_uniform_histogram_centers_at_midpoint(self):
        mu = 4
        models = [f"m{i}" for i in range(mu)]
        histogram = RankHistogram(models, mu)
        for shift in range(mu):
            histogram.add(
                {models[i]: ((i + shift) % mu) + 1 for i in range(mu)}
            )
        scores = expectation_score(histogram)
        assert all(v == (mu + 1) / 2 for v in scores.values())

    def test_mismatched_models_rejected(self):
        histogram = RankHistogram(["a", "b"], 2)
        with pytest.raises(MismatchedModels):
            histogram.add({"a": 1, "c": 2})

    def test_rank_out_of_range_rejected(self):
        histogram = RankHistogram(["a", "b"], 2)
        with pytest.raises(ValueError):
            histogram.add({"a": 1, "b": 3})

    def test_duplicate_model_ids_rejected(self):
        with pytest.raises(ValueError):
            RankHistogram(["a", "a"], 2)

    def test_empty_histogram_errors(self):
        with pytest.raises(EmptyHistogram):
            expectation_score(RankHistogram([], 0))
        with pytest.raises(EmptyHistogram):
            expectation_score(RankHistogram(["a", "b"], 2))

    def test_expectation_ranking_breaks_ties_on_id(self):
        histogram = RankHistogram(["b", "a"], 2)
        histogram.add({"a": 1, "b": 2})
        histogram.add({"a": 2, "b": 1})
        assert expectation_ranking(histogram) == {"a": 1, "b": 2}


class TestCorrelations:
    def test_identity_and_reversal(self):
        a = {f"m{i}": i for i in range(1, 6)}
        rev = {f"m{i}": 6 - i for i in range(1, 6)}
        same = rank_correlations(a, a)
        assert (same.spearman_rho, same.kendall_tau) == (1.0, 1.0)
        flipped = rank_correlations(a, rev)
        assert (flipped.spearman_rho, flipped.kendall_tau) == (-1.0, -1.0)

    def test_adjacent_swap_frozen(self):
        a = {f"m{i}": i for i in range(1, 6)}
        b = dict(a)
        b["m1"], b["m2"] = 2, 1
        result = rank_correlations(a, b)
        assert result.spearman_rho == 0.9
        assert result.kendall_tau == 0.8

    def test_pair_counting_route_agrees(self):
        import itertools
        import random

        rng = random.Random(42)
        models = [f"m{i}" for i in range(7)]
        for _ in range(50):
            ranks_a = list(range(1, 8))
            ranks_b = list(range(1, 8))
            rng.shuffle(ranks_a)
            rng.shuffle(ranks_b)
            a = dict(zip(models, ranks_a))
            b = dict(zip(models, ranks_b))
            concordant = discordant = 0
            for x, y in itertools.combinations(models, 2):
                sign = (a[x] - a[y]) * (b[x] - b[y])
                concordant += sign > 0
                discordant += sign < 0
            n = len(models)
            expected_tau = (concordant - discordant) / (n * (n - 1) // 2)
            expected_rho = 1 - 6 * sum((a[m] - b[m]) ** 2 for m in models) / (n * (n**2 - 1))
            result = rank_correlations(a, b)
            assert result.kendall_tau == expected_tau
            assert result.spearman_rho == expected_rho

    def test_validation(self):
        with pytest.raises(MismatchedModels):
            rank_correlations({"a": 1, "b": 2}, {"a": 1, "c": 2})
        with pytest.raises(ValueError):
            rank_correlations({"a": 1}, {"a": 1})
        with pytest.raises(ValueError):
            rank_correlations({"a": 1, "b": 1}, {"a": 1, "b": 2})


def _good_verdict_text(order):
    entries = "; ".join(f"{rank}: Model {slot}" for rank, slot in enumerate(order, start=1))
    return f"Ranking:\n[{entries}]"


class TestJudgeRound:
    def _run(self, provider, prompts=("p1", "p2"), method=JudgeMethod.BASIC, seed=0):
        candidate_sets = [_candidates(["m1", "m2"], p) for p in prompts]
        contexts = {p: f"context for {p}" for p in prompts}
        gateway = LLMGateway(mode="live", provider=provider)
        return judge_round(
            candidate_sets, contexts, ONTOLOGY, method, "judge-x", gateway, seed=seed
        )

    def test_clean_round(self):
        result = self._run(lambda req: _good_verdict_text([2, 1]))
        assert set(result.verdicts) == {"p1", "p2"}
        assert result.expectation == {"m1": 2.0, "m2": 1.0}
        assert result.ranking == {"m2": 1, "m1": 2}
        assert result.warnings == ()
        assert result.histogram.verdict_count == 2

    def test_one_retry_then_success(self):
        calls = []

        def flaky(request):
            calls.append(request.prompt_text)
            if len(calls) == 1:
                return "I refuse to answer in the requested format."
            return _good_verdict_text([1, 2])

        result = self._run(flaky, prompts=("p1",))
        assert set(result.verdicts) == {"p1"}
        assert len(calls) == 2
        assert result.warnings == ()

    def test_persistent_failure_skips_with_warning(self):
        def selective(request):
            if "context for p1" in request.prompt_text:
                return "never a bracket"
            return _good_verdict_text([1, 2])

        result = self._run(selective)
        assert set(result.verdicts) == {"p2"}
        assert len(result.warnings) == 1
        assert "p1" in result.warnings[0]
        assert result.histogram.verdict_count == 1

    def test_all_malformed_raises(self):
        with pytest.raises(AllVerdictsMalformed):
            self._run(lambda req: "nothing useful")

    def test_no_prompts_reaches_empty_histogram(self):
        with pytest.raises(EmptyHistogram):
            self._run(lambda req: _good_verdict_text([1, 2]), prompts=())

    def test_mixed_model_sets_rejected(self):
        sets = [_candidates(["m1", "m2"], "p1"), _candidates(["m1", "m3"], "p2")]
        gateway = LLMGateway(mode="live", provider=lambda req: _good_verdict_text([1, 2]))
        with pytest.raises(MismatchedModels):
            judge_round(
                sets, {"p1": "c", "p2": "c"}, ONTOLOGY, JudgeMethod.BASIC, "j", gateway
            )

    def test_randomized_fair_round_carries_shuffle_maps(self):
        result = self._run(
            lambda req: _good_verdict_text([1, 2]),
            prompts=("p1", "p2", "p3"),
            method=JudgeMethod.RANDOMIZED_FAIR,
        )
        for verdict in result.verdicts.values():
            assert verdict.shuffle_map is not None
            assert sorted(verdict.shuffle_map) == [1, 2]


class TestAggregation:
    def test_winners_and_union(self):
        shared = Triple(relation="hasLocation", subject="shared site", object="m1")
        cs1 = CandidateSet(
            prompt_id="p1",
            answers=(
                ("m1", TripleSet(prompt_id="p1", triples=(shared,))),
                ("m2", _answer("m2", "p1")),
            ),
        )
        cs2 = CandidateSet(
            prompt_id="p2",
            answers=(
                ("m1", TripleSet(prompt_id="p2", triples=(shared,))),
                ("m2", _answer("m2", "p2")),
            ),
        )
        verdicts = {
            "p1": JudgeVerdict("p1", JudgeMethod.BASIC, "j", {"m1": 1, "m2": 2}),
            "p2": JudgeVerdict("p2", JudgeMethod.BASIC, "j", {"m1": 1, "m2": 2}),
        }
        winners, union = aggregate_best_answers(verdicts, [cs1, cs2])
        assert winners["p1"].triples == (shared,)
        assert winners["p2"].triples == (shared,)
        assert union.triples == (shared,)  # deduplicated across prompts

    def test_missing_verdict_raises(self):
        cs = _candidates(["m1", "m2"], "p1")
        with pytest.raises(MissingVerdict):
            aggregate_best_answers({}, [cs])


class TestRankingFromScores:
    def test_higher_is_better_default(self):
        assert ranking_from_scores({"a": 0.2, "b": 0.9, "c": 0.5}) == {"b": 1, "c": 2, "a": 3}

    def test_lower_is_better(self):
        scores = {"a": 3.0, "b": 1.0, "c": 2.0}
        assert ranking_from_scores(scores, higher_is_better=False) == {"b": 1, "c": 2, "a": 3}

    def test_ties_break_lexicographically(self):
        assert ranking_from_scores({"b": 1.0, "a": 1.0}) == {"a": 1, "b": 2}


class TestPersistence:
    def test_write_verdicts_sorted_and_stable(self, tmp_path):
        verdicts = [
            JudgeVerdict("p2", JudgeMethod.BASIC, "j", {"a": 1, "b": 2}),
            JudgeVerdict(
                "p1",
                JudgeMethod.RANDOMIZED_FAIR,
                "j",
                {"a": 2, "b": 1},
                scores={"a": CriterionScores(1, 2, 3, 6)},
                shuffle_map={1: "b", 2: "a"},
            ),
        ]
        path_a, path_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_verdicts(verdicts, path_a)
        write_verdicts(list(reversed(verdicts)), path_b)
        assert path_a.read_bytes() == path_b.read_bytes()
        lines = path_a.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        assert '"prompt_id": "p1"' in lines[0]

    def test_correlation_table(self, tmp_path):
        from triplekit.judge import CorrelationResult

        path = tmp_path / "corr.csv"
        write_correlation_table(
            [("judge-x", "basic", CorrelationResult(0.9, 0.8))], path
        )
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "judge_model,method,spearman_rho,kendall_tau"
        assert lines[1] == "judge-x,basic,0.9,0.8"
