import json
import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgram_art.distances import min_distance_to_archive
from qgram_art.qgram_core import QGramCounts, TestCase, qgram_counts_of, score_candidate
from qgram_art.selectors import (
    CandidateGenerator,
    ExecutionOutcome,
    StoppingCriterion,
    breakeven_factor,
    expected_distance_calls,
    expected_diversity_evals,
    run_art_dist,
    run_art_qgram,
    run_random,
    run_strategy,
    select_argmax,
)


class ScriptedGenerator(CandidateGenerator):
    """Returns pre-set candidate batches in order."""

    def __init__(self, batches):
        self.batches = [list(b) for b in batches]
        self.i = 0

    def reset(self):
        self.i = 0

    def sample(self, count, rng):
        batch = self.batches[self.i]
        self.i += 1
        assert len(batch) == count
        return batch


class WordGenerator(CandidateGenerator):
    def __init__(self, alphabet="abcd", max_len=12):
        self.alphabet = alphabet
        self.max_len = max_len

    def sample(self, count, rng):
        return [TestCase.of(*rng.choices(self.alphabet, k=rng.randint(1, self.max_len)))
                for _ in range(count)]


class StringGen(CandidateGenerator):
    def sample(self, count, rng):
        return [TestCase.from_string("".join(rng.choices("ab", k=rng.randint(1, 20)))) for _ in range(count)]


class Pass:
    def execute(self, test):
        return ExecutionOutcome(False, frozenset())


class FailOn:
    def __init__(self, predicate):
        self.predicate = predicate

    def execute(self, test):
        return ExecutionOutcome(bool(self.predicate(test)), frozenset())


class Boom:
    def __init__(self, after):
        self.after = after
        self.n = 0

    def execute(self, test):
        self.n += 1
        if self.n > self.after:
            raise RuntimeError("driver crashed")
        return ExecutionOutcome(False, frozenset())


class TestWorkedExample:
    def test_dist_selects_w2(self, t1, w1, w2):
        gen = ScriptedGenerator([[t1], [w1, w2]])
        rec = run_art_dist(gen, Pass(), StoppingCriterion.executions(2), w_size=2, rng=0)
        assert rec.executed == [t1, w2]
        assert rec.log[1].chosen == 1 and rec.log[1].score == 3

    @pytest.mark.parametrize("mode,score", [("sequence_only", 1.5), ("sequence_plus_inputs", 2.0)])
    def test_qgram_selects_w2(self, t1, w1, w2, mode, score):
        gen = ScriptedGenerator([[t1], [w1, w2]])
        rec = run_art_qgram(gen, Pass(), StoppingCriterion.executions(2), w_size=2, mode=mode, rng=0)
        assert rec.executed == [t1, w2]
        assert rec.log[1].score == pytest.approx(score, abs=1e-9)


class TestSelectArgmax:
    def test_picks_max(self):
        assert select_argmax([("a", 1.0), ("b", 2.0)]) == (1, "b")

    def test_first_index_wins_ties(self):
        assert select_argmax([("a", 2.0), ("b", 2.0)]) == (0, "a")
        assert select_argmax([(x, 0.5) for x in "abcd"]) == (0, "a")

    def test_empty(self):
        with pytest.raises(ValueError):
            select_argmax([])


class TestCounters:
    @pytest.mark.parametrize("rho", [2, 5, 10, 50])
    @pytest.mark.parametrize("w", [1, 10, 30])
    def test_quadratic_and_linear(self, rho, w):
        stop = StoppingCriterion.executions(rho)
        d = run_art_dist(WordGenerator(), Pass(), stop, w_size=w, rng=rho)
        q = run_art_qgram(WordGenerator(), Pass(), stop, w_size=w, rng=rho)
        assert d.counters.distance_calls == w * rho * (rho - 1) // 2 == expected_distance_calls(rho, w)
        assert q.counters.diversity_evals == w * (rho - 1) == expected_diversity_evals(rho, w)
        assert d.counters.diversity_evals == 0 and q.counters.distance_calls == 0
        assert d.counters.executions == q.counters.executions == rho

    def test_random_has_no_selection_work(self):
        r = run_random(WordGenerator(), Pass(), StoppingCriterion.executions(50), rng=1)
        assert r.counters.executions == 50
        assert r.counters.distance_calls == r.counters.diversity_evals == 0


class TestInvariants:
    @pytest.mark.parametrize("strategy", ["dist", "qgram"])
    def test_w1_equals_random(self, strategy):
        stop = StoppingCriterion.executions(40)
        base = run_random(WordGenerator(), Pass(), stop, rng=11)
        other = run_strategy(strategy, WordGenerator(), Pass(), stop, rng=11, w_size=1)
        assert other.executed == base.executed

    @pytest.mark.parametrize("strategy", ["rand", "dist", "qgram"])
    def test_deterministic(self, strategy):
        stop = StoppingCriterion.executions(30)
        a = run_strategy(strategy, WordGenerator(), Pass(), stop, rng=5, w_size=8)
        b = run_strategy(strategy, WordGenerator(), Pass(), stop, rng=random.Random(5), w_size=8)
        assert a.executed == b.executed
        assert [x.chosen for x in a.log] == [x.chosen for x in b.log]

    @pytest.mark.parametrize("mode", ["sequence_only", "sequence_plus_inputs"])
    def test_aggregate_equals_recount(self, mode):
        rec = run_art_qgram(WordGenerator(), Pass(), StoppingCriterion.executions(60), w_size=5,
                            mode=mode, rng=2)
        oracle = Counter()
        for t in rec.executed:
            oracle.update(qgram_counts_of(t, 2, mode).as_dict())
        assert rec.aggregate == oracle

    def test_logged_choice_is_argmax_qgram(self):
        rec = run_art_qgram(WordGenerator(), Pass(), StoppingCriterion.executions(40), w_size=6, rng=9,
                            keep_candidates=True)
        archive = QGramCounts()
        for i, (cands, entry) in enumerate(zip(rec.candidate_sets, rec.log)):
            if i > 0:
                scores = [score_candidate(archive, c, 2, "sequence_only") for c in cands]
                best = max(scores)
                assert entry.chosen == scores.index(best)
                assert entry.score == pytest.approx(best, abs=1e-9)
            archive.update(qgram_counts_of(rec.executed[i], 2, "sequence_only"))

    def test_logged_choice_is_argmax_dist(self):
        rec = run_art_dist(WordGenerator(), Pass(), StoppingCriterion.executions(25), w_size=6, rng=9,
                           keep_candidates=True)
        for i, (cands, entry) in enumerate(zip(rec.candidate_sets, rec.log)):
            if i > 0:
                scores = [min_distance_to_archive(c, rec.executed[:i]) for c in cands]
                assert entry.chosen == scores.index(max(scores))

    @settings(max_examples=20)
    @given(st.integers(0, 10_000), st.integers(1, 6))
    def test_counters_monotone(self, seed, w):
        rec = run_art_qgram(WordGenerator(), Pass(), StoppingCriterion.executions(15), w_size=w, rng=seed)
        assert [e.candidates for e in rec.log] == [1] + [w] * 14
        assert rec.counters.wall_selection_time >= 0 and rec.counters.wall_execution_time >= 0

    def test_character_mode_inferred(self):
        rec = run_art_qgram(StringGen(), Pass(), StoppingCriterion.executions(10), w_size=3, rng=0)
        assert rec.config["mode"] == "characters"
        d = run_art_dist(StringGen(), Pass(), StoppingCriterion.executions(5), w_size=3, rng=0)
        assert d.config["mode"] == "characters"


class TestStopping:
    def test_first_failure(self):
        rec = run_random(WordGenerator(), FailOn(lambda t: len(t) == 1), StoppingCriterion.until_failure(), rng=4)
        assert rec.failed and rec.first_failure == rec.executions
        assert rec.stop_reason == "first_failure"
        assert len(rec.executed[-1]) == 1

    def test_cap_beats_failure(self):
        stop = StoppingCriterion.until_failure(cap=7)
        rec = run_random(WordGenerator(), Pass(), stop, rng=4)
        assert rec.executions == 7 and rec.stop_reason == "max_executions" and not rec.failed

    def test_combined(self):
        stop = StoppingCriterion.executions(100) | StoppingCriterion(first_failure=True)
        rec = run_random(WordGenerator(), FailOn(lambda t: True), stop, rng=0)
        assert rec.executions == 1

    def test_wall_budget(self):
        rec = run_random(WordGenerator(), Pass(), StoppingCriterion.budget(0.05), rng=0)
        assert rec.stop_reason == "wall_budget" and rec.executions > 0

    def test_all_targets(self):
        class Cover:
            def execute(self, test):
                return ExecutionOutcome(False, frozenset(a.method for a in test.actions))

        rec = run_random(WordGenerator("ab"), Cover(), StoppingCriterion.coverage(2) | StoppingCriterion.executions(10_000), rng=0)
        assert rec.stop_reason == "all_targets_covered"
        assert rec.covered() == {"a", "b"}

    def test_never_firing_is_rejected(self):
        with pytest.raises(ValueError):
            run_random(WordGenerator(), Pass(), StoppingCriterion(), rng=0)

    def test_bad_w(self):
        with pytest.raises(ValueError):
            run_art_dist(WordGenerator(), Pass(), StoppingCriterion.executions(3), w_size=0)

    def test_geometric_mean_executions(self):
        # theta = 1/12 for a single-token word out of lengths uniform on [1, 12]
        rng = random.Random(123)
        fs = []
        for _ in range(2000):
            rec = run_random(WordGenerator(), FailOn(lambda t: len(t) == 1), StoppingCriterion.until_failure(),
                             rng=rng.getrandbits(32))
            fs.append(rec.first_failure)
        mean = sum(fs) / len(fs)
        sigma = math.sqrt((1 - 1 / 12) / (1 / 12) ** 2 / len(fs))
        assert abs(mean - 12) < 3 * sigma


class TestAbort:
    def test_executor_fault_gives_aborted_record(self):
        rec = run_art_qgram(WordGenerator(), Boom(after=3), StoppingCriterion.executions(10), w_size=2, rng=0)
        assert rec.aborted and rec.stop_reason == "aborted"
        assert rec.executions == 3
        assert "driver crashed" in rec.error


class TestSerialization:
    def test_json_document(self):
        rec = run_art_qgram(WordGenerator(), Pass(), StoppingCriterion.executions(5), w_size=3, rng=1)
        doc = json.loads(rec.to_json())
        assert doc["seed"] == 1
        assert doc["counters"]["diversity_evals"] == 12
        assert len(doc["iterations"]) == 5
        assert {"candidates", "chosen", "score", "length", "failed"} <= set(doc["iterations"][0])


class TestBreakeven:
    def test_published_values(self):
        assert breakeven_factor(1.51e-5, 10, "dist") == pytest.approx(1.655e5, rel=5e-3)
        assert breakeven_factor(1.51e-5, 10, "qgram") == pytest.approx(10.0, rel=2e-2)

    def test_closed_form(self):
        assert breakeven_factor(0.25, 10, "dist") == pytest.approx(5.0)
        assert breakeven_factor(0.25, 10, "qgram") == pytest.approx(10 * (2 - 1) * 0.5)

    @given(st.floats(1e-7, 0.499), st.integers(1, 50))
    def test_solves_inequality(self, theta, w):
        # at the breakeven ratio both sides of the cost inequality coincide (t_d = 1)
        r = breakeven_factor(theta, w, "dist")
        lhs = w * (1 / (2 * theta)) * ((1 / (2 * theta) - 1) / 2) + (1 / (2 * theta)) * r
        assert lhs == pytest.approx((1 / theta) * r, rel=1e-9)
        r = breakeven_factor(theta, w, "qgram")
        lhs = w * (1 / (2 * theta) - 1) + (1 / (2 * theta)) * r
        assert lhs == pytest.approx((1 / theta) * r, rel=1e-9)

    @pytest.mark.parametrize("theta", [0.0, 0.5, -1, 0.7])
    def test_domain(self, theta):
        with pytest.raises(ValueError):
            breakeven_factor(theta, 10, "dist")

    def test_unknown_algo(self):
        with pytest.raises(ValueError):
            breakeven_factor(0.1, 10, "kd-tree")
