"""Random testing and the two adaptive random testing strategies.

All three strategies share one loop: sample candidates, pick one, execute it,
append it to the archive.  They differ only in how many candidates are drawn
per iteration and how a candidate is scored against the archive:

* ``rand``  - one candidate, no scoring;
* ``dist``  - maxi-min edit distance to every archived test (quadratic);
* ``qgram`` - diversity of the incrementally maintained q-gram aggregate
  after temporarily adding the candidate (linear).
"""

from __future__ import annotations

import json
import logging
import random
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Protocol, Sequence

from .distances import edit_distance
from .qgram_core import (
    Diversity,
    Mode,
    QGramCounts,
    TestCase,
    qgram_counts_of,
    token_texts,
)

__all__ = [
    "ExecutionOutcome",
    "Executor",
    "CandidateGenerator",
    "InstrumentationCounters",
    "StoppingCriterion",
    "IterationLog",
    "RunRecord",
    "select_argmax",
    "run_random",
    "run_art_dist",
    "run_art_qgram",
    "run_strategy",
    "breakeven_factor",
    "expected_distance_calls",
    "expected_diversity_evals",
    "STRATEGIES",
]

log = logging.getLogger(__name__)

STRATEGIES = ("rand", "dist", "qgram")


@dataclass(frozen=True)
class ExecutionOutcome:
    failed: bool = False
    covered_targets: frozenset = frozenset()


class Executor(Protocol):
    def execute(self, test: TestCase) -> ExecutionOutcome: ...


class CandidateGenerator:
    """Source of random test cases.

    Subclasses implement :meth:`sample`.  :meth:`observe` is called after each
    execution so that coverage-aware generators can track what is left to
    cover; :meth:`reset` is called at the start of every run.
    """

    def sample(self, count: int, rng: random.Random) -> list[TestCase]:
        raise NotImplementedError

    def observe(self, test: TestCase, outcome: ExecutionOutcome) -> None:
        pass

    def reset(self) -> None:
        pass


@dataclass
class InstrumentationCounters:
    distance_calls: int = 0
    diversity_evals: int = 0
    executions: int = 0
    wall_selection_time: float = 0.0
    wall_execution_time: float = 0.0

    @property
    def wall_time(self) -> float:
        return self.wall_selection_time + self.wall_execution_time


@dataclass(frozen=True)
class StoppingCriterion:
    """When to end a run.  The run stops as soon as any configured condition holds.

    ``max_executions`` caps the number of executed tests, ``first_failure``
    stops at the first failing test, ``wall_budget`` is a time budget in
    seconds and ``all_targets`` is the number of coverage targets that, once
    all covered, end the run.
    """

    max_executions: int | None = None
    first_failure: bool = False
    wall_budget: float | None = None
    all_targets: int | None = None

    @classmethod
    def executions(cls, n: int) -> "StoppingCriterion":
        return cls(max_executions=n)

    @classmethod
    def until_failure(cls, cap: int | None = None) -> "StoppingCriterion":
        return cls(max_executions=cap, first_failure=True)

    @classmethod
    def budget(cls, seconds: float) -> "StoppingCriterion":
        return cls(wall_budget=seconds)

    @classmethod
    def coverage(cls, n_targets: int) -> "StoppingCriterion":
        return cls(all_targets=n_targets)

    def __or__(self, other: "StoppingCriterion") -> "StoppingCriterion":
        def pick(a, b):
            if a is None:
                return b
            if b is None:
                return a
            return min(a, b)

        return StoppingCriterion(
            max_executions=pick(self.max_executions, other.max_executions),
            first_failure=self.first_failure or other.first_failure,
            wall_budget=pick(self.wall_budget, other.wall_budget),
            all_targets=pick(self.all_targets, other.all_targets),
        )

    def reason(self, executions: int, failed: bool, elapsed: float, covered: int) -> str | None:
        if self.first_failure and failed:
            return "first_failure"
        if self.all_targets is not None and covered >= self.all_targets:
            return "all_targets_covered"
        if self.max_executions is not None and executions >= self.max_executions:
            return "max_executions"
        if self.wall_budget is not None and elapsed >= self.wall_budget:
            return "wall_budget"
        return None

    def is_unbounded(self) -> bool:
        return self.max_executions is None and self.wall_budget is None and self.all_targets is None


@dataclass
class IterationLog:
    candidates: int
    chosen: int
    score: float | None
    length: int
    failed: bool
    covered: frozenset
    selection_time: float
    execution_time: float

    def to_json(self) -> dict:
        return {
            "candidates": self.candidates,
            "chosen": self.chosen,
            "score": self.score,
            "length": self.length,
            "failed": self.failed,
            "covered": sorted(self.covered, key=str),
        }


@dataclass
class RunRecord:
    strategy: str
    config: dict
    seed: int | None
    executed: list = field(default_factory=list)
    log: list = field(default_factory=list)
    counters: InstrumentationCounters = field(default_factory=InstrumentationCounters)
    first_failure: int | None = None
    stop_reason: str | None = None
    aborted: bool = False
    error: str | None = None
    aggregate: QGramCounts | None = None
    candidate_sets: list | None = None

    @property
    def failed(self) -> bool:
        return self.first_failure is not None

    @property
    def executions(self) -> int:
        return self.counters.executions

    def covered(self) -> set:
        out = set()
        for it in self.log:
            out |= it.covered
        return out

    def coverage_curve(self) -> list[tuple[int, int]]:
        """(executions, cumulative covered targets) after each execution."""
        seen = set()
        points = []
        for i, it in enumerate(self.log, 1):
            seen |= it.covered
            points.append((i, len(seen)))
        return points

    def lengths(self) -> list[int]:
        return [it.length for it in self.log]

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "config": self.config,
            "seed": self.seed,
            "stop_reason": self.stop_reason,
            "first_failure": self.first_failure,
            "aborted": self.aborted,
            "error": self.error,
            "iterations": [it.to_json() for it in self.log],
            "counters": asdict(self.counters),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def select_argmax(scored: Sequence[tuple]) -> tuple[int, object]:
    """Index and test of the highest-scoring candidate; ties go to the lowest index."""
    if not scored:
        raise ValueError("no candidates to choose from")
    best = 0
    best_score = scored[0][1]
    for i in range(1, len(scored)):
        if scored[i][1] > best_score:
            best, best_score = i, scored[i][1]
    return best, scored[best][0]


class _DistScorer:
    def __init__(self, mode: Mode | None, counters: InstrumentationCounters):
        self.mode = mode
        self.counters = counters
        self.archive: list = []

    def score(self, candidate: TestCase) -> float:
        texts = token_texts(candidate, self.mode)
        best = min(edit_distance(texts, z) for z in self.archive)
        self.counters.distance_calls += len(self.archive)
        return best

    def add(self, test: TestCase, index: int | None) -> None:
        self.archive.append(token_texts(test, self.mode))


class _QGramScorer:
    def __init__(self, q: int, mode: Mode | None, diversity: Diversity,
                 counters: InstrumentationCounters):
        self.q = q
        self.mode = mode
        self.gini = diversity is Diversity.GINI
        self.counters = counters
        self.aggregate = QGramCounts()
        self._pending: list[QGramCounts] = []

    def prepare(self) -> None:
        self._pending = []

    def score(self, candidate: TestCase) -> float:
        delta = qgram_counts_of(candidate, self.q, self.mode)
        self._pending.append(delta)
        self.counters.diversity_evals += 1
        if self.gini:
            return self.aggregate.gini_with(delta)
        return self.aggregate.entropy_with(delta)

    def add(self, test: TestCase, index: int | None) -> None:
        if index is None:
            delta = qgram_counts_of(test, self.q, self.mode)
        else:
            delta = self._pending[index]
        self.aggregate.update(delta)


def _infer_mode(mode, test: TestCase) -> Mode:
    if mode is not None:
        return Mode.parse(mode)
    return Mode.CHARACTERS if test.raw is not None else Mode.SEQUENCE_ONLY


def _as_rng(rng) -> tuple[random.Random, int | None]:
    if isinstance(rng, random.Random):
        return rng, None
    return random.Random(rng), rng


def _run(strategy: str, gen: CandidateGenerator, executor: Executor, stop: StoppingCriterion,
         rng, w_size: int, make_scorer: Callable | None, config: dict,
         keep_candidates: bool = False, mode=None) -> RunRecord:
    rng, seed = _as_rng(rng)
    if w_size < 1:
        raise ValueError("candidate set size must be >= 1")
    if stop.is_unbounded() and not stop.first_failure:
        raise ValueError("stopping criterion never fires")
    counters = InstrumentationCounters()
    record = RunRecord(strategy=strategy, config=config, seed=seed, counters=counters)
    if keep_candidates:
        record.candidate_sets = []
    gen.reset()
    scorer = None
    covered: set = set()
    clock = time.perf_counter
    started = clock()

    while True:
        reason = stop.reason(counters.executions, record.failed, clock() - started, len(covered))
        if reason is not None:
            record.stop_reason = reason
            break

        t0 = clock()
        if scorer is None or make_scorer is None:
            # the archive is seeded with a single random test
            candidates = gen.sample(1, rng)
            index, score, pending = 0, None, None
            if make_scorer is not None:
                resolved = _infer_mode(mode, candidates[0])
                scorer = make_scorer(resolved, counters)
                record.config["mode"] = resolved.value
        else:
            candidates = gen.sample(w_size, rng)
            if hasattr(scorer, "prepare"):
                scorer.prepare()
            scored = [(c, scorer.score(c)) for c in candidates]
            index, _ = select_argmax(scored)
            score = scored[index][1]
            pending = index
        chosen = candidates[index]
        t1 = clock()
        counters.wall_selection_time += t1 - t0
        if keep_candidates:
            record.candidate_sets.append(list(candidates))

        try:
            outcome = executor.execute(chosen)
        except Exception as exc:  # executor fault ends the run
            counters.wall_execution_time += clock() - t1
            record.aborted = True
            record.error = f"{type(exc).__name__}: {exc}"
            record.stop_reason = "aborted"
            log.warning("run aborted by executor fault: %s", record.error)
            break
        t2 = clock()
        counters.wall_execution_time += t2 - t1
        counters.executions += 1

        record.executed.append(chosen)
        if scorer is not None:
            scorer.add(chosen, pending)
        covered |= outcome.covered_targets
        record.log.append(IterationLog(
            candidates=len(candidates),
            chosen=index,
            score=score,
            length=chosen.length,
            failed=outcome.failed,
            covered=frozenset(outcome.covered_targets),
            selection_time=t1 - t0,
            execution_time=t2 - t1,
        ))
        if outcome.failed and record.first_failure is None:
            record.first_failure = counters.executions
        gen.observe(chosen, outcome)

    if isinstance(scorer, _QGramScorer):
        record.aggregate = scorer.aggregate
    return record


def run_random(gen: CandidateGenerator, executor: Executor, stop: StoppingCriterion,
               rng=None, keep_candidates: bool = False) -> RunRecord:
    """Plain random testing: execute one freshly sampled test per iteration."""
    return _run("rand", gen, executor, stop, rng, 1, None, {"strategy": "rand"},
                keep_candidates=keep_candidates)


def run_art_dist(gen: CandidateGenerator, executor: Executor, stop: StoppingCriterion,
                 w_size: int = 10, rng=None, mode=None,
                 keep_candidates: bool = False) -> RunRecord:
    """ART with maxi-min edit distance to every archived test.

    ``mode`` defaults to characters for raw-string tests and to the method
    sequence otherwise.
    """
    config = {"strategy": "dist", "W": w_size}
    return _run("dist", gen, executor, stop, rng, w_size,
                lambda m, counters: _DistScorer(m, counters), config,
                keep_candidates=keep_candidates, mode=mode)


def run_art_qgram(gen: CandidateGenerator, executor: Executor, stop: StoppingCriterion,
                  w_size: int = 10, q: int = 2, mode=None, diversity="entropy", rng=None,
                  keep_candidates: bool = False) -> RunRecord:
    """ART with incremental q-gram aggregation."""
    if q < 1:
        raise ValueError("Q must be >= 1")
    diversity = Diversity(diversity)
    config = {"strategy": "qgram", "W": w_size, "Q": q, "diversity": diversity.value}
    return _run("qgram", gen, executor, stop, rng, w_size,
                lambda m, counters: _QGramScorer(q, m, diversity, counters), config,
                keep_candidates=keep_candidates, mode=mode)


def run_strategy(strategy: str, gen: CandidateGenerator, executor: Executor,
                 stop: StoppingCriterion, rng=None, w_size: int = 10, q: int = 2,
                 mode=None, diversity="entropy", keep_candidates: bool = False) -> RunRecord:
    if strategy == "rand":
        return run_random(gen, executor, stop, rng, keep_candidates=keep_candidates)
    if strategy == "dist":
        return run_art_dist(gen, executor, stop, w_size, rng, mode=mode,
                            keep_candidates=keep_candidates)
    if strategy == "qgram":
        return run_art_qgram(gen, executor, stop, w_size, q, mode, diversity, rng,
                             keep_candidates=keep_candidates)
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def expected_distance_calls(rho: int, w_size: int) -> int:
    """Distance computations pairwise ART performs to execute ``rho`` tests."""
    return w_size * rho * (rho - 1) // 2


def expected_diversity_evals(rho: int, w_size: int) -> int:
    """Diversity evaluations q-gram ART performs to execute ``rho`` tests."""
    return w_size * max(rho - 1, 0)


def breakeven_factor(theta: float, w_size: int, algo: str) -> float:
    """Minimum ratio of test-execution time to per-candidate scoring time for
    ART to beat random testing, assuming ART doubles the failure rate.

    For ``dist`` the ratio is against one distance computation, for ``qgram``
    against one entropy evaluation.
    """
    if not 0.0 < theta < 0.5:
        raise ValueError("theta must lie in (0, 0.5)")
    half_f = 1.0 / (2.0 * theta)  # expected executions for ART
    if algo == "dist":
        return w_size * (half_f - 1.0) / 2.0
    if algo == "qgram":
        return w_size * (half_f - 1.0) / half_f
    raise ValueError(f"unknown algorithm {algo!r}")
