"""String-input simulation study: palindrome SUT, mutant failure models and
P/F/T-measure experiments with adaptive repetition.
"""

from __future__ import annotations

import logging
import math
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

from .qgram_core import TestCase
from .selectors import (
    CandidateGenerator,
    ExecutionOutcome,
    RunRecord,
    StoppingCriterion,
    run_strategy,
)

__all__ = [
    "DEFAULT_ALPHABET",
    "StringGenerator",
    "FailureModel",
    "LengthOneModel",
    "QGramRegionModel",
    "ConstantModel",
    "ScriptedModel",
    "default_failure_model",
    "parse_failure_model",
    "palindrome_sut",
    "is_palindrome",
    "MutantExecutor",
    "SimConfig",
    "MeasureRecord",
    "run_once",
    "measure_P",
    "measure_F",
    "measure_T",
    "run_until_rse",
    "estimate_theta",
]

log = logging.getLogger(__name__)

# small alphabet, so that short prefixes form regions of a controlled size
DEFAULT_ALPHABET = "abcd"


class StringGenerator(CandidateGenerator):
    """Random strings with length uniform in ``[min_len, max_len]``."""

    def __init__(self, max_len: int, alphabet: str = DEFAULT_ALPHABET, min_len: int = 1):
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        if not alphabet:
            raise ValueError("alphabet must be non-empty")
        if not 0 <= min_len <= max_len:
            raise ValueError("min_len must lie in [0, max_len]")
        self.max_len = max_len
        self.min_len = min_len
        self.alphabet = "".join(sorted(set(alphabet)))

    def random_string(self, rng: random.Random) -> str:
        n = rng.randint(self.min_len, self.max_len)
        return "".join(rng.choices(self.alphabet, k=n))

    def sample(self, count: int, rng: random.Random) -> list[TestCase]:
        return [TestCase(raw=self.random_string(rng)) for _ in range(count)]


def is_palindrome(s: str) -> bool:
    return s == s[::-1]


def palindrome_sut(s: str, delay: float = 0.0) -> bool:
    """The program under test.  ``delay`` (seconds) simulates a slow execution."""
    if delay > 0:
        time.sleep(delay)
    return is_palindrome(s)


class FailureModel:
    """A mutant of the palindrome check, described by where it misbehaves."""

    name = "abstract"

    def fails(self, s: str) -> bool:
        raise NotImplementedError

    def nominal_theta(self, gen: StringGenerator) -> float:
        raise NotImplementedError

    def mutant(self, s: str) -> bool:
        """Output of the mutated program: wrong exactly on the failure region."""
        return is_palindrome(s) != self.fails(s)


class LengthOneModel(FailureModel):
    """Loop-bound mutant that misclassifies single-character strings.

    With lengths uniform in ``[1, L]`` the failure probability is exactly 1/L.
    """

    name = "length1"

    def fails(self, s: str) -> bool:
        return len(s) == 1

    def nominal_theta(self, gen: StringGenerator) -> float:
        if gen.min_len > 1:
            return 0.0
        return 1.0 / (gen.max_len - gen.min_len + 1)


class QGramRegionModel(FailureModel):
    """Fails on strings that start with ``prefix`` and are shorter than ``max_len``.

    The region is contiguous in the input space and keyed to a q-gram, so a
    generator that spreads its tests over many distinct q-grams (and short
    inputs) reaches it sooner than uniform sampling.
    """

    def __init__(self, prefix: str, max_len: int):
        if not prefix:
            raise ValueError("prefix must be non-empty")
        self.prefix = prefix
        self.max_len = max_len

    @property
    def name(self) -> str:
        return f"qgram-region:{self.prefix}:{self.max_len}"

    def fails(self, s: str) -> bool:
        return len(s) < self.max_len and s.startswith(self.prefix)

    def nominal_theta(self, gen: StringGenerator) -> float:
        if any(c not in gen.alphabet for c in self.prefix):
            return 0.0
        lo = max(gen.min_len, len(self.prefix))
        hi = min(gen.max_len, self.max_len - 1)
        if hi < lo:
            return 0.0
        n_lengths = gen.max_len - gen.min_len + 1
        return (hi - lo + 1) / n_lengths * len(gen.alphabet) ** -len(self.prefix)


class ConstantModel(FailureModel):
    """Never fails (``theta=0``) or always fails (``theta=1``)."""

    def __init__(self, failing: bool):
        self.failing = failing
        self.name = "always" if failing else "never"

    def fails(self, s: str) -> bool:
        return self.failing

    def nominal_theta(self, gen: StringGenerator) -> float:
        return 1.0 if self.failing else 0.0


class ScriptedModel(FailureModel):
    """Fails on exactly the listed inputs."""

    name = "scripted"

    def __init__(self, failing_inputs):
        self.failing_inputs = frozenset(failing_inputs)

    def fails(self, s: str) -> bool:
        return s in self.failing_inputs

    def nominal_theta(self, gen: StringGenerator) -> float:
        return math.nan


def default_failure_model(L: int) -> FailureModel:
    if L < 2:
        raise ValueError("L must be >= 2")
    return LengthOneModel()


def parse_failure_model(text: str) -> FailureModel:
    """``length1``, ``always``, ``never`` or ``qgram-region:<prefix>:<maxlen>``."""
    if text == "length1":
        return LengthOneModel()
    if text in ("always", "never"):
        return ConstantModel(text == "always")
    if text.startswith("qgram-region:"):
        try:
            _, prefix, max_len = text.split(":")
            return QGramRegionModel(prefix, int(max_len))
        except ValueError:
            raise ValueError(f"bad failure model {text!r}; expected qgram-region:<prefix>:<maxlen>") from None
    raise ValueError(f"unknown failure model {text!r}")


class MutantExecutor:
    """Runs the original and the mutated program; a test fails when they disagree."""

    def __init__(self, model: FailureModel, delay: float = 0.0):
        self.model = model
        self.delay = delay

    def execute(self, test: TestCase) -> ExecutionOutcome:
        expected = palindrome_sut(test.raw, self.delay)
        return ExecutionOutcome(failed=self.model.mutant(test.raw) != expected)


def estimate_theta(model: FailureModel, gen: StringGenerator, samples: int, seed: int = 0) -> float:
    """Monte Carlo estimate of the failure probability under ``gen``."""
    rng = random.Random(seed)
    hits = 0
    for _ in range(samples):
        if model.fails(gen.random_string(rng)):
            hits += 1
    return hits / samples


@dataclass
class SimConfig:
    """One simulation cell.  ``delay`` is in seconds."""

    L: int = 100
    strategy: str = "rand"
    failure_model: str = "length1"
    W: int = 10
    Q: int = 2
    mode: str = "characters"
    diversity: str = "entropy"
    delay: float = 0.0
    alphabet: str = DEFAULT_ALPHABET
    cap: int = 10_000_000
    seed: int = 0

    def model(self) -> FailureModel:
        return parse_failure_model(self.failure_model)

    def generator(self) -> StringGenerator:
        return StringGenerator(self.L, self.alphabet)

    def theta(self) -> float:
        return self.model().nominal_theta(self.generator())


@dataclass
class MeasureRecord:
    kind: str
    value: float
    repetitions: int
    rse: float
    converged: bool = True
    samples: list = field(default_factory=list, repr=False)
    censored: int = 0
    distance_calls: int = 0
    diversity_evals: int = 0

    @property
    def std_error(self) -> float:
        if len(self.samples) < 2:
            return math.nan
        return statistics.stdev(self.samples) / math.sqrt(len(self.samples))

    @property
    def flagged(self) -> bool:
        """True when the RSE stayed at or above the stopping threshold."""
        return not self.converged


def run_once(config: SimConfig, stop: StoppingCriterion, rep: int = 0) -> RunRecord:
    """One repetition; its seed is ``config.seed + rep``."""
    return run_strategy(
        config.strategy,
        config.generator(),
        MutantExecutor(config.model(), config.delay),
        stop,
        rng=config.seed + rep,
        w_size=config.W,
        q=config.Q,
        mode=config.mode,
        diversity=config.diversity,
    )


def _rse(samples) -> float:
    if len(samples) < 2:
        return math.inf
    mean = statistics.fmean(samples)
    if mean == 0:
        return 0.0 if all(x == 0 for x in samples) else math.inf
    return statistics.stdev(samples) / math.sqrt(len(samples)) / abs(mean)


def run_until_rse(measure_fn: Callable[[int], float], threshold: float = 0.05, batch: int = 10,
                  max_reps: int = 100_000, min_reps: int = 2, kind: str = "",
                  map_fn: Callable = map) -> MeasureRecord:
    """Repeat ``measure_fn(rep)`` in batches until the relative standard error
    of the mean drops below ``threshold`` or ``max_reps`` is reached.

    A sample that is identically zero has an undefined RSE and keeps the loop
    going until the cap, except when every value is exactly zero from the
    first batch on a degenerate measure (its RSE is reported as 0).
    """
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    if batch < 1:
        raise ValueError("batch must be >= 1")
    samples: list[float] = []
    rse = math.inf
    while len(samples) < max_reps:
        n = min(batch, max_reps - len(samples))
        samples.extend(map_fn(measure_fn, range(len(samples), len(samples) + n)))
        if len(samples) < max(min_reps, 2):
            continue
        rse = _rse(samples)
        if rse < threshold:
            break
    mean = statistics.fmean(samples) if samples else math.nan
    converged = rse < threshold
    if not converged:
        log.info("rse %.4f still above %.3f after %d repetitions", rse, threshold, len(samples))
    return MeasureRecord(kind=kind, value=mean, repetitions=len(samples), rse=rse,
                         converged=converged, samples=samples)


class _Measure:
    """Picklable per-repetition measurement for process pools."""

    def __init__(self, config: SimConfig, kind: str, n_tests: int):
        self.config = config
        self.kind = kind
        self.n_tests = n_tests

    def __call__(self, rep: int) -> tuple:
        cfg = self.config
        if self.kind == "P":
            rec = run_once(cfg, StoppingCriterion(max_executions=self.n_tests, first_failure=True), rep)
            value = 1.0 if rec.failed else 0.0
        else:
            rec = run_once(cfg, StoppingCriterion.until_failure(cfg.cap), rep)
            if self.kind == "F":
                value = float(rec.first_failure or rec.executions)
            else:
                value = rec.counters.wall_time
        c = rec.counters
        return value, not rec.failed, c.distance_calls, c.diversity_evals


def _measure(config: SimConfig, kind: str, n_tests: int, reps: int | None, threshold: float,
             batch: int, max_reps: int, workers: int | None) -> MeasureRecord:
    fn = _Measure(config, kind, n_tests)
    extras: list[tuple] = []

    def collect(results):
        out = []
        for value, censored, dcalls, devals in results:
            extras.append((censored, dcalls, devals))
            out.append(value)
        return out

    pool = None
    if workers and workers > 1:
        pool = ProcessPoolExecutor(max_workers=workers)
        map_fn = lambda f, idx: collect(pool.map(f, idx))  # noqa: E731
    else:
        map_fn = lambda f, idx: collect(map(f, idx))  # noqa: E731
    try:
        if reps is not None:
            rec = run_until_rse(fn, threshold=1e-300, batch=reps, max_reps=reps, kind=kind,
                                map_fn=map_fn)
            rec.rse = _rse(rec.samples)
            rec.converged = rec.rse < threshold
        else:
            rec = run_until_rse(fn, threshold, batch, max_reps, kind=kind, map_fn=map_fn)
    finally:
        if pool is not None:
            pool.shutdown()
    rec.kind = kind
    rec.censored = sum(1 for e in extras if e[0]) if kind != "P" else 0
    rec.distance_calls = sum(e[1] for e in extras)
    rec.diversity_evals = sum(e[2] for e in extras)
    return rec


def measure_P(config: SimConfig, n_tests: int = 50, reps: int | None = None,
              threshold: float = 0.05, batch: int = 100, max_reps: int = 100_000,
              workers: int | None = None) -> MeasureRecord:
    """Fraction of repetitions exposing the fault within ``n_tests`` executions.

    With ``reps`` set, exactly that many repetitions run; otherwise repetitions
    are added until the RSE falls below ``threshold``.
    """
    if n_tests < 1:
        raise ValueError("n_tests must be >= 1")
    return _measure(config, "P", n_tests, reps, threshold, batch, max_reps, workers)


def measure_F(config: SimConfig, reps: int | None = None, threshold: float = 0.05,
              batch: int = 20, max_reps: int = 100_000, workers: int | None = None) -> MeasureRecord:
    """Mean number of executions up to and including the first failure.

    Runs hitting ``config.cap`` are counted at the cap and reported as censored.
    """
    return _measure(config, "F", 0, reps, threshold, batch, max_reps, workers)


def measure_T(config: SimConfig, reps: int | None = None, threshold: float = 0.05,
              batch: int = 20, max_reps: int = 100_000, workers: int | None = None) -> MeasureRecord:
    """Mean wall-clock seconds to the first failure, selection time included.

    Repetitions run sequentially unless ``workers`` asks otherwise, since
    concurrent runs disturb each other's timings.
    """
    return _measure(config, "T", 0, reps, threshold, batch, max_reps, workers)


def with_strategy(config: SimConfig, strategy: str) -> SimConfig:
    return replace(config, strategy=strategy)
