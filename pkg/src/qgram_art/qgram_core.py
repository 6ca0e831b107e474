"""Tokenization, q-gram counting and diversity scores.

An archive of executed tests is summarised by the multiset of q-grams found
in its tests.  The multiset is updated in place when a test is executed, and a
candidate is scored by the entropy (or Gini impurity) of the multiset obtained
by temporarily adding the candidate's own q-grams.  Scoring costs time
proportional to the candidate's size, independent of the archive size.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

__all__ = [
    "Action",
    "TestCase",
    "TokenKind",
    "Token",
    "Mode",
    "Diversity",
    "QGramCounts",
    "format_value",
    "render_action",
    "tokenize",
    "token_texts",
    "count_qgrams",
    "qgram_counts_of",
    "merge",
    "entropy",
    "gini",
    "diversity_score",
    "score_candidate",
]

QGram = tuple  # tuple of token texts, length Q


def format_value(value) -> str:
    """Canonical rendering of one argument value."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if value.is_integer() and abs(value) < 1e15:
            return str(int(value))
        return format(value, ".6g")
    if value is None:
        return "null"
    return str(value)


@dataclass(frozen=True)
class Action:
    """One method invocation inside a test sequence."""

    method: str
    args: tuple = ()

    def render(self) -> str:
        return render_action(self.method, self.args)


def render_action(method: str, args: Sequence = ()) -> str:
    if not args:
        return method
    return "%s(%s)" % (method, ",".join(format_value(a) for a in args))


@dataclass(frozen=True)
class TestCase:
    """A test input: either a sequence of actions or a raw string."""

    __test__ = False  # keep pytest from collecting this class

    actions: tuple = ()
    raw: str | None = None

    @classmethod
    def of(cls, *steps) -> "TestCase":
        """Build from method names or ``(method, args...)`` tuples."""
        actions = []
        for step in steps:
            if isinstance(step, Action):
                actions.append(step)
            elif isinstance(step, str):
                actions.append(Action(step))
            else:
                method, *args = step
                actions.append(Action(method, tuple(args)))
        return cls(actions=tuple(actions))

    @classmethod
    def from_string(cls, s: str) -> "TestCase":
        return cls(raw=s)

    @property
    def length(self) -> int:
        """Number of statements (actions), or characters for raw inputs."""
        if self.raw is not None:
            return len(self.raw)
        return len(self.actions)

    def __len__(self) -> int:
        return self.length

    def to_json(self):
        if self.raw is not None:
            return {"raw": self.raw}
        return {"actions": [[a.method, *a.args] for a in self.actions]}

    @classmethod
    def from_json(cls, doc) -> "TestCase":
        if "raw" in doc:
            return cls(raw=doc["raw"])
        return cls.of(*[tuple(step) for step in doc["actions"]])

    def __str__(self) -> str:
        if self.raw is not None:
            return repr(self.raw)
        return "<" + ", ".join(a.render() for a in self.actions) + ">"


class TokenKind(enum.Enum):
    METHOD = "method"
    METHOD_WITH_ARGS = "method_with_args"
    CHAR = "char"


@dataclass(frozen=True)
class Token:
    text: str
    kind: TokenKind = TokenKind.METHOD

    def __post_init__(self):
        if not self.text:
            raise ValueError("token text must be non-empty")


class Mode(str, enum.Enum):
    """How a test is turned into tokens."""

    SEQUENCE_ONLY = "sequence_only"
    SEQUENCE_PLUS_INPUTS = "sequence_plus_inputs"
    CHARACTERS = "characters"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, cls):
            return value
        aliases = {"s": cls.SEQUENCE_ONLY, "seq": cls.SEQUENCE_ONLY, "si": cls.SEQUENCE_PLUS_INPUTS,
                   "seq+inputs": cls.SEQUENCE_PLUS_INPUTS, "chars": cls.CHARACTERS}
        return aliases.get(value) or cls(value)


class Diversity(str, enum.Enum):
    ENTROPY = "entropy"
    GINI = "gini"


def token_texts(test, mode) -> Sequence[str]:
    """Token texts of ``test`` without building Token objects.

    Character mode returns the raw string itself, which is a sequence of
    one-character texts.
    """
    mode = Mode.parse(mode)
    if mode is Mode.CHARACTERS:
        if isinstance(test, str):
            return test
        if test.raw is None:
            raise ValueError("characters mode needs a raw string input")
        return test.raw
    if isinstance(test, str):
        raise TypeError("sequence modes need a TestCase with actions")
    if mode is Mode.SEQUENCE_ONLY:
        return [a.method for a in test.actions]
    return [a.render() for a in test.actions]


def tokenize(test, mode) -> list[Token]:
    mode = Mode.parse(mode)
    kind = {
        Mode.SEQUENCE_ONLY: TokenKind.METHOD,
        Mode.SEQUENCE_PLUS_INPUTS: TokenKind.METHOD_WITH_ARGS,
        Mode.CHARACTERS: TokenKind.CHAR,
    }[mode]
    return [Token(text, kind) for text in token_texts(test, mode)]


@lru_cache(maxsize=None)
def _xlog2x(c: int) -> float:
    return c * math.log2(c) if c > 1 else 0.0


class QGramCounts:
    """Multiset of q-grams with occurrence counts.

    Besides the counts, the running sums of ``c*log2(c)`` and ``c**2`` are
    maintained so that the entropy or Gini impurity of ``self + delta`` can be
    evaluated by touching only the keys of ``delta``.
    """

    __slots__ = ("_counts", "_total", "_xlogx", "_sumsq")

    def __init__(self, counts: Mapping | Iterable | None = None):
        self._counts: dict = {}
        self._total = 0
        # running sums, built on first use; deltas used only for scoring never need them
        self._xlogx: float | None = 0.0
        self._sumsq: int | None = 0
        if counts is not None:
            items = counts.items() if isinstance(counts, Mapping) else Counter(counts).items()
            for key, c in items:
                if c < 0:
                    raise ValueError("counts must be non-negative")
                if c:
                    self._counts[key] = self._counts.get(key, 0) + c
                    self._total += c
            self._xlogx = None
            self._sumsq = None

    @classmethod
    def _from_counter(cls, counter: dict) -> "QGramCounts":
        new = cls.__new__(cls)
        new._counts = counter
        new._total = sum(counter.values())
        new._xlogx = None
        new._sumsq = None
        return new

    def _sums(self) -> tuple[float, int]:
        if self._xlogx is None:
            self._xlogx = math.fsum(_xlog2x(c) for c in self._counts.values())
            self._sumsq = sum(c * c for c in self._counts.values())
        return self._xlogx, self._sumsq

    def _add(self, key, c: int) -> None:
        counts = self._counts
        old = counts.get(key, 0)
        new = old + c
        counts[key] = new
        self._total += c
        if self._xlogx is not None:
            self._xlogx += _xlog2x(new) - _xlog2x(old)
            self._sumsq += new * new - old * old

    @property
    def total(self) -> int:
        return self._total

    def __getitem__(self, key) -> int:
        return self._counts.get(key, 0)

    def __contains__(self, key) -> bool:
        return key in self._counts

    def __len__(self) -> int:
        return len(self._counts)

    def __iter__(self) -> Iterator:
        return iter(self._counts)

    def items(self):
        return self._counts.items()

    def values(self):
        return self._counts.values()

    def as_dict(self) -> dict:
        return dict(self._counts)

    def __eq__(self, other) -> bool:
        if isinstance(other, QGramCounts):
            return self._counts == other._counts
        if isinstance(other, Mapping):
            return self._counts == {k: v for k, v in other.items() if v}
        return NotImplemented

    def __repr__(self) -> str:
        body = ", ".join(f"{_show(k)}: {v}" for k, v in sorted(self._counts.items()))
        return "QGramCounts({%s})" % body

    def copy(self) -> "QGramCounts":
        new = QGramCounts()
        new._counts = dict(self._counts)
        new._total = self._total
        new._xlogx = self._xlogx
        new._sumsq = self._sumsq
        return new

    def update(self, delta: "QGramCounts | Mapping") -> "QGramCounts":
        """Add ``delta`` into this multiset in place."""
        if self._xlogx is None:
            self._sums()
        for key, c in delta.items():
            if c:
                self._add(key, c)
        return self

    def merged(self, delta: "QGramCounts | Mapping") -> "QGramCounts":
        return self.copy().update(delta)

    def entropy(self) -> float:
        return entropy(self)

    def gini(self) -> float:
        return gini(self)

    def entropy_with(self, delta: "QGramCounts | Mapping") -> float:
        """Entropy of ``self + delta`` without building the merged multiset."""
        xlogx, _ = self._sums()
        get = self._counts.get
        n = self._total
        distinct = len(self._counts)
        corrections = []
        for key, d in delta.items():
            old = get(key, 0)
            corrections.append(_xlog2x(old + d) - _xlog2x(old))
            n += d
            if not old:
                distinct += 1
        if distinct <= 1:
            return 0.0
        s = xlogx + math.fsum(corrections)
        return max(0.0, math.log2(n) - s / n)

    def gini_with(self, delta: "QGramCounts | Mapping") -> float:
        """Gini impurity of ``self + delta`` without building the merged multiset."""
        _, sumsq = self._sums()
        n = self._total
        for key, d in delta.items():
            if d:
                old = self._counts.get(key, 0)
                sumsq += (old + d) ** 2 - old * old
                n += d
        if n == 0:
            return 0.0
        return 1.0 - sumsq / (n * n)


def _show(key) -> str:
    if isinstance(key, tuple) and all(isinstance(t, str) and len(t) == 1 for t in key):
        return "".join(key)
    return repr(key)


def _windows(texts: Sequence[str], q: int):
    if q == 1:
        return ((t,) for t in texts)
    if q == 2:
        return zip(texts, texts[1:])
    return zip(*(texts[i:] for i in range(q)))


def count_qgrams(tokens: Sequence, q: int) -> QGramCounts:
    """Count every window of ``q`` consecutive tokens.

    Items may be :class:`Token` objects or plain token texts.  Sequences
    shorter than ``q`` give an empty multiset.
    """
    if q < 1:
        raise ValueError("Q must be >= 1")
    texts = [t.text if isinstance(t, Token) else t for t in tokens]
    return QGramCounts._from_counter(Counter(_windows(texts, q)))


def qgram_counts_of(test, q: int, mode) -> QGramCounts:
    """Shortcut for ``count_qgrams(tokenize(test, mode), q)``."""
    if q < 1:
        raise ValueError("Q must be >= 1")
    return QGramCounts._from_counter(Counter(_windows(token_texts(test, mode), q)))


def merge(base: QGramCounts, delta: QGramCounts) -> QGramCounts:
    """Pointwise sum of two multisets; neither argument is modified."""
    return base.merged(delta)


def entropy(counts: QGramCounts | Mapping) -> float:
    """Shannon entropy in bits of the normalized counts."""
    values = [c for c in counts.values() if c]
    total = sum(values)
    if len(values) <= 1:
        return 0.0
    return max(0.0, -math.fsum(c / total * math.log2(c / total) for c in values))


def gini(counts: QGramCounts | Mapping) -> float:
    values = [c for c in counts.values() if c]
    total = sum(values)
    if len(values) <= 1:
        return 0.0
    return 1.0 - sum(c * c for c in values) / (total * total)


def diversity_score(counts: QGramCounts | Mapping, diversity="entropy") -> float:
    if Diversity(diversity) is Diversity.GINI:
        return gini(counts)
    return entropy(counts)


def score_candidate(archive_counts: QGramCounts, candidate, q: int = 2,
                    mode="sequence_only", diversity="entropy") -> float:
    """Diversity of the archive aggregate after adding ``candidate``'s q-grams.

    The archive aggregate is left untouched.
    """
    delta = qgram_counts_of(candidate, q, mode)
    if Diversity(diversity) is Diversity.GINI:
        return archive_counts.gini_with(delta)
    return archive_counts.entropy_with(delta)
