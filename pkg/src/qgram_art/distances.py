"""Unit-cost edit distances for the pairwise-distance ART baseline."""

from __future__ import annotations

from typing import Sequence

from .qgram_core import Mode, Token, token_texts

__all__ = ["edit_distance", "edit_distance_dp", "min_distance_to_archive"]


def _texts(seq: Sequence) -> Sequence:
    if isinstance(seq, str):
        return seq
    return [t.text if isinstance(t, Token) else t for t in seq]


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance between two token sequences (or strings).

    Insertion, deletion and substitution all cost 1; tokens are equal when
    their texts are equal.  Uses the bit-parallel column recurrence, one
    Python integer per DP column, so a call costs O(len(a) + len(b)) word
    operations.
    """
    a = _texts(a)
    b = _texts(b)
    if len(a) < len(b):
        a, b = b, a
    m = len(b)
    if not m:
        return len(a)
    # b is the pattern: one bit per position, set where the token matches
    peq: dict = {}
    for i, tok in enumerate(b):
        peq[tok] = peq.get(tok, 0) | (1 << i)
    full = (1 << m) - 1
    top = 1 << (m - 1)
    pv, mv, score = full, 0, m
    for tok in a:
        eq = peq.get(tok, 0)
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = mv | (~(xh | pv) & full)
        mh = pv & xh
        if ph & top:
            score += 1
        elif mh & top:
            score -= 1
        ph = ((ph << 1) | 1) & full
        mh = (mh << 1) & full
        pv = mh | (~(xv | ph) & full)
        mv = ph & xv
    return score


def edit_distance_dp(a: Sequence, b: Sequence) -> int:
    """Plain two-row dynamic programme; same result as :func:`edit_distance`."""
    a = _texts(a)
    b = _texts(b)
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        current = [i]
        for j, y in enumerate(b, 1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (x != y),
            ))
        previous = current
    return previous[-1]


def min_distance_to_archive(candidate, archive: Sequence, mode=Mode.SEQUENCE_ONLY,
                            counters=None) -> int:
    """Smallest edit distance between ``candidate`` and any archive member.

    Archive members may be test cases or already tokenized sequences.  When
    ``counters`` is given its ``distance_calls`` is advanced by ``len(archive)``.
    """
    if not archive:
        raise ValueError("archive is empty; seed it with one executed test first")
    cand = token_texts(candidate, mode) if not _is_tokens(candidate) else _texts(candidate)
    best = None
    for member in archive:
        other = _texts(member) if _is_tokens(member) else token_texts(member, mode)
        d = edit_distance(cand, other)
        if best is None or d < best:
            best = d
    if counters is not None:
        counters.distance_calls += len(archive)
    return best


def _is_tokens(obj) -> bool:
    return isinstance(obj, (list, tuple)) and not hasattr(obj, "actions")
