"""Levenshtein distance over arbitrary sequences (unit costs)."""

from __future__ import annotations

from typing import Sequence


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Unit-cost Levenshtein distance between two sequences.

    Works on strings (character level) and word lists alike. Two-row DP,
    O(len(a) * len(b)) time, O(min(len)) memory.
    """
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, 1):
            cur[j] = min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (0 if x == y else 1),
            )
        prev = cur
    return prev[-1]


def edit_similarity(a: Sequence, b: Sequence) -> float:
    """Normalized similarity ``1 - distance / max(len)``, in [0, 1].

    Two empty sequences are considered identical (similarity 1).
    """
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - edit_distance(a, b) / longest
