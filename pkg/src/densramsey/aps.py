"""Arithmetic progressions inside finite index sets.

A finite set of integers stands in for a van der Waerden set throughout the
package; its "richness" is the length of the longest arithmetic progression it
contains.  Whenever a finite colouring has to keep a large colour class, the
class with the longest progression wins (ties go to the smaller colour index).
"""

from __future__ import annotations

from typing import Iterable, Iterator, Optional, Sequence


def is_ap(seq: Sequence[int]) -> bool:
    if len(seq) <= 1:
        return True
    d = seq[1] - seq[0]
    if d <= 0:
        return False
    return all(seq[i + 1] - seq[i] == d for i in range(len(seq) - 1))


def ap(start: int, step: int, length: int) -> tuple[int, ...]:
    return tuple(start + i * step for i in range(length))


def iter_aps(values: Iterable[int], k: int) -> Iterator[tuple[int, ...]]:
    """All length-k progressions inside ``values``, lexicographically."""
    pool = sorted(set(values))
    members = set(pool)
    if k <= 0:
        return
    if k == 1:
        for a in pool:
            yield (a,)
        return
    top = pool[-1] if pool else 0
    for a in pool:
        for d in range(1, (top - a) // (k - 1) + 1):
            if all(a + i * d in members for i in range(1, k)):
                yield ap(a, d, k)


def first_ap(values: Iterable[int], k: int) -> Optional[tuple[int, ...]]:
    return next(iter_aps(values, k), None)


def longest_ap(values: Iterable[int]) -> tuple[int, ...]:
    """Lexicographically least progression of maximum length (empty if no values)."""
    pool = sorted(set(values))
    members = set(pool)
    best: tuple[int, ...] = (pool[0],) if pool else ()
    for i, a in enumerate(pool):
        for b in pool[i + 1:]:
            d = b - a
            n = 2
            while a + n * d in members:
                n += 1
            if n > len(best):
                best = ap(a, d, n)
    return best


def richness(values: Iterable[int]) -> int:
    return len(longest_ap(values))


def richest_class(classes: Sequence[Iterable[int]]) -> int:
    """Index of the colour class with the longest progression."""
    best, best_len = 0, -1
    for idx, c in enumerate(classes):
        r = richness(c)
        if r > best_len:
            best, best_len = idx, r
    return best


def sub_ap(P: Sequence[int], indices: Sequence[int]) -> tuple[int, ...]:
    """Image of an index progression inside the progression ``P``."""
    return tuple(P[i] for i in indices)
