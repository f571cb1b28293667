"""Finite truncations of b-homogeneous trees, subsets, strong subtrees, densities.

Nodes are tuples over ``{1..b}``; the length of a node is its level.  Level
``n`` is enumerated lexicographically and a node's lexicographic rank is its
bit index inside the level's bit-vector.  Descendants of a node at a fixed
deeper level occupy a contiguous block of ranks, which is what makes all the
relative densities cheap.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

from . import bitvec
from .errors import DomainError, MalformedInput

Node = tuple


@dataclass(frozen=True)
class TreeParams:
    b: int
    height: int

    def __post_init__(self):
        if self.b < 1 or self.height < 1:
            raise DomainError(f"need b >= 1 and height >= 1, got b={self.b}, height={self.height}")

    def level_size(self, n: int) -> int:
        return self.b**n

    def check_node(self, node: Sequence[int]) -> None:
        if len(node) >= self.height:
            raise MalformedInput(f"node {tuple(node)} lies beyond height {self.height}")
        for s in node:
            if not isinstance(s, int) or not 1 <= s <= self.b:
                raise MalformedInput(f"node {tuple(node)} has symbol outside 1..{self.b}")


def rank(node: Sequence[int], b: int) -> int:
    r = 0
    for s in node:
        r = r * b + (s - 1)
    return r


def unrank(r: int, level: int, b: int) -> Node:
    out = [0] * level
    for i in range(level - 1, -1, -1):
        r, s = divmod(r, b)
        out[i] = s + 1
    return tuple(out)


def level_nodes(b: int, n: int) -> Iterator[Node]:
    return itertools.product(range(1, b + 1), repeat=n)


def cone_block(t: Sequence[int], n: int, b: int) -> tuple[int, int]:
    """Rank range [lo, hi) of the level-n descendants of t."""
    w = b ** (n - len(t))
    lo = rank(t, b) * w
    return lo, lo + w


def _popcount_range(mask: int, lo: int, hi: int) -> int:
    return ((mask >> lo) & ((1 << (hi - lo)) - 1)).bit_count()


@dataclass(frozen=True)
class TreeSubset:
    params: TreeParams
    levels: tuple

    def __post_init__(self):
        if len(self.levels) != self.params.height:
            raise MalformedInput("one bit-vector per level required")
        for n, mask in enumerate(self.levels):
            if mask < 0 or mask >> self.params.level_size(n):
                raise MalformedInput(f"level {n} bit-vector wider than b^{n}")

    @classmethod
    def from_nodes(cls, params: TreeParams, nodes: Iterable[Sequence[int]]) -> "TreeSubset":
        masks = [0] * params.height
        for node in nodes:
            params.check_node(node)
            masks[len(node)] |= 1 << rank(node, params.b)
        return cls(params, tuple(masks))

    @classmethod
    def full(cls, params: TreeParams) -> "TreeSubset":
        return cls(params, tuple((1 << params.level_size(n)) - 1 for n in range(params.height)))

    @classmethod
    def empty(cls, params: TreeParams) -> "TreeSubset":
        return cls(params, (0,) * params.height)

    def __contains__(self, node) -> bool:
        n = len(node)
        if n >= self.params.height:
            return False
        return bool(self.levels[n] >> rank(node, self.params.b) & 1)

    def count(self, n: int) -> int:
        return self.levels[n].bit_count()

    def nodes(self) -> Iterator[Node]:
        b = self.params.b
        for n, mask in enumerate(self.levels):
            r = 0
            while mask:
                if mask & 1:
                    yield unrank(r, n, b)
                mask >>= 1
                r += 1

    def to_dict(self) -> dict:
        b = self.params.b
        return {
            "b": b,
            "height": self.params.height,
            "levels": [bitvec.encode(m, b**n) for n, m in enumerate(self.levels)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TreeSubset":
        try:
            b, height, levels = int(data["b"]), int(data["height"]), data["levels"]
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(f"tree subset: missing or bad field {exc}") from None
        params = TreeParams(b, height)
        if len(levels) != height:
            raise MalformedInput(f"tree subset: {len(levels)} levels given, height is {height}")
        masks = tuple(
            bitvec.decode(h, b**n, where=f"levels[{n}]") for n, h in enumerate(levels)
        )
        return cls(params, masks)


def fw_density(A: TreeSubset, P: Iterable[int]) -> Fraction:
    """Average over the levels in P of the fraction of the level lying in A."""
    P = sorted(set(P))
    if not P:
        raise DomainError("level set must be nonempty")
    if P[0] < 0 or P[-1] >= A.params.height:
        raise DomainError(f"levels {P} outside 0..{A.params.height - 1}")
    b = A.params.b
    return sum((Fraction(A.count(p), b**p) for p in P), Fraction(0)) / len(P)


def relative_density(A: TreeSubset, t: Sequence[int], n: int) -> Fraction:
    """Density of A among the level-n descendants of t."""
    A.params.check_node(t)
    if n < len(t):
        raise DomainError(f"level {n} lies below node level {len(t)}")
    if n >= A.params.height:
        raise DomainError(f"level {n} beyond height {A.params.height}")
    lo, hi = cone_block(t, n, A.params.b)
    return Fraction(_popcount_range(A.levels[n], lo, hi), hi - lo)


def level_density(A: TreeSubset, n: int) -> Fraction:
    return relative_density(A, (), n)


@dataclass(frozen=True)
class TreeView:
    """Succ(root) truncated to ``params.height`` levels, re-indexed from 0."""

    base: TreeParams
    root: Node
    params: TreeParams

    def to_tree(self, node: Sequence[int]) -> Node:
        return self.root + tuple(node)

    def from_tree(self, node: Sequence[int]) -> Node:
        if tuple(node[: len(self.root)]) != self.root:
            raise DomainError(f"{tuple(node)} is not above {self.root}")
        return tuple(node[len(self.root):])

    def tree_level(self, n: int) -> int:
        return len(self.root) + n

    def level(self, n: int) -> Iterator[Node]:
        for tail in level_nodes(self.params.b, n):
            yield self.root + tail

    def restrict(self, A: TreeSubset) -> TreeSubset:
        b = self.base.b
        masks = []
        for n in range(self.params.height):
            lo, hi = cone_block(self.root, self.tree_level(n), b)
            masks.append((A.levels[self.tree_level(n)] >> lo) & ((1 << (hi - lo)) - 1))
        return TreeSubset(self.params, tuple(masks))


def tree_view(params: TreeParams, root: Sequence[int], height_cap: Optional[int] = None) -> TreeView:
    root = tuple(root)
    params.check_node(root)
    remaining = params.height - len(root)
    if height_cap is None:
        height_cap = remaining
    if height_cap < 1 or height_cap > remaining:
        raise DomainError(f"height cap {height_cap} outside 1..{remaining}")
    return TreeView(params, root, TreeParams(params.b, height_cap))


# ---------------------------------------------------------------------------
# strong subtrees


@dataclass(frozen=True)
class StrongSubtree:
    levels: tuple  # tuple of sorted tuples of nodes, one per subtree level
    level_set: tuple

    @classmethod
    def from_nodes(cls, nodes: Iterable[Sequence[int]]) -> "StrongSubtree":
        by_len: dict[int, set] = {}
        for node in nodes:
            by_len.setdefault(len(node), set()).add(tuple(node))
        lens = sorted(by_len)
        return cls(tuple(tuple(sorted(by_len[n])) for n in lens), tuple(lens))

    def nodes(self) -> list:
        return [s for group in self.levels for s in group]

    def to_dict(self) -> dict:
        return {"level_set": list(self.level_set), "levels": [[list(s) for s in g] for g in self.levels]}

    @classmethod
    def from_dict(cls, data: dict) -> "StrongSubtree":
        try:
            return cls.from_nodes(tuple(s) for g in data["levels"] for s in g)
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"subtree: bad structure ({exc})") from None


@dataclass(frozen=True)
class SubtreeReport:
    ok: bool
    level_set: tuple = ()
    condition: Optional[str] = None
    witness: Optional[Node] = None
    message: str = ""

    def __bool__(self):
        return self.ok


def is_strong_subtree(
    params: TreeParams,
    nodes: Iterable[Sequence[int]],
    literal_condition_c: bool = False,
    full_branching: bool = False,
) -> SubtreeReport:
    """Check conditions (a), (b), (c) of a strong subtree.

    By default (c) demands that distinct immediate successors of ``s`` inside
    the candidate extend distinct immediate successors of ``s`` in the tree.
    ``literal_condition_c`` drops that requirement; ``full_branching`` further
    demands exactly ``b`` successors at every non-maximal node.
    """
    S = sorted({tuple(s) for s in nodes}, key=lambda s: (len(s), s))
    for s in S:
        params.check_node(s)
    if not S:
        return SubtreeReport(False, condition="a", message="empty set has no root")
    root = S[0]
    for s in S[1:]:
        if len(s) == len(root) or s[: len(root)] != root:
            return SubtreeReport(False, condition="a", witness=s, message="not uniquely rooted")
    members = set(S)
    depth = {}
    for s in S:
        depth[s] = sum(1 for j in range(len(s)) if s[:j] in members)
    groups: dict[int, list] = {}
    for s in S:
        groups.setdefault(depth[s], []).append(s)
    for d in sorted(groups):
        lens = {len(s) for s in groups[d]}
        if len(lens) > 1:
            bad = next(s for s in groups[d] if len(s) != len(groups[d][0]))
            return SubtreeReport(False, condition="b", witness=bad,
                                 message=f"subtree level {d} spans tree levels {sorted(lens)}")
    top = max(groups)
    succ: dict[Node, list] = {s: [] for s in S}
    for s in S:
        d = depth[s]
        if d == 0:
            continue
        parent = next(s[:j] for j in range(len(s) - 1, -1, -1) if s[:j] in members)
        succ[parent].append(s)
    for s in S:
        if depth[s] < top and not succ[s]:
            return SubtreeReport(False, condition="a", witness=s, message="unbalanced: maximal chain too short")
    for s in S:
        kids = succ[s]
        if not kids:
            continue
        symbols = [k[len(s)] for k in kids]
        if not literal_condition_c and len(set(symbols)) != len(symbols):
            return SubtreeReport(False, condition="c", witness=s,
                                 message="two successors extend the same immediate successor")
        if full_branching and len(set(symbols)) != params.b:
            return SubtreeReport(False, condition="c", witness=s,
                                 message=f"{len(set(symbols))} successors, expected {params.b}")
    level_set = tuple(len(groups[d][0]) for d in sorted(groups))
    return SubtreeReport(True, level_set=level_set)


def prune_to_levels(S: StrongSubtree, Q: Sequence[int], b: int) -> StrongSubtree:
    """Full-branching strong subtree of S with level set Q, lexicographically least choices."""
    Q = list(Q)
    if not set(Q) <= set(S.level_set):
        raise DomainError(f"{Q} is not a subset of the level set {S.level_set}")
    members = {lv: set(g) for lv, g in zip(S.level_set, S.levels)}
    current = [min(members[Q[0]])]
    out = [tuple(current)]
    for lo, hi in zip(Q, Q[1:]):
        nxt = []
        for s in current:
            for c in range(1, b + 1):
                head = s + (c,)
                cands = sorted(x for x in members[hi] if x[: len(head)] == head)
                if not cands:
                    raise DomainError(f"no node of level {hi} above {head}")
                nxt.append(cands[0])
        current = sorted(nxt)
        out.append(tuple(current))
    return StrongSubtree(tuple(out), tuple(Q))
