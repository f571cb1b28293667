"""Coordinate-interleaving convolution of a level set P with a filler word x.

For ``P = {p_0 < ... < p_{m-1}}`` and ``t`` of length ``i < m`` the output node
has length ``p_i``: positions in ``P`` below ``p_i`` read ``t`` in order, the
remaining positions read a prefix of ``x``.  For each fixed ``x`` the image of
all ``t`` is a full-branching strong subtree with level set ``P``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DomainError
from .tree_core import Node, StrongSubtree, TreeSubset, fw_density


@dataclass(frozen=True)
class ConvolutionContext:
    b: int
    P: tuple

    def __post_init__(self):
        P = tuple(self.P)
        if not P or any(p < 0 for p in P) or any(x >= y for x, y in zip(P, P[1:])):
            raise DomainError(f"P must be a nonempty strictly increasing set of levels, got {P}")
        if self.b < 1:
            raise DomainError("b must be >= 1")

    @classmethod
    def of(cls, b: int, levels) -> "ConvolutionContext":
        return cls(b, tuple(sorted(set(levels))))

    @property
    def n_P(self) -> int:
        return self.P[-1] - len(self.P) + 1

    def below(self, i: int) -> tuple:
        """Levels of P strictly below p_i."""
        return self.P[:i]

    def gaps(self, i: int) -> tuple:
        """Levels below p_i that are not in P."""
        inP = set(self.P[:i])
        return tuple(n for n in range(self.P[i]) if n not in inP)

    def fillers(self):
        """X_P in lexicographic order; the empty word when n_P = 0."""
        return itertools.product(range(1, self.b + 1), repeat=self.n_P)


def canonical_iso(P: Sequence[int], x: Sequence[int]) -> dict:
    if len(P) != len(x):
        raise DomainError(f"|x|={len(x)} differs from |P|={len(P)}")
    return {p: s for p, s in zip(sorted(P), x)}


def canonical_iso_inverse(mapping: dict) -> Node:
    return tuple(mapping[p] for p in sorted(mapping))


def convolve(ctx: ConvolutionContext, t: Sequence[int], x: Sequence[int]) -> Node:
    i = len(t)
    if i >= len(ctx.P):
        raise DomainError(f"|t|={i} must be below |P|={len(ctx.P)}")
    if len(x) != ctx.n_P:
        raise DomainError(f"filler has length {len(x)}, expected {ctx.n_P}")
    for s in itertools.chain(t, x):
        if not 1 <= s <= ctx.b:
            raise DomainError(f"symbol {s} outside 1..{ctx.b}")
    out = [0] * ctx.P[i]
    for pos, s in canonical_iso(ctx.below(i), t).items():
        out[pos] = s
    gaps = ctx.gaps(i)
    for pos, s in canonical_iso(gaps, x[: len(gaps)]).items():
        out[pos] = s
    return tuple(out)


def convolution_tree(ctx: ConvolutionContext, x: Sequence[int]) -> StrongSubtree:
    b = ctx.b
    levels = []
    for i in range(len(ctx.P)):
        levels.append(tuple(sorted(convolve(ctx, t, x) for t in itertools.product(range(1, b + 1), repeat=i))))
    return StrongSubtree(tuple(levels), ctx.P)


def _rank_tables(ctx: ConvolutionContext, i: int):
    """Level-p_i ranks of convolve(t, x) split as t-part[t] + x-part[x]."""
    b, p = ctx.b, ctx.P[i]
    weight = [b ** (p - 1 - pos) for pos in range(p)]
    t_w = np.array([weight[pos] for pos in ctx.below(i)], dtype=np.int64)
    x_w = np.zeros(ctx.n_P, dtype=np.int64)
    for j, pos in enumerate(ctx.gaps(i)):
        x_w[j] = weight[pos]
    digits_t = np.array(list(itertools.product(range(b), repeat=i)), dtype=np.int64).reshape(b**i, i)
    digits_x = np.array(list(itertools.product(range(b), repeat=ctx.n_P)), dtype=np.int64).reshape(
        b**ctx.n_P, ctx.n_P
    )
    return digits_t @ t_w, digits_x @ x_w


def _level_bits(A: TreeSubset, n: int) -> np.ndarray:
    width = A.params.b**n
    raw = A.levels[n].to_bytes((width + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:width].astype(bool)


def _hits(ctx: ConvolutionContext, A: TreeSubset) -> list:
    """Per level index i, a (b^i, |X_P|) boolean table of chi_A(convolve(t, x))."""
    if ctx.P[-1] >= A.params.height or A.params.b != ctx.b:
        raise DomainError("P exceeds the materialized height or branching mismatch")
    out = []
    for i, p in enumerate(ctx.P):
        t_part, x_part = _rank_tables(ctx, i)
        bits = _level_bits(A, p)
        out.append(bits[t_part[:, None] + x_part[None, :]])
    return out


def averaging_identity_eval(ctx: ConvolutionContext, A: TreeSubset) -> tuple[Fraction, Fraction]:
    """Both sides of the averaging identity, each computed from scratch."""
    lhs = fw_density(A, ctx.P)
    nx = ctx.b**ctx.n_P
    rhs = Fraction(0)
    for i, table in enumerate(_hits(ctx, A)):
        rhs += Fraction(int(table.sum()), ctx.b**i * nx)
    return lhs, rhs / len(ctx.P)


def subtree_densities(ctx: ConvolutionContext, A: TreeSubset) -> list[Fraction]:
    """d^FW of A inside the convolution subtree of every filler, in lex order."""
    tables = _hits(ctx, A)
    nx = ctx.b**ctx.n_P
    m = len(ctx.P)
    # common denominator: m * b^(m-1)
    den = m * ctx.b ** (m - 1)
    num = np.zeros(nx, dtype=object)
    for i, table in enumerate(tables):
        num = num + table.sum(axis=0).astype(object) * ctx.b ** (m - 1 - i)
    return [Fraction(int(v), den) for v in num]


def lift_density_subtree(ctx: ConvolutionContext, A: TreeSubset):
    """Lexicographically least filler maximising the density of A in its subtree.

    Returns ``(x, subtree, density)``; the density is at least
    ``fw_density(A, P)`` because the filler average equals it.
    """
    dens = subtree_densities(ctx, A)
    best = max(dens)
    idx = dens.index(best)
    x = next(itertools.islice(ctx.fillers(), idx, None))
    return x, convolution_tree(ctx, x), best


def pull_back(ctx: ConvolutionContext, x: Sequence[int], A: TreeSubset) -> TreeSubset:
    """The set {t : convolve(t, x) in A} as a subset of [b]^{<|P|}."""
    from .tree_core import TreeParams

    params = TreeParams(ctx.b, len(ctx.P))
    nodes = []
    for i in range(len(ctx.P)):
        for t in itertools.product(range(1, ctx.b + 1), repeat=i):
            if convolve(ctx, t, x) in A:
                nodes.append(t)
    return TreeSubset.from_nodes(params, nodes)
