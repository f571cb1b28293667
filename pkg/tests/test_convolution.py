import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from densramsey.convolution import (
    ConvolutionContext,
    averaging_identity_eval,
    canonical_iso,
    canonical_iso_inverse,
    convolution_tree,
    convolve,
    lift_density_subtree,
    pull_back,
    subtree_densities,
)
from densramsey.errors import DomainError
from densramsey.tree_core import TreeParams, TreeSubset, fw_density, is_strong_subtree


def oracle_convolve(P, t, x):
    """Fill the positions of P below p_i from t and the others from x, left to right."""
    i = len(t)
    out, ti, xi = [], 0, 0
    for n in range(P[i]):
        if n in P[:i]:
            out.append(t[ti])
            ti += 1
        else:
            out.append(x[xi])
            xi += 1
    return tuple(out)


def subsets(values):
    values = list(values)
    for r in range(1, len(values) + 1):
        yield from itertools.combinations(values, r)


def test_context_partition():
    for P in subsets(range(6)):
        ctx = ConvolutionContext.of(2, P)
        for i, p in enumerate(P):
            below, gaps = ctx.below(i), ctx.gaps(i)
            assert len(below) == i and len(gaps) == p - i
            assert sorted(below + gaps) == list(range(p))
        assert len(list(ctx.fillers())) == 2**ctx.n_P


def test_canonical_iso():
    assert canonical_iso((2, 5), (1, 2)) == {2: 1, 5: 2}
    assert canonical_iso((0,), (3,)) == {0: 3}
    for P in subsets(range(4)):
        if len(P) > 3:
            continue
        for x in itertools.product((1, 2), repeat=len(P)):
            assert canonical_iso_inverse(canonical_iso(P, x)) == x
    with pytest.raises(DomainError):
        canonical_iso((1, 2), (1,))


def test_convolve_examples():
    ctx = ConvolutionContext.of(2, (1, 3))
    assert convolve(ctx, (), (2, 1)) == (2,)
    assert convolve(ctx, (1,), (2, 1)) == (2, 1, 1)
    init = ConvolutionContext.of(3, range(4))
    for n in range(4):
        for t in itertools.product((1, 2, 3), repeat=n):
            assert convolve(init, t, ()) == t
    with pytest.raises(DomainError):
        convolve(ctx, (1, 1), (1, 1))


def test_convolve_matches_oracle():
    for b in (1, 2, 3):
        for P in subsets(range(5)):
            ctx = ConvolutionContext.of(b, P)
            for x in ctx.fillers():
                for i in range(len(P)):
                    for t in itertools.product(range(1, b + 1), repeat=i):
                        assert convolve(ctx, t, x) == oracle_convolve(P, t, x)


def test_convolution_tree_examples():
    ctx = ConvolutionContext.of(2, (1, 3))
    S = convolution_tree(ctx, (1, 1))
    assert S.levels == (((1,),), ((1, 1, 1), (1, 2, 1)))
    full = convolution_tree(ConvolutionContext.of(2, (0, 1, 2)), ())
    assert sorted(full.nodes()) == sorted(s for n in range(3) for s in itertools.product((1, 2), repeat=n))
    single = convolution_tree(ConvolutionContext.of(2, (3,)), (2, 1, 2))
    assert single.nodes() == [(2, 1, 2)]


def test_convolution_tree_is_strong_with_level_set_p():
    for b in (1, 2, 3):
        for P in subsets(range(5 if b == 3 else 7)):
            ctx = ConvolutionContext.of(b, P)
            params = TreeParams(b, P[-1] + 1)
            for x in ctx.fillers():
                S = convolution_tree(ctx, x)
                rep = is_strong_subtree(params, S.nodes(), full_branching=True)
                assert rep.ok and rep.level_set == tuple(P)


def test_preimage_counts():
    b = 2
    for P in subsets(range(5)):
        ctx = ConvolutionContext.of(b, P)
        xs = list(ctx.fillers())
        for i, p in enumerate(P):
            ts = list(itertools.product(range(1, b + 1), repeat=i))
            counts = {}
            for t in ts:
                for x in xs:
                    s = convolve(ctx, t, x)
                    counts[s] = counts.get(s, 0) + 1
            assert len(counts) == b**p
            assert all(Fraction(c, len(ts) * len(xs)) == Fraction(1, b**p) for c in counts.values())


def test_averaging_examples():
    p = TreeParams(2, 4)
    ctx = ConvolutionContext.of(2, (1, 3))
    assert averaging_identity_eval(ctx, TreeSubset.full(p)) == (1, 1)
    assert averaging_identity_eval(ctx, TreeSubset.from_nodes(p, [(1,)])) == (Fraction(1, 4), Fraction(1, 4))
    assert averaging_identity_eval(ctx, TreeSubset.empty(p)) == (0, 0)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 3), st.data())
def test_averaging_identity_random(b, data):
    h = data.draw(st.integers(1, 4 if b < 3 else 3))
    P = data.draw(st.lists(st.integers(0, h - 1), min_size=1, unique=True))
    nodes = [s for n in range(h) for s in itertools.product(range(1, b + 1), repeat=n) if data.draw(st.booleans())]
    A = TreeSubset.from_nodes(TreeParams(b, h), nodes)
    ctx = ConvolutionContext.of(b, P)
    lhs, rhs = averaging_identity_eval(ctx, A)
    assert lhs == rhs == fw_density(A, P)
    dens = subtree_densities(ctx, A)
    assert sum(dens) / len(dens) == lhs


def test_lift_examples():
    p = TreeParams(2, 4)
    ctx = ConvolutionContext.of(2, (1, 3))
    x, S, d = lift_density_subtree(ctx, TreeSubset.full(p))
    assert x == (1, 1) and d == 1
    A = TreeSubset.from_nodes(p, [(1,)] + [s for s in itertools.product((1, 2), repeat=3) if s[0] == 1])
    x, S, d = lift_density_subtree(ctx, A)
    assert d >= fw_density(A, (1, 3)) == Fraction(1, 2)
    # exhaustive maximisation oracle over the fillers
    def sub_density(y):
        levels = convolution_tree(ctx, y).levels
        return sum(Fraction(sum(s in A for s in levels[i]), 2**i) for i in range(2)) / 2

    scores = [(sub_density(y), y) for y in ctx.fillers()]
    top = max(sc for sc, _ in scores)
    assert d == top and x == min(y for sc, y in scores if sc == top)
    x, S, d = lift_density_subtree(ctx, TreeSubset.empty(p))
    assert d == 0


def test_pull_back_density():
    p = TreeParams(2, 5)
    A = TreeSubset.from_nodes(p, [s for n in range(5) for s in itertools.product((1, 2), repeat=n) if s.count(2) % 2 == 0])
    ctx = ConvolutionContext.of(2, (1, 3, 4))
    x, S, d = lift_density_subtree(ctx, A)
    small = pull_back(ctx, x, A)
    assert fw_density(small, range(3)) == d
