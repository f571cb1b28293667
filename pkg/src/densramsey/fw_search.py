"""Strong subtrees with arithmetic level sets inside dense subsets of trees.

All searches work on level bitmasks: a node's descendants at a deeper level
are a contiguous rank block, so "some good node extends s + (c,)" is a single
shift-and-mask.  Subtrees found here are full-branching (every non-maximal
node has exactly b successors, one above each child).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .aps import iter_aps, richest_class, richness
from .convolution import ConvolutionContext, convolve, lift_density_subtree, pull_back
from .errors import ContractError, DomainError, ExtractionFailed, PreconditionError, ResourceError
from .tree_core import (
    StrongSubtree,
    TreeParams,
    TreeSubset,
    cone_block,
    fw_density,
    is_strong_subtree,
    prune_to_levels,
    rank,
    relative_density,
    tree_view,
    unrank,
)

DEFAULT_BUDGET = 1 << 22


@dataclass(frozen=True)
class FWCertificate:
    subtree: StrongSubtree
    start: int
    step: int
    length: int

    @property
    def level_set(self) -> tuple:
        return tuple(self.start + i * self.step for i in range(self.length))

    def to_dict(self) -> dict:
        return {
            "level_set": {"start": self.start, "step": self.step, "length": self.length},
            "subtree": self.subtree.to_dict(),
        }


def _ap_params(Q: Sequence[int]) -> tuple:
    Q = list(Q)
    step = Q[1] - Q[0] if len(Q) > 1 else 1
    return Q[0], step, len(Q)


# ---------------------------------------------------------------------------
# subtrees with a prescribed level set


def _good_masks(A: TreeSubset, Q: Sequence[int]) -> list:
    """Per level of Q, the nodes of A that root a full-branching subtree of A on the rest of Q."""
    b = A.params.b
    good = [0] * len(Q)
    good[-1] = A.levels[Q[-1]]
    for i in range(len(Q) - 2, -1, -1):
        p, nxt = Q[i], Q[i + 1]
        cand, below = A.levels[p], good[i + 1]
        w = b ** (nxt - p - 1)
        full = (1 << w) - 1
        mask, r = 0, 0
        while cand:
            if cand & 1:
                base = r * b * w
                if all((below >> (base + c * w)) & full for c in range(b)):
                    mask |= 1 << r
            cand >>= 1
            r += 1
        good[i] = mask
    return good


def _least_bit(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def subtree_with_levels(A: TreeSubset, Q: Sequence[int]) -> Optional[StrongSubtree]:
    """Lexicographically least full-branching strong subtree of A with level set Q."""
    Q = list(Q)
    if not Q or any(x >= y for x, y in zip(Q, Q[1:])) or Q[-1] >= A.params.height or Q[0] < 0:
        raise DomainError(f"level set {Q} is not increasing inside 0..{A.params.height - 1}")
    b = A.params.b
    good = _good_masks(A, Q)
    if not good[0]:
        return None
    current = [unrank(_least_bit(good[0]), Q[0], b)]
    levels = [tuple(current)]
    for i in range(1, len(Q)):
        nxt = []
        for s in current:
            for c in range(1, b + 1):
                lo, hi = cone_block(s + (c,), Q[i], b)
                block = (good[i] >> lo) & ((1 << (hi - lo)) - 1)
                nxt.append(unrank(lo + _least_bit(block), Q[i], b))
        current = sorted(nxt)
        levels.append(tuple(current))
    return StrongSubtree(tuple(levels), tuple(Q))


def level_aps(height: int, k: int, levels: Optional[Sequence[int]] = None):
    """Length-k level progressions inside ``levels`` (default all), ordered by (start, step)."""
    pool = range(height) if levels is None else levels
    return iter_aps(pool, k)


def fw_extract(A: TreeSubset, k: int, delta=None, levels: Optional[Sequence[int]] = None) -> Optional[FWCertificate]:
    """Least (start, step) AP of length k carrying a full-branching subtree inside A."""
    if k < 1:
        raise DomainError("k must be >= 1")
    if delta is not None:
        d = fw_density(A, range(A.params.height))
        if d < Fraction(delta):
            raise PreconditionError(f"FW density {d} < delta = {delta}")
    for Q in level_aps(A.params.height, k, levels):
        S = subtree_with_levels(A, Q)
        if S is not None:
            return FWCertificate(S, *_ap_params(Q))
    return None


def _subset_count(b: int, h: int) -> int:
    nodes = sum(b**n for n in range(h))
    return 1 << nodes


def fw_number_exact(b: int, k: int, delta, horizon: int, budget: int = DEFAULT_BUDGET):
    """Least n0 <= horizon such that every A in [b]^{<h}, n0 <= h <= horizon, of FW
    density >= delta carries a k-AP subtree; None if no such n0."""
    delta = Fraction(delta)
    if not 0 < delta <= 1 or k < 1 or b < 1 or horizon < 1:
        raise DomainError("need b, k, horizon >= 1 and 0 < delta <= 1")
    total = sum(_subset_count(b, h) for h in range(1, horizon + 1))
    if total > budget:
        raise ResourceError(f"{total} subsets to scan exceeds the budget of {budget}")
    good = []
    for h in range(1, horizon + 1):
        params = TreeParams(b, h)
        widths = [b**n for n in range(h)]
        ok = True
        for masks in itertools.product(*(range(1 << w) for w in widths)):
            num = sum(Fraction(m.bit_count(), w) for m, w in zip(masks, widths))
            if num < delta * h:
                continue
            if fw_extract(TreeSubset(params, masks), k) is None:
                ok = False
                break
        good.append(ok)
    if not good[-1]:
        return None
    n0 = horizon
    while n0 > 1 and good[n0 - 2]:
        n0 -= 1
    return n0


# ---------------------------------------------------------------------------
# reduction through convolution


def ufw_extract(A: TreeSubset, P: Sequence[int], k: int, delta, budget: int = DEFAULT_BUDGET) -> FWCertificate:
    """Lift A onto the convolution subtree of P where it is densest, extract there, map back."""
    P = tuple(P)
    if len(P) < 1 or len(set(P[i + 1] - P[i] for i in range(len(P) - 1))) > 1:
        raise DomainError(f"{P} is not an arithmetic progression")
    ctx = ConvolutionContext.of(A.params.b, P)
    if ctx.b ** ctx.n_P * len(P) > budget:
        raise ResourceError(f"{ctx.b}^{ctx.n_P} fillers exceed the budget")
    d = fw_density(A, P)
    if d < Fraction(delta):
        raise PreconditionError(f"FW density {d} on P is below delta = {delta}")
    x, _, lifted = lift_density_subtree(ctx, A)
    if lifted < d:
        raise ContractError("lifted density below the average")
    small = pull_back(ctx, x, A)
    cert = fw_extract(small, k)
    if cert is None:
        raise ExtractionFailed(f"no {k}-AP subtree inside the lifted copy of A on {P}")
    nodes = [convolve(ctx, t, x) for t in cert.subtree.nodes()]
    S = StrongSubtree.from_nodes(nodes)
    Q = tuple(P[i] for i in cert.level_set)
    if S.level_set != Q or not is_strong_subtree(A.params, nodes, full_branching=True):
        raise ContractError("mapped subtree is not a full-branching strong subtree on the image levels")
    return FWCertificate(S, *_ap_params(Q))


def simultaneous_extract(trees: Sequence[TreeSubset], P: Sequence[int], k: int, rho=None,
                         f_table: Optional[Callable[[int], int]] = None) -> tuple:
    """A k-AP Q inside P and subtrees S_j of B_j, all with level set Q.

    With ``f_table`` (f_table(j) = f_j(b, k, rho)) the progression is shrunk
    tree by tree through nested progressions of those lengths; otherwise the
    k-APs inside P are scanned in order until every tree carries one.
    """
    P = tuple(P)
    if rho is not None:
        for j, B in enumerate(trees):
            for p in P:
                if relative_density(B, (), p) < Fraction(rho):
                    raise PreconditionError(f"tree {j}: density at level {p} below rho = {rho}")
    if f_table is not None:
        q = len(trees)
        cur = P
        subs = []
        for j, B in enumerate(trees):
            length = f_table(q - j - 1) if q - j - 1 > 0 else k
            cert = fw_extract(B, length, levels=cur)
            if cert is None:
                raise ExtractionFailed(f"tree {j}: no subtree on a {length}-AP inside {cur}")
            cur = cert.level_set
            subs.append(cert.subtree)
        Q = cur[:k]
        return Q, [prune_to_levels(S, Q, trees[0].params.b) for S in subs]
    for Q in iter_aps(P, k):
        subs = []
        for B in trees:
            S = subtree_with_levels(B, Q)
            if S is None:
                break
            subs.append(S)
        else:
            return Q, subs
    raise ExtractionFailed(f"no {k}-AP inside {P} carries subtrees in all {len(trees)} trees")


# ---------------------------------------------------------------------------
# successor pigeonhole, tree inductive step, driver


def successor_pigeonhole(A: TreeSubset, t: Sequence[int], m: int, L: Sequence[int], delta) -> tuple:
    """A successor t' of t at level m and the richest part L' of L where A stays delta-dense above t'."""
    t = tuple(t)
    delta = Fraction(delta)
    if m < len(t):
        raise DomainError(f"level {m} lies below node level {len(t)}")
    L = sorted(n for n in set(L) if n >= m)
    if not L:
        raise PreconditionError(f"no index of L lies at or above level {m}")
    for n in L:
        if relative_density(A, t, n) < delta:
            raise PreconditionError(f"density of A above {t} at level {n} is below delta")
    b = A.params.b
    colour_of = {}
    for n in L:
        for tail in itertools.product(range(1, b + 1), repeat=m - len(t)):
            if relative_density(A, t + tail, n) >= delta:
                colour_of[n] = t + tail
                break
        else:
            raise ContractError(f"averaging fails at level {n}")
    colours = sorted(set(colour_of.values()))
    groups = [[n for n in L if colour_of[n] == c] for c in colours]
    idx = richest_class(groups)
    return colours[idx], tuple(groups[idx])


def _good_set(A: TreeSubset, Q: Sequence[int], tail: Sequence[int], eta: Fraction) -> TreeSubset:
    """Nodes of A on the levels of Q that keep relative density >= eta at every level in tail."""
    nodes = []
    for p in Q:
        for t in (unrank(r, p, A.params.b) for r in range(A.params.b**p) if A.levels[p] >> r & 1):
            if all(relative_density(A, t, n) >= eta for n in tail):
                nodes.append(t)
    return TreeSubset.from_nodes(A.params, nodes)


def tree_inductive_step(trees: Sequence[TreeSubset], L: Sequence[int], k: int, eta) -> tuple:
    """(Q, L', [S_j]): Q a k-AP in L, S_j in A_j with level set Q and
    relative density >= eta/2 above every node of S_j at every level of L'."""
    eta = Fraction(eta)
    L = sorted(set(L))
    for j, A in enumerate(trees):
        for n in L:
            if relative_density(A, (), n) < eta:
                raise PreconditionError(f"tree {j}: density at level {n} below eta = {eta}")
    for Q in iter_aps(L, k):
        tail = [n for n in L if n >= max(Q)]
        colour_of = {}
        for n in tail:
            key = tuple(_good_set(A, Q, [n], eta / 2).levels for A in trees)
            colour_of[n] = key
        colours = []
        for n in tail:
            if colour_of[n] not in colours:
                colours.append(colour_of[n])
        groups = [[n for n in tail if colour_of[n] == c] for c in colours]
        order = sorted(range(len(groups)), key=lambda i: (-richness(groups[i]), i))
        options = [(groups[i], colours[i]) for i in order] or [((), None)]
        for Lp, key in options:
            if key is None:
                goods = list(trees)
            else:
                goods = [TreeSubset(A.params, masks) for A, masks in zip(trees, key)]
            subs = [subtree_with_levels(G, Q) for G in goods]
            if all(S is not None for S in subs):
                return tuple(Q), tuple(Lp), subs
    raise ExtractionFailed(f"no {k}-AP in L carries subtrees in all {len(trees)} trees")


@dataclass
class FWDriverResult:
    subtree: StrongSubtree
    Qs: list
    W: list  # StrongSubtree per round
    L_rounds: list
    trace: list = field(default_factory=list)
    failed_round: Optional[int] = None


def _truncate(W: StrongSubtree, levels: int) -> StrongSubtree:
    return StrongSubtree(W.levels[:levels], W.level_set[:levels])


def fw_driver(A: TreeSubset, L: Sequence[int], delta, R: int) -> FWDriverResult:
    """R rounds growing strong subtrees W_r inside A whose level sets are unions of APs Q_1, ..., Q_r."""
    delta = Fraction(delta)
    if R < 1:
        raise DomainError("need at least one round")
    L = sorted(n for n in set(L) if 0 <= n < A.params.height)
    for n in L:
        if relative_density(A, (), n) < delta:
            raise PreconditionError(f"density at level {n} below delta = {delta}")
    params = A.params
    b = params.b
    trace: list = []
    Qs: list = []
    Ws: list = []
    Ls: list = []

    Qp, Lpp, subs = tree_inductive_step([A], L, 2, delta)
    W = subs[0]
    m = max(Qp)
    Qs.append(tuple(Qp[:-1]))
    Ls.append(tuple(Lpp))
    Ws.append(W)
    trace.append({"round": 1, "Q": list(Qs[-1]), "top_level": m, "eta": delta, "trees": 1, "L": list(Lpp)})
    h = 1
    failed = None
    for r in range(1, R):
        eta = delta / 2**r
        tops = W.levels[-1]
        views = [tree_view(params, t) for t in tops]
        local = [v.restrict(A) for v in views]
        Lshift = [n - m for n in Ls[-1]]
        try:
            Qp, Lpp, subs = tree_inductive_step(local, Lshift, r + 2, eta)
        except (ExtractionFailed, PreconditionError) as exc:
            failed = r + 1
            trace.append({"round": r + 1, "error": str(exc)})
            break
        nodes = list(_truncate(W, h).nodes())
        for v, S in zip(views, subs):
            nodes.extend(v.to_tree(s) for s in S.nodes())
        W = StrongSubtree.from_nodes(nodes)
        Qs.append(tuple(n + m for n in Qp[:-1]))
        Ls.append(tuple(n + m for n in Lpp))
        m = m + max(Qp)
        h += r + 1
        Ws.append(W)
        trace.append({"round": r + 1, "Q": list(Qs[-1]), "top_level": m, "eta": eta,
                      "trees": len(tops), "L": list(Ls[-1])})
    final = _truncate(W, h)
    return FWDriverResult(final, Qs, Ws, Ls, trace, failed)


def check_driver(A: TreeSubset, res: FWDriverResult, delta) -> list:
    """Replay the per-round conditions of a driver run; returns the failures."""
    delta = Fraction(delta)
    bad = []
    h = 0
    union: list = []
    for r, (Q, W, Lr) in enumerate(zip(res.Qs, res.W, res.L_rounds), start=1):
        h += r
        union += list(Q)
        if len(Q) != r:
            bad.append(f"round {r}: |Q| = {len(Q)}")
        if r > 1 and max(res.Qs[r - 2]) >= min(Q):
            bad.append(f"round {r}: Q does not start above the previous Q")
        if len(W.level_set) != h + 1 or tuple(W.level_set[:h]) != tuple(union):
            bad.append(f"round {r}: level set {W.level_set} does not match the Q's")
        if r > 1:
            prev = res.W[r - 2]
            if set(_truncate(prev, h - r).nodes()) != set(_truncate(W, h - r).nodes()):
                bad.append(f"round {r}: the lower part changed")
        if any(s not in A for s in W.nodes()):
            bad.append(f"round {r}: W is not inside A")
        if not is_strong_subtree(A.params, W.nodes(), full_branching=True):
            bad.append(f"round {r}: W is not a strong subtree")
        if Lr and max(W.level_set) > min(Lr):
            bad.append(f"round {r}: top level above min L_r")
        eta = delta / 2**r
        for t in W.nodes():
            for n in Lr:
                if relative_density(A, t, n) < eta:
                    bad.append(f"round {r}: density above {t} at level {n} below delta/2^{r}")
    return bad
