"""Finite probability spaces with exact weights and the correlation lemmas.

Weights are stored as integer numerators over one common denominator, so the
measure of an event is an exact ``Fraction`` computed with a single numpy sum.
Events are boolean masks over the atoms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import tower
from .aps import first_ap, iter_aps, richest_class, richness, sub_ap
from .bounds import BoundsContext, SzEvaluator, correlated_block_bound, theta1, theta2
from .errors import ContractError, DomainError, MalformedInput, PreconditionError, ThresholdNotComputable
from .families import FamilySpec, contains_member


def _as_int(x, what: str) -> int:
    if not tower.is_exact(x) or Fraction(x).denominator != 1:
        raise ThresholdNotComputable(f"{what} = {tower.format_num(x)} is not a desk-scale integer")
    return int(x)


class FiniteProbSpace:
    def __init__(self, weights: Sequence):
        ws = [Fraction(w) for w in weights]
        if not ws:
            raise DomainError("a probability space needs at least one atom")
        if any(w <= 0 for w in ws):
            raise DomainError("atom weights must be positive")
        if sum(ws) != 1:
            raise DomainError(f"weights sum to {sum(ws)}, not 1")
        den = math.lcm(*(w.denominator for w in ws))
        nums = [int(w * den) for w in ws]
        dtype = np.int64 if den < 2**62 // len(ws) else object
        self.den = den
        self.num = np.array(nums, dtype=dtype)
        self.size = len(ws)

    @classmethod
    def uniform(cls, n: int) -> "FiniteProbSpace":
        if n < 1:
            raise DomainError("a probability space needs at least one atom")
        space = cls.__new__(cls)
        space.den, space.size = n, n
        space.num = np.ones(n, dtype=np.int64)
        return space

    @property
    def weights(self) -> list:
        return [Fraction(int(v), self.den) for v in self.num]

    def event(self, indices: Iterable[int]) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        for i in indices:
            if not 0 <= i < self.size:
                raise MalformedInput(f"atom index {i} outside 0..{self.size - 1}")
            mask[i] = True
        return mask

    def full(self) -> np.ndarray:
        return np.ones(self.size, dtype=bool)

    def measure(self, A: np.ndarray) -> Fraction:
        return Fraction(int(self.num[A].sum()), self.den)

    def conditional(self, A: np.ndarray, B: np.ndarray) -> Fraction:
        mb = int(self.num[B].sum())
        if mb == 0:
            raise DomainError("conditioning on an event of measure zero")
        return Fraction(int(self.num[A & B].sum()), mb)

    def to_dict(self, events: Optional[Mapping[str, np.ndarray]] = None) -> dict:
        out = {"weights": [f"{w.numerator}/{w.denominator}" for w in self.weights], "events": {}}
        for name, ev in (events or {}).items():
            out["events"][name] = [int(i) for i in np.flatnonzero(ev)]
        return out


def conditional(space: FiniteProbSpace, A: np.ndarray, B: np.ndarray) -> Fraction:
    return space.conditional(A, B)


def residual_split(space: FiniteProbSpace, A: np.ndarray, B: np.ndarray, eta, theta) -> tuple:
    """(mu(complement of B), mu of A inside the complement of B) for a weakly correlated B."""
    eta, theta = Fraction(eta), Fraction(theta)
    mA, mB = space.measure(A), space.measure(B)
    if mA < eta:
        raise PreconditionError(f"mu(A) = {mA} < eta = {eta}")
    if mB < theta:
        raise PreconditionError(f"mu(B) = {mB} < theta = {theta}")
    if mB == 0 or space.conditional(A, B) > eta / 2:
        raise PreconditionError(f"mu_B(A) exceeds eta/2 = {eta / 2}")
    rest = ~B
    m_rest = space.measure(rest)
    rel = space.conditional(A, rest)
    if m_rest < eta / 2 or rel < eta + eta * theta / 2:
        raise ContractError(f"residual bounds violated: {m_rest}, {rel}")
    return m_rest, rel


def markov_indices(a: Sequence, delta, eps) -> list[int]:
    """{j : a_j >= delta - eps}, at least a (1 - eps) fraction when the mean is >= delta."""
    a = [Fraction(x) for x in a]
    delta, eps = Fraction(delta), Fraction(eps)
    if not a:
        raise PreconditionError("empty sequence")
    if sum(a) / len(a) < delta:
        raise PreconditionError(f"mean {sum(a) / len(a)} < delta = {delta}")
    if any(x > delta + eps**2 for x in a):
        raise PreconditionError(f"some a_j exceeds delta + eps^2 = {delta + eps**2}")
    I = [j for j, x in enumerate(a) if x >= delta - eps]
    if Fraction(len(I), len(a)) < 1 - eps:
        raise ContractError(f"|I|/m = {Fraction(len(I), len(a))} < 1 - eps")
    return I


# ---------------------------------------------------------------------------
# correlation lemmas


def _columns_by_pattern(rows: np.ndarray, weights: np.ndarray):
    """Group atoms by their membership column; returns (patterns, pattern weights)."""
    packed = np.packbits(rows.T, axis=1)
    uniq, inverse = np.unique(packed, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    wsum = [0] * len(uniq)
    for idx, w in zip(inverse.tolist(), weights.tolist()):
        wsum[idx] += int(w)
    patterns = np.unpackbits(uniq, axis=1, count=rows.shape[0]).astype(bool)
    return patterns, wsum


def _heaviest(weight_by_key: dict):
    """Key of largest weight, lexicographically least among ties."""
    return min(weight_by_key, key=lambda key: (-weight_by_key[key], key))


def ap_correlation(space: FiniteProbSpace, events: Sequence[np.ndarray], k: int, eta,
                   sz: SzEvaluator, within: Optional[np.ndarray] = None) -> tuple:
    """A k-AP P of indices 1..n with mu(intersection of A_i, i in P) >= theta1(k, eta).

    ``within`` conditions every measure on that event.  Returns ``(P, measure)``.
    """
    eta = Fraction(eta)
    n = len(events)
    weights = space.num if within is None else np.where(within, space.num, 0)
    total = int(weights.sum())
    if total == 0:
        raise DomainError("conditioning on an event of measure zero")

    def mu(mask):
        return Fraction(int(weights[mask].sum()), total)

    for i, A in enumerate(events, start=1):
        if mu(A) < eta:
            raise PreconditionError(f"mu(A_{i}) = {mu(A)} < eta = {eta}")
    t1 = theta1(k, eta, sz)
    if k == 1:
        ms = [mu(A) for A in events]
        if not ms:
            raise PreconditionError("no events given")
        i = ms.index(max(ms))
        return (i + 1,), ms[i]
    n0 = _as_int(sz(k, eta / 2), f"Sz({k}, {eta / 2})")
    if n < n0:
        raise PreconditionError(f"n = {n} < Sz({k}, {eta / 2}) = {n0}")
    rows = np.array(events[:n0], dtype=bool).reshape(n0, space.size)
    patterns, wsum = _columns_by_pattern(rows, weights)
    votes: dict = {}
    for pat, w in zip(patterns, wsum):
        if w == 0:
            continue
        Ax = [i + 1 for i in np.flatnonzero(pat).tolist()]
        if 2 * len(Ax) < eta * n0:
            continue
        P = first_ap(Ax, k)
        if P is None:
            raise ContractError(f"dense row {Ax} has no {k}-AP below Sz")
        votes[P] = votes.get(P, 0) + w
    if not votes:
        raise ContractError("no atom is dense in the first Sz indices")
    P = _heaviest(votes)
    inter = np.logical_and.reduce([events[i - 1] for i in P])
    m = mu(inter)
    if m < t1:
        raise ContractError(f"mu of the intersection {m} < theta1 = {t1}")
    return P, m


def family_correlation(space: FiniteProbSpace, A: np.ndarray, F: FamilySpec, eta,
                       ctx: BoundsContext) -> tuple:
    """A member of F and the event of atoms x with (i, x) in A for all i in the member.

    ``A`` is a boolean array of shape (n, atoms) with row i-1 for index i.
    """
    eta = Fraction(eta)
    n = A.shape[0]
    if A.shape[1] != space.size:
        raise DomainError("event matrix does not match the space")
    row_mu = [space.measure(row) for row in A]
    dens = sum(row_mu, Fraction(0)) / n
    if dens < eta:
        raise PreconditionError(f"density {dens} < eta = {eta}")
    n0 = _as_int(ctx.B(F, eta / 4), f"B({F}, {eta / 4})")
    if n < 2 * n0 / eta:
        raise PreconditionError(f"n = {n} < (2/eta)*B(F, eta/4) = {2 * n0 / eta}")
    j0 = None
    for j in range(n // n0):
        block = row_mu[j * n0 : (j + 1) * n0]
        if sum(block) >= eta / 2 * n0:
            j0 = j
            break
    if j0 is None:
        raise ContractError("no block of length B(F, eta/4) has density eta/2")
    lo = j0 * n0
    rows = A[lo : lo + n0]
    patterns, wsum = _columns_by_pattern(rows, space.num)
    votes: dict = {}
    for pat, w in zip(patterns, wsum):
        Ax = [lo + 1 + i for i in np.flatnonzero(pat).tolist()]
        if 4 * len(Ax) < eta * n0:
            continue
        member = contains_member(F, Ax)
        if member is None:
            raise ContractError(f"dense row {Ax} contains no member of {F}")
        votes[member] = votes.get(member, 0) + w
    member = _heaviest(votes)
    tilde = np.logical_and.reduce([A[i - 1] for i in member])
    t2 = theta2(F, eta, ctx)
    if space.measure(tilde) < t2:
        raise ContractError(f"mu = {space.measure(tilde)} < theta2 = {tower.format_num(t2)}")
    return member, tilde


@dataclass
class CorrelatedBlock:
    P: tuple
    L_prime: tuple
    B: np.ndarray
    include: tuple  # B = (all A_i, i in include) minus (all A_i, i in E) for each E in exclude
    exclude: tuple
    rounds: list = field(default_factory=list)
    max_rounds: int = 0
    theta1: Fraction = Fraction(0)
    bound: Fraction = Fraction(0)


def evaluate_block(events: Mapping[int, np.ndarray], include, exclude) -> np.ndarray:
    """Rebuild B from its expression over the events."""
    out = np.logical_and.reduce([events[i] for i in include])
    for E in exclude:
        out = out & ~np.logical_and.reduce([events[i] for i in E])
    return out


def correlated_block(space: FiniteProbSpace, L: Sequence[int], events: Mapping[int, np.ndarray],
                     k: int, eta, sz: SzEvaluator, ap_mode: str = "sz",
                     ap_horizon: Optional[int] = None) -> CorrelatedBlock:
    """Iterate the correlation step until the block B keeps every surviving event dense.

    Each round picks a progression of length Sz(k, eta/2) inside the surviving
    index set (``ap_mode='sz'``), finds a k-AP P_t in it whose intersection is
    heavy inside Omega_{t-1}, and splits the indices above max P_t by whether
    A_l stays eta/2-dense inside B_t.  The richer colour class survives;
    class (a) ends the loop.
    """
    eta = Fraction(eta)
    L = sorted(set(L))
    for l in L:
        if space.measure(events[l]) < eta:
            raise PreconditionError(f"mu(A_{l}) = {space.measure(events[l])} < eta = {eta}")
    if ap_mode not in ("sz", "direct"):
        raise DomainError(f"unknown ap mode {ap_mode!r}")
    t1 = theta1(k, eta, sz)
    s_max, bound = correlated_block_bound(k, eta, sz)
    s_max = _as_int(s_max, "round bound")
    n0 = _as_int(sz(k, eta / 2), f"Sz({k}, {eta / 2})") if ap_mode == "sz" else k

    omega = space.full()
    L_s = L
    previous: list = []
    rounds: list = []
    for t in range(1, s_max + 1):
        m_omega = space.measure(omega)
        min_rel = min(space.conditional(events[l], omega) for l in L_s) if L_s else None
        pool = L_s if ap_horizon is None else L_s[:ap_horizon]
        if ap_mode == "sz":
            Q = first_ap(pool, n0)
            if Q is None:
                raise PreconditionError(
                    f"round {t}: surviving indices contain no AP of length Sz({k}, {eta / 2}) = {n0}")
            idx, _ = ap_correlation(space, [events[l] for l in Q], k, eta, sz, within=omega)
            P = sub_ap(Q, [i - 1 for i in idx])
        else:
            P = None
            for cand in iter_aps(pool, k):
                inter = np.logical_and.reduce([events[l] for l in cand]) & omega
                if space.conditional(inter, omega) >= t1:
                    P = cand
                    break
            if P is None:
                raise PreconditionError(f"round {t}: no {k}-AP with correlation >= theta1 among surviving indices")
        B_t = np.logical_and.reduce([events[l] for l in P]) & omega
        rel_B = space.conditional(B_t, omega)
        tail = [l for l in L_s if l > max(P)]
        if space.measure(B_t) == 0:
            raise ContractError(f"round {t}: empty block")
        good = [l for l in tail if 2 * space.conditional(events[l], B_t) >= eta]
        bad = [l for l in tail if 2 * space.conditional(events[l], B_t) < eta]
        colour = richest_class([good, bad])
        rounds.append({
            "t": t,
            "P": list(P),
            "omega_measure": m_omega,
            "block_relative": rel_B,
            "min_event_relative": min_rel,
            "colour": "a" if colour == 0 else "b",
            "survivors": len(good if colour == 0 else bad),
            "richness": richness(good if colour == 0 else bad),
        })
        if colour == 0:
            return CorrelatedBlock(tuple(P), tuple(good), B_t, tuple(P), tuple(tuple(p) for p in previous),
                                   rounds, s_max, t1, bound)
        previous.append(P)
        omega = omega & ~B_t
        L_s = bad
        if not L_s:
            raise PreconditionError(f"round {t}: no indices survive above max P")
    raise ContractError(f"no dense block after {s_max} rounds")


def check_block(space: FiniteProbSpace, L: Sequence[int], events: Mapping[int, np.ndarray],
                res: CorrelatedBlock, k: int, eta) -> list[str]:
    """Replay a correlated block from scratch; returns the failed claims."""
    eta = Fraction(eta)
    bad = []
    B = evaluate_block(events, res.include, res.exclude)
    if not np.array_equal(B, res.B):
        bad.append("B differs from its expression")
    if len(res.P) != k or len(set(res.P)) != k or any(
            res.P[i + 1] - res.P[i] != res.P[1] - res.P[0] for i in range(k - 1)):
        bad.append("P is not a k-AP")
    inter = np.logical_and.reduce([events[i] for i in res.P])
    if np.any(B & ~inter):
        bad.append("B is not inside the intersection over P")
    if tower.compare(space.measure(B), res.bound) == "less":
        bad.append(f"mu(B) = {space.measure(B)} below {res.bound}")
    if len(res.rounds) > res.max_rounds:
        bad.append("too many rounds")
    for l in res.L_prime:
        if l <= max(res.P):
            bad.append(f"{l} in L' is not above max P")
        if 2 * space.conditional(events[l], B) < eta:
            bad.append(f"mu_B(A_{l}) < eta/2")
    omega = space.full()
    survivors = sorted(set(L))
    for rec in res.rounds:
        t = rec["t"] - 1
        m_omega = space.measure(omega)
        if m_omega != rec["omega_measure"]:
            bad.append(f"round {t + 1}: recorded mu(Omega_{t}) differs from replay")
        if m_omega < (eta / 2) ** t:
            bad.append(f"round {t + 1}: mu(Omega_{t}) below (eta/2)^{t}")
        if not set(rec["P"]) <= set(survivors):
            bad.append(f"round {t + 1}: P leaves the surviving indices")
        for l in survivors:
            if space.conditional(events[l], omega) < eta + t * eta * res.theta1 / 2:
                bad.append(f"round {t + 1}: event density invariant fails at {l}")
        B_t = np.logical_and.reduce([events[i] for i in rec["P"]]) & omega
        if space.conditional(B_t, omega) < res.theta1:
            bad.append(f"round {t + 1}: block below theta1")
        survivors = [l for l in survivors if l > max(rec["P"])
                     and (2 * space.conditional(events[l], B_t) >= eta) == (rec["colour"] == "a")]
        omega = omega & ~B_t
    if tuple(survivors) != tuple(res.L_prime):
        bad.append("L' differs from replay")
    return bad
