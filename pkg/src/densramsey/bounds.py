"""Threshold maps and numeric invariants.

Every evaluator works on ``tower.Num`` values: exact rationals while they fit
the bit budget, symbolic tower expressions beyond it.  Two B-modes exist:
``paper`` uses the closed-form thresholds (``ceil(m/eps)`` for fixed-size
families, the iterated-exponential Szemeredi bound for longer progressions),
``tight`` uses least values found by exhaustive search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence, Union

from . import tower
from .errors import DomainError, ThresholdNotComputable
from .families import FamilySpec, b_exact, member_count
from .tower import Num

Rational = Union[int, Fraction]


def _check_unit(x, name: str) -> None:
    if tower.is_exact(x) and not 0 < Fraction(x) <= 1:
        raise DomainError(f"{name} must lie in (0, 1], got {x}")


# ---------------------------------------------------------------------------
# Szemeredi numbers


@dataclass(frozen=True)
class SzResult:
    value: Num
    certified_to: Optional[int] = None  # None: valid for every length
    source: str = "closed-form"


def sz_closed_form(k: int, delta: Rational) -> Optional[int]:
    """Exact Sz for k <= 2: one element, or two elements once delta*n > 1."""
    if k == 1:
        return 1
    if k == 2:
        return math.floor(1 / Fraction(delta)) + 1
    return None


def sz_gowers(k: int, delta: Num) -> Num:
    """A2^(3)(max(1, log2(1/delta)) * A2^(2)(k + 9))."""
    factor = tower.max_(1, tower.log2_(tower.div(1, delta)))
    return tower.exp2_(tower.mul(factor, tower.exp2_(k + 9, 2)), 3)


@dataclass(frozen=True)
class SzEvaluator:
    """Szemeredi-number source.

    mode ``exact`` searches up to ``horizon`` (closed forms for k <= 2),
    ``gowers`` always uses the tower bound, ``table`` reads ``table[(k, delta)]``
    and ``auto`` is exact for k <= 2 and Gowers above.
    """

    mode: str = "auto"
    horizon: int = 30
    table: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("exact", "gowers", "table", "auto"):
            raise DomainError(f"unknown Sz mode {self.mode!r}")

    def evaluate(self, k: int, delta: Num) -> SzResult:
        if k < 1:
            raise DomainError("k must be >= 1")
        _check_unit(delta, "delta")
        if self.mode == "gowers":
            return SzResult(sz_gowers(k, delta), None, "gowers")
        if self.mode == "table":
            key = (k, Fraction(delta))
            if key not in self.table:
                raise ThresholdNotComputable(f"no table entry for Sz({k}, {delta})")
            return SzResult(self.table[key], None, "table")
        if k <= 2 and tower.is_exact(delta):
            return SzResult(sz_closed_form(k, delta), None, "closed-form")
        if self.mode == "auto":
            return SzResult(sz_gowers(k, delta), None, "gowers")
        if not tower.is_exact(delta):
            raise ThresholdNotComputable(f"exact Sz({k}, {tower.format_num(delta)}) needs an exact delta")
        res = b_exact(FamilySpec.ap(k), delta, self.horizon)
        if not res.found:
            raise ThresholdNotComputable(f"Sz({k}, {delta}) exceeds search horizon {self.horizon}")
        return SzResult(res.value, self.horizon, "search")

    def __call__(self, k: int, delta: Num) -> Num:
        return self.evaluate(k, delta).value


def sz_eval(k: int, delta: Num, mode: str = "auto", horizon: int = 30) -> SzResult:
    return SzEvaluator(mode, horizon).evaluate(k, delta)


# ---------------------------------------------------------------------------
# B(F, eps) sources


def b_least_fixed(m: int, eps: Num) -> Num:
    """Least threshold for all m-element sets: max(m, floor((m-1)/eps) + 1)."""
    if m == 1:
        return 1
    return tower.max_(m, tower.add(tower.floor_(tower.div(m - 1, eps)), 1))


@dataclass(frozen=True)
class BoundsContext:
    """How B(F, eps) and Sz are evaluated.

    ``mode='paper'``: ceil(m/eps) for fixed-size families (2-APs are 2-sets),
    the Szemeredi source for longer progressions, search for polynomial ones.
    ``mode='tight'``: least values, from closed forms where known and from
    search up to ``horizon`` otherwise.
    """

    mode: str = "paper"
    horizon: int = 30
    sz: SzEvaluator = field(default_factory=SzEvaluator)
    empty_product_one: bool = False

    def __post_init__(self):
        if self.mode not in ("paper", "tight"):
            raise DomainError(f"unknown bounds mode {self.mode!r}")

    def _fixed_size(self, F: FamilySpec) -> Optional[int]:
        if F.variant == "fixed":
            return F.size
        if F.variant == "ap" and F.size <= 2:
            return F.size
        if F.variant == "poly" and F.size == 1:
            return 1
        return None

    def B(self, F: FamilySpec, eps: Num) -> Num:
        _check_unit(eps, "eps")
        m = self._fixed_size(F)
        if m is not None:
            if self.mode == "paper":
                return tower.ceil_(tower.div(m, eps))
            return b_least_fixed(m, eps)
        if self.mode == "paper" and F.variant == "ap":
            return self.sz(F.size, eps)
        if not tower.is_exact(eps):
            raise ThresholdNotComputable(f"B({F}, {tower.format_num(eps)}) needs search at a symbolic density")
        res = b_exact(F, eps, self.horizon)
        if not res.found:
            raise ThresholdNotComputable(f"B({F}, {eps}) exceeds search horizon {self.horizon}")
        return res.value

    def __call__(self, F: FamilySpec, eps: Num) -> Num:
        return self.B(F, eps)


# ---------------------------------------------------------------------------
# theta maps


def m_value(F: FamilySpec, eta: Num, ctx: BoundsContext) -> Num:
    """M(F, eta): members of F inside an interval of length B(F, eta)."""
    return member_count(F, ctx.B(F, eta))


def theta1(k: int, eta: Num, sz: SzEvaluator, allow_symbolic: bool = False) -> Num:
    _check_unit(eta, "eta")
    if k < 1:
        raise DomainError("k must be >= 1")
    if k == 1:
        return eta
    s = sz(k, tower.div(eta, 2))
    if not tower.is_exact(s) and not allow_symbolic:
        raise ThresholdNotComputable(f"theta1({k}, {eta}) needs Sz = {tower.format_num(s)}")
    return tower.div(tower.div(eta, 2), tower.comb_(s, 2))


def theta2(F: FamilySpec, eta: Num, ctx: BoundsContext) -> Num:
    _check_unit(eta, "eta")
    return tower.div(eta, tower.mul(4, m_value(F, tower.div(eta, 4), ctx)))


def theta3(k: int, eps: Num, sz: SzEvaluator, allow_symbolic: bool = False) -> Num:
    t1 = theta1(k, eps, sz, allow_symbolic)
    rounds = tower.floor_(tower.div(2, tower.mul(eps, t1)))
    return tower.mul(tower.div(tower.pow_(tower.div(eps, 2), rounds), 2), t1)


def correlated_block_bound(k: int, eta: Num, sz: SzEvaluator) -> tuple:
    """(max rounds, guaranteed measure of the block) for the iterated correlation."""
    t1 = theta1(k, eta, sz)
    s_max = tower.floor_(tower.div(2, tower.mul(eta, t1)))
    return s_max, tower.mul(tower.pow_(tower.div(eta, 2), tower.sub(s_max, 1)), t1)


def eps_chain(families: Sequence[FamilySpec], eps: Num, ctx: BoundsContext) -> list:
    """eps_0 = eps, eps_{p+1} = theta2(F_p, eps_p)."""
    if not families:
        raise DomainError("need at least one family")
    out = [eps]
    for F in families[:-1]:
        out.append(theta2(F, out[-1], ctx))
    return out


def t_map(families: Sequence[FamilySpec], eps: Num, ctx: BoundsContext) -> Num:
    """ceil((2/eps_q) * B(F_q, eps_q/4)) along the theta2 chain."""
    _check_unit(eps, "eps")
    e = eps_chain(families, eps, ctx)[-1]
    return tower.ceil_(tower.mul(tower.div(2, e), ctx.B(families[-1], tower.div(e, 4))))


def _prefix_product(dims: Sequence[Num], r: int, empty_product_one: bool) -> Num:
    if r == 0:
        return 1 if empty_product_one else 0
    out: Num = 1
    for n in dims[:r]:
        out = tower.mul(out, n)
    return out


def round_epsilon(delta: Num, dims: Sequence[Num], r: int, empty_product_one: bool = False) -> Num:
    """delta * 2^-(prod_{p<r} n_p + 2r)."""
    e = tower.add(_prefix_product(dims, r, empty_product_one), 2 * r)
    return tower.mul(delta, tower.exp2_(tower.sub(0, e)))


def v_delta_terms(delta: Num, families: Sequence[FamilySpec], dims: Sequence[Num],
                  ctx: BoundsContext, allow_symbolic: bool = False) -> list:
    q = len(families) - 1
    if q < 0:
        raise DomainError("need at least one family")
    if len(dims) != q:
        raise DomainError(f"need {q} dims for {q + 1} families, got {len(dims)}")
    _check_unit(delta, "delta")
    terms = []
    for r in range(q + 1):
        e = round_epsilon(delta, dims, r, ctx.empty_product_one)
        terms.append(t_map(families[r:], theta3(r + 1, e, ctx.sz, allow_symbolic), ctx))
    return terms


def v_delta(delta: Num, families: Sequence[FamilySpec], dims: Sequence[Num],
            ctx: BoundsContext, allow_symbolic: bool = False) -> Num:
    return tower.max_(*v_delta_terms(delta, families, dims, ctx, allow_symbolic))


def f_c_chain(delta: Num, ms: Sequence[int], Q: int, ctx: Optional[BoundsContext] = None) -> list:
    """f_c(0..Q) with f_c(q) = V_delta((F_[m_p])_{p<=q}, (f_c(p))_{p<q})."""
    if any(m < 1 for m in ms):
        raise DomainError("family sizes must be >= 1")
    if len(ms) < Q + 1:
        raise DomainError(f"need {Q + 1} family sizes, got {len(ms)}")
    ctx = ctx or BoundsContext("paper")
    fams = [FamilySpec.fixed(m) for m in ms[: Q + 1]]
    out: list = []
    for q in range(Q + 1):
        out.append(v_delta(delta, fams[: q + 1], out, ctx, allow_symbolic=True))
    return out


def f_c_tower_bound(delta: Rational, ms: Sequence[int], q: int) -> Num:
    """A2^(1+6q)(5*((2/delta^2)+1)*log2(2/delta)*m_0 + sum_{p=1..q} m_p)."""
    delta = Fraction(delta)
    inner = tower.mul(tower.mul(5 * (2 / delta**2 + 1), tower.log2_(2 / delta)), ms[0])
    inner = tower.add(inner, sum(ms[1 : q + 1]))
    return tower.exp2_(tower.ceil_(inner), 1 + 6 * q)


def f_q_fw(b: int, k: int, rho: Rational, q: int,
           ufw: Union[Callable[[int, int, Rational], Optional[int]], Mapping]) -> int:
    """f_1 = UFW(b, k, rho), f_{q+1} = UFW(b, f_q, rho)."""
    if q < 1:
        raise DomainError("q must be >= 1")

    def lookup(kk: int) -> int:
        val = ufw.get((b, kk, Fraction(rho))) if isinstance(ufw, Mapping) else ufw(b, kk, rho)
        if val is None:
            raise ThresholdNotComputable(f"UFW({b}, {kk}, {rho}) unavailable")
        return val

    v = k
    for _ in range(q):
        v = lookup(v)
    return v


def tower_compare(a: Num, b: Num) -> str:
    return tower.compare(a, b)
