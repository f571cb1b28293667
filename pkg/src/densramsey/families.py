"""Uniformly density-regular families of finite sets of positive integers.

Three translation-invariant variants are supported: all ``m``-element sets,
arithmetic progressions of length ``k`` and polynomial configurations
``{a + p_1(n), ..., a + p_k(n)}`` with ``p_j(0) = 0``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from . import tower
from .aps import first_ap, iter_aps
from .errors import DomainError, MalformedInput


@dataclass(frozen=True)
class FamilySpec:
    variant: str  # "fixed" | "ap" | "poly"
    size: int = 0
    polys: tuple = field(default=())

    def __post_init__(self):
        if self.variant in ("fixed", "ap"):
            if self.size < 1:
                raise DomainError(f"{self.variant} family needs size >= 1")
        elif self.variant == "poly":
            if not self.polys:
                raise DomainError("polynomial family needs at least one polynomial")
            for p in self.polys:
                if not p or p[0] != 0:
                    raise DomainError(f"polynomial {list(p)} must vanish at 0")
            object.__setattr__(self, "size", len(self.polys))
        else:
            raise DomainError(f"unknown family variant {self.variant!r}")

    @classmethod
    def fixed(cls, m: int) -> "FamilySpec":
        return cls("fixed", m)

    @classmethod
    def ap(cls, k: int) -> "FamilySpec":
        return cls("ap", k)

    @classmethod
    def poly(cls, polys: Iterable[Sequence[int]]) -> "FamilySpec":
        norm = []
        for p in polys:
            p = [int(c) for c in p]
            while len(p) > 1 and p[-1] == 0:
                p.pop()
            norm.append(tuple(p))
        return cls("poly", 0, tuple(norm))

    def __str__(self):
        if self.variant == "poly":
            return "poly:" + ";".join(",".join(map(str, p)) for p in self.polys)
        return f"{self.variant}:{self.size}"

    def to_dict(self) -> dict:
        if self.variant == "fixed":
            return {"variant": "fixed", "m": self.size}
        if self.variant == "ap":
            return {"variant": "ap", "k": self.size}
        return {"variant": "poly", "polys": [list(p) for p in self.polys]}

    @classmethod
    def from_dict(cls, data: dict) -> "FamilySpec":
        try:
            v = data["variant"]
            if v == "fixed":
                return cls.fixed(int(data["m"]))
            if v == "ap":
                return cls.ap(int(data["k"]))
            if v == "poly":
                return cls.poly(data["polys"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(f"family spec: bad field {exc}") from None
        raise MalformedInput(f"family spec: unknown variant {data.get('variant')!r}")


def parse_family(text: str) -> FamilySpec:
    """Short form: ``fixed:2``, ``ap:3``, ``poly:0,1;0,0,1``."""
    try:
        kind, _, arg = text.strip().partition(":")
        if kind == "fixed":
            return FamilySpec.fixed(int(arg))
        if kind == "ap":
            return FamilySpec.ap(int(arg))
        if kind == "poly":
            return FamilySpec.poly([int(c) for c in part.split(",")] for part in arg.split(";"))
    except ValueError as exc:
        raise MalformedInput(f"family {text!r}: {exc}") from None
    raise MalformedInput(f"family {text!r}: expected fixed:m, ap:k or poly:...")


def _peval(coeffs: Sequence[int], n: int) -> int:
    v = 0
    for c in reversed(coeffs):
        v = v * n + c
    return v


def _poly_n_bound(polys: Sequence[Sequence[int]], width: int) -> int:
    """|n| beyond which p_j(n) - p_1(n) exceeds ``width`` in absolute value."""
    diff = [0] * max(len(p) for p in polys)
    j = 1
    for j in range(1, len(polys)):
        q = list(polys[j]) + [0] * (len(diff) - len(polys[j]))
        p = list(polys[0]) + [0] * (len(diff) - len(polys[0]))
        diff = [a - b for a, b in zip(q, p)]
        if any(diff):
            break
    while diff and diff[-1] == 0:
        diff.pop()
    lead = abs(diff[-1])
    others = [abs(c) for c in diff[:-1]] + [width]
    # Cauchy bound for the roots of diff(n) -/+ width
    return 1 + math.ceil(Fraction(max(others), lead))


def members_in_interval(F: FamilySpec, lo: int, hi: int) -> list[tuple]:
    """All members of F inside [lo, hi], each sorted, list sorted, no duplicates."""
    if lo > hi:
        raise DomainError(f"empty interval [{lo}, {hi}]")
    if lo < 1:
        raise DomainError("families live in the positive integers")
    pool = range(lo, hi + 1)
    if F.variant == "fixed":
        return list(itertools.combinations(pool, F.size))
    if F.variant == "ap":
        return list(iter_aps(pool, F.size))
    polys = F.polys
    k = len(polys)
    if len(set(polys)) < k:
        return []
    if k == 1:
        return [(a,) for a in pool]
    out = set()
    bound = _poly_n_bound(polys, hi - lo)
    for n in range(-bound, bound + 1):
        if n == 0:
            continue
        vals = [_peval(p, n) for p in polys]
        if len(set(vals)) < k:
            continue
        for a in range(lo - min(vals), hi - max(vals) + 1):
            out.add(tuple(sorted(a + v for v in vals)))
    return sorted(out)


def contains_member(F: FamilySpec, A: Iterable[int]) -> Optional[tuple]:
    """Lexicographically least member of F inside A, or None."""
    A = sorted(set(A))
    if not A:
        return None
    if F.variant == "fixed":
        return tuple(A[: F.size]) if len(A) >= F.size else None
    if F.variant == "ap":
        return first_ap(A, F.size)
    members = set(A)
    for cand in members_in_interval(F, A[0], A[-1]):
        if members.issuperset(cand):
            return cand
    return None


def member_count(F: FamilySpec, length):
    """Number of members inside an interval of the given length (may be symbolic)."""
    if tower.is_exact(length):
        n = int(length)
        if F.variant == "fixed":
            return math.comb(n, F.size)
        if F.variant == "ap" and F.size == 1:
            return n
        if F.variant == "ap":
            j = F.size - 1
            d = (n - 1) // j
            return max(0, n * d - j * d * (d + 1) // 2)
        return len(members_in_interval(F, 1, n)) if n >= 1 else 0
    if F.variant == "fixed":
        return tower.comb_(length, F.size)
    if F.variant == "ap" and F.size == 1:
        return length
    if F.variant == "ap":
        j = F.size - 1
        d = tower.floor_(tower.div(tower.sub(length, 1), j))
        return tower.sub(tower.mul(length, d), tower.div(tower.mul(j, tower.mul(d, tower.add(d, 1))), 2))
    raise DomainError("member count of a polynomial family needs an exact interval length")


@dataclass(frozen=True)
class BResult:
    """Least threshold found by search, valid for lengths up to ``horizon`` only."""

    value: Optional[int]
    horizon: int
    free_sizes: tuple = ()  # largest member-free subset of {1..n}, n = 1..horizon

    @property
    def found(self) -> bool:
        return self.value is not None


def max_free_sizes(F: FamilySpec, horizon: int) -> list[int]:
    """r(n) = size of the largest subset of {1..n} containing no member, n = 1..horizon.

    Exact branch-and-bound: a free set of size r(n-1)+1 inside {1..n} must
    contain n, and its part inside {1..j} has at most r(j) elements.
    """
    by_min: dict[int, list] = {}
    for M in members_in_interval(F, 1, horizon):
        by_min.setdefault(M[0], []).append((M[-1], sum(1 << x for x in M)))
    r = [0]
    for n in range(1, horizon + 1):
        target = r[-1] + 1
        checks = {j: [mask for top, mask in by_min.get(j, []) if top <= n] for j in range(1, n + 1)}

        def extend(chosen: int, size: int, j: int) -> bool:
            if size == target:
                return True
            if j < 1 or size + r[j] < target:
                return False
            cand = chosen | (1 << j)
            if all(mask & cand != mask for mask in checks[j]):
                if extend(cand, size + 1, j - 1):
                    return True
            return extend(chosen, size, j - 1)

        start = 1 << n
        ok = all(mask & start != mask for mask in checks[n]) and extend(start, 1, n - 1)
        r.append(target if ok else r[-1])
    return r[1:]


def b_exact(F: FamilySpec, eps, horizon: int) -> BResult:
    """Least n0 such that every A in {1..n} with |A| >= eps*n has a member, n0 <= n <= horizon."""
    eps = Fraction(eps)
    if not 0 < eps <= 1:
        raise DomainError(f"eps must lie in (0, 1], got {eps}")
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    r = max_free_sizes(F, horizon)
    good = [r[n - 1] < math.ceil(eps * n) for n in range(1, horizon + 1)]
    if not good[-1]:
        return BResult(None, horizon, tuple(r))
    n0 = horizon
    while n0 > 1 and good[n0 - 2]:
        n0 -= 1
    return BResult(n0, horizon, tuple(r))


def b_upper(F: FamilySpec, eps) -> int:
    """ceil(m/eps), the closed form for the family of all m-element sets."""
    eps = Fraction(eps)
    if F.variant != "fixed":
        raise DomainError(f"no closed form for {F}; use b_exact")
    if not 0 < eps <= 1:
        raise DomainError(f"eps must lie in (0, 1], got {eps}")
    return math.ceil(F.size / eps)


def m_count(F: FamilySpec, eta, b_evaluator: Callable) -> int:
    """Members of F inside an interval of length B(F, eta) as given by ``b_evaluator``."""
    return member_count(F, b_evaluator(F, eta))
