"""Exact numbers that fall back to symbolic towers of base-2 exponentials.

Every value handled by the bounds machinery is a ``Num``: an ``int`` or
``Fraction`` while it fits inside the bit budget, otherwise a ``Sym`` node
recording the operation that overflowed.  Exact values under the budget never
become symbolic.

Comparisons involving symbolic values go through interval bounds of the form
``A2^(h)(m)`` (``h`` iterated base-2 exponentials applied to a rational ``m``)
and only ever return a verdict that exact evaluation would confirm.
"""

from __future__ import annotations

import contextlib
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

DEFAULT_BIT_BUDGET = 4096

_bit_budget = int(os.environ.get("RF_BIT_BUDGET", DEFAULT_BIT_BUDGET))


def get_bit_budget() -> int:
    return _bit_budget


def set_bit_budget(bits: int) -> None:
    global _bit_budget
    if bits < 8:
        raise ValueError("bit budget must be at least 8")
    _bit_budget = int(bits)


@contextlib.contextmanager
def bit_budget(bits: int):
    old = _bit_budget
    set_bit_budget(bits)
    try:
        yield
    finally:
        set_bit_budget(old)


Exact = Union[int, Fraction]


@dataclass(frozen=True)
class Sym:
    """A symbolic expression node.

    ``op`` is one of add, sub, mul, div, floor, ceil, log2, exp2, pow, max;
    for exp2 the first argument is the iteration count.
    """

    op: str
    args: tuple

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __str__(self):
        return to_prefix(self)

    def __repr__(self):
        return f"Sym({to_prefix(self)})"


Num = Union[int, Fraction, Sym]


def is_exact(x) -> bool:
    return not isinstance(x, Sym)


def _norm(x: Exact) -> Exact:
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x.numerator)
    return x


def _fits(x: Exact) -> bool:
    x = Fraction(x)
    return (
        abs(x.numerator).bit_length() <= _bit_budget
        and x.denominator.bit_length() <= _bit_budget
    )


def _make(op: str, args: tuple, value: Optional[Exact]) -> Num:
    if value is not None and _fits(value):
        return _norm(value)
    return Sym(op, tuple(_norm(a) if not isinstance(a, Sym) else a for a in args))


def exact_value(x: Num) -> Exact:
    if isinstance(x, Sym):
        raise TypeError(f"value is symbolic: {to_prefix(x)}")
    return x


def add(a: Num, b: Num) -> Num:
    if is_exact(a) and is_exact(b):
        return _make("add", (a, b), Fraction(a) + Fraction(b))
    if is_exact(a) and a == 0:
        return b
    if is_exact(b) and b == 0:
        return a
    return Sym("add", (a, b))


def sub(a: Num, b: Num) -> Num:
    if is_exact(a) and is_exact(b):
        return _make("sub", (a, b), Fraction(a) - Fraction(b))
    if is_exact(b) and b == 0:
        return a
    return Sym("sub", (a, b))


def mul(a: Num, b: Num) -> Num:
    if is_exact(a) and is_exact(b):
        return _make("mul", (a, b), Fraction(a) * Fraction(b))
    for x, y in ((a, b), (b, a)):
        if is_exact(x) and x == 1:
            return y
        if is_exact(x) and x == 0:
            return 0
    return Sym("mul", (a, b))


def div(a: Num, b: Num) -> Num:
    if is_exact(b) and b == 0:
        raise ZeroDivisionError("division by zero")
    if is_exact(a) and is_exact(b):
        return _make("div", (a, b), Fraction(a) / Fraction(b))
    if is_exact(b) and b == 1:
        return a
    return Sym("div", (a, b))


def floor_(x: Num) -> Num:
    if is_exact(x):
        return math.floor(Fraction(x))
    return Sym("floor", (x,))


def ceil_(x: Num) -> Num:
    if is_exact(x):
        return math.ceil(Fraction(x))
    return Sym("ceil", (x,))


def _exact_log2(x: Fraction) -> Optional[int]:
    if x <= 0:
        return None
    n, d = x.numerator, x.denominator
    if d == 1 and n & (n - 1) == 0:
        return n.bit_length() - 1
    if n == 1 and d & (d - 1) == 0:
        return -(d.bit_length() - 1)
    return None


def log2_(x: Num) -> Num:
    if is_exact(x):
        fx = Fraction(x)
        if fx <= 0:
            raise ValueError("log2 of a nonpositive number")
        e = _exact_log2(fx)
        if e is not None:
            return e
    elif x.op == "exp2" and x.args[0] == 1:
        return x.args[1]
    return Sym("log2", (x,))


def exp2_(x: Num, times: int = 1) -> Num:
    """``A2^(times)(x)``; stays symbolic as a single node when it overflows."""
    if times == 0:
        return x
    if is_exact(x):
        v = Fraction(x)
        for _ in range(times):
            if v.denominator != 1 or v > _bit_budget or v < -_bit_budget:
                v = None
                break
            n = int(v)
            v = Fraction(2**n) if n >= 0 else Fraction(1, 2**-n)
        if v is not None and _fits(v):
            return _norm(v)
    return Sym("exp2", (times, x))


def pow_(base: Num, e: Num) -> Num:
    if is_exact(base) and is_exact(e) and Fraction(e).denominator == 1:
        fb, n = Fraction(base), int(e)
        if fb in (0, 1):
            return _norm(fb) if n != 0 else 1
        size = max(abs(fb.numerator).bit_length(), fb.denominator.bit_length())
        if abs(n) * (size - 1) <= _bit_budget:
            return _make("pow", (base, e), fb**n)
    if is_exact(e) and e == 1:
        return base
    if is_exact(e) and e == 0:
        return 1
    return Sym("pow", (base, e))


def comb_(n: Num, m: int) -> Num:
    """Binomial coefficient with a symbolic top argument allowed."""
    if is_exact(n):
        return _make("comb", (n, m), Fraction(math.comb(int(n), m)))
    out: Num = 1
    for i in range(m):
        out = mul(out, sub(n, i))
    return div(out, math.factorial(m))


def max_(*xs: Num) -> Num:
    best = xs[0]
    pending = []
    for x in xs[1:]:
        c = compare(x, best)
        if c == "greater":
            best = x
        elif c in ("less", "equal"):
            continue
        else:
            pending.append(x)
    rest = [p for p in pending if compare(p, best) not in ("less", "equal")]
    if not rest:
        return best
    return Sym("max", (best, *rest))


# ---------------------------------------------------------------------------
# rendering


def _fmt_exact(x: Exact) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def to_prefix(x: Num) -> str:
    """Canonical prefix rendering, e.g. ``(A2^3 (A2^2 12))``."""
    if is_exact(x):
        return _fmt_exact(x)
    if x.op == "exp2":
        times, arg = x.args
        return f"(A2^{times} {to_prefix(arg)})"
    return "(" + " ".join([x.op] + [to_prefix(a) for a in x.args]) + ")"


def format_num(x: Num) -> str:
    return to_prefix(x)


def to_json(x: Num) -> dict:
    if is_exact(x):
        return {"exact": _fmt_exact(x)}
    return {"symbolic": to_prefix(x)}


# ---------------------------------------------------------------------------
# magnitude bounds


@dataclass(frozen=True)
class Mag:
    """The number ``A2^(h)(m)``."""

    h: int
    m: Fraction


def _floor_log2(x: Fraction) -> int:
    # requires x > 0
    n, d = x.numerator, x.denominator
    e = n.bit_length() - d.bit_length()
    if e >= 0:
        return e if n >= d << e else e - 1
    return e if n << -e >= d else e - 1


def _ceil_log2(x: Fraction) -> int:
    f = _floor_log2(x)
    return f if Fraction(2) ** f == x else f + 1


def _descend(g: Mag, upper: bool) -> Mag:
    h, m = g.h, g.m
    while h > 0 and abs(m) <= _bit_budget:
        k = math.ceil(m) if upper else math.floor(m)
        m = Fraction(2) ** k
        h -= 1
    return Mag(h, m)


def _raise(g: Mag, target: int, upper: bool) -> Optional[Mag]:
    h, m = g.h, g.m
    while h < target:
        if m <= 0:
            return None
        m = Fraction(_ceil_log2(m) if upper else _floor_log2(m))
        h += 1
    return Mag(h, m)


def _mag_lt(upper_of_x: Optional[Mag], lower_of_y: Optional[Mag]) -> bool:
    """True when x < y is certain from an upper bound on x and a lower bound on y."""
    if upper_of_x is None or lower_of_y is None:
        return False
    a = _descend(upper_of_x, True)
    b = _descend(lower_of_y, False)
    h = max(a.h, b.h)
    a = _raise(a, h, True)
    b = _raise(b, h, False)
    if a is None or b is None:
        return False
    return a.m < b.m


def _mag_le(upper_of_x: Optional[Mag], lower_of_y: Optional[Mag]) -> bool:
    if upper_of_x is None or lower_of_y is None:
        return False
    a = _descend(upper_of_x, True)
    b = _descend(lower_of_y, False)
    h = max(a.h, b.h)
    a = _raise(a, h, True)
    b = _raise(b, h, False)
    if a is None or b is None:
        return False
    return a.m <= b.m


def _exact_mag(v: Exact) -> Mag:
    return Mag(0, Fraction(v))


def _nonneg(g: Optional[Mag]) -> bool:
    return g is not None and (g.h > 0 or g.m >= 0)


def _at_least_one(g: Optional[Mag]) -> bool:
    return g is not None and _mag_le(Mag(0, Fraction(1)), g)


def _double_upper(g: Mag) -> Optional[Mag]:
    # 2 * A2^(h)(m) <= A2^(h)(m+1) for h >= 1, m >= 0
    if g.h == 0:
        return Mag(0, 2 * g.m) if g.m >= 0 else Mag(0, g.m)
    if g.m < 0:
        return None
    return Mag(g.h, g.m + 1)


def _square_upper(g: Mag) -> Optional[Mag]:
    if g.h == 0:
        return Mag(0, g.m * g.m)
    if g.m < 0:
        return None
    if g.h == 1:
        return Mag(1, 2 * g.m)
    return Mag(g.h, g.m + 1)


def _half_lower(g: Mag) -> Optional[Mag]:
    # A2^(h)(m) / 2 >= A2^(h)(m-1) for h >= 1, m >= 1
    if g.h == 0:
        return Mag(0, g.m / 2)
    if g.m < 1:
        return None
    return Mag(g.h, g.m - 1)


def _max_mag(a: Optional[Mag], b: Optional[Mag], upper: bool) -> Optional[Mag]:
    if a is None or b is None:
        if upper:
            return None
        return a or b
    if _mag_le(a, b):
        return b
    if _mag_le(b, a):
        return a
    return None


def bounds(x: Num) -> tuple[Optional[Mag], Optional[Mag]]:
    """Sound (lower, upper) magnitudes; ``None`` means unknown."""
    if is_exact(x):
        g = _exact_mag(x)
        return g, g
    op, args = x.op, x.args
    if op == "exp2":
        times, arg = args
        lo, hi = bounds(arg)
        return (
            Mag(lo.h + times, lo.m) if lo else None,
            Mag(hi.h + times, hi.m) if hi else None,
        )
    if op == "log2":
        lo, hi = bounds(args[0])
        return _log2_bound(lo, False), _log2_bound(hi, True)
    if op == "max":
        bs = [bounds(a) for a in args]
        lo = None
        for b in bs:
            lo = _max_mag(lo, b[0], upper=False)
        hi = bs[0][1]
        for b in bs[1:]:
            hi = _max_mag(hi, b[1], upper=True)
        return lo, hi
    if op in ("floor", "ceil"):
        lo, hi = bounds(args[0])
        rnd = math.floor if op == "floor" else math.ceil
        if lo is not None and lo.h == 0:
            lo = Mag(0, Fraction(rnd(lo.m)))
        elif lo is not None:
            lo = _half_lower(lo)
        if hi is not None and hi.h == 0:
            hi = Mag(0, Fraction(rnd(hi.m)))
        elif hi is not None:
            hi = _double_upper(hi)
        return lo, hi
    if op == "pow":
        base, e = args
        if is_exact(base) and Fraction(base) > 1:
            return bounds(Sym("exp2", (1, Sym("mul", (e, log2_(base))))))
        return None, None
    if op in ("add", "sub", "mul", "div"):
        return _arith_bounds(op, bounds(args[0]), bounds(args[1]))
    return None, None


def _log2_bound(g: Optional[Mag], upper: bool) -> Optional[Mag]:
    if g is None:
        return None
    if g.h >= 1:
        return Mag(g.h - 1, g.m)
    if g.m <= 0:
        return None
    return Mag(0, Fraction(_ceil_log2(g.m) if upper else _floor_log2(g.m)))


def _arith_bounds(op, a, b):
    (alo, ahi), (blo, bhi) = a, b
    small = all(g is not None and g.h == 0 for g in (alo, ahi, blo, bhi))
    if small:
        ivs = {"add": lambda p, q: p + q, "sub": lambda p, q: p - q, "mul": lambda p, q: p * q}
        if op == "div":
            if blo.m <= 0 <= bhi.m:
                return None, None
            cands = [alo.m / blo.m, alo.m / bhi.m, ahi.m / blo.m, ahi.m / bhi.m]
        elif op == "sub":
            cands = [alo.m - bhi.m, ahi.m - blo.m]
        else:
            f = ivs[op]
            cands = [f(p, q) for p in (alo.m, ahi.m) for q in (blo.m, bhi.m)]
        return Mag(0, min(cands)), Mag(0, max(cands))
    if op == "add":
        if not (_nonneg(alo) and _nonneg(blo)):
            return None, None
        lo = _max_mag(alo, blo, upper=False)
        m = _max_mag(ahi, bhi, upper=True)
        return lo, _double_upper(m) if m is not None else None
    if op == "mul":
        if not (_nonneg(alo) and _nonneg(blo)):
            return None, None
        hi = None
        if _at_least_one(alo) and _at_least_one(blo):
            lo = _max_mag(alo, blo, upper=False)
        else:
            lo = _scaled_lower(alo, blo) or _scaled_lower(blo, alo)
        m = _max_mag(ahi, bhi, upper=True)
        if m is not None:
            if _mag_le(ahi, Mag(0, Fraction(1))):
                hi = bhi
            elif _mag_le(bhi, Mag(0, Fraction(1))):
                hi = ahi
            else:
                hi = _square_upper(m)
        return lo, hi
    if op == "sub":
        # huge minus small
        if blo is not None and _nonneg(blo) and alo is not None and alo.h > 0:
            half = _half_lower(alo)
            lo = half if half is not None and _mag_le(bhi, half) else None
            return lo, ahi
        return None, None
    if op == "div":
        if blo is not None and blo.h == 0 and blo.m > 0 and bhi is not None and bhi.h == 0:
            inv = ((Mag(0, 1 / bhi.m)), Mag(0, 1 / blo.m))
            return _arith_bounds("mul", (alo, ahi), inv)
        return None, None
    return None, None


def _scaled_lower(big: Optional[Mag], small: Optional[Mag]) -> Optional[Mag]:
    """Lower bound on big*c for a small positive factor c < 1."""
    if big is None or small is None or small.h != 0 or small.m <= 0 or big.h == 0:
        return None
    d = 1 / small.m
    if big.h == 1:
        return Mag(1, big.m - _ceil_log2(d))
    cand = Mag(big.h, big.m - 1)
    if big.m >= 1 and _mag_le(Mag(0, d), cand):
        return cand
    return None


def compare(a: Num, b: Num) -> str:
    """Return 'less', 'equal', 'greater' or 'incomparable' (sound only)."""
    if is_exact(a) and is_exact(b):
        fa, fb = Fraction(a), Fraction(b)
        return "less" if fa < fb else "greater" if fa > fb else "equal"
    if a == b:
        return "equal"
    alo, ahi = bounds(a)
    blo, bhi = bounds(b)
    if _mag_lt(ahi, blo):
        return "less"
    if _mag_lt(bhi, alo):
        return "greater"
    return "incomparable"
