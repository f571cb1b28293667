"""Subsets of finite product grids and dense families of them.

A grid over axes ``[q0, q1)`` is a boolean array of shape ``dims``; axis ``p``
has coordinates ``1..n_p`` stored at array index ``value - 1``.  Flattening is
C-order (the last axis varies fastest), which is mixed-radix lexicographic
order on the coordinate tuples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import bitvec
from .errors import DomainError, MalformedInput


@dataclass(frozen=True, eq=False)
class GridSet:
    q0: int
    q1: int
    data: np.ndarray

    def __post_init__(self):
        if not 0 <= self.q0 < self.q1:
            raise DomainError(f"axis range [{self.q0}, {self.q1}) is empty")
        if self.data.ndim != self.q1 - self.q0:
            raise DomainError(f"{self.data.ndim} dimensions for axis range [{self.q0}, {self.q1})")
        if self.data.dtype != bool:
            object.__setattr__(self, "data", self.data.astype(bool))

    @property
    def dims(self) -> tuple:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @classmethod
    def full(cls, q0: int, dims: Sequence[int]) -> "GridSet":
        return cls(q0, q0 + len(dims), np.ones(tuple(dims), dtype=bool))

    @classmethod
    def empty(cls, q0: int, dims: Sequence[int]) -> "GridSet":
        return cls(q0, q0 + len(dims), np.zeros(tuple(dims), dtype=bool))

    @classmethod
    def from_points(cls, q0: int, dims: Sequence[int], points: Iterable[Sequence[int]]) -> "GridSet":
        data = np.zeros(tuple(dims), dtype=bool)
        for pt in points:
            if len(pt) != len(dims) or any(not 1 <= c <= n for c, n in zip(pt, dims)):
                raise MalformedInput(f"point {tuple(pt)} outside grid {tuple(dims)}")
            data[tuple(c - 1 for c in pt)] = True
        return cls(q0, q0 + len(dims), data)

    def __contains__(self, point) -> bool:
        return bool(self.data[tuple(c - 1 for c in point)])

    def __eq__(self, other) -> bool:
        return (isinstance(other, GridSet) and (self.q0, self.q1) == (other.q0, other.q1)
                and np.array_equal(self.data, other.data))

    def count(self) -> int:
        return int(self.data.sum())

    def density(self) -> Fraction:
        return Fraction(self.count(), self.size)

    def points(self) -> list:
        return [tuple(int(c) + 1 for c in idx) for idx in np.argwhere(self.data)]

    def contains_product(self, sets: Sequence[Iterable[int]]) -> bool:
        sets = [sorted(s) for s in sets]
        if len(sets) != self.data.ndim:
            raise DomainError(f"{len(sets)} factor sets for a {self.data.ndim}-dimensional grid")
        for s, n in zip(sets, self.dims):
            if not s or s[0] < 1 or s[-1] > n:
                return False
        return bool(self.data[np.ix_(*[[c - 1 for c in s] for s in sets])].all())

    def to_mask(self) -> int:
        flat = np.packbits(self.data.reshape(-1), bitorder="little")
        return int.from_bytes(flat.tobytes(), "little")

    def to_hex(self) -> str:
        return bitvec.encode(self.to_mask(), self.size)

    @classmethod
    def from_hex(cls, q0: int, dims: Sequence[int], text: str, where: str = "grid") -> "GridSet":
        dims = tuple(dims)
        width = int(np.prod(dims, dtype=object))
        mask = bitvec.decode(text, width, where)
        raw = np.frombuffer(mask.to_bytes((width + 7) // 8, "little"), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[:width].astype(bool)
        return cls(q0, q0 + len(dims), bits.reshape(dims))


def concat(A: GridSet, B: GridSet) -> GridSet:
    """All x followed by y with x in A, y in B."""
    if A.q1 != B.q0:
        raise DomainError(f"axis ranges [{A.q0},{A.q1}) and [{B.q0},{B.q1}) are not contiguous")
    return GridSet(A.q0, B.q1, np.multiply.outer(A.data, B.data).astype(bool))


@dataclass
class DenseFamily:
    """Grids D_l over axes r..l-1 for l in L, plus the global axis sizes."""

    r: int
    eps: Fraction
    L: tuple
    sets: dict  # l -> GridSet
    dims: tuple

    def __post_init__(self):
        self.L = tuple(sorted(set(self.L)))
        self.eps = Fraction(self.eps)
        for l in self.L:
            if l <= self.r:
                continue
            if l not in self.sets:
                raise MalformedInput(f"no set given for index {l}")
            D = self.sets[l]
            if (D.q0, D.q1) != (self.r, l) or D.dims != tuple(self.dims[self.r:l]):
                raise MalformedInput(f"set {l} has axes [{D.q0},{D.q1}) dims {D.dims}, "
                                     f"expected [{self.r},{l}) dims {tuple(self.dims[self.r:l])}")

    def violations(self) -> list:
        return [l for l in self.L if l > self.r and self.sets[l].density() < self.eps]

    def to_dict(self) -> dict:
        return {
            "axes": list(self.dims),
            "r": self.r,
            "epsilon": f"{self.eps.numerator}/{self.eps.denominator}",
            "sets": {str(l): self.sets[l].to_hex() for l in self.L if l > self.r},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DenseFamily":
        try:
            dims = tuple(int(n) for n in data["axes"])
            r = int(data.get("r", 0))
            eps = Fraction(data.get("epsilon", "0"))
            raw = data["sets"]
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise MalformedInput(f"grid file: bad field {exc}") from None
        if any(n < 1 for n in dims):
            raise MalformedInput("grid file: axis sizes must be positive")
        sets = {}
        for key, text in raw.items():
            try:
                l = int(key)
            except ValueError:
                raise MalformedInput(f"grid file: set key {key!r} is not an integer") from None
            if not r < l <= len(dims):
                raise MalformedInput(f"grid file: set {l} outside ({r}, {len(dims)}]")
            sets[l] = GridSet.from_hex(r, dims[r:l], text, where=f"sets[{key}]")
        return cls(r, eps, tuple(sets), sets, dims)
