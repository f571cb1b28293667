import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from densramsey.bounds import BoundsContext
from densramsey.errors import DomainError, ExtractionFailed, PreconditionError
from densramsey.families import FamilySpec, members_in_interval
from densramsey.grid_extraction import dense_inductive_step, extract_grid, grid_driver
from densramsey.grids import DenseFamily, GridSet, concat

PAPER = BoundsContext("paper")
TIGHT = BoundsContext("tight")
HALF = Fraction(1, 2)
F1, F2 = FamilySpec.fixed(1), FamilySpec.fixed(2)


def random_grid(rng, q0, dims, eps):
    size = math.prod(dims)
    data = np.zeros(size, dtype=bool)
    count = rng.randint(math.ceil(eps * size), size)
    data[rng.sample(range(size), count)] = True
    return GridSet(q0, q0 + len(dims), data.reshape(dims))


def product_grid(q0, dims, sets):
    data = np.zeros(dims, dtype=bool)
    data[np.ix_(*[[c - 1 for c in s] for s in sets])] = True
    return GridSet(q0, q0 + len(dims), data)


def inside(small, big):
    return not np.any(small.data & ~big.data)


def oracle_extract(D, families):
    """Exhaustive search over all member tuples."""
    pools = [members_in_interval(F, 1, n) for F, n in zip(families, D.dims)]
    for combo in itertools.product(*pools):
        if D.data[np.ix_(*[[c - 1 for c in s] for s in combo])].all():
            return combo
    return None


def is_member(F, I):
    return tuple(sorted(I)) in set(members_in_interval(F, min(I), max(I)))


# ---------------------------------------------------------------------------
# grids


def test_concat_examples():
    a = GridSet.from_points(0, (2,), [(1,)])
    b = GridSet.from_points(1, (3,), [(2,)])
    assert concat(a, b).points() == [(1, 2)]
    a = GridSet.from_points(0, (2,), [(1,), (2,)])
    assert concat(a, b).points() == [(1, 2), (2, 2)]
    with pytest.raises(DomainError):
        concat(a, GridSet.full(2, (2,)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=1, max_size=2), st.lists(st.integers(1, 3), min_size=1, max_size=2),
       st.data())
def test_concat_density_and_membership(da, db, data):
    A = GridSet(0, len(da), np.array(data.draw(st.lists(st.booleans(), min_size=math.prod(da),
                                                        max_size=math.prod(da)))).reshape(da))
    B = GridSet(len(da), len(da) + len(db), np.array(data.draw(st.lists(st.booleans(), min_size=math.prod(db),
                                                                    max_size=math.prod(db)))).reshape(db))
    C = concat(A, B)
    assert C.density() == A.density() * B.density()
    assert C.count() == A.count() * B.count()
    expect = sorted(x + y for x in A.points() for y in B.points())
    assert C.points() == expect


def test_grid_hex_roundtrip():
    rng = random.Random(4)
    D = random_grid(rng, 0, (3, 5, 2), HALF)
    assert GridSet.from_hex(0, (3, 5, 2), D.to_hex()) == D
    fam = DenseFamily(0, HALF, (1, 2), {1: random_grid(rng, 0, (4,), HALF), 2: random_grid(rng, 0, (4, 3), HALF)},
                      (4, 3))
    back = DenseFamily.from_dict(fam.to_dict())
    assert back.L == fam.L and all(back.sets[l] == fam.sets[l] for l in fam.L)


# ---------------------------------------------------------------------------
# extract_grid


def test_extract_singleton_family_gives_least_element():
    D = GridSet.from_points(0, (32,), [(7,), (9,)] + [(i,) for i in range(17, 33)])
    assert extract_grid(D, [F1], HALF, PAPER) == [(7,)]


@pytest.mark.parametrize("seed", range(100))
def test_extract_paper_mode_64(seed):
    rng = random.Random(seed)
    D = random_grid(rng, 0, (64,), HALF)
    (I,) = extract_grid(D, [F2], HALF, PAPER)
    assert len(I) == 2 and all(D.data[i - 1] for i in I)


def test_extract_paper_mode_threshold():
    D = GridSet.full(0, (63,))
    with pytest.raises(PreconditionError):
        extract_grid(D, [F2], HALF, PAPER)


def test_extract_recursion_full_grid():
    D = GridSet.full(0, (2048, 2048))
    assert extract_grid(D, [F1, F1], 1, PAPER) == [(1,), (1,)]


def test_extract_density_precondition():
    D = GridSet.from_points(0, (4,), [(1,)])
    with pytest.raises(PreconditionError):
        extract_grid(D, [F1], HALF, TIGHT)


FAMS = [F1, F2, FamilySpec.ap(2), FamilySpec.ap(3)]


@pytest.mark.parametrize("seed", range(100))
def test_extract_tight_mode_against_oracle(seed):
    rng = random.Random(1000 + seed)
    q = seed % 3
    cap = (50, 10, 6)[q]
    dims = tuple(rng.randint(3, cap) for _ in range(q + 1))
    families = [rng.choice(FAMS) for _ in range(q + 1)]
    eps = rng.choice([HALF, Fraction(2, 3), Fraction(3, 4)])
    D = random_grid(rng, 0, dims, eps)
    expect = oracle_extract(D, families)
    if expect is None:
        with pytest.raises(ExtractionFailed):
            extract_grid(D, families, eps, TIGHT)
        return
    I = extract_grid(D, families, eps, TIGHT)
    assert all(is_member(F, s) for F, s in zip(families, I))
    assert inside(product_grid(0, dims, I), D)


# ---------------------------------------------------------------------------
# inductive step and driver


def full_family(dims, L, eps=1):
    return DenseFamily(0, eps, tuple(L), {l: GridSet.full(0, dims[:l]) for l in L}, tuple(dims))


def check_step(fam, res):
    r, r2 = fam.r, max(res.P)
    assert r < min(res.P)
    for q in res.P:
        assert inside(product_grid(r, fam.dims[r:q], res.I[: q - r]), fam.sets[q])
    head = product_grid(r, fam.dims[r:r2], res.I)
    for l in res.L_prime:
        assert inside(concat(head, res.family.sets[l]), fam.sets[l])
        assert res.family.sets[l].density() >= res.family.eps


def test_step_full_grids():
    dims = (3, 3, 3, 3)
    fam = full_family(dims, [1, 2, 3, 4])
    res = dense_inductive_step(fam, 2, [F2] * 4, TIGHT)
    assert res.P == (1, 2) and res.I == [(1, 2), (1, 2)]
    assert res.L_prime == (3, 4)
    assert all(res.family.sets[l].data.all() for l in res.L_prime)
    assert res.family.eps == Fraction(1, 2 ** (9 + 2))
    check_step(fam, res)


def test_step_k1():
    dims = (2, 2, 2)
    fam = full_family(dims, [1, 2, 3])
    res = dense_inductive_step(fam, 1, [F1] * 3, TIGHT)
    assert res.P == (1,) and res.I == [(1,)]
    check_step(fam, res)


def test_step_many_unit_axes():
    dims = (1,) * 60
    fam = full_family(dims, range(1, 61))
    res = dense_inductive_step(fam, 2, [F1] * 60, TIGHT)
    check_step(fam, res)
    assert res.family.eps == Fraction(1, 2 ** (1 + 2))


@pytest.mark.parametrize("seed", range(10))
def test_step_seeded(seed):
    rng = random.Random(seed)
    dims = (3,) * 5
    L = [1, 2, 3, 4, 5]
    fam = DenseFamily(0, HALF, tuple(L), {l: random_grid(rng, 0, dims[:l], Fraction(3, 4)) for l in L}, dims)
    res = dense_inductive_step(fam, 1, [F1] * 5, TIGHT)
    check_step(fam, res)
    assert res.trace["epsilon_next"] == HALF * Fraction(1, 2 ** (math.prod(dims[: max(res.P)]) + 2))


def check_driver(fam, res):
    for l in res.L_prime:
        assert inside(product_grid(0, fam.dims[:l], res.I[:l]), fam.sets[l])
    for a, b in zip(res.P, res.P[1:]):
        assert max(a) < min(b)


def test_driver_full_grids():
    dims = (2,) * 6
    fam = full_family(dims, range(1, 7))
    res = grid_driver(fam, [F1] * 6, 1, 2, TIGHT)
    assert res.L_prime == tuple(sorted(set(res.P[0]) | set(res.P[1])))
    assert [len(P) for P in res.P] == [1, 2]
    check_driver(fam, res)


def test_driver_one_round_matches_step():
    dims = (2, 2, 2)
    fam = full_family(dims, [1, 2, 3])
    res = grid_driver(fam, [F1] * 3, 1, 1, TIGHT)
    step = dense_inductive_step(DenseFamily(0, 1, fam.L, fam.sets, dims), 1, [F1] * 3, TIGHT)
    assert res.P == [step.P] and res.I == step.I


@pytest.mark.parametrize("seed", range(20))
def test_driver_seeded_tight(seed):
    rng = random.Random(seed)
    dims = (3,) * 6
    L = list(range(1, 7))
    fam = DenseFamily(0, HALF, tuple(L), {l: random_grid(rng, 0, dims[:l], HALF) for l in L}, dims)
    res = grid_driver(fam, [F1] * 6, HALF, 2, TIGHT)
    check_driver(fam, res)
    eps = [rec["epsilon"] for rec in res.rounds]
    assert eps[0] == HALF  # empty product read as 0
    r1 = max(res.P[0])
    assert eps[1] == HALF * Fraction(1, 2 ** (3**r1 + 2 * r1))


def test_driver_empty_product_one():
    ctx = BoundsContext("tight", empty_product_one=True)
    dims = (2,) * 4
    fam = full_family(dims, range(1, 5))
    res = grid_driver(fam, [F1] * 4, 1, 1, ctx)
    assert res.rounds[0]["epsilon"] == Fraction(1, 2)
