import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from densramsey import tower
from densramsey.bounds import (
    BoundsContext,
    SzEvaluator,
    b_least_fixed,
    eps_chain,
    f_c_chain,
    f_c_tower_bound,
    f_q_fw,
    sz_eval,
    t_map,
    theta1,
    theta2,
    theta3,
    tower_compare,
    v_delta,
)
from densramsey.errors import DomainError, ThresholdNotComputable
from densramsey.families import FamilySpec, b_exact

PAPER = BoundsContext("paper")
EXACT = SzEvaluator("exact", 12)
HALF = Fraction(1, 2)
F1, F2 = FamilySpec.fixed(1), FamilySpec.fixed(2)


def test_sz_examples():
    res = sz_eval(2, HALF, "exact", 12)
    assert res.value == 3
    assert b_exact(FamilySpec.ap(2), HALF, 12).value == 3
    assert sz_eval(1, Fraction(1, 7), "exact").value == 1
    g = sz_eval(3, HALF, "gowers").value
    assert tower.to_prefix(g) == "(A2^3 (A2^2 12))"


def test_sz_exact_search_certified_to_horizon():
    res = SzEvaluator("exact", 16).evaluate(3, Fraction(3, 4))
    assert res.source == "search" and res.certified_to == 16
    assert res.value == b_exact(FamilySpec.ap(3), Fraction(3, 4), 16).value


def test_sz_gowers_clamp_at_one():
    # log2(1/1) = 0 would collapse the tower; the factor is clamped to 1
    assert tower.to_prefix(sz_eval(3, 1, "gowers").value) == "(A2^3 (A2^2 12))"


def test_sz_table_mode():
    sz = SzEvaluator("table", table={(3, HALF): 17})
    assert sz(3, HALF) == 17
    with pytest.raises(ThresholdNotComputable):
        sz(3, Fraction(1, 3))


def test_theta1_examples():
    rng = random.Random(0)
    for _ in range(20):
        eta = Fraction(rng.randint(1, 50), 50)
        assert theta1(1, eta, EXACT) == eta
    assert theta1(2, 1, EXACT) == Fraction(1, 6)
    for eta in (Fraction(1), HALF, Fraction(1, 3)):
        assert theta1(2, eta, EXACT) <= theta1(1, eta, EXACT)
    with pytest.raises(ThresholdNotComputable):
        theta1(3, HALF, SzEvaluator("gowers"))


def test_theta2_examples():
    assert theta2(F1, 1, PAPER) == Fraction(1, 16)
    assert theta2(F2, HALF, PAPER) == Fraction(1, 960)
    for F in (F1, F2, FamilySpec.fixed(3), FamilySpec.ap(2)):
        for eta in (Fraction(1), HALF, Fraction(1, 3)):
            assert theta2(F, eta, PAPER) <= eta / 4


def test_theta3_examples():
    assert theta3(1, 1, EXACT) == Fraction(1, 8)
    assert theta3(2, 1, EXACT) == Fraction(1, 49152)
    for k in (1, 2):
        for eps in (Fraction(1), HALF, Fraction(1, 3)):
            t3, t1 = theta3(k, eps, EXACT), theta1(k, eps, EXACT)
            assert 0 < t3 <= t1 / 2 and t1 <= 1


def test_t_map_examples():
    assert t_map([F2], HALF, PAPER) == 64
    assert t_map([F1, F1], 1, PAPER) == t_map([F1], Fraction(1, 16), PAPER) == 2048
    assert t_map([F1], 1, PAPER) == 8


def shift_families(rng):
    pool = [FamilySpec.fixed(m) for m in (1, 2, 3)] + [FamilySpec.ap(k) for k in (1, 2, 3)]
    return [rng.choice(pool) for _ in range(rng.randint(2, 3))]


@pytest.mark.parametrize("seed", range(50))
def test_shift_identity(seed):
    rng = random.Random(seed)
    fams = shift_families(rng)
    eps = rng.choice([Fraction(1), HALF, Fraction(1, 3), Fraction(2, 3)])
    lhs = t_map(fams, eps, PAPER)
    rhs = t_map(fams[1:], theta2(fams[0], eps, PAPER), PAPER)
    assert tower_compare(lhs, rhs) == "equal"
    if tower.is_exact(lhs):
        assert lhs == rhs


def test_eps_chain():
    chain = eps_chain([F1, F1, F1], 1, PAPER)
    assert chain == [1, Fraction(1, 16), theta2(F1, Fraction(1, 16), PAPER)]


def test_v_delta_examples():
    assert v_delta(1, [F1], [], PAPER) == 512
    assert v_delta(1, [F2], [], PAPER) == 1024
    assert v_delta(HALF, [F1], [], PAPER) == t_map([F1], theta3(1, HALF, PAPER.sz), PAPER)
    with pytest.raises(DomainError):
        v_delta(1, [F1, F1], [], PAPER)


def test_f_q_fw():
    table = {(2, 1, HALF): 1, (2, 2, HALF): 3, (2, 3, HALF): 5, (2, 5, HALF): 9}
    assert f_q_fw(2, 2, HALF, 1, table) == 3
    assert f_q_fw(2, 2, HALF, 2, table) == 5
    assert f_q_fw(2, 2, HALF, 3, table) == 9
    for q in range(1, 5):
        assert f_q_fw(2, 1, HALF, q, table) == 1
    vals = [f_q_fw(2, 2, HALF, q, table) for q in (1, 2, 3)]
    assert vals == sorted(vals)
    with pytest.raises(ThresholdNotComputable):
        f_q_fw(2, 2, HALF, 4, table)


def test_f_c_chain():
    chain = f_c_chain(1, [2], 0)
    assert chain == [1024]
    assert tower_compare(chain[0], tower.exp2_(30)) == "less"
    assert f_c_tower_bound(1, [2], 0) == 2**30
    two = f_c_chain(1, [2, 2], 1)
    assert two[0] == 1024
    assert tower_compare(two[0], two[1]) in ("less", "equal")


def test_tower_compare_examples():
    assert tower_compare(1024, 2**30) == "less"
    x = 3
    with tower.bit_budget(64):
        a, b = tower.exp2_(x, 2), tower.exp2_(x, 3)
        assert tower_compare(a, b) == "less"
    big = tower.exp2_(12, 3)
    assert not tower.is_exact(big)
    assert tower_compare(tower.exp2_(5 * 1 * 3 * 2), big) == "less"
    g = sz_eval(3, HALF, "gowers").value
    assert tower_compare(g, sz_eval(3, HALF, "exact", 30).value) == "greater"


def test_b_least_fixed_matches_search():
    for m in (1, 2, 3):
        for eps in (Fraction(1), HALF, Fraction(1, 3), Fraction(2, 3)):
            assert b_least_fixed(m, eps) == b_exact(FamilySpec.fixed(m), eps, 14).value


def test_tight_context_uses_least_values():
    tight = BoundsContext("tight", horizon=14)
    assert tight.B(F2, HALF) == 3
    assert PAPER.B(F2, HALF) == 4
    assert tight.B(FamilySpec.ap(3), Fraction(9, 10)) == 3


# ---------------------------------------------------------------------------
# tower arithmetic soundness


OPS = ["add", "mul", "exp2", "log2", "ceil", "floor", "max", "div2"]


def build(recipe, leaves):
    vals = list(leaves)
    for op, i, j in recipe:
        a, b = vals[i % len(vals)], vals[j % len(vals)]
        if op == "add":
            v = tower.add(a, b)
        elif op == "mul":
            v = tower.mul(a, b)
        elif op == "exp2":
            v = tower.exp2_(tower.min_(a, 40) if hasattr(tower, "min_") else a)
        elif op == "log2":
            v = tower.log2_(tower.add(a, 1))
        elif op == "ceil":
            v = tower.ceil_(a)
        elif op == "floor":
            v = tower.floor_(a)
        elif op == "max":
            v = tower.max_(a, b)
        else:
            v = tower.div(a, 2)
        vals.append(v)
    return vals[-1]


recipes = st.lists(st.tuples(st.sampled_from(OPS), st.integers(0, 20), st.integers(0, 20)), min_size=1, max_size=6)


@settings(max_examples=150, deadline=None)
@given(recipes, recipes, st.lists(st.integers(1, 6), min_size=1, max_size=3))
def test_compare_never_contradicts_exact(ra, rb, leaves):
    with tower.bit_budget(1 << 16):
        ea, eb = build(ra, leaves), build(rb, leaves)
    if not (tower.is_exact(ea) and tower.is_exact(eb)):
        return
    truth = "less" if ea < eb else "greater" if ea > eb else "equal"
    with tower.bit_budget(8):
        sa, sb = build(ra, leaves), build(rb, leaves)
    verdict = tower.compare(sa, sb)
    assert verdict in (truth, "incomparable")


def test_exact_below_budget_stays_exact():
    v = tower.exp2_(100)
    assert tower.is_exact(v) and v == 2**100
    assert tower.to_prefix(Fraction(3, 4)) == "3/4"
