"""Product-grid extraction: finding a product of family members inside a dense grid.

``extract_grid`` peels one axis at a time: a member I_0 of F_0 is chosen so
that the fibre {x : (i, x) in D for all i in I_0} stays dense, then the rest is
extracted from that fibre.  ``dense_inductive_step`` and ``grid_driver`` run
the multi-index version on dense families of grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import tower
from .aps import iter_aps, richest_class
from .bounds import BoundsContext, round_epsilon, t_map, theta2, theta3
from .errors import ContractError, DomainError, ExtractionFailed, PreconditionError, ThresholdNotComputable
from .families import FamilySpec, contains_member, members_in_interval
from .grids import DenseFamily, GridSet
from .measure_core import FiniteProbSpace, correlated_block, family_correlation


def _fmt(x) -> str:
    return tower.format_num(x)


def check_dims(families: Sequence[FamilySpec], dims: Sequence[int], eps, ctx: BoundsContext) -> None:
    """n_p >= T((F_s)_{s<=p}, eps) for every axis, else a precondition error."""
    for p in range(len(families)):
        need = t_map(families[: p + 1], eps, ctx)
        verdict = tower.compare(dims[p], need)
        if verdict not in ("greater", "equal"):
            raise PreconditionError(f"axis {p}: n = {dims[p]} below T = {_fmt(need)} ({verdict})")


def _fibre(data: np.ndarray, member: Sequence[int]) -> np.ndarray:
    return np.logical_and.reduce([data[i - 1] for i in member])


def _extract_paper(data: np.ndarray, families: Sequence[FamilySpec], eps, ctx: BoundsContext) -> list:
    F0 = families[0]
    if data.ndim == 1:
        member = contains_member(F0, (np.flatnonzero(data) + 1).tolist())
        if member is None:
            raise ContractError(f"dense set contains no member of {F0}")
        return [member]
    rows = data.reshape(data.shape[0], -1)
    space = FiniteProbSpace.uniform(rows.shape[1])
    member, tilde = family_correlation(space, rows, F0, eps, ctx)
    rest = tilde.reshape(data.shape[1:])
    return [member] + _extract_paper(rest, families[1:], theta2(F0, eps, ctx), ctx)


def _extract_search(data: np.ndarray, families: Sequence[FamilySpec]) -> Optional[list]:
    """Backtracking search; members with the heaviest fibre are tried first."""
    F0 = families[0]
    if data.ndim == 1:
        member = contains_member(F0, (np.flatnonzero(data) + 1).tolist())
        return None if member is None else [member]
    cands = []
    for member in members_in_interval(F0, 1, data.shape[0]):
        fib = _fibre(data, member)
        c = int(fib.sum())
        if c:
            cands.append((-c, member, fib))
    cands.sort(key=lambda t: (t[0], t[1]))
    for _, member, fib in cands:
        rest = _extract_search(fib, families[1:])
        if rest is not None:
            return [member] + rest
    return None


def extract_grid(D: GridSet, families: Sequence[FamilySpec], eps, ctx: BoundsContext) -> list:
    """Members I_p of F_p inside [n_p] whose product lies in D.

    Paper mode checks the axis thresholds and follows the correlation
    recursion; tight mode searches exhaustively with the same choice order.
    """
    eps = Fraction(eps)
    if len(families) != D.data.ndim:
        raise DomainError(f"{len(families)} families for {D.data.ndim} axes")
    if D.density() < eps:
        raise PreconditionError(f"density {D.density()} < eps = {eps}")
    if ctx.mode == "paper":
        check_dims(families, D.dims, eps, ctx)
        out = _extract_paper(D.data, families, eps, ctx)
    else:
        out = _extract_search(D.data, families)
        if out is None:
            raise ExtractionFailed("no product of family members lies inside the grid")
    if not D.contains_product(out):
        raise ContractError("extracted product is not inside D")
    return out


# ---------------------------------------------------------------------------
# inductive step


@dataclass
class StepResult:
    P: tuple
    L_prime: tuple
    I: list  # members for axes r..r'-1
    family: DenseFamily
    trace: dict = field(default_factory=dict)


def _cylinder_events(fam: DenseFamily, L: Sequence[int], top: int):
    """A_l as masks over prod_{p=r}^{top-1}[n_p], flattened C-order."""
    r = fam.r
    dims = fam.dims[r:top]
    size = int(np.prod(dims, dtype=np.int64))
    events = {}
    for l in L:
        D = fam.sets[l].data
        tail = int(np.prod(dims[l - r:], dtype=np.int64))
        events[l] = np.repeat(D.reshape(-1), tail)
    return FiniteProbSpace.uniform(size), events


def _pattern_key(mask: np.ndarray) -> tuple:
    return tuple(np.flatnonzero(mask).tolist())


def dense_inductive_step(fam: DenseFamily, k: int, families: Sequence[FamilySpec], ctx: BoundsContext,
                         ap_mode: Optional[str] = None) -> StepResult:
    """One round: a k-AP P in L, members for axes r..max P - 1 and the next dense family."""
    eps, r = fam.eps, fam.r
    L = [l for l in fam.L if l > r]
    if not L:
        raise PreconditionError(f"no index of L lies above r = {r}")
    bad = fam.violations()
    if bad:
        raise PreconditionError(f"sets {bad} have density below eps = {eps}")
    top = max(L)
    if len(families) < top:
        raise DomainError(f"need families for axes up to {top - 1}")
    ap_mode = ap_mode or ("sz" if ctx.mode == "paper" else "direct")
    th3 = theta3(k, eps, ctx.sz, allow_symbolic=True)
    if ctx.mode == "paper":
        for q in range(r, top):
            need = t_map(families[r : q + 1], th3, ctx)
            if tower.compare(fam.dims[q], need) not in ("greater", "equal"):
                raise PreconditionError(f"axis {q}: n = {fam.dims[q]} below T = {_fmt(need)}")

    space, events = _cylinder_events(fam, L, top)
    block = correlated_block(space, L, events, k, eps, ctx.sz, ap_mode=ap_mode)
    P = block.P
    r2 = max(P)
    head = int(np.prod(fam.dims[r:r2], dtype=np.int64))
    # B depends on the first r2 - r coordinates only
    B_full = block.B.reshape(head, -1)
    B = B_full[:, 0]
    if not np.array_equal(B_full, np.repeat(B[:, None], B_full.shape[1], axis=1)):
        raise ContractError("block is not a cylinder over axes r..max P - 1")
    nB = int(B.sum())
    L2 = [l for l in block.L_prime if l > r2]

    per_l = {}
    for l in L2:
        M = fam.sets[l].data.reshape(head, -1)
        gam = M & B[:, None]
        counts = gam.sum(axis=0)
        dense_y = np.flatnonzero(4 * counts >= eps * nB)
        classes: dict = {}
        for y in dense_y.tolist():
            classes.setdefault(_pattern_key(gam[:, y]), []).append(y)
        key = min(classes, key=lambda g: (-len(classes[g]), g))
        per_l[l] = (key, classes[key])

    colours: list = []
    for l in L2:
        if per_l[l][0] not in colours:
            colours.append(per_l[l][0])
    groups = [[l for l in L2 if per_l[l][0] == c] for c in colours]
    if groups:
        chosen = richest_class(groups)
        gamma_key, L_next = colours[chosen], groups[chosen]
        gamma = np.zeros(head, dtype=bool)
        gamma[list(gamma_key)] = True
    else:
        # nothing survives above max P: the truncated run ends here and B itself is used
        L_next, gamma = [], B.copy()
    G = GridSet(r, r2, gamma.reshape(fam.dims[r:r2]))

    dens_gamma = G.density()
    verdict = tower.compare(dens_gamma, th3)
    if verdict == "less":
        raise ContractError(f"Gamma density {dens_gamma} below theta3 = {_fmt(th3)}")
    eps_G = dens_gamma if ctx.mode == "tight" else th3
    I = extract_grid(G, families[r:r2], eps_G, ctx)

    prod = int(np.prod(fam.dims[r:r2], dtype=object))
    eps2 = eps * Fraction(1, 2 ** (prod + 2))
    new_sets = {}
    for l in L_next:
        data = np.zeros(fam.dims[r2:l], dtype=bool).reshape(-1)
        data[per_l[l][1]] = True
        new_sets[l] = GridSet(r2, l, data.reshape(fam.dims[r2:l]))
    fam2 = DenseFamily(r2, eps2, tuple(L_next), new_sets, fam.dims)
    if fam2.violations():
        raise ContractError(f"next family has sparse sets {fam2.violations()}")
    trace = {
        "r": r,
        "k": k,
        "epsilon": eps,
        "P": list(P),
        "rounds": len(block.rounds),
        "block_density": Fraction(nB, head),
        "gamma_density": dens_gamma,
        "theta3": _fmt(th3),
        "theta3_check": verdict,
        "epsilon_next": eps2,
        "L_prime": list(L_next),
    }
    return StepResult(tuple(P), tuple(L_next), I, fam2, trace)


# ---------------------------------------------------------------------------
# driver


@dataclass
class DriverResult:
    L_prime: tuple
    I: list
    rounds: list
    P: list


def grid_driver(fam: DenseFamily, families: Sequence[FamilySpec], delta, R: int,
                ctx: BoundsContext, ap_mode: Optional[str] = None) -> DriverResult:
    """R rounds of the inductive step starting from a (0, delta)-dense family."""
    delta = Fraction(delta)
    if fam.r != 0:
        raise PreconditionError("the driver starts from r = 0")
    if fam.eps < delta:
        raise PreconditionError(f"family density {fam.eps} below delta = {delta}")
    if R < 1:
        raise DomainError("need at least one round")
    cur = DenseFamily(0, delta, fam.L, fam.sets, fam.dims)
    I: list = []
    rounds: list = []
    Ps: list = []
    for n in range(1, R + 1):
        r = cur.r
        eps_n = round_epsilon(delta, fam.dims, r, ctx.empty_product_one)
        if not tower.is_exact(eps_n):
            raise ThresholdNotComputable(f"round {n}: epsilon is not desk-scale")
        if cur.eps < eps_n:
            raise ContractError(f"round {n}: family density {cur.eps} below {eps_n}")
        cur = DenseFamily(r, eps_n, cur.L, cur.sets, cur.dims)
        try:
            step = dense_inductive_step(cur, r + 1, families, ctx, ap_mode)
        except PreconditionError as exc:
            raise PreconditionError(f"round {n}: {exc}") from None
        I.extend(step.I)
        Ps.append(step.P)
        rec = dict(step.trace)
        rec["round"] = n
        rec["epsilon_formula"] = eps_n
        rounds.append(rec)
        cur = step.family
    L_prime = tuple(sorted({l for P in Ps for l in P}))
    return DriverResult(L_prime, I, rounds, Ps)
