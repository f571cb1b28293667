"""Certificates and their verifiers.

A certificate carries the canonical input it was computed from, the sha256 of
that input, and a kind-specific witness.  The verifiers below recheck every
claimed property from the tree, grid and measure primitives alone; none of
the search modules is imported here.
"""

from __future__ import annotations

from typing import Any, Mapping, Optional

import numpy as np

from . import __version__
from .aps import is_ap
from .errors import MalformedInput, VerificationFailed
from .families import FamilySpec, members_in_interval
from .grids import DenseFamily
from .io import digest, dumps, parse_rational, read_family
from .measure_core import FiniteProbSpace
from .tree_core import StrongSubtree, TreeSubset, is_strong_subtree, relative_density

KINDS = ("fw", "grid", "correlation")


def make_certificate(kind: str, inputs: Mapping, payload: Mapping) -> dict:
    if kind not in KINDS:
        raise ValueError(f"unknown certificate kind {kind!r}")
    return {
        "kind": kind,
        "inputs": inputs,
        "inputs_digest": digest(dumps(inputs)),
        "payload": payload,
        "tool_version": __version__,
    }


def _get(d: Mapping, key: str, where: str):
    if not isinstance(d, Mapping) or key not in d:
        raise MalformedInput(f"{where}: missing field {key!r}")
    return d[key]


def _int_list(x, where: str) -> list:
    if not isinstance(x, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in x):
        raise MalformedInput(f"{where}: expected a list of integers")
    return x


# ---------------------------------------------------------------------------
# trees


def _check_subtree(A: TreeSubset, sub: Mapping, where: str) -> tuple:
    """Containment and strong-subtree checks; returns (level set, problems)."""
    problems = []
    S = StrongSubtree.from_dict(sub)
    nodes = S.nodes()
    for s in nodes:
        if len(s) >= A.params.height or any(not 1 <= c <= A.params.b for c in s):
            problems.append(f"{where}: node {s} is outside the tree")
            return (), problems
    outside = [s for s in nodes if s not in A]
    if outside:
        problems.append(f"{where}: node {outside[0]} is not in the set")
    rep = is_strong_subtree(A.params, nodes, full_branching=True)
    if not rep:
        problems.append(f"{where}: not a strong subtree ({rep.condition}: {rep.message})")
    claimed = tuple(_int_list(sub.get("level_set", []), f"{where}.level_set"))
    if claimed and claimed != S.level_set:
        problems.append(f"{where}: claimed level set {claimed} differs from {S.level_set}")
    return S.level_set, problems


def verify_fw(inputs: Mapping, payload: Mapping) -> list:
    A = TreeSubset.from_dict(_get(inputs, "tree", "inputs"))
    mode = _get(payload, "mode", "payload")
    problems = []
    if mode in ("extract", "ufw"):
        lv, bad = _check_subtree(A, _get(payload, "subtree", "payload"), "subtree")
        problems += bad
        spec = _get(payload, "level_set", "payload")
        start, step, length = (_get(spec, f, "level_set") for f in ("start", "step", "length"))
        expect = tuple(start + i * step for i in range(length))
        if lv != expect:
            problems.append(f"level set {lv} is not the AP {expect}")
        if length != payload.get("k", length):
            problems.append(f"AP length {length} differs from k = {payload.get('k')}")
        if mode == "ufw":
            P = tuple(_int_list(_get(payload, "P", "payload"), "P"))
            if not is_ap(P):
                problems.append(f"P = {P} is not an AP")
            if not set(lv) <= set(P):
                problems.append(f"level set {lv} is not inside P")
        return problems
    if mode == "drive":
        return _verify_drive(A, payload)
    raise MalformedInput(f"payload: unknown fw mode {mode!r}")


def _verify_drive(A: TreeSubset, payload: Mapping) -> list:
    delta = parse_rational(_get(payload, "delta", "payload"), "delta")
    Qs = [tuple(_int_list(q, "Q")) for q in _get(payload, "Q", "payload")]
    Ws = _get(payload, "W", "payload")
    Ls = [tuple(_int_list(l, "L_rounds")) for l in _get(payload, "L_rounds", "payload")]
    if not (len(Qs) == len(Ws) == len(Ls)):
        return ["Q, W and L_rounds have different lengths"]
    problems = []
    h = 0
    union: list = []
    prev_nodes: Optional[list] = None
    for r, (Q, Wd, Lr) in enumerate(zip(Qs, Ws, Ls), start=1):
        h += r
        union += list(Q)
        lv, bad = _check_subtree(A, Wd, f"W_{r}")
        problems += bad
        if len(Q) != r or not is_ap(Q):
            problems.append(f"(a) round {r}: Q = {Q} is not an AP of length {r}")
        if r > 1 and Qs[r - 2] and Q and max(Qs[r - 2]) >= min(Q):
            problems.append(f"(b) round {r}: Q does not start above the previous one")
        if len(lv) != h + 1 or tuple(lv[:h]) != tuple(union):
            problems.append(f"(c) round {r}: level set {lv} does not continue {tuple(union)}")
        W = StrongSubtree.from_dict(Wd)
        if prev_nodes is not None:
            h_prev = h - r
            if sorted(s for g in W.levels[:h_prev] for s in g) != prev_nodes:
                problems.append(f"(d) round {r}: the part below subtree height {h_prev} changed")
        prev_nodes = sorted(s for g in W.levels[:h] for s in g)
        if Lr and lv and max(lv) > min(Lr):
            problems.append(f"(e) round {r}: top level {max(lv)} lies above min L_r = {min(Lr)}")
        eta = delta / 2**r
        for t in W.nodes():
            for n in Lr:
                if n < A.params.height and relative_density(A, t, n) < eta:
                    problems.append(f"(e) round {r}: density above {t} at level {n} below {eta}")
                    break
    final = _get(payload, "subtree", "payload")
    lv, bad = _check_subtree(A, final, "subtree")
    problems += bad
    if tuple(lv) != tuple(union):
        problems.append(f"final level set {lv} differs from the union of the Q's {tuple(union)}")
    return problems


# ---------------------------------------------------------------------------
# grids


def _is_member(F: FamilySpec, I: list) -> bool:
    I = sorted(I)
    if not I or len(set(I)) != len(I) or I[0] < 1:
        return False
    if F.variant == "fixed":
        return len(I) == F.size
    if F.variant == "ap":
        return len(I) == F.size and is_ap(I)
    return tuple(I) in set(members_in_interval(F, I[0], I[-1]))


def _product_inside(data: np.ndarray, sets: list) -> bool:
    for s, n in zip(sets, data.shape):
        if not s or min(s) < 1 or max(s) > n:
            return False
    return bool(data[np.ix_(*[[c - 1 for c in s] for s in sets])].all())


def verify_grid(inputs: Mapping, payload: Mapping) -> list:
    fam = DenseFamily.from_dict(_get(inputs, "grid", "inputs"))
    families = [read_family(f, f"families[{i}]") for i, f in enumerate(_get(inputs, "families", "inputs"))]
    I = [_int_list(s, f"I[{i}]") for i, s in enumerate(_get(payload, "I", "payload"))]
    problems = []
    for p, s in enumerate(I):
        if p >= len(families):
            problems.append(f"no family given for axis {p}")
        elif not _is_member(families[p], s):
            problems.append(f"I_{p} = {s} is not a member of {families[p]}")
    mode = _get(payload, "mode", "payload")
    if mode == "extract":
        top = len(fam.dims)
        if len(I) != top:
            problems.append(f"{len(I)} factor sets for {top} axes")
        elif not _product_inside(fam.sets[top].data, I):
            problems.append("product of the factor sets is not inside the grid")
        return problems
    if mode != "drive":
        raise MalformedInput(f"payload: unknown grid mode {mode!r}")
    Ps = [tuple(_int_list(P, "P")) for P in _get(payload, "P", "payload")]
    for j, P in enumerate(Ps, start=1):
        if len(P) != j or not is_ap(P):
            problems.append(f"P_{j} = {P} is not an AP of length {j}")
        if j > 1 and Ps[j - 2] and P and max(Ps[j - 2]) >= min(P):
            problems.append(f"max P_{j - 1} is not below min P_{j}")
    L_prime = _int_list(_get(payload, "L_prime", "payload"), "L_prime")
    if sorted(set(L_prime)) != sorted({l for P in Ps for l in P}):
        problems.append("L_prime is not the union of the P's")
    for l in L_prime:
        if l not in fam.sets:
            problems.append(f"index {l} has no set in the input")
        elif l > len(I):
            problems.append(f"index {l} needs {l} factor sets, only {len(I)} given")
        elif not _product_inside(fam.sets[l].data, I[:l]):
            problems.append(f"product of I_0..I_{l - 1} is not inside D_{l}")
    return problems


# ---------------------------------------------------------------------------
# correlated blocks


def verify_correlation(inputs: Mapping, payload: Mapping) -> list:
    sp = _get(inputs, "space", "inputs")
    weights = [parse_rational(w, f"weights[{i}]") for i, w in enumerate(_get(sp, "weights", "space"))]
    space = FiniteProbSpace(weights)
    events = {int(k): space.event(_int_list(v, f"events[{k}]")) for k, v in _get(sp, "events", "space").items()}
    L = _int_list(_get(inputs, "L", "inputs"), "L")
    k = _get(inputs, "k", "inputs")
    eta = parse_rational(_get(inputs, "eta", "inputs"), "eta")
    P = tuple(_int_list(_get(payload, "P", "payload"), "P"))
    L_prime = _int_list(_get(payload, "L_prime", "payload"), "L_prime")
    include = _int_list(_get(payload, "include", "payload"), "include")
    exclude = [_int_list(E, "exclude") for E in _get(payload, "exclude", "payload")]
    problems = []
    missing = [i for i in list(L) + include + [x for E in exclude for x in E] if i not in events]
    if missing:
        return [f"event {missing[0]} is not in the input"]
    if len(P) != k or not is_ap(P) or not set(P) <= set(L):
        problems.append(f"P = {P} is not a {k}-AP inside L")
    if tuple(include) != P:
        problems.append("block expression does not start from the events of P")
    B = np.logical_and.reduce([events[i] for i in include]) if include else space.full()
    for E in exclude:
        B = B & ~np.logical_and.reduce([events[i] for i in E])
    muB = space.measure(B)
    if muB == 0:
        return problems + ["block has measure zero"]
    bound = payload.get("bound")
    # symbolic bounds are rendered in prefix form and cannot be checked exactly
    if bound is not None and not (isinstance(bound, str) and bound.startswith("(")):
        b = parse_rational(bound, "bound")
        if muB < b:
            problems.append(f"mu(B) = {muB} below the claimed bound {b}")
    rounds = payload.get("rounds")
    max_rounds = payload.get("max_rounds")
    if rounds is not None and max_rounds is not None and rounds > max_rounds:
        problems.append(f"{rounds} rounds exceed the limit {max_rounds}")
    if P:
        for l in L_prime:
            if l not in L or l <= max(P):
                problems.append(f"index {l} of L' is not in L above max P")
            elif 2 * space.conditional(events[l], B) < eta:
                problems.append(f"A_{l} has relative density below eta/2 inside B")
    return problems


# ---------------------------------------------------------------------------


VERIFIERS = {"fw": verify_fw, "grid": verify_grid, "correlation": verify_correlation}


def verify_certificate(cert: Any, inputs: Optional[Mapping] = None) -> list:
    """All problems found; empty when the certificate checks out.

    ``inputs`` (the caller's own copy of the instance) must hash to the digest
    stored in the certificate.
    """
    if not isinstance(cert, Mapping):
        raise MalformedInput("certificate: expected a JSON object")
    kind = _get(cert, "kind", "certificate")
    if kind not in VERIFIERS:
        raise MalformedInput(f"certificate: unknown kind {kind!r}")
    embedded = _get(cert, "inputs", "certificate")
    problems = []
    if digest(dumps(embedded)) != cert.get("inputs_digest"):
        problems.append("embedded inputs do not match inputs_digest")
    if inputs is not None and digest(dumps(inputs)) != cert.get("inputs_digest"):
        problems.append("supplied inputs do not match inputs_digest")
    return problems + VERIFIERS[kind](embedded, _get(cert, "payload", "certificate"))


def require_valid(cert: Any, inputs: Optional[Mapping] = None) -> None:
    problems = verify_certificate(cert, inputs)
    if problems:
        raise VerificationFailed("; ".join(problems))
