"""Command-line entry point: ``densramsey <command> ...``.

Exit codes: 0 success, 1 malformed input, 2 precondition failure,
3 resource/threshold/extraction failure, 4 failed verification.
"""

from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, tower
from .errors import DensRamseyError, MalformedInput, PreconditionError, ThresholdNotComputable, VerificationFailed
from .io import dumps, fmt_rational, parse_rational, read_json, read_space, read_tree, read_grid, to_jsonable

EXIT_OK = 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise MalformedInput(f"{self.prog}: {message}")


def _rat(text: str) -> Fraction:
    return parse_rational(text, "argument")


def _ints(text: str) -> list:
    if not text.strip():
        return []
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise MalformedInput(f"expected comma-separated integers, got {text!r}") from None


def _families(items: Sequence[str], count: Optional[int] = None) -> list:
    from .families import parse_family

    fams = [parse_family(t) for t in items]
    if count is not None and len(fams) == 1:
        fams = fams * count
    if count is not None and len(fams) < count:
        raise MalformedInput(f"need {count} families, got {len(fams)}")
    return fams


def _ctx(args):
    from .bounds import BoundsContext, SzEvaluator

    sz = SzEvaluator(getattr(args, "sz", "auto"), getattr(args, "horizon", 30))
    return BoundsContext(args.mode, getattr(args, "horizon", 30), sz, getattr(args, "empty_product_one", False))


def _emit(args, obj) -> None:
    text = obj if isinstance(obj, str) else dumps(obj)
    if not text.endswith("\n"):
        text += "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# tree / convolution / families / measure


def cmd_tree(args) -> int:
    from .tree_core import fw_density, relative_density

    A = read_tree(args.set_file)
    if args.action == "density":
        levels = _ints(args.levels) if args.levels else range(A.params.height)
        _emit(args, {"fw_density": fw_density(A, levels), "levels": list(levels),
                     "per_level": {str(n): relative_density(A, (), n) for n in levels}})
    else:
        node = tuple(_ints(args.node)) if args.node else ()
        _emit(args, {"node": list(node), "level": args.level,
                     "density": relative_density(A, node, args.level)})
    return EXIT_OK


def cmd_convolution(args) -> int:
    from .convolution import ConvolutionContext, averaging_identity_eval, lift_density_subtree

    A = read_tree(args.set_file)
    b = args.b if args.b is not None else A.params.b
    if b != A.params.b:
        raise MalformedInput(f"--b {b} differs from the set file's b = {A.params.b}")
    ctx = ConvolutionContext.of(b, _ints(args.levels))
    if ctx.P[-1] >= A.params.height:
        raise PreconditionError(f"level {ctx.P[-1]} outside a tree of height {A.params.height}")
    lhs, rhs = averaging_identity_eval(ctx, A)
    x, S, d = lift_density_subtree(ctx, A)
    _emit(args, {"P": list(ctx.P), "averaging_lhs": lhs, "averaging_rhs": rhs,
                 "lift_x": list(x), "lift_density": d, "lift_level_set": list(S.level_set)})
    if lhs != rhs:
        raise VerificationFailed(f"averaging identity fails: {lhs} != {rhs}")
    return EXIT_OK


def cmd_families(args) -> int:
    from .families import b_exact, b_upper, members_in_interval

    (F,) = _families([args.family])
    if args.action == "members":
        _emit(args, {"family": str(F), "members": [list(m) for m in members_in_interval(F, args.lo, args.hi)]})
        return EXIT_OK
    eps = _rat(args.eps)
    res = b_exact(F, eps, args.horizon)
    out = {"family": str(F), "eps": eps, "horizon": args.horizon, "b_exact": res.value}
    if F.variant == "fixed":
        out["b_upper"] = b_upper(F, eps)
    _emit(args, out)
    return EXIT_OK


def cmd_measure(args) -> int:
    from .bounds import SzEvaluator
    from .certify import make_certificate
    from .measure_core import correlated_block

    space, named = read_space(args.space_file)
    try:
        events = {int(k): v for k, v in named.items()}
    except ValueError:
        raise MalformedInput(f"{args.space_file}: event names must be integers for block extraction") from None
    L = _ints(args.L) if args.L else sorted(events)
    missing = [l for l in L if l not in events]
    if missing:
        raise MalformedInput(f"index {missing[0]} of L has no event")
    eta = _rat(args.eta)
    sz = SzEvaluator(args.sz, args.horizon)
    res = correlated_block(space, L, events, args.k, eta, sz, ap_mode=args.ap_mode)
    inputs = {"space": space.to_dict({str(l): events[l] for l in sorted(events)}),
              "L": sorted(set(L)), "k": args.k, "eta": eta}
    payload = {"P": list(res.P), "L_prime": list(res.L_prime), "include": list(res.include),
               "exclude": [list(E) for E in res.exclude], "rounds": len(res.rounds),
               "max_rounds": res.max_rounds, "bound": res.bound, "theta1": res.theta1,
               "block_measure": space.measure(res.B), "trace": res.rounds}
    _emit(args, make_certificate("correlation", to_jsonable(inputs), to_jsonable(payload)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# grid


def cmd_grid(args) -> int:
    from .certify import make_certificate
    from .grid_extraction import extract_grid, grid_driver

    fam = read_grid(args.grid_file)
    ctx = _ctx(args)
    q = len(fam.dims)
    families = _families(args.families, q)
    inputs = to_jsonable({"grid": fam.to_dict(), "families": [F.to_dict() for F in families]})
    if args.action == "extract":
        if q not in fam.sets:
            raise MalformedInput(f"{args.grid_file}: extraction needs the full-grid set {q}")
        D = fam.sets[q]
        eps = _rat(args.eps) if args.eps else D.density()
        I = extract_grid(D, families, eps, ctx)
        payload = {"mode": "extract", "bounds_mode": ctx.mode, "eps": eps, "I": [list(s) for s in I]}
    else:
        delta = _rat(args.delta) if args.delta else fam.eps
        res = grid_driver(fam, families, delta, args.rounds, ctx)
        payload = {"mode": "drive", "bounds_mode": ctx.mode, "delta": delta, "L_prime": list(res.L_prime),
                   "I": [list(s) for s in res.I], "P": [list(P) for P in res.P], "rounds": res.rounds}
    _emit(args, make_certificate("grid", inputs, to_jsonable(payload)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# fw


def cmd_fw(args) -> int:
    from .certify import make_certificate, require_valid
    from .fw_search import fw_driver, fw_extract, ufw_extract

    if args.action == "verify":
        cert = read_json(args.file)
        require_valid(cert)
        _emit(args, {"valid": True, "kind": cert.get("kind")})
        return EXIT_OK
    if not args.set_file:
        raise MalformedInput("--set-file is required")
    A = read_tree(args.set_file)
    inputs = {"tree": A.to_dict()}
    delta = _rat(args.delta) if args.delta else None
    if args.action == "extract":
        cert = fw_extract(A, args.k, delta)
        if cert is None:
            from .errors import ExtractionFailed

            raise ExtractionFailed(f"no strong subtree with a {args.k}-AP level set inside the set")
        payload = {"mode": "extract", "k": args.k, "delta": delta, **cert.to_dict()}
    elif args.action == "ufw":
        P = _ints(args.levels) if args.levels else list(range(A.params.height))
        cert = ufw_extract(A, P, args.k, delta if delta is not None else 0)
        payload = {"mode": "ufw", "k": args.k, "P": P, "delta": delta, **cert.to_dict()}
    else:
        if args.mode == "paper":
            raise ThresholdNotComputable("closed-form FW thresholds are not available; use --mode tight")
        if delta is None:
            raise MalformedInput("--delta is required for drive")
        L = _ints(args.L) if args.L else list(range(A.params.height))
        res = fw_driver(A, L, delta, args.rounds)
        payload = {"mode": "drive", "delta": delta, "rounds": args.rounds, "failed_round": res.failed_round,
                   "Q": [list(Q) for Q in res.Qs], "L_rounds": [list(l) for l in res.L_rounds],
                   "W": [W.to_dict() for W in res.W], "subtree": res.subtree.to_dict(), "trace": res.trace}
    _emit(args, make_certificate("fw", inputs, to_jsonable(payload)))
    if args.action == "drive" and res.failed_round is not None:
        from .errors import ExtractionFailed

        raise ExtractionFailed(f"driver stopped at round {res.failed_round}")
    return EXIT_OK


def cmd_certify(args) -> int:
    from .certify import verify_certificate

    cert = read_json(args.file)
    inputs = None
    if args.input_file:
        cert_inputs = cert.get("inputs", {}) if isinstance(cert, dict) else {}
        raw = read_json(args.input_file)
        # accept either the full inputs object or the bare instance file
        if isinstance(raw, dict) and set(raw) != set(cert_inputs) and len(cert_inputs) >= 1:
            key = {"fw": "tree", "grid": "grid", "correlation": "space"}.get(cert.get("kind"))
            if key:
                normalised = dict(cert_inputs)
                normalised[key] = _normalise_instance(key, args.input_file)
                raw = normalised
        inputs = raw
    problems = verify_certificate(cert, inputs)
    _emit(args, {"kind": cert.get("kind"), "valid": not problems, "problems": problems})
    if problems:
        return VerificationFailed.exit_code
    return EXIT_OK


def _normalise_instance(key: str, path) -> dict:
    if key == "tree":
        return read_tree(path).to_dict()
    if key == "grid":
        return to_jsonable(read_grid(path).to_dict())
    space, events = read_space(path)
    return space.to_dict(events)


# ---------------------------------------------------------------------------
# bounds


def cmd_bounds(args) -> int:
    from . import bounds as bd

    ctx = _ctx(args)
    out = {}
    if args.which == "sz":
        res = bd.sz_eval(args.k, _rat(args.eta), args.sz, args.horizon)
        out = {"value": res.value, "source": res.source, "certified_to": res.certified_to}
    elif args.which == "theta1":
        out = {"value": bd.theta1(args.k, _rat(args.eta), ctx.sz, allow_symbolic=True)}
    elif args.which == "theta2":
        (F,) = _families(args.families[:1])
        out = {"value": bd.theta2(F, _rat(args.eps), ctx)}
    elif args.which == "theta3":
        out = {"value": bd.theta3(args.k, _rat(args.eps), ctx.sz, allow_symbolic=True)}
    elif args.which == "tmap":
        out = {"value": bd.t_map(_families(args.families), _rat(args.eps), ctx)}
    elif args.which == "vdelta":
        fams = _families(args.families)
        out = {"value": bd.v_delta(_rat(args.delta), fams, _ints(args.dims), ctx, allow_symbolic=True)}
    elif args.which == "fc":
        ms = _ints(args.ms)
        chain = bd.f_c_chain(_rat(args.delta), ms, args.q, ctx)
        bound = bd.f_c_tower_bound(_rat(args.delta), ms, args.q)
        out = {"values": chain, "value": chain[-1], "tower_bound": bound,
               "compare": tower.compare(chain[-1], bound)}
    if args.json:
        _emit(args, to_jsonable(out))
    else:
        _emit(args, tower.format_num(out["value"]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# gen


def _count(density: Fraction, size: int) -> int:
    c = math.ceil(density * size)
    if density < 0 or c > size:
        raise PreconditionError(f"density {density} needs {c} of {size} elements")
    return c


def cmd_gen(args) -> int:
    from .grids import DenseFamily, GridSet
    from .rng import Lcg
    from .tree_core import TreeParams, TreeSubset

    rng = Lcg(args.seed)
    dens = _rat(args.density)
    if args.what == "tree":
        params = TreeParams(args.b, args.height)
        masks = []
        for n in range(args.height):
            size = args.b**n
            masks.append(sum(1 << i for i in rng.sample(size, _count(dens, size))))
        _emit(args, TreeSubset(params, tuple(masks)).to_dict())
    elif args.what == "grid":
        dims = tuple(_ints(args.axes))
        if not dims or any(n < 1 for n in dims):
            raise MalformedInput("--axes needs positive sizes")
        L = _ints(args.L) if args.L else list(range(1, len(dims) + 1))
        sets = {}
        for l in sorted(set(L)):
            if not 1 <= l <= len(dims):
                raise MalformedInput(f"index {l} outside 1..{len(dims)}")
            size = int(np.prod(dims[:l], dtype=object))
            data = np.zeros(size, dtype=bool)
            data[rng.sample(size, _count(dens, size))] = True
            sets[l] = GridSet(0, l, data.reshape(dims[:l]))
        fam = DenseFamily(0, dens, tuple(sets), sets, dims)
        _emit(args, fam.to_dict())
    else:
        n = args.atoms
        if n < 1:
            raise MalformedInput("--atoms must be positive")
        c = _count(dens, n)
        events = {str(i): rng.sample(n, c) for i in range(1, args.events + 1)}
        _emit(args, {"weights": [f"1/{n}"] * n, "events": events})
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="densramsey", description="Density Ramsey extractions with exact certificates.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--jobs", type=int, default=1,
                   help="worker count; searches are deterministic and outputs do not depend on it")
    p.add_argument("--out", help="write the result here instead of stdout")
    common = _Parser(add_help=False)
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add = sub.add_parser
    sub.add_parser = lambda *a, **kw: _add(*a, parents=[common], **kw)

    def mode_args(q, default="tight"):
        q.add_argument("--mode", choices=("tight", "paper"), default=default)
        q.add_argument("--sz", choices=("auto", "exact", "gowers"), default="auto")
        q.add_argument("--horizon", type=int, default=30)
        q.add_argument("--empty-product-one", action="store_true")

    q = sub.add_parser("tree", help="densities of a tree subset")
    q.add_argument("action", choices=("density", "relative"))
    q.add_argument("--set-file", required=True)
    q.add_argument("--levels")
    q.add_argument("--node")
    q.add_argument("--level", type=int, default=0)
    q.set_defaults(func=cmd_tree)

    q = sub.add_parser("convolution", help="averaging identity and densest convolution subtree")
    q.add_argument("action", choices=("check",))
    q.add_argument("--b", type=int)
    q.add_argument("--levels", required=True)
    q.add_argument("--set-file", required=True)
    q.set_defaults(func=cmd_convolution)

    q = sub.add_parser("families", help="thresholds and members of interval families")
    q.add_argument("action", choices=("b", "members"))
    q.add_argument("--family", required=True)
    q.add_argument("--eps", default="1")
    q.add_argument("--horizon", type=int, default=14)
    q.add_argument("--lo", type=int, default=1)
    q.add_argument("--hi", type=int, default=10)
    q.set_defaults(func=cmd_families)

    q = sub.add_parser("measure", help="correlated block over a finite probability space")
    q.add_argument("action", choices=("block",))
    q.add_argument("--space-file", required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--eta", required=True)
    q.add_argument("--L")
    q.add_argument("--sz", choices=("auto", "exact", "gowers"), default="exact")
    q.add_argument("--horizon", type=int, default=30)
    q.add_argument("--ap-mode", choices=("sz", "direct"), default="sz")
    q.set_defaults(func=cmd_measure)

    q = sub.add_parser("grid", help="product extraction from dense grids")
    q.add_argument("action", choices=("extract", "drive"))
    q.add_argument("--grid-file", required=True)
    q.add_argument("--families", nargs="+", default=["fixed:2"])
    q.add_argument("--eps")
    q.add_argument("--delta")
    q.add_argument("--rounds", type=int, default=1)
    mode_args(q)
    q.set_defaults(func=cmd_grid)

    q = sub.add_parser("fw", help="strong subtrees with AP level sets")
    q.add_argument("action", choices=("extract", "ufw", "drive", "verify"))
    q.add_argument("--set-file")
    q.add_argument("--file", help="certificate to verify")
    q.add_argument("--k", type=int, default=2)
    q.add_argument("--delta")
    q.add_argument("--levels", help="the AP P for ufw")
    q.add_argument("--L")
    q.add_argument("--rounds", type=int, default=2)
    q.add_argument("--mode", choices=("tight", "paper"), default="tight")
    q.set_defaults(func=cmd_fw)

    q = sub.add_parser("bounds", help="threshold maps (exact rationals or prefix towers)")
    q.add_argument("which", choices=("sz", "theta1", "theta2", "theta3", "tmap", "vdelta", "fc"))
    q.add_argument("--families", nargs="+", default=["fixed:2"])
    q.add_argument("--eps", default="1")
    q.add_argument("--eta", default="1")
    q.add_argument("--delta", default="1")
    q.add_argument("--k", type=int, default=1)
    q.add_argument("--dims", default="")
    q.add_argument("--ms", default="2")
    q.add_argument("--q", type=int, default=0)
    q.add_argument("--json", action="store_true")
    mode_args(q, default="paper")
    q.set_defaults(func=cmd_bounds)

    q = sub.add_parser("certify", help="verify a certificate independently of the searches")
    q.add_argument("--file", required=True)
    q.add_argument("--input-file")
    q.set_defaults(func=cmd_certify)

    q = sub.add_parser("gen", help="seeded instance generator")
    q.add_argument("what", choices=("tree", "grid", "space"))
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--density", default="1/2")
    q.add_argument("--b", type=int, default=2)
    q.add_argument("--height", type=int, default=4)
    q.add_argument("--axes", default="3,3")
    q.add_argument("--L")
    q.add_argument("--atoms", type=int, default=8)
    q.add_argument("--events", type=int, default=4)
    q.set_defaults(func=cmd_gen)
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.jobs < 1:
            raise MalformedInput("--jobs must be >= 1")
        return args.func(args)
    except DensRamseyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return MalformedInput.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
