"""Command-line front end.  Every command prints one JSON report.

Exit codes: 0 success, 1 certified domain error (incomplete or unbounded
recourse, non-convergence, failed consistency check), 2 unreadable or
malformed JSON, 3 schema or dimension violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from fractions import Fraction
from typing import Any

from . import io as tio
from .numerics import IntervalScalar, as_fraction, fraction_str

logger = logging.getLogger("twostage")

EXACT, INTERVAL, STATISTICAL = "exact", "certified-interval", "statistical"


def _value(v: Any, tag: str) -> dict:
    if isinstance(v, IntervalScalar):
        return {"value": v.to_json(), "tag": tag}
    if isinstance(v, Fraction):
        return {"value": fraction_str(v), "tag": tag}
    if isinstance(v, (list, tuple)):
        return {"value": [fraction_str(x) if isinstance(x, Fraction) else x for x in v], "tag": tag}
    return {"value": v, "tag": tag}


def _fraction_list(text: str) -> list[Fraction]:
    try:
        return [as_fraction(t.strip()) for t in text.split(",")]
    except (ValueError, TypeError, ZeroDivisionError) as err:
        raise argparse.ArgumentTypeError(str(err))


def _fraction(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except (ValueError, TypeError, ZeroDivisionError) as err:
        raise argparse.ArgumentTypeError(str(err))


def _require(inst: tio.InstanceFile, *kinds: str, command: str) -> None:
    if inst.kind not in kinds:
        raise tio.InputError(3, f"{command} needs an instance of kind {' or '.join(kinds)}, got {inst.kind}", "/kind")


# ---------------------------------------------------------------------------
# commands


def cmd_volume(args, inst):
    from .polytope import lasserre_volume
    from .volume_dp import volume_dp

    _require(inst, "polytope", "integer-system", command="volume")
    if inst.kind == "polytope":
        return {"volume": _value(lasserre_volume(tio.to_polytope(inst)), EXACT)}, {"method": "lasserre"}
    system, b = tio.to_integer_system(inst)
    return {"volume": _value(volume_dp(system, b), EXACT)}, {"method": "volume-dp", "norm_inf": system.norm_inf()}


def cmd_moments(args, inst):
    from .numerics import Polynomial
    from .volume_dp import quad_moment

    _require(inst, "integer-system", command="moments")
    system, b = tio.to_integer_system(inst)
    d = system.d
    out = {}
    out["1"] = _value(quad_moment(system, b, Polynomial.constant(d, 1)), EXACT)
    for i in range(d):
        out[f"x{i + 1}"] = _value(quad_moment(system, b, Polynomial.variable(d, i)), EXACT)
    for i in range(d):
        for j in range(i, d):
            q = Polynomial.variable(d, i) * Polynomial.variable(d, j)
            out[f"x{i + 1}*x{j + 1}"] = _value(quad_moment(system, b, q), EXACT)
    return out, {"norm_inf": system.norm_inf()}


def _first_stage_point(args, sp):
    if args.x is None:
        raise tio.InputError(3, "--x is required for this command", "")
    if len(args.x) != sp.n1:
        raise tio.InputError(3, f"--x needs {sp.n1} components", "")
    return args.x


def cmd_expected_recourse(args, inst):
    from .recourse import analyze_recourse, expected_recourse_1d

    _require(inst, "sslp", command="expected-recourse")
    sp = tio.to_sslp(inst)
    x = _first_stage_point(args, sp)
    if args.backend == "interval-1d":
        return {"expected_recourse": _value(expected_recourse_1d(sp, x), EXACT)}, {"method": "d=1 intervals"}
    rep = analyze_recourse(sp, x, backend=args.backend)
    return (
        {"expected_recourse": _value(rep.value, EXACT), "coverage_deficit": _value(rep.diagnostics["coverage_deficit"], EXACT)},
        {
            "bases": rep.bases,
            "classes": rep.classes,
            "intersections": rep.intersections,
            "backend": rep.diagnostics["backend"],
            "max_scaled_norm": rep.diagnostics["max_scaled_norm"],
        },
    )


def cmd_solve(args, inst):
    from .recourse import solve_first_stage

    _require(inst, "sslp", command="solve")
    sp = tio.to_sslp(inst)
    res = solve_first_stage(sp, args.epsilon, max_iter=args.max_iter, backend=args.backend)
    return (
        {
            "x": _value(list(res.x), EXACT),
            "value": _value(res.value, EXACT),
            "lower_bound": _value(res.lower_bound, EXACT),
        },
        {"iterations": res.iterations, "epsilon": fraction_str(args.epsilon)},
    )


def cmd_count_is(args, inst):
    from .gadgets import count_is

    _require(inst, "graph", command="count-is")
    g = tio.to_graph(inst)
    count = count_is(g, mode=args.mode, max_n=args.max_n, precision_bits=args.precision_bits)
    return {"count": _value(count, EXACT)}, {"mode": args.mode}


def cmd_gadget_area(args, inst):
    from .gadgets import area_with_details

    _require(inst, "graph", command="gadget-area")
    g = tio.to_graph(inst)
    if g.n > args.max_n:
        raise tio.InputError(3, f"graph has n={g.n} > --max-n={args.max_n}", "/payload/n")
    res = area_with_details(g, args.precision_bits)
    gad = res.gadget
    bitmap = "".join("1" if ell in set(res.cut) else "0" for ell in range(gad.k))
    return (
        {
            "area": _value(res.area, INTERVAL),
            "delta": _value(gad.delta, INTERVAL),
            "polygon_area": _value(gad.polygon_area, INTERVAL),
            "cut_bitmap": _value(bitmap, EXACT),
            "count": _value(2**g.n - len(res.cut), EXACT),
        },
        {"precision_bits": gad.precision_bits},
    )


def cmd_reduce_volume(args, inst):
    from .gadgets import volume_via_recourse
    from .volume_dp import volume_dp

    _require(inst, "integer-system", command="reduce-volume")
    system, b = tio.to_integer_system(inst)
    x = args.x[0] if args.x else Fraction(1)
    res = volume_via_recourse(system.A, b, x)
    direct = volume_dp(system, b)
    return (
        {
            "volume": _value(res.volume, EXACT),
            "volume_dp": _value(direct, EXACT),
            "agree": _value(res.volume == direct, EXACT),
        },
        {"tau": fraction_str(res.tau), "p_degree": res.p.total_degree(), "samples": len(res.samples)},
    )


def cmd_bisect_expectation(args, inst):
    from .gadgets import bisection_expectation, envelope_expectation, polygon_first_stage_oracle, sslp_oracle

    _require(inst, "graph", command="bisect-expectation")
    g = tio.to_graph(inst)
    if g.n > args.max_n:
        raise tio.InputError(3, f"graph has n={g.n} > --max-n={args.max_n}", "/payload/n")
    source = args.oracle
    if source == "auto":
        source = "sslp" if g.n <= 4 else "polygon"
    oracle = sslp_oracle(g) if source == "sslp" else polygon_first_stage_oracle(g)
    res = bisection_expectation(g, oracle)
    env = envelope_expectation(g, args.precision_bits)
    return (
        {
            "interval": _value(res.interval, INTERVAL),
            "envelope_expectation": _value(env, INTERVAL),
            "contains": _value(res.interval.overlaps(env), EXACT),
        },
        {"oracle_calls": res.calls, "oracle": source},
    )


def cmd_mc_check(args, inst):
    from .polytope import lasserre_volume, mc_volume
    from .recourse import expected_recourse, mc_expected_recourse
    from .volume_dp import volume_dp

    _require(inst, "polytope", "integer-system", "sslp", command="mc-check")
    if inst.kind == "sslp":
        sp = tio.to_sslp(inst)
        x = _first_stage_point(args, sp)
        exact = expected_recourse(sp, x)
        est, err = mc_expected_recourse(sp, x, args.samples, args.seed)
    else:
        if inst.kind == "polytope":
            p = tio.to_polytope(inst)
            exact = lasserre_volume(p)
        else:
            system, b = tio.to_integer_system(inst)
            p = system.polytope(b)
            exact = volume_dp(system, b)
        est, err = mc_volume(p, args.samples, args.seed)
    z = abs(est - exact) / err if err else (Fraction(0) if est == exact else None)
    return (
        {
            "exact": _value(exact, EXACT),
            "estimate": _value(est, STATISTICAL),
            "stderr": _value(err, STATISTICAL),
            "within_4_stderr": _value(z is not None and z <= 4, STATISTICAL),
        },
        {"samples": args.samples, "seed": args.seed},
    )


def cmd_generate(args, inst):
    from . import generators as gen
    from .gadgets import Graph

    fam = args.family
    if fam == "graph":
        g = Graph.from_edges(args.n, gen.random_graph(args.seed, args.n, args.p))
        out = tio.graph_instance(g, {"seed": args.seed, "p": args.p})
    elif fam == "integer-system":
        import random

        system = gen.random_integer_system(args.seed, args.m, args.d, args.norm)
        rng = random.Random(args.seed)
        b = [rng.randint(-args.norm, args.norm * args.d) for _ in range(args.m)]
        out = tio.integer_system_instance(system, b, {"seed": args.seed, "norm": args.norm})
    elif fam == "newsvendor":
        out = tio.sslp_instance(gen.newsvendor(args.c), {"family": "newsvendor", "c": fraction_str(args.c)})
    elif fam == "sslp":
        out = tio.sslp_instance(gen.random_sslp(args.seed, d=args.d), {"seed": args.seed})
    else:  # pragma: no cover - argparse restricts choices
        raise tio.InputError(3, f"unknown family {fam}")
    return out


COMMANDS = {
    "volume": cmd_volume,
    "moments": cmd_moments,
    "expected-recourse": cmd_expected_recourse,
    "solve": cmd_solve,
    "count-is": cmd_count_is,
    "gadget-area": cmd_gadget_area,
    "reduce-volume": cmd_reduce_volume,
    "bisect-expectation": cmd_bisect_expectation,
    "mc-check": cmd_mc_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twostage", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, instance=True):
        if instance:
            p.add_argument("instance", help="instance JSON file, or - for stdin")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--precision-bits", type=int, default=None)
        p.add_argument("--max-n", type=int, default=10)
        p.add_argument("--threads", type=int, default=1, help="worker-count hint (computation is sequential)")
        return p

    common(sub.add_parser("volume", help="exact volume"))
    common(sub.add_parser("moments", help="exact moments of degree <= 2"))
    for name in ("expected-recourse", "mc-check"):
        p = common(sub.add_parser(name))
        p.add_argument("--x", type=_fraction_list, default=None, help="first-stage point, comma separated")
        p.add_argument("--backend", default="auto", choices=["auto", "triangulate", "dp", "interval-1d"])
        p.add_argument("--samples", type=int, default=100_000)
    p = common(sub.add_parser("solve"))
    p.add_argument("--epsilon", type=_fraction, default=Fraction(1, 10**6))
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--backend", default="auto", choices=["auto", "triangulate", "dp"])
    p = common(sub.add_parser("count-is"))
    p.add_argument("--mode", default="area", choices=["area", "brute"])
    common(sub.add_parser("gadget-area"))
    p = common(sub.add_parser("reduce-volume"))
    p.add_argument("--x", type=_fraction_list, default=None)
    p = common(sub.add_parser("bisect-expectation"))
    p.add_argument("--oracle", default="auto", choices=["auto", "sslp", "polygon"])
    p = common(sub.add_parser("generate"), instance=False)
    p.add_argument("family", choices=["graph", "integer-system", "newsvendor", "sslp"])
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--norm", type=int, default=3)
    p.add_argument("--c", type=_fraction, default=Fraction(0))
    return parser


def _emit(obj, stream=None) -> None:
    stream = stream or sys.stdout
    json.dump(obj, stream, indent=1, sort_keys=True)
    stream.write("\n")


def main(argv=None) -> int:
    from .gadgets import GadgetConsistencyError, PrecisionError, ProtocolError
    from .recourse import RecourseError
    from .volume_dp import ConsistencyError

    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            _emit(cmd_generate(args, None).to_json())
            return 0
        inst = tio.parse_instance(args.instance)
        start = time.perf_counter()
        results, diagnostics = COMMANDS[args.command](args, inst)
        diagnostics["seconds"] = round(time.perf_counter() - start, 6)
        diagnostics["threads"] = args.threads
        _emit({
            "command": args.command,
            "inputs": {"kind": inst.kind, "sha256": inst.digest()},
            "results": results,
            "diagnostics": diagnostics,
        })
        return 0
    except tio.InputError as err:
        _emit({"command": args.command, "error": err.to_json()})
        return err.code
    except (RecourseError, ConsistencyError, GadgetConsistencyError, PrecisionError, ProtocolError, ValueError) as err:
        reason = {"code": 1, "type": type(err).__name__, "reason": str(err)}
        for attr in ("deficit", "witness", "gap"):
            v = getattr(err, attr, None)
            if v is not None:
                reason[attr] = fraction_str(v) if isinstance(v, Fraction) else [fraction_str(as_fraction(t)) for t in v]
        _emit({"command": args.command, "error": reason})
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
