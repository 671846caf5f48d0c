"""Command-line interface.

Exit codes: 0 success, 1 validation error, 2 unconverged or ambiguous numerics.
"""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import graphs as G
from .algebra import AlgebraError, load_algebra
from .biquant import (SubalgebraError, cf_operator, cf_star, duflo_density_check, e_double_check,
                      leading_part, load_subalgebra, mu0_operator, reduction_basis, sub_preset,
                      SUB_PRESETS)
from .lieseries import CapError, compare_to_dynkin, kontsevich_bch
from .poly import parse_eps_poly
from .source import WeightSource
from .star import MissingWeightsError, duflo_check, star
from .weights import CONVENTION_VERSION, HALF_PLANE, WEIGHT_MODES, WeightCache, default_cache_dir

TSV_VERSION = "1"
log = logging.getLogger("artifact")


class ValidationError(Exception):
    pass


def _positive(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _samples(text):
    v = _positive(text)
    if v & (v - 1):
        raise argparse.ArgumentTypeError("must be a power of two")
    return v


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--samples", type=_samples, default=2 ** 20,
                   help="QMC points per weight integral, a power of two (default 2^20)")
    p.add_argument("--seed", type=int, default=0, help="scrambling seed (default 0)")
    p.add_argument("--den-bound", type=_positive, default=48, help="denominator bound for snapping (default 48)")
    p.add_argument("--cache-dir", type=Path, default=None,
                   help="weight cache directory (default $ARTIFACT_CACHE_DIR or ~/.cache/artifact)")
    p.add_argument("--cache-only", action="store_true", help="never integrate; missing weights are an error")
    p.add_argument("--raw", action="store_true", help="use raw numeric weights instead of snapped rationals")
    p.add_argument("--format", choices=("human", "tsv"), default="human", help="output format (default human)")
    p.add_argument("-v", "--verbose", action="store_true", help="log weight integrations")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="artifact", description="Graph calculus for linear Poisson quantization.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("graphs", parents=[common], help="enumerate admissible graphs")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--mode", choices=G.MODES, default=G.PLAIN)
    p.add_argument("--infinity", type=int, default=0, help="edges to infinity per graph")
    p.add_argument("--cap", type=int, default=None, help="override the enumeration cap")

    p = sub.add_parser("weights", parents=[common], help="compute graph weights")
    p.add_argument("graph", nargs="*", help="graph specs (n=..;m=..;e=..) or files with one per line")
    p.add_argument("--n", type=str, default=None, help="aerial count or range a-b (essential Lie/wheel graphs, m=2)")
    p.add_argument("--weight-mode", choices=WEIGHT_MODES, default=HALF_PLANE)

    p = sub.add_parser("bch", parents=[common], help="graph expansion of BCH against Dynkin")
    p.add_argument("--order", type=int, default=3)

    p = sub.add_parser("star", parents=[common], help="truncated star product of two polynomials")
    p.add_argument("--algebra", required=True, help="preset name or algebra file")
    p.add_argument("f")
    p.add_argument("g")
    p.add_argument("--order", type=int, default=2)

    p = sub.add_parser("reduce", parents=[common], help="reduction algebra basis and its product table")
    p.add_argument("--sub", required=True, help=f"preset ({', '.join(SUB_PRESETS)}) or subalgebra file")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--degree-cap", type=int, default=2)

    p = sub.add_parser("duflo-check", parents=[common], help="Duflo map on Casimir powers versus the PBW product")
    p.add_argument("--algebra", default="sl2")
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--max-power", type=int, default=2)

    p = sub.add_parser("edouble", parents=[common], help="E_double - 1 for the double of an algebra")
    p.add_argument("--algebra", default="aff2")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--t1", action="store_true", help="also compare t = 1 with the Duflo density")
    return ap


def _read(text: str) -> str:
    path = Path(text)
    try:
        if path.is_file():
            return path.read_text()
    except OSError:
        pass
    return text


def _algebra(spec: str):
    return load_algebra(_read(spec))


def _source(args) -> WeightSource:
    cache_dir = args.cache_dir if args.cache_dir is not None else default_cache_dir()
    return WeightSource(WeightCache(cache_dir), samples=args.samples, seed=args.seed,
                        den_bound=args.den_bound, snap=not args.raw, compute=not args.cache_only)


def _header(args, out):
    out(f"# convention_version={CONVENTION_VERSION} samples={args.samples} seed={args.seed} "
        f"den_bound={args.den_bound} snap={'no' if args.raw else 'yes'}")


def _footer(src: WeightSource, out):
    if src.computed:
        out(f"# integrated {len(src.computed)} weights; seeds " + ",".join(sorted({w.seed for w in src.computed})))
    bad = [w.graph_id for w in src.computed if not w.converged]
    if bad:
        out("# unconverged: " + " ".join(bad))
    if src.unsnapped:
        out("# unsnapped: " + " ".join(sorted(src.unsnapped)))


def cmd_graphs(args, out) -> int:
    caps = dict(G.DEFAULT_CAPS)
    gs = G.enumerate_graphs(args.n, args.m, args.mode, n_infinity=args.infinity, cap=args.cap)
    if args.format == "tsv":
        out(f"#tsv-v{TSV_VERSION}\tid\tclass\tmultiplicity")
    for g in gs:
        kind = G.classify(g).kind
        mult = G.labeled_multiplicity(g)
        out(f"{g.id}\t{kind}\t{mult}" if args.format == "tsv" else f"{g.id}   {kind}   x{mult}")
    if args.format != "tsv":
        out(f"# {len(gs)} graph classes (cap {args.cap or caps[args.mode]})")
    return 0


def _weight_graphs(args) -> list[G.KGraph]:
    gs: list[G.KGraph] = []
    for spec in args.graph:
        gs.extend(G.parse_many(_read(spec)))
    if args.n:
        lo, _, hi = args.n.partition("-")
        for n in range(int(lo), int(hi or lo) + 1):
            gs.extend(g for g in G.enumerate_graphs(n, 2, G.ESSENTIAL)
                      if G.classify(g).kind in (G.LIE, G.WHEEL))
    if not gs:
        raise ValidationError("give graph specs or --n")
    return gs


def cmd_weights(args, out) -> int:
    src = _source(args)
    _header(args, out)
    if args.format == "tsv":
        out(f"#tsv-v{TSV_VERSION}\tgraph\tmode\tvalue\tstd_error\tsnapped\tstatus")
    status_code = 0
    for g in _weight_graphs(args):
        w = src(g, args.weight_mode)
        if w.snapped is not None:
            status = "ok"
        elif args.raw:
            status = "raw"
        else:
            status = "ambiguous" if w.ambiguity else "empty"
            status_code = 2
        if not w.converged:
            status += ",unconverged"
            status_code = 2
        snapped = "" if w.snapped is None else str(w.snapped)
        if args.format == "tsv":
            out(f"{g}\t{args.weight_mode}\t{w.value:.10g}\t{w.std_error:.3g}\t{snapped}\t{status}")
        else:
            out(f"{g}  {w.value:+.8f} +- {w.std_error:.2g}  {snapped or '-'}  [{status}]")
    _footer(src, out)
    return status_code


def cmd_bch(args, out) -> int:
    src = _source(args)
    _header(args, out)
    z = kontsevich_bch(args.order, src)
    cmp = compare_to_dynkin(z)
    if args.format == "tsv":
        out(f"#tsv-v{TSV_VERSION}\torder\tword\tvalue\terr\tdynkin\tdiff\twithin")
    ok = True
    for word, r in cmp.items():
        val = r["value"]
        vtxt = str(val) if isinstance(val, (int, Fraction)) else f"{float(val):.10g}"
        ok &= r["within"]
        if args.format == "tsv":
            out(f"{len(word)}\t{word}\t{vtxt}\t{r['err']:.3g}\t{r['ref']}\t{r['diff']:.3g}\t{int(r['within'])}")
        else:
            from .lieseries import bracket_string
            mark = "ok" if r["within"] else "MISMATCH"
            flag = " (unresolved)" if r["flag"] and not isinstance(val, (int, Fraction)) else ""
            out(f"{vtxt} * {bracket_string(word)}   dynkin {r['ref']}   err {r['err']:.2g}   {mark}{flag}")
    _footer(src, out)
    if not ok:
        out("# graph expansion disagrees with Dynkin")
        return 2
    return 2 if (src.unsnapped and not args.raw) else 0


def cmd_star(args, out) -> int:
    alg = _algebra(args.algebra)
    f = parse_eps_poly(_read(args.f), alg.basis_names)
    g = parse_eps_poly(_read(args.g), alg.basis_names)
    src = _source(args)
    _header(args, out)
    res = star(alg, f, g, args.order, src)
    for line in res.to_lines(alg.basis_names):
        out(line)
    _footer(src, out)
    return 2 if (src.unsnapped and not args.raw) else 0


def _subalgebra(spec: str):
    if spec in SUB_PRESETS:
        return sub_preset(spec)
    return load_subalgebra(_read(spec))


def cmd_reduce(args, out) -> int:
    sub = _subalgebra(args.sub)
    src = _source(args)
    _header(args, out)
    names = sub.chart_names
    out(f"# chart coordinates: {', '.join(names) or '(none)'}; flags: {', '.join(sub.flags()) or 'none'}")
    mu0 = mu0_operator(sub, args.order, src)
    if src.unsnapped and not args.raw:
        _footer(src, out)
        return 2
    basis = reduction_basis(sub, args.order, args.degree_cap, src, mu0)
    out(f"# basis ({len(basis)} elements, degree <= {args.degree_cap}, eps order {args.order})")
    for i, b in enumerate(basis):
        out(f"b{i}: " + " | ".join(b.to_lines(names)) + f"   LC = {leading_part(b).to_str(names)}")
    ops = cf_operator(sub, args.order, src)
    out("# products b_i * b_j")
    for i, a in enumerate(basis):
        for j, b in enumerate(basis):
            prod = cf_star(sub, a, b, args.order, src, ops=ops, mu0=mu0, check=False)
            out(f"b{i}*b{j} = " + (" | ".join(prod.to_lines(names)) or "0"))
    _footer(src, out)
    return 2 if (src.unsnapped and not args.raw) else 0


def cmd_duflo_check(args, out) -> int:
    alg = _algebra(args.algebra)
    _header(args, out)
    ok = True
    for a in range(1, args.max_power + 1):
        for b in range(a, args.max_power + 1):
            r = duflo_check(alg, a, b, args.order)
            ok &= r.is_zero()
            out(f"C^{a}, C^{b}: residual " + ("0" if r.is_zero() else "; ".join(r.to_lines(alg.basis_names))))
    return 0 if ok else 2


def cmd_edouble(args, out) -> int:
    base = _algebra(args.algebra)
    src = _source(args)
    _header(args, out)
    res = e_double_check(base, args.order, src)
    ok = res.residual_ok()
    out(f"# E_double - 1 for {base.name or 'algebra'} through eps^{args.order}")
    lines = res.to_lines()
    for line in lines or ["0"]:
        out(line)
    out("# residual " + ("within 3 sigma of 0" if ok else "SIGNIFICANT (nonzero beyond 3 sigma)"))
    if args.t1:
        sym, pred = duflo_density_check(base, args.order, src)
        from .biquant import symbol_matches
        out("# t=1 symbol vs Duflo density: " + ("match" if symbol_matches(sym, pred) else "MISMATCH"))
    _footer(src, out)
    return 0


COMMANDS = {"graphs": cmd_graphs, "weights": cmd_weights, "bch": cmd_bch, "star": cmd_star,
            "reduce": cmd_reduce, "duflo-check": cmd_duflo_check, "edouble": cmd_edouble}


def main(argv=None, out=None) -> int:
    out = out or (lambda s: print(s))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code not in (0, None) else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except (G.GraphError, G.SizingError, AlgebraError, SubalgebraError, CapError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (LookupError, MissingWeightsError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
