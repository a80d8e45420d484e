"""Command-line interface.

Exit status: 0 success, 1 usage or parse error, 2 failed precondition,
3 the data falsify the graph (or a sweep found a violation).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bounds, constraints, oracle, records
from .graph import Dag, GraphError, UnknownVertexError, parse_graph
from .model import ModelError, parse_table
from .separation import QueryError, d_separated, e_separated, e_separated_star

EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION, EXIT_FALSIFIED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class PreconditionFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- argument helpers ----------------------------------------------------------

def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p.read_text()


def _load_graph(path: str) -> Dag:
    try:
        return parse_graph(_read(path))
    except GraphError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _load_table(path: str, g: Dag):
    try:
        loaded = parse_table(_read(path), g)
    except ModelError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if loaded.renormalized:
        print(f"note: table mass {loaded.raw_mass!r} renormalized to 1", file=sys.stderr)
    return loaded.table


def _parse_sets(tokens, allowed, g: Dag) -> dict[str, tuple[str, ...]]:
    """``A=Z,W`` style tokens; every name must be a vertex of ``g``."""
    out = {}
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep or key not in allowed:
            raise UsageError(f"expected one of {', '.join(k + '=...' for k in allowed)}, "
                             f"got {tok!r}")
        if key in out:
            raise UsageError(f"{key}= given twice")
        names = tuple(n.strip() for n in val.split(",") if n.strip())
        for n in names:
            if n not in g:
                raise UsageError(f"unknown vertex {n!r} in {key}=")
        out[key] = names
    return out


def _need(sets, *keys):
    for k in keys:
        if not sets.get(k):
            raise UsageError(f"{k}= is required and must be nonempty")


def _check_observed(g: Dag, *names):
    for n in names:
        if n not in g:
            raise UsageError(f"unknown vertex {n!r}")
        if g.is_latent(n):
            raise PreconditionFailed(f"latent-vertex: {n!r} is latent")


def _fmt_path(g: Dag, path) -> str:
    out = [path[0]]
    for u, v in zip(path, path[1:]):
        out.append("->" if g.has_edge(u, v) else "<-")
        out.append(v)
    return " ".join(out)


def _fmt_set(names) -> str:
    return "{" + ", ".join(names) + "}"


def _fmt_assign(pairs) -> str:
    return ", ".join(f"{v}={s}" for v, s in pairs)


# -- subcommands ----------------------------------------------------------------

def cmd_dsep(args, out):
    g = _load_graph(args.graph)
    sets = _parse_sets(args.sets, ("A", "B", "C"), g)
    _need(sets, "A", "B")
    v = d_separated(g, sets["A"], sets["B"], sets.get("C", ()))
    if args.format == "records":
        out.write(records.emit_lines(v))
    elif v.separated:
        out.write("d-separated\n")
    else:
        out.write(f"not d-separated; active path: {_fmt_path(g, v.witness_path)}\n")
    return EXIT_OK


def cmd_esep(args, out):
    g = _load_graph(args.graph)
    sets = _parse_sets(args.sets, ("A", "B", "C", "D"), g)
    _need(sets, "A", "B")
    a, b, c, d = (sets.get(k, ()) for k in "ABCD")
    rep = records.EsepReport(e_separated(g, a, b, c, d), e_separated_star(g, a, b, c, d))
    if not rep.agree:
        raise RuntimeError("internal error: the two e-separation characterizations disagree")
    if args.format == "records":
        out.write(records.emit_lines(rep))
    elif rep.subgraph.separated:
        out.write("e-separated (both characterizations agree)\n")
    else:
        path = _fmt_path(g, rep.subgraph.witness_path)
        out.write(f"not e-separated (both characterizations agree); active path after "
                  f"deleting {_fmt_set(d)}: {path}\n")
    return EXIT_OK


def _witness_label(w) -> str:
    if not w.d:
        return "equality constraint"
    return "inequality constraint, " + ("strong form" if w.strong else "weak form")


def cmd_find(args, out):
    g = _load_graph(args.graph)
    pairs = constraints.testable_pairs(g)
    if args.pair:
        names = [n.strip() for n in args.pair.split(",")]
        if len(names) != 2:
            raise UsageError("--pair expects X,Y")
        _check_observed(g, *names)
        x, y = names
        if g.adjacent(x, y):
            raise PreconditionFailed(f"adjacency: {x} and {y} are adjacent")
        pairs = [p for p in pairs if (p.x, p.y) == (x, y)]
        wits = constraints.enumerate_witnesses(g, x, y, args.max_c, args.max_d)
    else:
        wits = constraints.all_witnesses(g, args.max_c, args.max_d)
        wits.sort(key=lambda w: constraints._witness_key(g, w))
    rep = records.FindReport(tuple(pairs), tuple(wits))
    if args.format == "records":
        out.write(records.emit_lines(rep))
        return EXIT_OK
    out.write(f"testable pairs ({len(pairs)}):\n")
    for p in pairs:
        out.write(f"  {p.x}, {p.y}  delete {_fmt_set(p.d)}\n")
    out.write(f"witnesses ({len(wits)}):\n")
    for w in wits:
        out.write(f"  A={_fmt_set(w.a)} B={_fmt_set(w.b)} C={_fmt_set(w.c)} "
                  f"D={_fmt_set(w.d)}  {_witness_label(w)}\n")
    return EXIT_OK


def cmd_check(args, out):
    g = _load_graph(args.graph)
    t = _load_table(args.dist, g)
    tol = constraints.FEAS_TOL if args.tol is None else args.tol
    rep = constraints.check_distribution(g, t, tol=tol)
    if args.format == "records":
        out.write(records.emit_lines(rep))
    else:
        for v in rep.verdicts:
            w = v.witness
            verdict = "ok" if v.feasible else "VIOLATED"
            line = (f"{verdict:8s} A={_fmt_set(w.a)} B={_fmt_set(w.b)} C={_fmt_set(w.c)} "
                    f"D={_fmt_set(w.d)} d=({_fmt_assign(zip(w.d, v.d_state))}) "
                    f"{v.form} margin={v.margin:.6g}")
            if v.violating_c is not None and w.c:
                line += f" at c=({_fmt_assign(zip(w.c, v.violating_c))})"
            if args.grid:
                line += _grid_note(t, v, args.grid)
            out.write(line + "\n")
        status = "compatible" if rep.feasible else "model falsified"
        out.write(f"{len(rep.verdicts)} slices, {len(rep.infeasible)} infeasible, "
                  f"max margin {rep.max_margin:.6g}: {status}\n")
    return EXIT_OK if rep.feasible else EXIT_FALSIFIED


def _grid_note(t, v, grid) -> str:
    s = constraints.build_slice(t, v.witness, v.d_state)
    try:
        res = oracle.brute_force_compat(s, grid)
    except constraints.SliceError:
        return " (grid check skipped)"
    return f" grid-margin={res.margin:.4g}"


def cmd_iv(args, out):
    g = _load_graph(args.graph)
    z, x, y = args.instrument, args.treatment, args.outcome
    _check_observed(g, z, x, y)
    for v in (z, x, y):
        if g.n_states(v) != 2:
            raise PreconditionFailed(f"binary: {v!r} has {g.n_states(v)} states")
    if g.adjacent(z, y):
        raise PreconditionFailed(f"e-separation: {z} and {y} are adjacent")
    try:
        constraints.make_witness(g, [z], [y], (), [x])
    except GraphError as exc:
        raise PreconditionFailed(f"e-separation: {exc}") from None
    t = _load_table(args.dist, g)
    try:
        p = constraints.iv_table(t, z, x, y)
    except ModelError as exc:
        raise PreconditionFailed(f"positivity: {exc}") from None
    score = constraints.instrumental_inequality_score(p)
    tol = oracle.CI_TOL if args.tol is None else args.tol
    acde = []
    for xs in (0, 1):
        r = bounds.iv_acde_bounds(p, xs)
        acde.append((xs, r.lower, r.upper, r.includes_zero))
    rep = records.IvReport(score, tuple(acde), score > 1.0 + tol)
    if args.format == "records":
        out.write(records.emit_lines(rep))
    else:
        out.write(f"instrumental inequality score: {score:.4f}"
                  f"{' (violated: model falsified)' if rep.violated else ''}\n")
        for xs, lo, hi, zero in acde:
            out.write(f"  ACDE of {z} on {y} at {x}={xs}: [{lo:.6g}, {hi:.6g}]"
                      f"{'' if zero else '  excludes 0'}\n")
    return EXIT_FALSIFIED if rep.violated else EXIT_OK


def cmd_bounds(args, out):
    g = _load_graph(args.graph)
    sets = _parse_sets(args.sets, ("C", "D"), g)
    x, y = args.treatment, args.outcome
    _check_observed(g, x, y)
    t = _load_table(args.dist, g)
    c, d = sets.get("C"), sets.get("D")
    given = "C" in sets or "D" in sets
    try:
        rep = bounds.bounds_report(g, t, x, y, c if given else None, d if given else None,
                                   args.variant, args.max_c, args.max_d)
    except bounds.ModelFalsified as exc:
        _write_bounds(args, out, exc.report)
        print(f"model falsified: {exc}", file=sys.stderr)
        return EXIT_FALSIFIED
    except bounds.BoundsPreconditionError as exc:
        raise PreconditionFailed(str(exc)) from None
    if not rep.witnesses:
        raise PreconditionFailed(f"e-separation: no admissible witness for {x} -> {y}")
    _write_bounds(args, out, rep)
    return EXIT_OK


def _write_bounds(args, out, rep):
    if args.format == "records":
        out.write(records.emit_lines(rep))
        return
    x, y = rep.x, rep.y
    out.write(f"admissible witnesses for {x} -> {y}: "
              + "; ".join(f"C={_fmt_set(c)} D={_fmt_set(d)}" for c, d in rep.witnesses) + "\n")
    for e in rep.entries:
        out.write(f"  {e.variant:12s} p({y}={e.y_state} | do({_fmt_assign(((x, e.x_state),) + e.d)})"
                  f"{', ' + _fmt_assign(e.c) if e.c else ''}) in [{e.lower:.6g}, {e.upper:.6g}]\n")
    out.write("intersection:\n")
    for i in rep.intersections:
        mark = "  EMPTY" if i.empty else ""
        out.write(f"  p({y}={i.y_state} | do({_fmt_assign(((x, i.x_state),) + i.d)})"
                  f"{', ' + _fmt_assign(i.c) if i.c else ''}) in [{i.lower:.6g}, {i.upper:.6g}]"
                  f"  (lower: {i.lower_from}, upper: {i.upper_from}){mark}\n")
    for a in rep.acde:
        ctx = _fmt_assign(a.d + a.c)
        out.write(f"  ACDE of {x} on {y}={a.y_state}{' at ' + ctx if ctx else ''}: "
                  f"[{a.lower:.6g}, {a.upper:.6g}]{'' if a.includes_zero else '  excludes 0'}\n")
    for s in rep.skipped:
        out.write(f"  skipped {s}\n")


def cmd_sweep(args, out):
    g = _load_graph(args.graph)
    if args.models < 0:
        raise UsageError("--models must be nonnegative")
    bound_tol = oracle.BOUND_TOL if args.tol is None else args.tol
    rep = oracle.soundness_sweep(g, args.models, args.seed, args.concentration,
                                 args.latent_states, args.max_c, args.max_d,
                                 bound_tol=bound_tol)
    if args.format == "records":
        out.write(records.emit_lines(rep))
    else:
        out.write(f"{rep.n_models} models (seed {rep.seed}, concentration {rep.concentration})\n"
                  f"  slices checked: {rep.n_slices}, infeasible: {rep.n_infeasible}, "
                  f"max margin {rep.max_margin:.3g}\n"
                  f"  bound checks: {rep.n_bound_checks}, max excess {rep.max_bound_excess:.3g}\n"
                  f"  dominance checks: {rep.n_dominance_checks}, "
                  f"max excess {rep.max_dominance_excess:.3g}\n"
                  f"  violations: {len(rep.violations)}\n")
        for v in rep.violations:
            out.write(f"    model {v.model_index} (seed {v.model_seed}) {v.kind}: {v.detail}\n")
    return EXIT_OK if rep.ok else EXIT_FALSIFIED


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("text", "records"), default="text")
    common.add_argument("--tol", type=float, default=None,
                        help="override the numerical tolerance of the command")
    common.add_argument("--grid", type=int, default=0,
                        help="brute-force grid resolution for cross-checks (0 = off)")

    p = _Parser(prog="esep", description="Constraints and bounds for DAGs with latent variables.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("dsep", parents=[common], help="d-separation query")
    s.add_argument("graph")
    s.add_argument("sets", nargs="*", metavar="A=..|B=..|C=..")
    s.set_defaults(func=cmd_dsep)

    s = sub.add_parser("esep", parents=[common], help="e-separation query")
    s.add_argument("graph")
    s.add_argument("sets", nargs="*", metavar="A=..|B=..|C=..|D=..")
    s.set_defaults(func=cmd_esep)

    s = sub.add_parser("find", parents=[common], help="list testable pairs and witnesses")
    s.add_argument("graph")
    s.add_argument("--pair", metavar="X,Y")
    s.add_argument("--max-c", type=int, default=None)
    s.add_argument("--max-d", type=int, default=None)
    s.set_defaults(func=cmd_find)

    s = sub.add_parser("check", parents=[common], help="check a table against the graph")
    s.add_argument("graph")
    s.add_argument("dist")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("iv", parents=[common], help="instrumental inequality and IV bounds")
    s.add_argument("graph")
    s.add_argument("dist")
    s.add_argument("--instrument", default="Z")
    s.add_argument("--treatment", default="X")
    s.add_argument("--outcome", default="Y")
    s.set_defaults(func=cmd_iv)

    s = sub.add_parser("bounds", parents=[common], help="interventional and ACDE bounds")
    s.add_argument("graph")
    s.add_argument("dist")
    s.add_argument("sets", nargs="*", metavar="C=..|D=..")
    s.add_argument("--treatment", required=True)
    s.add_argument("--outcome", required=True)
    s.add_argument("--variant", choices=bounds.VARIANTS, default="auto")
    s.add_argument("--max-c", type=int, default=None)
    s.add_argument("--max-d", type=int, default=None)
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("sweep", parents=[common], help="soundness sweep over random models")
    s.add_argument("graph")
    s.add_argument("--models", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--concentration", type=float, default=1.0)
    s.add_argument("--latent-states", type=int, default=4)
    s.add_argument("--max-c", type=int, default=None)
    s.add_argument("--max-d", type=int, default=None)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    # set lists may follow options; argparse stops filling ``sets`` at the first option
    if extra and hasattr(args, "sets") and all("=" in e and not e.startswith("-") for e in extra):
        args.sets = list(args.sets) + extra
    elif extra:
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    if args.grid and not 1 <= args.grid <= oracle.MAX_GRID:
        print(f"esep: error: --grid must be in 1..{oracle.MAX_GRID}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, out)
    except (UsageError, UnknownVertexError) as exc:
        print(f"esep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PreconditionFailed, QueryError, bounds.BoundsPreconditionError) as exc:
        print(f"esep: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (GraphError, ModelError, constraints.SliceError) as exc:
        print(f"esep: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
