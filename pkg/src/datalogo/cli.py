"""Command-line entry point: ``datalogo run|check|ground|analyze``.

Exit codes: 0 converged / ok, 1 usage, parse or validation errors,
2 divergence (iteration cap exceeded), 3 internal limits (grounding
budget, 64-bit overflow).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import report
from .analysis import clone_stability_bound, format_bound, stability_report
from .ast import StratificationError, ValidationError, classify_linear, is_cast_free, stratify, validate
from .engine import (
    DivergenceError,
    MonotonicityError,
    RunOptions,
    UnsupportedEngine,
    compute_cap,
    format_trace_line,
    naive_eval,
    run_program,
    solution_relations,
)
from .ground import EvaluationError, GroundingBudgetError, GroundingError, active_domain_restrict, ground
from .linear import LinearError, matrix_stability_index, unit_cycle
from .loader import bundled, load_database
from .parser import ParseError, parse_file
from .pops import ArithmeticOverflow, PopsError, TropPPops, get_pops
from .store import StoreError, write_table

log = logging.getLogger("datalogo")

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_LIMIT = 0, 1, 2, 3


class _Color:
    def __init__(self, stream):
        self.on = os.environ.get("DATALOGO_COLOR", "1") != "0" and getattr(stream, "isatty", lambda: False)()

    def __call__(self, text: str, code: str) -> str:
        return f"\033[{code}m{text}\033[0m" if self.on else text

    def ok(self, t):
        return self(t, "32")

    def bad(self, t):
        return self(t, "31")

    def dim(self, t):
        return self(t, "2")


def _resolve(path: str) -> str:
    """Accept a path, or the name of a bundled program / data directory."""
    if os.path.exists(path):
        return path
    cand = bundled(path.rstrip("/"))
    if os.path.exists(cand):
        return cand
    return path


def _max_iters(text: str):
    if text == "auto":
        return None
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a non-negative integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("--max-iters must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="datalogo", description="Evaluate datalog programs over partially ordered pre-semirings.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr (-vv for debug)")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, edb=True):
        p.add_argument("program", help="program file, or the name of a bundled program (e.g. sssp.dl)")
        if edb:
            p.add_argument("--edb", help="directory holding <Relation>.csv / .tsv files")
        p.add_argument("--json", action="store_true", help="machine-readable output")

    r = sub.add_parser("run", help="evaluate a program")
    common(r)
    r.add_argument("--engine", choices=["auto", "naive", "seminaive", "linear"], default="naive")
    r.add_argument("--max-iters", type=_max_iters, default=None, metavar="auto|N")
    r.add_argument("--trace", choices=["off", "summary", "full"], default="off")
    r.add_argument("--out", help="write IDB tables as CSV (and figures) to this directory")
    r.add_argument("--figures", help="write figures to this directory (default: --out)")
    r.add_argument("--no-figures", action="store_true")
    r.add_argument("--threads", type=int, default=1, help="parallelism hint (evaluation is single-threaded)")
    r.add_argument("--seed", type=int, default=None, help="recorded in the report; evaluation is deterministic")
    r.add_argument("--linear-p", type=int, default=None, help="stability index for the linear solver")
    r.add_argument("--budget", type=int, default=None, help="grounding budget in monomials")
    r.add_argument("--no-restrict", action="store_true", help="skip active-domain restriction")

    c = sub.add_parser("check", help="validate, stratify and classify a program")
    common(c, edb=False)

    g = sub.add_parser("ground", help="dump the grounded polynomial system")
    common(g)
    g.add_argument("--no-restrict", action="store_true")

    a = sub.add_parser("analyze", help="stability and bound reports")
    a.add_argument("--pops", default="trop_p(2)", help="POPS instance name")
    a.add_argument("--stability", action="store_true", help="element stability indices on sampled elements")
    a.add_argument("--matrix", action="store_true", help="matrix stability of unit cycles over trop_p")
    a.add_argument("--bound", metavar="P1,P2,...", help="clone stability bound for descending indices")
    a.add_argument("--samples", type=int, default=40)
    a.add_argument("--cap", type=int, default=50)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--figures", help="write figures to this directory")
    a.add_argument("--json", action="store_true")
    return ap


# ---------------------------------------------------------------------------
# commands


def _load(args):
    program = parse_file(_resolve(args.program))
    edb = _resolve(args.edb) if getattr(args, "edb", None) else None
    return program, load_database(program, edb)


def cmd_run(args, out, color: _Color) -> int:
    program, db = _load(args)
    want_figs = not args.no_figures and (args.figures or args.out)
    trace = args.trace
    if want_figs and trace != "full":
        trace = "full"
    opts = RunOptions(
        engine=args.engine, max_iters=args.max_iters, trace=trace, restrict=not args.no_restrict,
        linear_p=args.linear_p, threads=args.threads,
    )
    if args.budget:
        opts.budget = args.budget
    if args.threads > 1:
        log.info("--threads %d: evaluation runs in one thread", args.threads)
    status = EXIT_OK
    try:
        result = run_program(program, db, opts)
    except DivergenceError as e:
        result = e.result
        status = EXIT_DIVERGED
        div = e
    if args.trace != "off" and not args.json:
        for sr in result.strata:
            if len(result.strata) > 1:
                print(f"# stratum {sr.stratum.index}", file=out)
            prev = None
            for t, a in sr.solution.trace:
                print(format_trace_line(sr.system, t, prev, a), file=out)
                prev = a
    if args.out:
        report.ensure_dir(args.out)
        for name, rel in sorted(result.relations.items()):
            write_table(rel, os.path.join(args.out, f"{name}.csv"))
    figs = []
    if want_figs:
        d = report.ensure_dir(args.figures or args.out)
        f = report.convergence_figure(result, os.path.join(d, "convergence.png"))
        if f:
            figs.append(f)
    if args.json:
        payload = report.run_json(result)
        payload["seed"] = args.seed
        payload["figures"] = figs
        if status == EXIT_DIVERGED:
            payload["error"] = str(div)
        print(json.dumps(payload, indent=2, sort_keys=True), file=out)
        return status
    for sr in result.strata:
        print(report.stratum_summary(sr), file=out)
    for name, rel in sorted(result.relations.items()):
        print(report.format_relation(rel), file=out)
    if status == EXIT_DIVERGED:
        print(color.bad(f"diverged: {div}"), file=out)
        for line in div.solution.diff:
            print(f"  last change {line}", file=out)
    elif len(result.strata) == 1 and result.strata[0].solution.engine != "linear":
        print(color.ok(f"converged in {result.strata[0].solution.iterations} iterations"), file=out)
    else:
        total = sum(s.solution.iterations for s in result.strata)
        print(color.ok(f"converged ({len(result.strata)} strata, {total} iterations in total)"), file=out)
    for f in figs:
        print(color.dim(f"figure: {f}"), file=out)
    return status


def cmd_check(args, out, color: _Color) -> int:
    program = parse_file(_resolve(args.program))
    diags = validate(program)
    errors = [d for d in diags if d.severity == "error"]
    strata = [] if errors else stratify(program)
    lin = [classify_linear(program, s) and is_cast_free(program, s) for s in strata]
    if args.json:
        print(json.dumps({
            "ok": not errors,
            "diagnostics": [str(d) for d in diags],
            "strata": [{"index": s.index, "idbs": list(s.idbs), "linear": l} for s, l in zip(strata, lin)],
        }, indent=2, sort_keys=True), file=out)
        return EXIT_USAGE if errors else EXIT_OK
    for d in diags:
        print(color.bad(str(d)) if d.severity == "error" else str(d), file=out)
    if errors:
        return EXIT_USAGE
    word = "stratum" if len(strata) == 1 else "strata"
    print(f"{len(strata)} {word}, linear: " + ", ".join("yes" if l else "no" for l in lin), file=out)
    for s, l in zip(strata, lin):
        pops = ", ".join(p.name for p in s.pops(program))
        print(f"  stratum {s.index}: {', '.join(s.idbs)} over {pops}; linear: {'yes' if l else 'no'}", file=out)
    return EXIT_OK


def cmd_ground(args, out, color: _Color) -> int:
    program, db = _load(args)
    diags = [d for d in validate(program, {k: v.elements for k, v in db.domains.items()}) if d.severity == "error"]
    if diags:
        raise ValidationError(diags)
    relations = dict(db.relations)
    strata = stratify(program)
    payload = []
    for st in strata:
        system = ground(program, st, db.domains, relations)
        if not args.no_restrict:
            system = active_domain_restrict(system)
        if args.json:
            payload.append({"stratum": st.index, "lines": system.dump_lines(), **system.stats()})
        else:
            if len(strata) > 1:
                print(f"# stratum {st.index}", file=out)
            out.write(system.dump())
        if st is not strata[-1]:
            # later strata read the solved relations of this one
            sol = naive_eval(system, compute_cap(system))
            relations.update(solution_relations(program, st, system, sol, db.domains))
    if args.json:
        print(json.dumps(payload, indent=2), file=out)
    return EXIT_OK


def _matrix_rows(ns=range(2, 7), ps=range(0, 4)):
    rows = []
    for p in ps:
        P = TropPPops(p)
        for n in ns:
            rows.append((p, n, matrix_stability_index(unit_cycle(P, n), 4 * (p + 1) * n + 4)))
    return rows


def cmd_analyze(args, out, color: _Color) -> int:
    if not (args.stability or args.matrix or args.bound):
        args.stability = True
    payload: dict = {}
    lines = []
    figs = []
    if args.stability:
        pops = get_pops(args.pops)
        rep = stability_report(pops, args.seed, args.samples, args.cap)
        payload["stability"] = rep.to_dict()
        lines.append(f"POPS {pops.name}: {rep.samples} sampled elements, seed {args.seed}, cap {args.cap}")
        lines.append(f"  known stability index: {pops.known_stability_p if pops.known_stability_p is not None else 'none'}")
        hist = ", ".join(f"{k}: {v}" for k, v in sorted(rep.histogram.items(), key=lambda kv: (kv[0] == 'none', str(kv[0]))))
        lines.append(f"  index histogram: {hist}")
        found = [v for v in rep.indices.values() if v is not None]
        if found:
            lines.append(f"  largest index found: {max(found)}")
        lines.append(f"  axioms: {'ok' if rep.axioms['ok'] else 'VIOLATED'} ({rep.axioms['checked']} checks)")
        lines.append(f"  samples witness the natural order: {'yes' if rep.natural_order else 'no'}")
        if rep.s_plus_bot is not None:
            lines.append(f"  S+bot closed under + and *: {'yes' if rep.s_plus_bot else 'no'}")
        lines.append(f"  note: {rep.note}")
        if args.figures:
            d = report.ensure_dir(args.figures)
            figs.append(report.stability_histogram(rep.histogram, pops.name, os.path.join(d, "stability.png"), args.cap))
    if args.matrix:
        rows = _matrix_rows()
        payload["matrix"] = [{"p": p, "N": n, "index": q, "reference": (p + 1) * n - 1} for p, n, q in rows]
        lines.append("unit cycle matrix stability over trop_p")
        lines.append("  p  N  index  (p+1)N-1")
        for p, n, q in rows:
            lines.append(f"  {p}  {n}  {q if q is not None else '-':>5}  {(p + 1) * n - 1:>8}")
        if args.figures:
            d = report.ensure_dir(args.figures)
            figs.append(report.matrix_growth_figure(rows, os.path.join(d, "matrix_stability.png")))
    if args.bound:
        ps = [int(x) for x in args.bound.split(",") if x.strip()]
        b = clone_stability_bound(ps)
        payload["bound"] = {"p": ps, "value": b}
        lines.append(f"clone stability bound for {ps}: {format_bound(b)}")
    payload["figures"] = figs
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True, default=str), file=out)
    else:
        for l in lines:
            print(l, file=out)
        for f in figs:
            print(color.dim(f"figure: {f}"), file=out)
    return EXIT_OK


def _caused_by(e: BaseException, kind) -> bool:
    while e is not None:
        if isinstance(e, kind):
            return True
        e = e.__cause__
    return False


COMMANDS = {"run": cmd_run, "check": cmd_check, "ground": cmd_ground, "analyze": cmd_analyze}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    color = _Color(out)
    err = sys.stderr
    try:
        return COMMANDS[args.cmd](args, out, color)
    except ParseError as e:
        print(f"{args.program}:{e}", file=err)
        return EXIT_USAGE
    except ValidationError as e:
        for d in e.diagnostics:
            print(f"{args.program}:{d}", file=err)
        return EXIT_USAGE
    except (GroundingBudgetError, ArithmeticOverflow) as e:
        print(f"limit: {e}", file=err)
        return EXIT_LIMIT
    except EvaluationError as e:
        if _caused_by(e, ArithmeticOverflow):
            print(f"limit: {e}", file=err)
            return EXIT_LIMIT
        print(f"error: {e}", file=err)
        return EXIT_USAGE
    except (StratificationError, StoreError, GroundingError, UnsupportedEngine, LinearError,
            MonotonicityError, PopsError, OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=err)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
