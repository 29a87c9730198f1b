"""Command-line interface.

Subcommands: check (validate a program), run (explore with a chosen
algorithm), classes (equivalence partition counts), bench (size sweeps
with table, CSV and figures), emit (print a builtin benchmark source).

Exit codes: 0 ok, 1 assertion violation found, 2 incomplete run,
3 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import bench as benchmod
from . import explore as explore_mod
from . import lang, oracle, report
from .model import (
    InputError,
    ModelError,
    all_but_two_cycle_set,
    build_communication_graph,
    is_acyclic,
)

log = logging.getLogger("obsmc")

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INCOMPLETE = 2
EXIT_INPUT = 3


def _setup_logging(verbose: int) -> None:
    level = os.environ.get("OBSMC_LOG")
    if level is None:
        level = "DEBUG" if verbose >= 2 else "INFO" if verbose == 1 else "WARNING"
    logging.basicConfig(level=getattr(logging, level.upper(), logging.WARNING),
                        format="%(levelname)s %(message)s")


def load_program(target: str, n: int | None):
    """A path to a .cmp file, or bench:<name> with --n."""
    if target.startswith("bench:"):
        name = target[len("bench:"):]
        source = benchmod.generate(name, n)
        return lang.compile_source(source, benchmod.bench_label(name, n))
    path = Path(target)
    source = path.read_text()
    return lang.compile_source(source, path.stem)


def cmd_check(args) -> int:
    try:
        program = load_program(args.input, args.n)
    except (lang.ParseError, InputError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    graph = build_communication_graph(program)
    kinds: dict[str, int] = {}
    for ev in program.events.values():
        kinds[type(ev.label).__name__.lower()] = kinds.get(type(ev.label).__name__.lower(), 0) + 1
    print(f"ok: {len(program.processes)} processes, {len(program.events)} events")
    print("  " + ", ".join(f"{k}={v}" for k, v in sorted(kinds.items())))
    if is_acyclic(graph):
        print("  architecture: acyclic")
    else:
        print("  architecture: cyclic (use --algo dc-cyclic for exploration)")
    return EXIT_OK


def _run_algo(program, args):
    algo = args.algo
    caps = dict(max_calls=args.max_calls, max_seconds=args.max_seconds)
    if algo in ("dc", "dc-cyclic"):
        mode = "acyclic" if algo == "dc" else "cyclic"
        if algo == "dc" and not is_acyclic(build_communication_graph(program)):
            raise InputError(
                "communication graph is cyclic; --algo dc needs an acyclic "
                "architecture, try --algo dc-cyclic"
            )
        config = explore_mod.ExploreConfig(
            mode=mode,
            burst=args.burst,
            skip_current_observation=args.skip_current_obs,
            log=log.info if args.verbose else None,
            **caps,
        )
        return explore_mod.explore(program, config)
    if algo == "sleep":
        return oracle.sleep_set_dpor(
            program, cap=args.max_traces, max_seconds=args.max_seconds
        )
    if algo == "brute":
        return oracle.brute_force_report(
            program, cap=args.max_traces or oracle.DEFAULT_CAP
        )
    raise InputError(f"unknown algorithm {algo!r}")


def cmd_run(args) -> int:
    try:
        program = load_program(args.input, args.n)
        rep = _run_algo(program, args)
    except (lang.ParseError, InputError, ModelError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except oracle.CapExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INCOMPLETE
    if args.json:
        print(json.dumps(rep.to_json_dict(), indent=2))
    else:
        print(f"program      {rep.program}")
        print(f"algo         {rep.algo}")
        print(f"traces       {rep.traces}")
        print(f"classes      {rep.classes}")
        print(f"calls        {rep.calls}")
        print(f"unrealizable {rep.unrealizable}")
        print(f"time_ms      {rep.wall_ms:.1f}")
        print(f"complete     {str(rep.complete).lower()}")
        for v in rep.violations:
            print(f"violation    {v.assert_id} witness {v.witness}")
    if rep.violations:
        return EXIT_VIOLATION
    if not rep.complete:
        return EXIT_INCOMPLETE
    return EXIT_OK


EQUIV_NAMES = {"maz": "mazurkiewicz", "obs": "observation", "obsx": "observation-refined"}


def cmd_classes(args) -> int:
    try:
        program = load_program(args.input, args.n)
    except (lang.ParseError, InputError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    kinds = {}
    wanted = list(EQUIV_NAMES) if args.equiv == "all" else [args.equiv]
    cut = all_but_two_cycle_set(build_communication_graph(program))
    for short in wanted:
        kinds[short] = (EQUIV_NAMES[short], cut if short == "obsx" else None)
    try:
        parts, total = oracle.partition_stream(
            program, kinds, cap=args.max_traces or oracle.DEFAULT_CAP
        )
    except oracle.CapExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INCOMPLETE
    if args.json:
        out = {
            "program": program.name,
            "maximal_traces": total,
            "classes": {k: parts[k].count for k in parts},
        }
        if "obsx" in parts:
            out["cut_edges"] = sorted(list(e) for e in cut)
        print(json.dumps(out, indent=2))
    else:
        print(f"program {program.name}: {total} maximal traces")
        for short in wanted:
            print(f"  {EQUIV_NAMES[short]:<22} {parts[short].count} classes")
        if "obsx" in wanted:
            print(f"  cut edges: {sorted(tuple(e) for e in cut)}")
    return EXIT_OK


def _bench_sizes(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part and not part.startswith("-"):
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def cmd_bench(args) -> int:
    sizes = _bench_sizes(args.sizes)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    rows: list[report.BenchRow] = []
    try:
        for size in sizes:
            program = load_program(f"bench:{args.suite}", size)
            acyclic = is_acyclic(build_communication_graph(program))
            for algo in algos:
                chosen = algo
                if algo == "dc" and not acyclic:
                    chosen = "dc-cyclic"
                t0 = time.perf_counter()
                ns = argparse.Namespace(
                    algo=chosen,
                    max_calls=args.max_calls,
                    max_seconds=args.max_seconds,
                    max_traces=args.max_traces,
                    burst=False,
                    skip_current_obs=False,
                    seed=None,
                    verbose=args.verbose,
                )
                try:
                    rep = _run_algo(program, ns)
                    rows.append(
                        report.BenchRow(
                            args.suite,
                            size,
                            chosen,
                            rep.classes,
                            rep.traces,
                            rep.wall_ms,
                            rep.complete,
                        )
                    )
                except oracle.CapExceeded:
                    rows.append(
                        report.BenchRow(args.suite, size, chosen, None, None, None, False)
                    )
                log.info("bench %s n=%d %s done in %.2fs", args.suite, size, chosen,
                         time.perf_counter() - t0)
    except (lang.ParseError, InputError, ModelError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    if args.json:
        print(json.dumps([r.__dict__ for r in rows], indent=2))
    else:
        print(report.format_table(rows))
    out_dir = Path(args.out)
    written = report.write_report(rows, out_dir)
    for path in written:
        log.info("wrote %s", path)
    if not args.json:
        print(f"report files in {out_dir}/: " + ", ".join(p.name for p in written))
    if any(not r.complete for r in rows):
        return EXIT_INCOMPLETE
    return EXIT_OK


def cmd_emit(args) -> int:
    target = args.input
    if not target.startswith("bench:"):
        print("error: emit expects bench:<name>", file=sys.stderr)
        return EXIT_INPUT
    try:
        print(benchmod.generate(target[len("bench:"):], args.n), end="")
    except KeyError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="obsmc",
        description="Stateless model checking by observation equivalence classes",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_verbose(p):
        # accepted after the subcommand as well; SUPPRESS keeps the
        # top-level value when the flag is absent here
        p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)

    def add_input(p):
        p.add_argument("input", help="path to a .cmp file or bench:<name>")
        p.add_argument("--n", type=int, default=None, help="builtin benchmark parameter")
        add_verbose(p)

    p = sub.add_parser("check", help="validate a program")
    add_input(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("run", help="explore a program")
    add_input(p)
    p.add_argument("--algo", choices=["dc", "dc-cyclic", "sleep", "brute"], default="dc")
    p.add_argument("--json", action="store_true")
    p.add_argument("--seed", type=int, default=None,
                   help="reserved for randomized scheduling policies; unused")
    p.add_argument("--max-calls", type=int, default=None)
    p.add_argument("--max-traces", type=int, default=None)
    p.add_argument("--max-seconds", type=float, default=None)
    p.add_argument("--burst", action="store_true",
                   help="annotate causal pasts in one step (loses optimality)")
    p.add_argument("--skip-current-obs", action="store_true",
                   help="do not re-point reads at their current writes")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("classes", help="count equivalence classes by enumeration")
    add_input(p)
    p.add_argument("--equiv", choices=["maz", "obs", "obsx", "all"], default="all")
    p.add_argument("--json", action="store_true")
    p.add_argument("--max-traces", type=int, default=None)
    p.set_defaults(func=cmd_classes)

    p = sub.add_parser("bench", help="size sweeps with table, CSV and figures")
    add_verbose(p)
    p.add_argument("--suite", required=True, choices=sorted(benchmod.GENERATORS))
    p.add_argument("--sizes", required=True, help="e.g. 2,3,4 or 4-10")
    p.add_argument("--algos", default="dc,sleep")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", default="obsmc-bench", help="report directory")
    p.add_argument("--max-calls", type=int, default=None)
    p.add_argument("--max-traces", type=int, default=None)
    p.add_argument("--max-seconds", type=float, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("emit", help="print a builtin benchmark source")
    add_input(p)
    p.set_defaults(func=cmd_emit)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
