"""Command-line interface.

    sepchan check   outline.spec          check a proof outline
    sepchan validate program.ecsl --pre P --post Q
                                          validate a triple by exploration
    sepchan trace   program.ecsl [--prop F]
                                          dump all maximal traces

Exit codes: 0 success/valid/accepted, 1 rejected or counterexample,
2 parse error, 3 internal bound exceeded, 4 inconclusive (truncated).
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from . import report as rep
from .assertions import eval_temporal
from .checker import check_outline
from .domains import EnumerationBudgetExceeded
from .engine import (
    Bounds, explore, initial_states_for, lower_program, make_initial_state,
    validate_triple, zero_stack,
)
from .state import SplitBoundExceeded, label
from .syntax import (
    SourceError, parse_condition_text, parse_program, parse_spec,
    parse_temporal_text, plain_condition, pretty_print, A_TRUE,
)

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_PARSE = 2
EXIT_BOUND = 3
EXIT_INCONCLUSIVE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sepchan",
        description="Proof-outline checker and interleaving oracle for "
                    "concurrent heap/channel programs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("file", help="input file")
        p.add_argument("--cap", type=int, default=None,
                       help="override every channel capacity")
        p.add_argument("--domain", default=None, metavar="a..b",
                       help="override every channel value domain")
        p.add_argument("--max-steps", type=int, default=64)
        p.add_argument("--max-states", type=int, default=100_000)
        p.add_argument("--json", action="store_true",
                       help="emit the structured report")
        p.add_argument("--seed", type=int, default=None,
                       help="accepted for interface stability; exploration "
                            "is exhaustive, so the seed is ignored")

    p_check = sub.add_parser("check", help="check a proof outline (.spec)")
    common(p_check)

    p_val = sub.add_parser("validate",
                           help="validate {pre} program {post} by exploration")
    common(p_val)
    p_val.add_argument("--pre", default="true",
                       help="pre-condition ({G | g /\\ P} or a bare assertion)")
    p_val.add_argument("--post", default="true", help="post-condition")

    p_trace = sub.add_parser("trace", help="dump all maximal traces (.ecsl)")
    common(p_trace)
    p_trace.add_argument("--prop", default=None,
                         help="temporal formula to evaluate on every trace")
    p_trace.add_argument("--pre", default=None,
                         help="enumerate initial states satisfying this "
                              "condition (default: all variables zero)")
    return parser


def parse_domain(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition("..")
    return int(lo), int(hi)


def load_decls(args, decls):
    cap = args.cap
    domain = parse_domain(args.domain) if args.domain else None
    if cap is not None or domain is not None:
        return decls.with_overrides(cap=cap, domain=domain)
    return decls


def bounds_of(args) -> Bounds:
    return Bounds(max_steps=args.max_steps, max_states=args.max_states)


def cmd_check(args) -> int:
    source = open(args.file, encoding="utf-8").read()
    spec = parse_spec(source)
    spec = type(spec)(load_decls(args, spec.decls), spec.outline)
    try:
        verdict = check_outline(spec, bounds_of(args))
    except (EnumerationBudgetExceeded, SplitBoundExceeded) as exc:
        print(f"bound exceeded: {exc}", file=sys.stderr)
        return EXIT_BOUND
    if args.json:
        sys.stdout.write(rep.dump_json(rep.verdict_report(verdict, source)))
    else:
        print(rep.render_outline_table(spec.outline))
        print()
        for s in verdict.steps:
            line = f"{s.position:<18} {s.rule:<36} {s.status}"
            if s.reason:
                line += f"  -- {s.reason}"
            print(line)
        print()
        print("accepted" if verdict.accepted else "rejected")
    return EXIT_OK if verdict.accepted else EXIT_REJECTED


def cmd_validate(args) -> int:
    source = open(args.file, encoding="utf-8").read()
    program = parse_program(source)
    decls = load_decls(args, program.decls)
    pre = parse_condition_text(args.pre, decls)
    post = parse_condition_text(args.post, decls)
    systems = lower_program(program.body)
    try:
        result = validate_triple(pre, systems, post, decls, bounds_of(args))
    except (EnumerationBudgetExceeded, SplitBoundExceeded) as exc:
        print(f"bound exceeded: {exc}", file=sys.stderr)
        return EXIT_BOUND
    if args.json:
        sys.stdout.write(rep.dump_json(rep.triple_report(result, source)))
    else:
        print(result.status)
        if result.reason:
            print(result.reason)
        if result.counterexample is not None:
            trace, state = result.counterexample
            print("counterexample state:", rep.format_state(state))
            print(rep.format_trace(trace))
    if result.valid:
        return EXIT_OK
    if result.status == "counterexample":
        return EXIT_REJECTED
    return EXIT_INCONCLUSIVE


def cmd_trace(args) -> int:
    source = open(args.file, encoding="utf-8").read()
    program = parse_program(source)
    decls = load_decls(args, program.decls)
    systems = lower_program(program.body)
    bounds = bounds_of(args)
    prop = None
    if args.prop is not None:
        known = {(tr.action.text, tr.action.system)
                 for ls in systems for tr in ls.ts.transitions}
        prop = parse_temporal_text(args.prop, decls)
        from .assertions import _check_atoms_known
        _check_atoms_known(prop, known)

    if args.pre is not None:
        pre = parse_condition_text(args.pre, decls)
        try:
            initials = initial_states_for(pre, decls, systems, bounds)
        except EnumerationBudgetExceeded as exc:
            print(f"bound exceeded: {exc}", file=sys.stderr)
            return EXIT_BOUND
    else:
        initials = [make_initial_state(systems, decls, zero_stack(decls))]

    traces = []
    terminals = []
    deadlocks = []
    aborted = []
    truncated = False
    seen = set()
    for init in initials:
        result = explore(systems, init, bounds)
        truncated = truncated or result.truncated
        for t in result.traces:
            key = tuple((o.index, o.action, o.system, tuple(sorted(o.predecessors)))
                        for o in t.occurrences)
            if key not in seen:
                seen.add(key)
                traces.append(t)
        terminals.extend(result.terminals)
        deadlocks.extend(result.deadlocks)
        aborted.extend(result.aborted)

    prop_results = None
    if prop is not None:
        prop_results = [[k, eval_temporal(label(t), prop)]
                        for k, t in enumerate(traces)]

    if args.json:
        from .engine import ExploreResult
        result = ExploreResult(tuple(terminals), tuple(traces),
                               tuple(deadlocks), tuple(aborted), truncated)
        sys.stdout.write(rep.dump_json(
            rep.explore_report(result, source, prop_results)))
    else:
        for k, t in enumerate(traces):
            print(f"trace {k}:")
            print(rep.format_trace(t))
            if prop is not None:
                print(f"property: {prop_results[k][1]}")
            print()
        print(f"{len(traces)} trace(s), {len(terminals)} terminal(s), "
              f"{len(deadlocks)} deadlock(s), {len(aborted)} abort(s)"
              + (", truncated" if truncated else ""))
    return EXIT_INCONCLUSIVE if truncated else EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return cmd_check(args)
        if args.command == "validate":
            return cmd_validate(args)
        return cmd_trace(args)
    except SourceError as exc:
        print(f"{args.file}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
