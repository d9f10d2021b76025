"""Reports: trace dumps, structured JSON, and two-column outline tables.

Reports are a pure function of their inputs: no timestamps, no
environment data, keys sorted, so identical runs produce byte-identical
output.
"""

from __future__ import annotations

import hashlib
import json
from typing import Optional

from .checker import Verdict
from .engine import ExploreResult, TripleResult
from .state import ProgramState, TemporalMemory
from .syntax import (
    Outline, OutlineComp, OutlineLeaf, pp_condition, pp_stmt,
)

TOOL_VERSION = "0.2.0"


def input_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ------------------------------------------------------------------
# Trace dumps
# ------------------------------------------------------------------

def format_trace(t: TemporalMemory) -> str:
    """One line per occurrence plus the happens-before adjacency list."""
    lines = []
    for occ in t.occurrences:
        executors = ",".join(str(e) for e in sorted(occ.executors))
        preds = "{" + ",".join(str(p) for p in sorted(occ.predecessors)) + "}"
        action = occ.action if occ.system is None else f"{occ.action}@{occ.system}"
        lines.append(f"{occ.index} | {executors} | {action} | {preds}")
    lines.append("edges:")
    for occ in t.occurrences:
        for p in sorted(occ.predecessors):
            if p > 0:
                lines.append(f"{p} -> {occ.index}")
    return "\n".join(lines)


def trace_json(t: TemporalMemory) -> list[dict]:
    return [
        {
            "index": occ.index,
            "executors": sorted(occ.executors),
            "action": occ.action,
            "system": occ.system,
            "predecessors": sorted(p for p in occ.predecessors),
        }
        for occ in t.occurrences
    ]


def format_state(state: ProgramState) -> str:
    parts = [f"{k}={v}" for k, v in state.stack.items]
    parts += [f"[{loc}]={val}" for loc, val in state.heap.cells]
    parts += [f"{c.name}={list(c.buffer)}" for c in state.channels]
    if state.aborted:
        parts.append(f"aborted: {state.aborted}")
    return "{" + ", ".join(parts) + "}"


# ------------------------------------------------------------------
# Structured reports
# ------------------------------------------------------------------

def verdict_report(verdict: Verdict, source: str) -> dict:
    return {
        "tool_version": TOOL_VERSION,
        "input_hash": input_hash(source),
        "verdict": "accepted" if verdict.accepted else "rejected",
        "steps": [
            {
                "position": s.position,
                "rule": s.rule,
                "status": s.status,
                **({"reason": s.reason} if s.reason else {}),
            }
            for s in verdict.steps
        ],
    }


def triple_report(result: TripleResult, source: str) -> dict:
    report = {
        "tool_version": TOOL_VERSION,
        "input_hash": input_hash(source),
        "verdict": result.status,
    }
    if result.reason:
        report["reason"] = result.reason
    if result.counterexample is not None:
        trace, state = result.counterexample
        report["counterexample"] = {
            "trace": trace_json(trace),
            "state": format_state(state),
        }
    return report


def explore_report(result: ExploreResult, source: str,
                   prop_results: Optional[list[list]] = None) -> dict:
    report = {
        "tool_version": TOOL_VERSION,
        "input_hash": input_hash(source),
        "verdict": "truncated" if result.truncated else "complete",
        "traces": [trace_json(t) for t in result.traces],
        "terminals": [format_state(s) for s in result.terminals],
        "deadlocks": [format_state(s) for s in result.deadlocks],
        "aborted": [format_state(s) for s in result.aborted],
    }
    if prop_results is not None:
        report["properties"] = prop_results
    return report


def dump_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


# ------------------------------------------------------------------
# Outline tables
# ------------------------------------------------------------------

def _center(text: str, width: int) -> str:
    return text.center(width).rstrip()


def _pad_block(lines: list[str], width: int, height: int) -> list[str]:
    out = [line.ljust(width) for line in lines]
    while len(out) < height:
        out.append(" " * width)
    return out


def _render(o: Outline) -> list[str]:
    if isinstance(o, OutlineLeaf):
        lines = [pp_condition(c) for c in o.conds[0]]
        for stmt, conds in zip(o.stmts, o.conds[1:]):
            lines.append(pp_stmt(stmt))
            lines.extend(pp_condition(c) for c in conds)
        return lines
    left = _render(o.left)
    right = _render(o.right)
    height = max(len(left), len(right))
    lwidth = max((len(s) for s in left), default=0)
    rwidth = max((len(s) for s in right), default=0)
    left = _pad_block(left, lwidth, height)
    right = _pad_block(right, rwidth, height)
    op = "||" if o.kind == "par" else f"||@{o.level}"
    gutter = [f"  {op}  " if i == height // 2 else " " * (len(op) + 4)
              for i in range(height)]
    body = [a + g + b for a, g, b in zip(left, gutter, right)]
    width = max((len(s) for s in body), default=len(op))
    out = [_center(pp_condition(c), width) for c in o.pre]
    out.extend(line.rstrip() for line in body)
    out.extend(_center(pp_condition(c), width) for c in o.post)
    return out


def render_outline_table(o: Outline) -> str:
    """Plain-text rendering with one column per parallel branch."""
    return "\n".join(_render(o))
