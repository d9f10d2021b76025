"""Deciding conditions on concrete states.

Three evaluators live here:

* eval_assertion - separation-logic assertions on (stack, heap), with
  exhaustive heap splitting for ``*`` and a bounded quantifier for ``-*``.
* eval_temporal - finite-trace temporal formulas on labeled traces.
  Next is false at the last position; until needs its witness inside the
  trace; occurred-atoms mean "has occurred at or before here";
  before-atoms consult happens-before on the underlying memory.
* eval_condition - the full condition form: the foreign formula on the
  foreign projection of the temporal memory, the native formulas on the
  native projection, the spatial part on the heap.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Union

from .state import (
    ChannelState, DEFAULT_SPLIT_BOUND, Heap, LabeledTrace, ProgramState,
    Stack, enumerate_splits, happens_before, label, project,
)
from .syntax import (
    AAnd, ABool, ABufEmpty, ABufFull, ABufPeek, AEmp, AImplies, ANot, AOr,
    APointsTo, ASep, AWand, Assertion, BAnd, BFalse, BNot, BTrue,
    BoolExpr, Cmp, Condition, Expr, Lit, TAnd, TBefore, TNext, TNot,
    TOccurred, TTop, TUntil, TemporalFormula, Var, formula_labels,
)


class WandUnboundedError(Exception):
    """A separating implication was evaluated with no declared footprint."""


class NonPropositionalError(Exception):
    """The inductive trace check got a formula with temporal operators."""


@dataclass(frozen=True)
class EvalContext:
    """Optional surroundings for assertion evaluation.

    wand_locations/wand_values bound the universal quantifier of ``-*``;
    channels enable the buffer predicates used by resource invariants.
    """

    split_bound: int = DEFAULT_SPLIT_BOUND
    wand_locations: Optional[tuple[int, ...]] = None
    wand_values: Optional[tuple[int, ...]] = None
    channels: Optional[dict[str, ChannelState]] = None


DEFAULT_CONTEXT = EvalContext()


# ------------------------------------------------------------------
# Expressions
# ------------------------------------------------------------------

def eval_expr(e: Expr, s: Stack) -> int:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        return s.get(e.name)
    left = eval_expr(e.left, s)
    right = eval_expr(e.right, s)
    return left + right if e.op == "+" else left - right


_CMP = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def eval_bool(b: BoolExpr, s: Stack) -> bool:
    if isinstance(b, BTrue):
        return True
    if isinstance(b, BFalse):
        return False
    if isinstance(b, Cmp):
        return _CMP[b.op](eval_expr(b.left, s), eval_expr(b.right, s))
    if isinstance(b, BAnd):
        return eval_bool(b.left, s) and eval_bool(b.right, s)
    if isinstance(b, BNot):
        return not eval_bool(b.arg, s)
    raise TypeError(f"unknown boolean expression {b!r}")


# ------------------------------------------------------------------
# Assertions
# ------------------------------------------------------------------

def eval_assertion(s: Stack, h: Heap, a: Assertion,
                   ctx: EvalContext = DEFAULT_CONTEXT) -> bool:
    if isinstance(a, AEmp):
        return len(h) == 0
    if isinstance(a, ABool):
        return eval_bool(a.expr, s)
    if isinstance(a, APointsTo):
        address = eval_expr(a.address, s)
        if h.domain != (address,):
            return False
        if a.value is None:
            return True
        return h.get(address) == eval_expr(a.value, s)
    if isinstance(a, ABufFull):
        return _channel(ctx, a.channel).full
    if isinstance(a, ABufEmpty):
        return _channel(ctx, a.channel).empty
    if isinstance(a, ABufPeek):
        chan = _channel(ctx, a.channel)
        return (not chan.empty) and chan.buffer[0] == eval_expr(a.expr, s)
    if isinstance(a, AAnd):
        return eval_assertion(s, h, a.left, ctx) and eval_assertion(s, h, a.right, ctx)
    if isinstance(a, AOr):
        return eval_assertion(s, h, a.left, ctx) or eval_assertion(s, h, a.right, ctx)
    if isinstance(a, ANot):
        return not eval_assertion(s, h, a.arg, ctx)
    if isinstance(a, AImplies):
        return (not eval_assertion(s, h, a.left, ctx)) or eval_assertion(s, h, a.right, ctx)
    if isinstance(a, ASep):
        return _eval_sep(s, h, a, ctx)
    if isinstance(a, AWand):
        return _eval_wand(s, h, a, ctx)
    raise TypeError(f"unknown assertion {a!r}")


def _footprint(a: Assertion, s: Stack):
    """Syntactic footprint: ("det", addrs) when the assertion is satisfied
    exactly by heaps with that domain, ("free", None) when it ignores the
    heap, ("unknown", None) otherwise."""
    if isinstance(a, APointsTo):
        return "det", frozenset({eval_expr(a.address, s)})
    if isinstance(a, AEmp):
        return "det", frozenset()
    if isinstance(a, (ABool, ABufFull, ABufEmpty, ABufPeek)):
        return "free", None
    if isinstance(a, AAnd):
        left = _footprint(a.left, s)
        right = _footprint(a.right, s)
        if left[0] == "free":
            return right
        if right[0] == "free":
            return left
        if left[0] == "det" and right[0] == "det" and left[1] == right[1]:
            return left
        return "unknown", None
    if isinstance(a, ASep):
        left = _footprint(a.left, s)
        right = _footprint(a.right, s)
        if left[0] == "det" and right[0] == "det" and not (left[1] & right[1]):
            return "det", left[1] | right[1]
        if left[0] == "free" and right[0] == "free":
            return "free", None
        return "unknown", None
    return "unknown", None


def _heap_restrict(h: Heap, addrs: frozenset[int]) -> tuple[Heap, Heap]:
    inside = tuple(c for c in h.cells if c[0] in addrs)
    outside = tuple(c for c in h.cells if c[0] not in addrs)
    return Heap(inside), Heap(outside)


def _eval_sep(s: Stack, h: Heap, a: ASep, ctx: EvalContext) -> bool:
    # A side with a determined footprint fixes the split, which keeps the
    # common *-of-points-to shapes linear instead of exponential.
    kind, addrs = _footprint(a.left, s)
    if kind == "det":
        if not addrs <= set(h.domain):
            return False
        h1, h2 = _heap_restrict(h, addrs)
        return eval_assertion(s, h1, a.left, ctx) and eval_assertion(s, h2, a.right, ctx)
    kind, addrs = _footprint(a.right, s)
    if kind == "det":
        if not addrs <= set(h.domain):
            return False
        h2, h1 = _heap_restrict(h, addrs)
        return eval_assertion(s, h1, a.left, ctx) and eval_assertion(s, h2, a.right, ctx)
    if _footprint(a.left, s)[0] == "free" and _footprint(a.right, s)[0] == "free":
        return eval_assertion(s, h, a.left, ctx) and eval_assertion(s, h, a.right, ctx)
    for h1, h2 in enumerate_splits(h, ctx.split_bound):
        if eval_assertion(s, h1, a.left, ctx) and eval_assertion(s, h2, a.right, ctx):
            return True
    return False


def _channel(ctx: EvalContext, name: str) -> ChannelState:
    if ctx.channels is None or name not in ctx.channels:
        raise ValueError(f"buffer predicate needs a channel state for {name!r}")
    return ctx.channels[name]


def _eval_wand(s: Stack, h: Heap, a: AWand, ctx: EvalContext) -> bool:
    if ctx.wand_locations is None or ctx.wand_values is None:
        raise WandUnboundedError(
            "separating implication needs a declared footprint "
            "(wand_locations and wand_values in the evaluation context)")
    own = set(h.domain)
    free = [loc for loc in ctx.wand_locations if loc not in own]
    for r in range(len(free) + 1):
        for subset in itertools.combinations(free, r):
            for contents in itertools.product(ctx.wand_values, repeat=r):
                h1 = Heap(tuple(zip(subset, contents)))
                if not eval_assertion(s, h1, a.left, ctx):
                    continue
                combined = Heap(tuple(sorted(h.cells + h1.cells)))
                if not eval_assertion(s, combined, a.right, ctx):
                    return False
    return True


# ------------------------------------------------------------------
# Temporal formulas over finite traces
# ------------------------------------------------------------------

def eval_temporal(trace: LabeledTrace, f: TemporalFormula, position: int = 0,
                  known_actions: Optional[set] = None) -> bool:
    """Finite-trace satisfaction at a position (default: the start).

    Evaluating the empty trace treats every atom as false and gives the
    usual degenerate values for the modalities.
    """
    if known_actions is not None:
        _check_atoms_known(f, known_actions)
    return _eval_t(trace, f, position)


def eval_temporal_final(trace: LabeledTrace, f: TemporalFormula) -> bool:
    """Whole-trace reading used by pre/post conditions: evaluate at the
    last position (or on the empty trace when there is none)."""
    position = max(len(trace) - 1, 0)
    return _eval_t(trace, f, position)


def prop_matches(label, prop) -> bool:
    if prop[0] != "occurred" or prop[1] != label.text:
        return False
    return label.system is None or label.system == prop[2]


def _eval_t(trace: LabeledTrace, f: TemporalFormula, i: int) -> bool:
    n = len(trace)
    if isinstance(f, TTop):
        return True
    if isinstance(f, TOccurred):
        return any(prop_matches(f.label, p)
                   for j in range(min(i + 1, n)) for p in trace.labels[j])
    if isinstance(f, TBefore):
        # Happens-before on the underlying memory, restricted to what has
        # occurred by the current position of this trace.
        root = trace.memory.root
        if n == 0:
            return False
        limit = trace.memory.occurrences[min(i, n - 1)].index
        firsts = [o for o in root.occurrences
                  if o.matches(f.first) and o.index <= limit]
        seconds = [o for o in root.occurrences
                   if o.matches(f.second) and o.index <= limit]
        return any(happens_before(root, a.index, b.index)
                   for a in firsts for b in seconds)
    if isinstance(f, TNot):
        return not _eval_t(trace, f.arg, i)
    if isinstance(f, TAnd):
        return _eval_t(trace, f.left, i) and _eval_t(trace, f.right, i)
    if isinstance(f, TNext):
        return i + 1 < n and _eval_t(trace, f.arg, i + 1)
    if isinstance(f, TUntil):
        for k in range(i, n):
            if _eval_t(trace, f.right, k):
                return all(_eval_t(trace, f.left, j) for j in range(i, k))
        return False
    raise TypeError(f"unknown temporal formula {f!r}")


def _check_atoms_known(f: TemporalFormula, known: set) -> None:
    for lab in formula_labels(f):
        if not any(_label_matches_action(lab, act) for act in known):
            raise ValueError(f"atom {lab} references no action of the program")


def _label_matches_action(lab, action) -> bool:
    text, system = action
    if lab.text != text:
        return False
    return lab.system is None or lab.system == system


# ------------------------------------------------------------------
# Inductive trace satisfaction for propositional formulas
# ------------------------------------------------------------------

def _prop_eval(f: TemporalFormula, props: frozenset) -> bool:
    if isinstance(f, TTop):
        return True
    if isinstance(f, TOccurred):
        return any(prop_matches(f.label, p) for p in props)
    if isinstance(f, TNot):
        return not _prop_eval(f.arg, props)
    if isinstance(f, TAnd):
        return _prop_eval(f.left, props) and _prop_eval(f.right, props)
    raise NonPropositionalError(
        f"{type(f).__name__} is not propositional over the trace alphabet")


def check_trace_inductive(trace: LabeledTrace, phi: TemporalFormula) -> bool:
    """Establish whole-trace satisfaction by induction over happens-before.

    True iff at every occurrence, the formula holding on all of the
    occurrence's predecessors forces it to hold there too.  On the
    acyclic graphs produced by runs this coincides with checking every
    position directly.
    """
    mem = trace.memory
    position = {occ.index: k for k, occ in enumerate(mem.occurrences)}
    for occ in mem.occurrences:
        preds = [p for p in mem.predecessor_closure(occ.index) if p in position]
        if all(_prop_eval(phi, trace.labels[position[p]]) for p in preds):
            if not _prop_eval(phi, trace.labels[position[occ.index]]):
                return False
    return True


def check_trace_pointwise(trace: LabeledTrace, phi: TemporalFormula) -> bool:
    """Direct reading: every position satisfies the formula."""
    return all(_prop_eval(phi, props) for props in trace.labels)


# ------------------------------------------------------------------
# Conditions on program states
# ------------------------------------------------------------------

def eval_condition(state: ProgramState, executors: Union[int, Iterable[int]],
                   cond: Condition, ctx: EvalContext = DEFAULT_CONTEXT) -> bool:
    """Does the state satisfy the condition from this executor's viewpoint?

    The temporal memory splits into the native part (occurrences by the
    given executors) and the foreign rest; the foreign formula is read on
    the foreign trace, the native formulas on the native trace, both in
    the whole-trace (final position) sense.  The spatial part evaluates
    on the heap with the native groups separated by ``*``.
    """
    native_mem, foreign_mem = project(state.temporal, executors)
    if not eval_temporal_final(label(foreign_mem), cond.foreign):
        return False
    native_trace = label(native_mem)
    for g, _ in cond.groups:
        if not eval_temporal_final(native_trace, g):
            return False
    if ctx.channels is None:
        ctx = replace(ctx, channels=state.channels_dict())
    return eval_assertion(state.stack, state.heap, cond.assertion, ctx)


def is_pure(value: Union[Assertion, Condition]) -> bool:
    """Crude but safe: a condition is pure when it carries no temporal
    content at all, so its truth cannot depend on the temporal memory."""
    if isinstance(value, Condition):
        if value.foreign != TTop():
            return False
        return all(g == TTop() for g, _ in value.groups)
    return True  # assertions never inspect the temporal memory
