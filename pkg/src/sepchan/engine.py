"""Exhaustive interleaving execution of lowered systems.

step() enumerates the enabled (executor, transition) pairs of a state
in canonical order; explore() closes it into the full set of maximal
runs within bounds; validate_triple() turns that into a partial-
correctness oracle: a triple is valid when every terminal state of
every pre-state satisfies the post and no run aborts.

A send is enabled only while the buffer has room, a receive only while
it is non-empty; both are single atomic steps.  Heap access to an
unallocated location does not raise: it produces an absorbing abort
state, which refutes any triple over the program.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .assertions import EvalContext, eval_bool, eval_condition, eval_expr, eval_temporal_final
from .domains import (
    EnumerationBudgetExceeded, build_universe, condition_assertions,
    satisfying_states,
)
from .lowering import AssumeStmt, LoweredSystem, lower
from .state import (
    ActionOccurrence, ChannelState, EMPTY_MEMORY, Heap, ProgramState, Stack,
    TemporalMemory, happens_before, initial_channels, label, project,
)
from .syntax import (
    Assign, Condition, Declarations, HeapRead, HeapWrite, ParStruct, Receive,
    Send, Skip, TOccurred, TemporalFormula, positive_atoms,
)


@dataclass(frozen=True)
class Bounds:
    max_steps: int = 64
    max_states: int = 100_000
    enum_budget: int = 200_000
    split_bound: int = 16


DEFAULT_BOUNDS = Bounds()


# ------------------------------------------------------------------
# Single step
# ------------------------------------------------------------------

def _previous_occurrence(t: TemporalMemory, executor: int) -> int:
    for occ in reversed(t.occurrences):
        if executor in occ.executors:
            return occ.index
    return 0


def step(state: ProgramState,
         systems: tuple[LoweredSystem, ...]) -> list[tuple[ProgramState, ActionOccurrence]]:
    """All successors of a state, in executor-then-transition order."""
    if state.aborted is not None:
        return []
    successors: list[tuple[ProgramState, ActionOccurrence]] = []
    index = len(state.temporal) + 1
    for ls in systems:
        location = state.locations[ls.executor]
        for tr in ls.ts.outgoing(location):
            if not eval_bool(tr.guard, state.stack):
                continue
            witnesses: frozenset[int] = frozenset()
            if tr.when is not None:
                _, foreign = project(state.temporal, ls.executor)
                if not eval_temporal_final(label(foreign), tr.when):
                    continue
                witnesses = _guard_witnesses(foreign, tr.when)
            result = _apply(state, ls.executor, tr, index, witnesses)
            if result is not None:
                successors.append(result)
    return successors


def _guard_witnesses(foreign: TemporalMemory, guard: TemporalFormula) -> frozenset[int]:
    """Occurrences that made a foreign-environment guard true.

    Waiting on the guard is genuine causality, so the witnesses join the
    predecessor set of the guarded occurrence: the first match of each
    positive occurred-atom and the later element of the first ordered
    pair witnessing each positive before-atom.
    """
    witnesses: set[int] = set()
    root = foreign.root
    for atom in positive_atoms(guard):
        if isinstance(atom, TOccurred):
            for occ in foreign.occurrences:
                if occ.matches(atom.label):
                    witnesses.add(occ.index)
                    break
        else:
            found = False
            for second in foreign.occurrences:
                if found:
                    break
                if not second.matches(atom.second):
                    continue
                for first in foreign.occurrences:
                    if first.matches(atom.first) and happens_before(
                            root, first.index, second.index):
                        witnesses.add(second.index)
                        found = True
                        break
    return frozenset(witnesses)


def _apply(state: ProgramState, executor: int, tr, index: int,
           witnesses: frozenset[int] = frozenset()
           ) -> Optional[tuple[ProgramState, ActionOccurrence]]:
    stmt = tr.action.stmt
    preds = {p for p in (_previous_occurrence(state.temporal, executor),) if p}
    preds |= witnesses
    locations = tuple(tr.target if i == executor else loc
                      for i, loc in enumerate(state.locations))
    stack, heap, channels = state.stack, state.heap, state.channels
    aborted = None
    value = None

    if isinstance(stmt, (Skip, AssumeStmt)):
        pass
    elif isinstance(stmt, Assign):
        stack = stack.set(stmt.target, eval_expr(stmt.expr, stack))
    elif isinstance(stmt, HeapRead):
        address = eval_expr(stmt.address, stack)
        if address in heap:
            stack = stack.set(stmt.target, heap.get(address))
        else:
            aborted = f"heap fault: executor {executor} read unallocated location {address}"
    elif isinstance(stmt, HeapWrite):
        address = eval_expr(stmt.address, stack)
        if address in heap:
            heap = heap.write(address, eval_expr(stmt.expr, stack))
        else:
            aborted = f"heap fault: executor {executor} wrote unallocated location {address}"
    elif isinstance(stmt, Send):
        chan = state.channel(stmt.channel)
        if chan.full:
            return None
        value = eval_expr(stmt.expr, stack)
        channels = state.with_channel(chan.enqueue(value, index))
    elif isinstance(stmt, Receive):
        chan = state.channel(stmt.channel)
        if chan.empty:
            return None
        value, sender, chan2 = chan.dequeue()
        stack = stack.set(stmt.target, value)
        channels = state.with_channel(chan2)
        if sender:
            preds.add(sender)
    else:
        raise TypeError(f"cannot execute {stmt!r}")

    occ = ActionOccurrence(
        index=index,
        executors=frozenset({executor}),
        action=tr.action.text,
        system=tr.action.system,
        predecessors=frozenset(preds) if preds else frozenset({0}),
        value=value,
    )
    successor = ProgramState(
        locations=locations,
        stack=stack,
        heap=heap,
        channels=channels,
        temporal=state.temporal.append(occ),
        aborted=aborted,
    )
    return successor, occ


# ------------------------------------------------------------------
# Exhaustive exploration
# ------------------------------------------------------------------

@dataclass(frozen=True)
class ExploreResult:
    terminals: tuple[ProgramState, ...]
    traces: tuple[TemporalMemory, ...]
    deadlocks: tuple[ProgramState, ...]
    aborted: tuple[ProgramState, ...]
    truncated: bool


def _trace_key(t: TemporalMemory):
    return (len(t.occurrences),
            tuple((o.action, o.system or "", tuple(sorted(o.executors)),
                   tuple(sorted(o.predecessors)), -1 if o.value is None else o.value)
                  for o in t.occurrences))


def _state_key(s: ProgramState):
    return (s.locations, s.stack.items, s.heap.cells,
            tuple((c.name, c.buffer) for c in s.channels), _trace_key(s.temporal))


def _dedup(items, key):
    seen = set()
    out = []
    for item in sorted(items, key=key):
        k = key(item)
        if k not in seen:
            seen.add(k)
            out.append(item)
    return out


def explore(systems: tuple[LoweredSystem, ...], init: ProgramState,
            bounds: Bounds = DEFAULT_BOUNDS) -> ExploreResult:
    """Depth-first closure of step() from one initial state.

    Every maximal run within the bounds contributes its temporal memory
    to traces; runs cut short by the step bound, a revisited state on
    the same path, or the global state budget set the truncated flag.
    """
    terminals: list[ProgramState] = []
    traces: list[TemporalMemory] = []
    deadlocks: list[ProgramState] = []
    aborted: list[ProgramState] = []
    seen: set = set()
    truncated = False
    finals = {ls.executor: ls.ts.final for ls in systems}

    def record_leaf(state: ProgramState):
        traces.append(state.temporal)
        if state.aborted is not None:
            aborted.append(state)
        elif all(state.locations[e] == f for e, f in finals.items()):
            terminals.append(state)
        else:
            deadlocks.append(state)

    def rec(state: ProgramState, on_path: frozenset):
        nonlocal truncated
        key = state.dedup_key()
        if key not in seen:
            if len(seen) >= bounds.max_states:
                truncated = True
                traces.append(state.temporal)
                return
            seen.add(key)
        if state.aborted is not None:
            record_leaf(state)
            return
        successors = step(state, systems)
        if not successors:
            record_leaf(state)
            return
        if len(state.temporal) >= bounds.max_steps:
            truncated = True
            traces.append(state.temporal)
            return
        advanced = False
        for succ, _ in successors:
            k = succ.dedup_key()
            if k in on_path:
                truncated = True
                continue
            advanced = True
            rec(succ, on_path | {k})
        if not advanced:
            traces.append(state.temporal)

    rec(init, frozenset({init.dedup_key()}))
    return ExploreResult(
        terminals=tuple(_dedup(terminals, _state_key)),
        traces=tuple(_dedup(traces, _trace_key)),
        deadlocks=tuple(_dedup(deadlocks, _state_key)),
        aborted=tuple(_dedup(aborted, _state_key)),
        truncated=truncated,
    )


def make_initial_state(systems: tuple[LoweredSystem, ...], decls: Declarations,
                       stack: Stack, heap: Heap = Heap(()),
                       channels: Optional[tuple[ChannelState, ...]] = None) -> ProgramState:
    return ProgramState(
        locations=tuple(ls.ts.initial for ls in systems),
        stack=stack,
        heap=heap,
        channels=channels if channels is not None else initial_channels(decls),
        temporal=EMPTY_MEMORY,
    )


def zero_stack(decls: Declarations) -> Stack:
    return Stack.make({v: 0 for v in decls.variables})


# ------------------------------------------------------------------
# Triple validation
# ------------------------------------------------------------------

@dataclass(frozen=True)
class TripleResult:
    status: str  # "valid" | "valid-vacuous" | "counterexample" | "inconclusive"
    counterexample: Optional[tuple[TemporalMemory, ProgramState]] = None
    reason: Optional[str] = None

    @property
    def valid(self) -> bool:
        return self.status in ("valid", "valid-vacuous")


def initial_states_for(pre: Condition, decls: Declarations,
                       systems: tuple[LoweredSystem, ...],
                       bounds: Bounds = DEFAULT_BOUNDS) -> list[ProgramState]:
    """All initial states over the declared domains satisfying the pre.

    Stacks are total over the declared variables; buffers start empty;
    the heap universe comes from the points-to structure of the pre.
    """
    universe = build_universe(
        decls,
        condition_assertions(pre),
        stmts=[tr.action.stmt for ls in systems for tr in ls.ts.transitions
               if not isinstance(tr.action.stmt, AssumeStmt)],
        variables=decls.variables,
        budget=bounds.enum_budget,
    )
    states = []
    for stack, heap, _ in satisfying_states(universe, pre.assertion):
        state = make_initial_state(systems, decls, stack, heap)
        if eval_condition(state, range(len(systems)), pre,
                          EvalContext(split_bound=bounds.split_bound)):
            states.append(state)
    return states


def validate_triple(pre: Condition, systems: tuple[LoweredSystem, ...],
                    post: Condition, decls: Declarations,
                    bounds: Bounds = DEFAULT_BOUNDS) -> TripleResult:
    """Partial-correctness check of {pre} program {post} by exploration."""
    try:
        initials = initial_states_for(pre, decls, systems, bounds)
    except EnumerationBudgetExceeded as exc:
        return TripleResult("inconclusive", reason=str(exc))
    if not initials:
        return TripleResult("valid-vacuous",
                            reason="no state over the declared domains satisfies the pre-condition")
    executors = tuple(range(len(systems)))
    ctx = EvalContext(split_bound=bounds.split_bound)
    failures: list[tuple[TemporalMemory, ProgramState]] = []
    truncated = False
    for init in initials:
        result = explore(systems, init, bounds)
        truncated = truncated or result.truncated
        for bad in result.aborted:
            failures.append((bad.temporal, bad))
        for terminal in result.terminals:
            if not eval_condition(terminal, executors, post, ctx):
                failures.append((terminal.temporal, terminal))
    if failures:
        failures.sort(key=lambda pair: (_trace_key(pair[0]), _state_key(pair[1])))
        return TripleResult("counterexample", counterexample=failures[0])
    if truncated:
        return TripleResult("inconclusive",
                            reason="exploration truncated by bounds; divergence is possible")
    return TripleResult("valid")


def lower_program(body: ParStruct) -> tuple[LoweredSystem, ...]:
    return lower(body)
