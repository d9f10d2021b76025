"""Lowering parallel programs to guarded transition systems.

Each parallel leaf becomes one transition system; executors are numbered
left to right.  Statements compile to single-action transitions:

    skip / x := e / x := [e] / [e] := e'   one transition, guard true
    send / receive                         one transition; enabledness
                                           additionally requires the
                                           buffer to be non-full / non-empty
    if b then S1 else S2                   two guarded assume transitions
                                           branching out of the entry
    while b do S                           assume loop

Ownership annotations and when-guards attach to every transition they
wrap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .syntax import (
    Assign, BNot, BoolExpr, BTrue, HeapRead, HeapWrite, If, Owned, ParStruct,
    PLeaf, Receive, Send, Seq, Stmt, TAnd, TemporalFormula, When, While,
    action_text, bool_vars, expr_vars, pp_bool,
)


@dataclass(frozen=True)
class AssumeStmt:
    """Internal no-op action recording a taken branch guard."""

    cond: BoolExpr


@dataclass(frozen=True)
class Action:
    """An atomic effect: the statement it came from plus its owner."""

    stmt: object                   # atomic statement or AssumeStmt
    system: Optional[str]

    @property
    def text(self) -> str:
        if isinstance(self.stmt, AssumeStmt):
            return f"assume({pp_bool(self.stmt.cond)})"
        return action_text(self.stmt)

    def __str__(self) -> str:
        return self.text if self.system is None else f"{self.text}@{self.system}"


@dataclass(frozen=True)
class Transition:
    source: int
    guard: BoolExpr
    action: Action
    target: int
    when: Optional[TemporalFormula] = None  # foreign-environment guard


@dataclass(frozen=True)
class TransitionSystem:
    """One system: (locations, actions, transitions, initial data)."""

    locations: frozenset[int]
    transitions: tuple[Transition, ...]
    initial: int
    final: int
    initial_guard: BoolExpr

    @property
    def actions(self) -> frozenset[Action]:
        return frozenset(t.action for t in self.transitions)

    def outgoing(self, location: int) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if t.source == location)


@dataclass(frozen=True)
class LoweredSystem:
    executor: int
    system: Optional[str]  # common owner of the actions, if they agree
    ts: TransitionSystem


class _Builder:
    def __init__(self):
        self.next_location = 2  # 0 = entry, 1 = exit
        self.transitions: list[Transition] = []

    def fresh(self) -> int:
        loc = self.next_location
        self.next_location += 1
        return loc

    def emit(self, source: int, guard: BoolExpr, action: Action, target: int,
             when: Optional[TemporalFormula]):
        self.transitions.append(Transition(source, guard, action, target, when))

    def compile(self, stmt: Stmt, entry: int, exit_: int,
                system: Optional[str], when: Optional[TemporalFormula]):
        if isinstance(stmt, Seq):
            mid = self.fresh()
            self.compile(stmt.first, entry, mid, system, when)
            self.compile(stmt.second, mid, exit_, system, when)
        elif isinstance(stmt, Owned):
            self.compile(stmt.body, entry, exit_, stmt.system, when)
        elif isinstance(stmt, When):
            guard = stmt.guard if when is None else TAnd(when, stmt.guard)
            self.compile(stmt.body, entry, exit_, system, guard)
        elif isinstance(stmt, If):
            then_entry = self.fresh()
            else_entry = self.fresh()
            self.emit(entry, stmt.cond, Action(AssumeStmt(stmt.cond), system),
                      then_entry, when)
            neg = BNot(stmt.cond)
            self.emit(entry, neg, Action(AssumeStmt(neg), system), else_entry, when)
            self.compile(stmt.then_body, then_entry, exit_, system, None)
            self.compile(stmt.else_body, else_entry, exit_, system, None)
        elif isinstance(stmt, While):
            body_entry = self.fresh()
            self.emit(entry, stmt.cond, Action(AssumeStmt(stmt.cond), system),
                      body_entry, when)
            neg = BNot(stmt.cond)
            self.emit(entry, neg, Action(AssumeStmt(neg), system), exit_, when)
            self.compile(stmt.body, body_entry, entry, system, None)
        else:
            self.emit(entry, BTrue(), Action(stmt, system), exit_, when)


def lower_leaf(stmt: Stmt) -> TransitionSystem:
    b = _Builder()
    b.compile(stmt, 0, 1, None, None)
    locations = frozenset(range(b.next_location))
    return TransitionSystem(locations, tuple(b.transitions), 0, 1, BTrue())


def lower(p: ParStruct) -> tuple[LoweredSystem, ...]:
    """One transition system per parallel leaf, numbered left to right."""
    systems: list[LoweredSystem] = []

    def walk(node: ParStruct):
        if isinstance(node, PLeaf):
            ts = lower_leaf(node.stmt)
            owners = {t.action.system for t in ts.transitions}
            system = owners.pop() if len(owners) == 1 else None
            systems.append(LoweredSystem(len(systems), system, ts))
        else:
            walk(node.left)
            walk(node.right)

    walk(p)
    return tuple(systems)


def leaf_executors(p: ParStruct) -> dict[int, ParStruct]:
    """Executor id of each leaf, in lowering order."""
    out: dict[int, ParStruct] = {}

    def walk(node: ParStruct):
        if isinstance(node, PLeaf):
            out[len(out)] = node
        else:
            walk(node.left)
            walk(node.right)

    walk(p)
    return out


def written_variables(stmt: Stmt) -> set[str]:
    if isinstance(stmt, Seq):
        return written_variables(stmt.first) | written_variables(stmt.second)
    if isinstance(stmt, (Owned, When)):
        return written_variables(stmt.body)
    if isinstance(stmt, If):
        return written_variables(stmt.then_body) | written_variables(stmt.else_body)
    if isinstance(stmt, While):
        return written_variables(stmt.body)
    if isinstance(stmt, (Assign, HeapRead)):
        return {stmt.target}
    if isinstance(stmt, Receive):
        return {stmt.target}
    return set()


def read_variables(stmt: Stmt) -> set[str]:
    if isinstance(stmt, Seq):
        return read_variables(stmt.first) | read_variables(stmt.second)
    if isinstance(stmt, (Owned, When)):
        return read_variables(stmt.body)
    if isinstance(stmt, If):
        return (bool_vars(stmt.cond) | read_variables(stmt.then_body)
                | read_variables(stmt.else_body))
    if isinstance(stmt, While):
        return bool_vars(stmt.cond) | read_variables(stmt.body)
    if isinstance(stmt, Assign):
        return expr_vars(stmt.expr)
    if isinstance(stmt, HeapRead):
        return expr_vars(stmt.address)
    if isinstance(stmt, HeapWrite):
        return expr_vars(stmt.address) | expr_vars(stmt.expr)
    if isinstance(stmt, Send):
        return expr_vars(stmt.expr)
    return set()


def program_variables(stmt: Stmt) -> set[str]:
    return written_variables(stmt) | read_variables(stmt)


def check_variable_partition(p: ParStruct) -> None:
    """Parallel branches may not share stack variables.

    Raises ValueError naming the first shared variable found.
    """
    def walk(node: ParStruct) -> set[str]:
        if isinstance(node, PLeaf):
            return program_variables(node.stmt)
        left = walk(node.left)
        right = walk(node.right)
        shared = left & right
        if shared:
            name = sorted(shared)[0]
            raise ValueError(
                f"variable {name!r} is used by both sides of a parallel composition")
        return left | right

    walk(p)
