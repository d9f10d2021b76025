"""Finite state-space enumeration for oracle and checker queries.

Everything the toolkit decides semantically is decided by enumerating a
small concrete universe: stacks over the declared value domain, heaps
over a location pool derived from the points-to structure of the
formulas involved, and channel buffers over their declared domains.

The enumerator degrades in two documented ways instead of exploding:

* pointer variables (those appearing as points-to addresses) fall back
  from full enumeration to a canonical injective location assignment;
* heap cell contents are only enumerated when some formula or statement
  actually inspects cell contents.

If the space is still too large the query raises, which callers surface
as a bound-exceeded error rather than a silent approximation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .assertions import EvalContext, eval_assertion
from .state import ChannelState, Heap, Stack
from .syntax import (
    AAnd, ABool, ABufEmpty, ABufFull, ABufPeek, AEmp, AImplies, ANot, AOr,
    APointsTo, ASep, AWand, Assertion, Condition, Declarations, Expr,
    HeapRead, HeapWrite, Lit, Receive, Send, Seq, Stmt, Var, When, Owned,
    If, While, expr_vars,
)


class EnumerationBudgetExceeded(Exception):
    def __init__(self, size: int, budget: int):
        super().__init__(
            f"state space of about {size} states exceeds the budget of {budget}")
        self.size = size
        self.budget = budget


DEFAULT_ENUM_BUDGET = 200_000


# ------------------------------------------------------------------
# Syntactic surveys of formulas
# ------------------------------------------------------------------

def assertion_atoms(a: Assertion) -> Iterator[Assertion]:
    yield a
    if isinstance(a, (AAnd, AOr, AImplies, ASep, AWand)):
        yield from assertion_atoms(a.left)
        yield from assertion_atoms(a.right)
    elif isinstance(a, ANot):
        yield from assertion_atoms(a.arg)


def assertion_vars(a: Assertion) -> set[str]:
    out: set[str] = set()
    for atom in assertion_atoms(a):
        if isinstance(atom, ABool):
            from .syntax import bool_vars
            out |= bool_vars(atom.expr)
        elif isinstance(atom, APointsTo):
            out |= expr_vars(atom.address)
            if atom.value is not None:
                out |= expr_vars(atom.value)
        elif isinstance(atom, ABufPeek):
            out |= expr_vars(atom.expr)
    return out


def pointer_variables(assertions: Iterable[Assertion]) -> list[str]:
    """Variables used as points-to addresses, in first-appearance order."""
    out: list[str] = []
    for a in assertions:
        for atom in assertion_atoms(a):
            if isinstance(atom, APointsTo) and isinstance(atom.address, Var):
                if atom.address.name not in out:
                    out.append(atom.address.name)
    return out


def literal_addresses(assertions: Iterable[Assertion]) -> list[int]:
    out: list[int] = []
    for a in assertions:
        for atom in assertion_atoms(a):
            if isinstance(atom, APointsTo) and isinstance(atom.address, Lit):
                if atom.address.value not in out:
                    out.append(atom.address.value)
    return out


def content_sensitive(assertions: Iterable[Assertion],
                      stmts: Iterable[Stmt] = ()) -> bool:
    """Do cell contents matter, or are all points-to atoms wildcards?"""
    for a in assertions:
        for atom in assertion_atoms(a):
            if isinstance(atom, APointsTo) and atom.value is not None:
                return True
    for stmt in stmts:
        if _touches_heap(stmt):
            return True
    return False


def _touches_heap(stmt: Stmt) -> bool:
    if isinstance(stmt, Seq):
        return _touches_heap(stmt.first) or _touches_heap(stmt.second)
    if isinstance(stmt, (Owned, When)):
        return _touches_heap(stmt.body)
    if isinstance(stmt, If):
        return _touches_heap(stmt.then_body) or _touches_heap(stmt.else_body)
    if isinstance(stmt, While):
        return _touches_heap(stmt.body)
    return isinstance(stmt, (HeapRead, HeapWrite))


def buffer_channels(assertions: Iterable[Assertion]) -> list[str]:
    out: list[str] = []
    for a in assertions:
        for atom in assertion_atoms(a):
            if isinstance(atom, (ABufFull, ABufEmpty, ABufPeek)):
                if atom.channel not in out:
                    out.append(atom.channel)
    return out


def condition_assertions(cond: Condition) -> list[Assertion]:
    return [p for _, p in cond.groups]


# ------------------------------------------------------------------
# Universes
# ------------------------------------------------------------------

@dataclass(frozen=True)
class Universe:
    """A finite description of the states a query quantifies over."""

    variables: tuple[str, ...]
    pointer_vars: tuple[str, ...]
    values: tuple[int, ...]
    locations: tuple[int, ...]
    enum_contents: bool
    channels: tuple = ()          # ChannelDecl for buffers to enumerate
    budget: int = DEFAULT_ENUM_BUDGET


def build_universe(decls: Declarations,
                   assertions: Iterable[Assertion],
                   stmts: Iterable[Stmt] = (),
                   variables: Optional[Iterable[str]] = None,
                   values: Optional[Iterable[int]] = None,
                   channels: Iterable[str] = (),
                   budget: int = DEFAULT_ENUM_BUDGET) -> Universe:
    assertions = list(assertions)
    stmts = list(stmts)
    if variables is None:
        used: set[str] = set()
        for a in assertions:
            used |= assertion_vars(a)
        from .lowering import program_variables
        for s in stmts:
            used |= program_variables(s)
        variables = [v for v in decls.variables if v in used]
    pointers = [v for v in pointer_variables(assertions) if v in variables]
    if values is None:
        values = _default_values(decls)
    pool = list(literal_addresses(assertions))
    base = max([0] + pool) + 1
    pool += list(range(base, base + len(pointers)))
    chan_decls = tuple(decls.channel(c) for c in channels)
    return Universe(
        variables=tuple(variables),
        pointer_vars=tuple(pointers),
        values=tuple(sorted(set(values))),
        locations=tuple(sorted(set(pool))),
        enum_contents=content_sensitive(assertions, stmts),
        channels=chan_decls,
        budget=budget,
    )


def _default_values(decls: Declarations) -> tuple[int, ...]:
    values: set[int] = set()
    for c in decls.channels:
        values |= set(range(c.domain[0], c.domain[1] + 1))
    return tuple(sorted(values)) if values else (0, 1)


# ------------------------------------------------------------------
# Enumeration
# ------------------------------------------------------------------

def _stack_choices(u: Universe) -> tuple[list[dict[str, int]], bool]:
    """All stacks; returns (stacks, pointers_canonicalized)."""
    plain = [v for v in u.variables if v not in u.pointer_vars]
    stack_values = tuple(sorted(set(u.values) | set(u.locations)))
    full_count = len(stack_values) ** len(u.variables)
    if full_count <= u.budget and full_count <= 4096:
        combos = itertools.product(stack_values, repeat=len(u.variables))
        return ([dict(zip(u.variables, combo)) for combo in combos], False)
    # canonical: pointer i gets the i-th pool location
    canon = {v: u.locations[i] for i, v in enumerate(u.pointer_vars)}
    stacks = []
    for combo in itertools.product(u.values, repeat=len(plain)):
        d = dict(zip(plain, combo))
        d.update(canon)
        stacks.append(d)
    return stacks, True


def _heap_choices(u: Universe) -> list[Heap]:
    heaps: list[Heap] = []
    content_values = u.values if u.enum_contents else ((u.values or (0,))[0],)
    for r in range(len(u.locations) + 1):
        for subset in itertools.combinations(u.locations, r):
            for cells in itertools.product(content_values, repeat=r):
                heaps.append(Heap(tuple(zip(subset, cells))))
    return heaps


def _buffer_choices(u: Universe) -> list[tuple[ChannelState, ...]]:
    per_channel: list[list[ChannelState]] = []
    for c in u.channels:
        dom = tuple(range(c.domain[0], c.domain[1] + 1))
        buf_values = tuple(sorted(set(dom) | set(u.locations)))
        options = []
        for n in range(c.capacity + 1):
            for content in itertools.product(buf_values, repeat=n):
                options.append(ChannelState(c.name, c.capacity, c.domain, content,
                                            tuple(0 for _ in content)))
        per_channel.append(options)
    return [tuple(combo) for combo in itertools.product(*per_channel)]


def enumerate_universe(u: Universe) -> Iterator[tuple[Stack, Heap, tuple[ChannelState, ...]]]:
    """Every state of the universe; raises if it exceeds the budget."""
    stacks, _ = _stack_choices(u)
    heaps = _heap_choices(u)
    buffers = _buffer_choices(u)
    size = len(stacks) * len(heaps) * max(len(buffers), 1)
    if size > u.budget:
        raise EnumerationBudgetExceeded(size, u.budget)
    for sd in stacks:
        stack = Stack.make(sd)
        for heap in heaps:
            if buffers:
                for chans in buffers:
                    yield stack, heap, chans
            else:
                yield stack, heap, ()


def satisfying_states(u: Universe, constraint: Assertion,
                      ctx: Optional[EvalContext] = None
                      ) -> Iterator[tuple[Stack, Heap, tuple[ChannelState, ...]]]:
    base_ctx = ctx or EvalContext()
    for stack, heap, chans in enumerate_universe(u):
        state_ctx = EvalContext(
            split_bound=base_ctx.split_bound,
            wand_locations=base_ctx.wand_locations or u.locations,
            wand_values=base_ctx.wand_values or u.values,
            channels={c.name: c for c in chans} if chans else base_ctx.channels,
        )
        if eval_assertion(stack, heap, constraint, state_ctx):
            yield stack, heap, chans
