"""Program states: stack, heap, channels, and the temporal memory.

A state is the triple of data memory (stack + heap), channel buffers and
the temporal memory: the sequence of actions that have occurred so far,
each recording who executed it and which earlier occurrences it depends
on.  The induced happens-before order is the strict partial order used
by before-atoms in conditions.

Everything here is immutable; updates return fresh values.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

from .syntax import ActionLabel


class HeapOverlapError(Exception):
    def __init__(self, location: int):
        super().__init__(f"heaps overlap at location {location}")
        self.location = location


class SplitBoundExceeded(Exception):
    def __init__(self, size: int, bound: int):
        super().__init__(f"heap of {size} cells exceeds the split bound {bound}")
        self.size = size
        self.bound = bound


DEFAULT_SPLIT_BOUND = 16


# ------------------------------------------------------------------
# Stack and heap
# ------------------------------------------------------------------

@dataclass(frozen=True)
class Stack:
    """Total valuation of the declared variables."""

    items: tuple[tuple[str, int], ...]

    @staticmethod
    def make(values: dict[str, int]) -> "Stack":
        return Stack(tuple(sorted(values.items())))

    def get(self, name: str) -> int:
        for k, v in self.items:
            if k == name:
                return v
        raise KeyError(name)

    def set(self, name: str, value: int) -> "Stack":
        return Stack(tuple((k, value if k == name else v) for k, v in self.items))

    def as_dict(self) -> dict[str, int]:
        return dict(self.items)

    def __contains__(self, name: str) -> bool:
        return any(k == name for k, _ in self.items)


@dataclass(frozen=True)
class Heap:
    """Finite partial map from positive locations to integer values."""

    cells: tuple[tuple[int, int], ...]

    @staticmethod
    def make(values: dict[int, int]) -> "Heap":
        for loc in values:
            if loc < 1:
                raise ValueError(f"heap locations are positive, got {loc}")
        return Heap(tuple(sorted(values.items())))

    @property
    def domain(self) -> tuple[int, ...]:
        return tuple(loc for loc, _ in self.cells)

    def get(self, location: int) -> Optional[int]:
        for loc, v in self.cells:
            if loc == location:
                return v
        return None

    def write(self, location: int, value: int) -> "Heap":
        return Heap(tuple((loc, value if loc == location else v)
                          for loc, v in self.cells))

    def __len__(self) -> int:
        return len(self.cells)

    def __contains__(self, location: int) -> bool:
        return any(loc == location for loc, _ in self.cells)


EMPTY_HEAP = Heap(())


def heap_disjoint_union(h1: Heap, h2: Heap) -> Heap:
    """The union of two heaps; defined only when their domains are disjoint."""
    d1 = set(h1.domain)
    for loc in h2.domain:
        if loc in d1:
            raise HeapOverlapError(loc)
    return Heap(tuple(sorted(h1.cells + h2.cells)))


def enumerate_splits(h: Heap, bound: int = DEFAULT_SPLIT_BOUND) -> list[tuple[Heap, Heap]]:
    """All ordered pairs (h1, h2) with h = h1 (disjoint-union) h2.

    There are exactly 2^|dom(h)| of them; refuses heaps above the bound
    rather than silently approximating.
    """
    cells = h.cells
    if len(cells) > bound:
        raise SplitBoundExceeded(len(cells), bound)
    pairs = []
    for mask in range(1 << len(cells)):
        left = tuple(c for i, c in enumerate(cells) if mask >> i & 1)
        right = tuple(c for i, c in enumerate(cells) if not mask >> i & 1)
        pairs.append((Heap(left), Heap(right)))
    return pairs


# ------------------------------------------------------------------
# Channels
# ------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelState:
    """A bounded FIFO buffer; pending send indices mirror the values."""

    name: str
    capacity: int
    domain: tuple[int, int]
    buffer: tuple[int, ...] = ()
    pending: tuple[int, ...] = ()  # occurrence index of each buffered send

    @property
    def full(self) -> bool:
        return len(self.buffer) >= self.capacity

    @property
    def empty(self) -> bool:
        return len(self.buffer) == 0

    def enqueue(self, value: int, occurrence: int = 0) -> "ChannelState":
        assert not self.full
        return ChannelState(self.name, self.capacity, self.domain,
                            self.buffer + (value,), self.pending + (occurrence,))

    def dequeue(self) -> tuple[int, int, "ChannelState"]:
        """Returns (value, matching send occurrence, new state)."""
        assert not self.empty
        value, sender = self.buffer[0], self.pending[0]
        return value, sender, ChannelState(self.name, self.capacity, self.domain,
                                           self.buffer[1:], self.pending[1:])


# ------------------------------------------------------------------
# Action occurrences and temporal memory
# ------------------------------------------------------------------

@dataclass(frozen=True)
class ActionOccurrence:
    """One executed action: global index, executors, syntax and causes.

    predecessors holds the immediately preceding occurrence of the same
    executor and, for a receive, the matching send; {0} marks an
    occurrence with no recorded cause (0 is a start sentinel, not an
    occurrence index).
    """

    index: int
    executors: frozenset[int]
    action: str
    system: Optional[str]
    predecessors: frozenset[int]
    value: Optional[int] = None  # transferred value, for communications

    def matches(self, label: ActionLabel) -> bool:
        if label.text != self.action:
            return False
        return label.system is None or label.system == self.system

    @property
    def label(self) -> ActionLabel:
        return ActionLabel(self.action, self.system)


@dataclass(frozen=True)
class TemporalMemory:
    """Occurrences in global order; happens-before lives on the root memory.

    A projected memory (see project) keeps a reference to the memory it
    was cut from so that before-atoms stay meaningful.
    """

    occurrences: tuple[ActionOccurrence, ...]
    parent: Optional["TemporalMemory"] = field(default=None, compare=False)

    def __post_init__(self):
        last = 0
        for occ in self.occurrences:
            if occ.index <= last:
                raise ValueError("occurrence indices must strictly increase")
            last = occ.index

    @property
    def root(self) -> "TemporalMemory":
        node = self
        while node.parent is not None:
            node = node.parent
        return node

    def __len__(self) -> int:
        return len(self.occurrences)

    def __iter__(self) -> Iterator[ActionOccurrence]:
        return iter(self.occurrences)

    def by_index(self, index: int) -> ActionOccurrence:
        for occ in self.occurrences:
            if occ.index == index:
                return occ
        raise KeyError(f"no occurrence with index {index}")

    def append(self, occ: ActionOccurrence) -> "TemporalMemory":
        return TemporalMemory(self.occurrences + (occ,))

    def predecessor_closure(self, index: int) -> frozenset[int]:
        """All indices strictly happens-before the given occurrence."""
        root = self.root
        seen: set[int] = set()
        frontier = [index]
        while frontier:
            for p in root.by_index(frontier.pop()).predecessors:
                if p > 0 and p not in seen:
                    seen.add(p)
                    frontier.append(p)
        return frozenset(seen)


EMPTY_MEMORY = TemporalMemory(())


def happens_before(t: TemporalMemory, a: int, b: int) -> bool:
    """Strict happens-before: a is in the transitive predecessor closure of b."""
    root = t.root
    root.by_index(a)  # raise KeyError on unknown indices
    root.by_index(b)
    return a in t.predecessor_closure(b)


def project(t: TemporalMemory,
            executors: Union[int, Iterable[int]]) -> tuple[TemporalMemory, TemporalMemory]:
    """Split into (native, foreign) around the given executor set.

    Native keeps every occurrence some executor of which is in the set;
    merging the two back in index order reproduces the input.
    """
    if isinstance(executors, int):
        executors = {executors}
    exec_set = frozenset(executors)
    native = tuple(o for o in t.occurrences if o.executors & exec_set)
    foreign = tuple(o for o in t.occurrences if not (o.executors & exec_set))
    root = t.root
    return TemporalMemory(native, parent=root), TemporalMemory(foreign, parent=root)


# ------------------------------------------------------------------
# Traces
# ------------------------------------------------------------------

Prop = tuple[str, str, Optional[str]]  # ("occurred", action text, system)


def occurrence_props(occ: ActionOccurrence) -> frozenset[Prop]:
    return frozenset({("occurred", occ.action, occ.system)})


@dataclass(frozen=True)
class LabeledTrace:
    """The proposition labelling of a temporal memory, position by position."""

    memory: TemporalMemory
    labels: tuple[frozenset[Prop], ...]

    def __post_init__(self):
        assert len(self.labels) == len(self.memory.occurrences)

    def __len__(self) -> int:
        return len(self.labels)


def label(t: TemporalMemory) -> LabeledTrace:
    """Label every occurrence with its occurred-proposition."""
    return LabeledTrace(t, tuple(occurrence_props(o) for o in t.occurrences))


# ------------------------------------------------------------------
# Whole program states
# ------------------------------------------------------------------

@dataclass(frozen=True)
class ProgramState:
    """Data memory, channel buffers, temporal memory and control locations.

    The stack is one flat valuation; the frontend guarantees that the
    parallel branches touch disjoint variables, so per-executor stacks
    are recoverable as restrictions of it.
    """

    locations: tuple[int, ...]
    stack: Stack
    heap: Heap
    channels: tuple[ChannelState, ...]
    temporal: TemporalMemory
    aborted: Optional[str] = None

    def channel(self, name: str) -> ChannelState:
        for c in self.channels:
            if c.name == name:
                return c
        raise KeyError(name)

    def with_channel(self, updated: ChannelState) -> tuple[ChannelState, ...]:
        return tuple(updated if c.name == updated.name else c for c in self.channels)

    def dedup_key(self):
        """Hash key for cycle detection; the temporal memory is excluded
        because it grows monotonically along every path."""
        return (self.locations, self.stack, self.heap,
                tuple((c.name, c.buffer) for c in self.channels), self.aborted)

    def channels_dict(self) -> dict[str, ChannelState]:
        return {c.name: c for c in self.channels}


def initial_channels(decls) -> tuple[ChannelState, ...]:
    return tuple(ChannelState(c.name, c.capacity, c.domain) for c in decls.channels)


def all_heaps(locations: Iterable[int], values: Iterable[int]) -> Iterator[Heap]:
    """Every heap over subsets of the locations with cells in the values."""
    locs = sorted(set(locations))
    vals = sorted(set(values))
    for r in range(len(locs) + 1):
        for subset in itertools.combinations(locs, r):
            for contents in itertools.product(vals, repeat=r):
                yield Heap(tuple(zip(subset, contents)))
