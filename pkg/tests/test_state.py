import itertools
import random

import pytest

from sepchan.state import (
    ActionOccurrence, EMPTY_HEAP, Heap, HeapOverlapError, SplitBoundExceeded,
    TemporalMemory, enumerate_splits, happens_before, heap_disjoint_union,
    label, project,
)


def heap(d):
    return Heap.make(d)


class TestDisjointUnion:
    def test_empty_identity(self):
        assert heap_disjoint_union(EMPTY_HEAP, heap({1: 5})) == heap({1: 5})
        assert heap_disjoint_union(heap({1: 5}), EMPTY_HEAP) == heap({1: 5})

    def test_disjoint(self):
        assert heap_disjoint_union(heap({1: 5}), heap({2: 6})) == heap({1: 5, 2: 6})

    def test_overlap_names_location(self):
        with pytest.raises(HeapOverlapError) as err:
            heap_disjoint_union(heap({1: 5}), heap({1: 7}))
        assert err.value.location == 1

    def test_commutative_associative_unit(self):
        rng = random.Random(7)
        for _ in range(200):
            locs = rng.sample(range(1, 9), rng.randrange(0, 5))
            cells = {loc: rng.randrange(4) for loc in locs}
            split_point = rng.randrange(0, len(locs) + 1)
            h1 = heap({k: cells[k] for k in locs[:split_point]})
            h2 = heap({k: cells[k] for k in locs[split_point:]})
            assert heap_disjoint_union(h1, h2) == heap_disjoint_union(h2, h1)
            assert heap_disjoint_union(h1, EMPTY_HEAP) == h1
            h3 = heap({20: 1})
            left = heap_disjoint_union(heap_disjoint_union(h1, h2), h3)
            right = heap_disjoint_union(h1, heap_disjoint_union(h2, h3))
            assert left == right


class TestEnumerateSplits:
    def test_empty(self):
        assert enumerate_splits(EMPTY_HEAP) == [(EMPTY_HEAP, EMPTY_HEAP)]

    def test_singleton(self):
        pairs = enumerate_splits(heap({1: 5}))
        assert (EMPTY_HEAP, heap({1: 5})) in pairs
        assert (heap({1: 5}), EMPTY_HEAP) in pairs
        assert len(pairs) == 2

    def test_three_cells(self):
        h = heap({1: 1, 2: 2, 3: 3})
        pairs = enumerate_splits(h)
        assert len(pairs) == 8
        for h1, h2 in pairs:
            assert heap_disjoint_union(h1, h2) == h

    def test_count_is_two_to_the_domain(self):
        for n in range(5):
            h = heap({i + 1: 0 for i in range(n)})
            assert len(enumerate_splits(h)) == 2 ** n

    def test_bound(self):
        h = heap({i + 1: 0 for i in range(5)})
        with pytest.raises(SplitBoundExceeded):
            enumerate_splits(h, bound=4)


def memory_from_preds(preds_by_index):
    """Occurrences 1..n with the given predecessor sets."""
    occs = []
    for i, preds in enumerate(preds_by_index, start=1):
        occs.append(ActionOccurrence(
            index=i, executors=frozenset({i % 2}), action=f"a{i}",
            system=None, predecessors=frozenset(preds) or frozenset({0})))
    return TemporalMemory(tuple(occs))


class TestHappensBefore:
    def test_irreflexive_on_first(self):
        t = memory_from_preds([set()])
        assert not happens_before(t, 1, 1)

    def test_direct_predecessor(self):
        t = memory_from_preds([set(), {1}])
        assert happens_before(t, 1, 2)
        assert not happens_before(t, 2, 1)

    def test_transitive_chain(self):
        t = memory_from_preds([set(), {1}, {2}])
        assert happens_before(t, 1, 3)

    def test_unknown_index(self):
        t = memory_from_preds([set()])
        with pytest.raises(KeyError):
            happens_before(t, 1, 9)

    def test_strict_partial_order_random(self):
        rng = random.Random(99)
        for _ in range(100):
            n = rng.randrange(1, 9)
            preds = [set(rng.sample(range(1, i + 1), rng.randrange(0, i + 1)))
                     for i in range(n)]
            t = memory_from_preds(preds)

            def oracle(a, b):
                # reachability over the raw predecessor graph
                frontier, seen = [b], set()
                while frontier:
                    node = frontier.pop()
                    for p in t.by_index(node).predecessors:
                        if p > 0 and p not in seen:
                            seen.add(p)
                            frontier.append(p)
                return a in seen

            for a in range(1, n + 1):
                assert not happens_before(t, a, a)
                for b in range(1, n + 1):
                    assert happens_before(t, a, b) == oracle(a, b)
                    if happens_before(t, a, b):
                        assert not happens_before(t, b, a)
                    for c in range(1, n + 1):
                        if happens_before(t, a, b) and happens_before(t, b, c):
                            assert happens_before(t, a, c)


class TestProject:
    def test_empty(self):
        t = TemporalMemory(())
        native, foreign = project(t, 0)
        assert len(native) == 0 and len(foreign) == 0

    def test_split_and_merge_identity(self):
        rng = random.Random(5)
        for _ in range(50):
            n = 10
            occs = []
            for i in range(1, n + 1):
                occs.append(ActionOccurrence(
                    index=i, executors=frozenset({rng.randrange(3)}),
                    action=f"a{i}", system=None,
                    predecessors=frozenset({i - 1}) if i > 1 else frozenset({0})))
            t = TemporalMemory(tuple(occs))
            native, foreign = project(t, rng.randrange(3))
            assert len(native) + len(foreign) == n
            merged = sorted(native.occurrences + foreign.occurrences,
                            key=lambda o: o.index)
            assert tuple(merged) == t.occurrences

    def test_projection_keeps_underlying_order(self):
        t = memory_from_preds([set(), {1}, {2}])
        native, _ = project(t, 1)  # odd indices 1, 3 belong to executor 1
        assert happens_before(native, 1, 3)


class TestLabel:
    def test_empty(self):
        assert len(label(TemporalMemory(()))) == 0

    def test_single_send(self):
        occ = ActionOccurrence(1, frozenset({0}), "c!m0", None, frozenset({0}))
        trace = label(TemporalMemory((occ,)))
        assert trace.labels == (frozenset({("occurred", "c!m0", None)}),)

    def test_system_in_props(self):
        occ = ActionOccurrence(1, frozenset({0}), "c0!m0", "N0", frozenset({0}))
        trace = label(TemporalMemory((occ,)))
        assert trace.labels[0] == frozenset({("occurred", "c0!m0", "N0")})
