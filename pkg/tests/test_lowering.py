import random

import pytest

from sepchan.lowering import (
    AssumeStmt, check_variable_partition, lower, program_variables,
)
from sepchan.syntax import (
    BTrue, Owned, PLeaf, PPar, Send, parse_program,
)

from test_syntax import random_program


def lower_text(text):
    return lower(parse_program(text).body)


class TestLowerShapes:
    def test_skip_smallest(self):
        systems = lower_text("vars x : int;\nskip")
        assert len(systems) == 1
        ts = systems[0].ts
        assert len(ts.locations) == 2
        assert len(ts.transitions) == 1
        assert ts.transitions[0].guard == BTrue()

    def test_if_shape(self):
        # hand count: entry, exit, one location per branch arm; the two
        # assume transitions leave the entry under the guard and its negation
        systems = lower_text("vars b : int;\nif b = 1 then skip else skip")
        ts = systems[0].ts
        assert len(ts.locations) == 4
        out = ts.outgoing(ts.initial)
        assert len(out) == 2
        assert {str(t.guard.__class__.__name__) for t in out} == {"Cmp", "BNot"}
        assert all(isinstance(t.action.stmt, AssumeStmt) for t in out)

    def test_example1_two_systems(self, example1_program):
        systems = lower(example1_program.body)
        assert [ls.executor for ls in systems] == [0, 1]
        sender, receiver = systems
        comm = [t for t in sender.ts.transitions]
        assert len(comm) == 2 and all(t.action.text.startswith("c!") for t in comm)
        comm = [t for t in receiver.ts.transitions]
        assert len(comm) == 2 and all(t.action.text.startswith("c?") for t in comm)

    def test_network_systems_and_owners(self, network_program):
        systems = lower(network_program.body)
        assert [ls.executor for ls in systems] == [0, 1, 2, 3]
        assert [ls.system for ls in systems] == ["N0", "N0", "N1", "N1"]


class TestLowerProperties:
    def test_action_count_preserved(self):
        # every atomic statement shows up as exactly one non-assume transition
        rng = random.Random(11)
        for _ in range(300):
            pf = random_program(rng)
            atoms = count_atoms(pf.body)
            systems = lower(pf.body)
            transitions = [t for ls in systems for t in ls.ts.transitions
                           if not isinstance(t.action.stmt, AssumeStmt)]
            assert len(transitions) == atoms

    def test_numbering_stable(self):
        text = ("vars m, v : int;\nchans c : cap=1 dom=0..3;\n"
                "send(m, c) || v := receive(c)")
        assert lower_text(text) == lower_text(text)

    def test_ownership_on_exactly_one_transition(self, network_program):
        systems = lower(network_program.body)
        owned = [t for ls in systems for t in ls.ts.transitions
                 if t.action.system is not None]
        assert len(owned) == 8
        texts = [(t.action.text, t.action.system) for t in owned]
        assert len(set(texts)) == 8

    def test_variable_partition_violation(self):
        pf = parse_program("vars x : int;\nx := 1 || x := 2")
        with pytest.raises(ValueError) as err:
            check_variable_partition(pf.body)
        assert "'x'" in str(err.value)

    def test_partition_allows_disjoint(self, network_program):
        check_variable_partition(network_program.body)


def count_atoms(par) -> int:
    from sepchan.syntax import If, Owned, PLeaf, Seq, When, While

    def stmt_atoms(s):
        if isinstance(s, Seq):
            return stmt_atoms(s.first) + stmt_atoms(s.second)
        if isinstance(s, (Owned, When)):
            return stmt_atoms(s.body)
        if isinstance(s, If):
            return stmt_atoms(s.then_body) + stmt_atoms(s.else_body)
        if isinstance(s, While):
            return stmt_atoms(s.body)
        return 1

    if isinstance(par, PLeaf):
        return stmt_atoms(par.stmt)
    return count_atoms(par.left) + count_atoms(par.right)
