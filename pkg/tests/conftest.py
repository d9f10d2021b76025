import pathlib

import pytest

from sepchan.state import ActionOccurrence, LabeledTrace, TemporalMemory
from sepchan.syntax import parse_program, parse_spec

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text()


def load_spec(name: str):
    return parse_spec(fixture_text(name))


def load_program(name: str):
    return parse_program(fixture_text(name))


def make_labeled_trace(labels, preds=None):
    """Synthetic trace: occurrence i+1 carries the i-th label set.

    labels: list of iterables of proposition names; preds: optional list
    of predecessor index sets (defaults to a linear chain).
    """
    occurrences = []
    for i, props in enumerate(labels):
        index = i + 1
        if preds is not None:
            pred = frozenset(preds[i]) or frozenset({0})
        else:
            pred = frozenset({index - 1}) if index > 1 else frozenset({0})
        occurrences.append(ActionOccurrence(
            index=index, executors=frozenset({0}), action=f"step{index}",
            system=None, predecessors=pred))
    memory = TemporalMemory(tuple(occurrences))
    label_sets = tuple(frozenset(("occurred", p, None) for p in props)
                       for props in labels)
    return LabeledTrace(memory, label_sets)


@pytest.fixture
def corollary1_spec():
    return load_spec("corollary1.spec")


@pytest.fixture
def corollary1_program():
    return load_program("corollary1.ecsl")


@pytest.fixture
def example1_spec():
    return load_spec("example1.spec")


@pytest.fixture
def example1_program():
    return load_program("example1.ecsl")


@pytest.fixture
def network_spec():
    return load_spec("example2_network.spec")


@pytest.fixture
def network_program():
    return load_program("example2_network.ecsl")
