from __future__ import annotations

import pytest

from frrsim import FailureSet, Flow, Topology, figure1_topology


@pytest.fixture
def figure1() -> Topology:
    return figure1_topology()


@pytest.fixture
def triangle() -> Topology:
    return Topology(["a", "b", "c"], [("a", "b"), ("a", "c"), ("b", "c")])


@pytest.fixture
def square() -> Topology:
    """4-cycle a-b-c-d."""
    return Topology(["a", "b", "c", "d"], [("a", "b"), ("b", "c"), ("c", "d"), ("a", "d")])


@pytest.fixture
def figure1_flow() -> Flow:
    return Flow("S", "D")


@pytest.fixture
def s2s4_failure() -> FailureSet:
    return FailureSet.of(links=[("S2", "S4")])
