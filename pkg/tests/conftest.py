"""Shared fixtures: the hand-checked triangle instances used throughout."""

import pytest

from mcflow.graph import Network
from mcflow.instance import Commodity, Instance


@pytest.fixture
def triangle_net():
    # Edges: 0: a->b cost 1, 1: b->c cost 1, 2: a->c cost 3 (all cap 10).
    return Network(3, [(0, 1, 1.0, 10.0), (1, 2, 1.0, 10.0), (0, 2, 3.0, 10.0)])


@pytest.fixture
def triangle(triangle_net):
    # k0: a->c demand 2, k1: a->b demand 1; one source group at a.
    return Instance.build(
        triangle_net,
        [Commodity(0, 2, 2.0), Commodity(0, 1, 1.0)],
        name="triangle",
    )


@pytest.fixture
def triangle_capped():
    # Same topology but b->c capacity 1: the optimum must split flow.
    net = Network(3, [(0, 1, 1.0, 10.0), (1, 2, 1.0, 1.0), (0, 2, 3.0, 10.0)])
    return Instance.build(
        net,
        [Commodity(0, 2, 2.0), Commodity(0, 1, 1.0)],
        name="triangle-capped",
    )


@pytest.fixture
def line_net():
    # a->b->c, unit weights.
    return Network(3, [(0, 1, 1.0, 10.0), (1, 2, 1.0, 10.0)])
