import numpy as np
import pytest

from resilient_observer import Digraph
from resilient_observer.scenario import bundled_path, load_scenario


def random_digraph(rng, n, p=0.5):
    edges = [
        (j, i)
        for j in range(1, n + 1)
        for i in range(1, n + 1)
        if j != i and rng.random() < p
    ]
    return Digraph(n, edges)


def random_source_set(rng, n, max_size=3):
    size = int(rng.integers(1, min(max_size, n) + 1))
    return frozenset(int(v) for v in rng.choice(n, size=size, replace=False) + 1)


@pytest.fixture(scope="session")
def clique5():
    return Digraph.complete(5)


@pytest.fixture(scope="session")
def layered10():
    return load_scenario(bundled_path("layered10_swlfse")).graph


def load_bundled(name):
    path = bundled_path(name)
    assert path is not None, f"missing bundled scenario {name}"
    return load_scenario(path)
