import numpy as np
import pytest

from netdesign.graph import Graph


@pytest.fixture
def path4() -> Graph:
    return Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])


@pytest.fixture
def k3() -> Graph:
    return Graph.from_edges(3, [(0, 1), (0, 2), (1, 2)])


@pytest.fixture
def star13() -> Graph:
    # center 0, leaves 1..3
    return Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])


@pytest.fixture
def cycle6() -> Graph:
    return Graph.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)])


@pytest.fixture
def prism6() -> Graph:
    return Graph.from_edges(
        6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)]
    )


def tv_hist(draws: np.ndarray, edges: np.ndarray, exact_marg: np.ndarray) -> float:
    h, _ = np.histogram(np.asarray(draws), bins=edges)
    p = h / h.sum()
    return float(0.5 * np.abs(p - exact_marg).sum())


def tv_counter(counts: dict, n: int, exact: dict) -> float:
    keys = set(counts) | set(exact)
    return 0.5 * sum(abs(counts.get(k, 0) / n - exact.get(k, 0.0)) for k in keys)
