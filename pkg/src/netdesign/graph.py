"""Random-graph models (Erdos-Renyi, stochastic block model) and graph storage.

Graphs are small, dense and immutable: a symmetric boolean adjacency matrix
with no self-loops. Exhaustive enumeration of all labelled graphs on a few
nodes is provided as an oracle substrate for exact posterior and entropy
cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

NEG_INF = float("-inf")

MAX_ENUM_NODES = 8


class ParameterError(ValueError):
    """Invalid model or design parameter."""


class SizeError(ValueError):
    """Requested exhaustive computation is too large."""


def pair_index(n: int) -> list[tuple[int, int]]:
    """Ordered list of node pairs (i, j), i < j, lexicographic.

    Bit k of an edge bitmask refers to pair_index(n)[k].
    """
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


@dataclass(frozen=True, eq=False)
class Graph:
    """Labelled undirected graph with dense boolean adjacency."""

    adj: np.ndarray  # (n, n) bool, symmetric, zero diagonal

    def __post_init__(self):
        a = np.asarray(self.adj, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ParameterError("adjacency must be a square matrix")
        if np.any(np.diag(a)):
            raise ParameterError("self-loops are not allowed")
        if not np.array_equal(a, a.T):
            raise ParameterError("adjacency must be symmetric")
        object.__setattr__(self, "adj", a)
        object.__setattr__(self, "_degrees", a.sum(axis=1).astype(int))
        a.setflags(write=False)

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and np.array_equal(self.adj, other.adj)

    def __hash__(self) -> int:
        return hash((self.adj.shape[0], self.adj.tobytes()))

    @property
    def n_nodes(self) -> int:
        return self.adj.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self._degrees.sum()) // 2

    def degree(self, i: int) -> int:
        return int(self._degrees[i])

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adj[i, j])

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adj[i])

    def adjacency_lists(self) -> list[list[int]]:
        return [np.flatnonzero(self.adj[i]).tolist() for i in range(self.n_nodes)]

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adj, 1))
        return list(zip(i.tolist(), j.tolist()))

    def edge_bitmask(self) -> int:
        mask = 0
        for k, (i, j) in enumerate(pair_index(self.n_nodes)):
            if self.adj[i, j]:
                mask |= 1 << k
        return mask

    @staticmethod
    def from_edges(n: int, edges: Sequence[tuple[int, int]]) -> "Graph":
        a = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            if i == j:
                raise ParameterError(f"self-loop ({i},{i})")
            a[i, j] = a[j, i] = True
        return Graph(a)

    @staticmethod
    def from_bitmask(n: int, mask: int) -> "Graph":
        a = np.zeros((n, n), dtype=bool)
        for k, (i, j) in enumerate(pair_index(n)):
            if mask >> k & 1:
                a[i, j] = a[j, i] = True
        return Graph(a)


@dataclass(frozen=True)
class ErdosRenyi:
    """G(n, alpha): every pair included independently with probability alpha."""

    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"edge probability must be in [0,1], got {self.alpha}")


@dataclass(frozen=True)
class Sbm:
    """Stochastic block model: iid block labels, block-dependent inclusion."""

    beta: tuple[float, ...]  # block-allocation probabilities
    alpha_mat: tuple[tuple[float, ...], ...]  # K x K symmetric inclusion probs

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        amat = tuple(tuple(float(x) for x in row) for row in self.alpha_mat)
        k = len(beta)
        if k == 0 or any(b < 0 for b in beta):
            raise ParameterError("block probabilities must be nonnegative and nonempty")
        if abs(sum(beta) - 1.0) > 1e-12:
            raise ParameterError(f"block probabilities must sum to 1, got {sum(beta)}")
        if len(amat) != k or any(len(row) != k for row in amat):
            raise ParameterError("inclusion matrix must be K x K")
        for i in range(k):
            for j in range(k):
                if not 0.0 <= amat[i][j] <= 1.0:
                    raise ParameterError("inclusion probabilities must be in [0,1]")
                if abs(amat[i][j] - amat[j][i]) > 1e-12:
                    raise ParameterError("inclusion matrix must be symmetric")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_mat", amat)

    @property
    def n_blocks(self) -> int:
        return len(self.beta)


GraphModel = ErdosRenyi | Sbm


@dataclass(frozen=True)
class PointMassPrior:
    """Degenerate graph prior at a single model."""

    model: GraphModel


@dataclass(frozen=True)
class BetaErPrior:
    """Beta(tau1, tau2) prior on the Erdos-Renyi inclusion probability."""

    tau1: float
    tau2: float

    def __post_init__(self):
        if self.tau1 <= 0 or self.tau2 <= 0:
            raise ParameterError("Beta shape parameters must be positive")


@dataclass(frozen=True)
class GridPrior:
    """Discrete prior over a finite list of graph models."""

    models: tuple[GraphModel, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) != len(self.models) or len(w) == 0:
            raise ParameterError("weights must match models")
        if any(x < 0 for x in w):
            raise ParameterError("weights must be nonnegative")
        if abs(sum(w) - 1.0) > 1e-12:
            raise ParameterError(f"weights must sum to 1, got {sum(w)}")
        object.__setattr__(self, "weights", w)


GraphPrior = PointMassPrior | BetaErPrior | GridPrior


def gen_er(n: int, alpha: float, rng: np.random.Generator) -> Graph:
    """Draw one Erdos-Renyi graph on n nodes with inclusion probability alpha."""
    if n < 1:
        raise ParameterError(f"need at least one node, got {n}")
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"edge probability must be in [0,1], got {alpha}")
    u = rng.random((n, n))
    upper = np.triu(u < alpha, 1)
    return Graph(upper | upper.T)


def gen_sbm(n: int, model: Sbm, rng: np.random.Generator) -> tuple[Graph, np.ndarray]:
    """Draw an SBM graph; returns the graph and the latent block assignment."""
    if n < 1:
        raise ParameterError(f"need at least one node, got {n}")
    blocks = rng.choice(model.n_blocks, size=n, p=np.asarray(model.beta))
    amat = np.asarray(model.alpha_mat)
    probs = amat[np.ix_(blocks, blocks)]
    u = rng.random((n, n))
    upper = np.triu(u < probs, 1)
    return Graph(upper | upper.T), blocks


def _bernoulli_logp(x: bool, p: float) -> float:
    if p <= 0.0:
        return 0.0 if not x else NEG_INF
    if p >= 1.0:
        return 0.0 if x else NEG_INF
    return math.log(p) if x else math.log1p(-p)


def graph_log_prob(
    g: Graph, model: GraphModel, blocks: np.ndarray | None = None
) -> float:
    """Exact log p(G | model); SBM needs the block assignment and includes its log-prob."""
    n = g.n_nodes
    if isinstance(model, ErdosRenyi):
        a = model.alpha
        m = n * (n - 1) // 2
        e = g.n_edges
        if a <= 0.0:
            return 0.0 if e == 0 else NEG_INF
        if a >= 1.0:
            return 0.0 if e == m else NEG_INF
        return e * math.log(a) + (m - e) * math.log1p(-a)
    if isinstance(model, Sbm):
        if blocks is None:
            raise ParameterError("SBM log-probability requires block assignment")
        blocks = np.asarray(blocks, dtype=int)
        if blocks.shape != (n,):
            raise ParameterError("block assignment length must equal node count")
        total = 0.0
        for b in blocks:
            p = model.beta[b]
            if p <= 0.0:
                return NEG_INF
            total += math.log(p)
        amat = model.alpha_mat
        for i in range(n):
            for j in range(i + 1, n):
                lp = _bernoulli_logp(bool(g.adj[i, j]), amat[blocks[i]][blocks[j]])
                if lp == NEG_INF:
                    return NEG_INF
                total += lp
        return total
    raise ParameterError(f"unknown graph model {model!r}")


def enumerate_graphs(n: int) -> Iterator[Graph]:
    """All 2^C(n,2) labelled graphs on n nodes, ascending edge bitmask."""
    if n > MAX_ENUM_NODES:
        raise SizeError(f"graph enumeration limited to n <= {MAX_ENUM_NODES}, got {n}")
    if n < 1:
        raise ParameterError(f"need at least one node, got {n}")
    m = n * (n - 1) // 2
    for mask in range(1 << m):
        yield Graph.from_bitmask(n, mask)


def write_edge_list(g: Graph) -> str:
    """Serialize as `N` followed by one `i j` line per edge (i < j)."""
    lines = [str(g.n_nodes)]
    lines += [f"{i} {j}" for i, j in g.edges()]
    return "\n".join(lines) + "\n"


def read_edge_list(text: str) -> Graph:
    """Inverse of write_edge_list; round-trip exact."""
    rows = [line for line in text.strip().splitlines() if line.strip()]
    if not rows:
        raise ParameterError("empty edge-list text")
    n = int(rows[0])
    edges = []
    for line in rows[1:]:
        i, j = (int(tok) for tok in line.split())
        if not (0 <= i < j < n):
            raise ParameterError(f"bad edge line {line!r}")
        edges.append((i, j))
    return Graph.from_edges(n, edges)
