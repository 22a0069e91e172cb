"""Boltzmann Markov random field for binary node responses on a graph.

P(Y = y | G, gamma) is proportional to exp(gamma0 * V0 + gamma1 * V1), where
V0 is the number of ones and V1 the number of edges whose endpoints are both
one. A systematic-scan Gibbs sampler simulates responses; an exhaustive table
over all 2^N states serves as the exact oracle for small graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph, ParameterError, SizeError

MAX_EXACT_NODES = 15


@dataclass(frozen=True)
class MrfParams:
    """Field strength gamma0 and interaction strength gamma1."""

    gamma0: float
    gamma1: float


@dataclass(frozen=True)
class GammaBox:
    """Uniform prior box [g0_min, g0_max] x [g1_min, g1_max] for the MRF
    parameters; the interaction interval starts at zero by default."""

    g0_min: float = -1.0
    g0_max: float = 1.0
    g1_max: float = 1.0
    g1_min: float = 0.0

    def __post_init__(self):
        if self.g0_min > self.g0_max:
            raise ParameterError("gamma0 bounds out of order")
        if not 0.0 <= self.g1_min <= self.g1_max:
            raise ParameterError("gamma1 bounds out of order or negative")

    def contains(self, params: MrfParams) -> bool:
        return (
            self.g0_min <= params.gamma0 <= self.g0_max
            and self.g1_min <= params.gamma1 <= self.g1_max
        )

    @property
    def is_point(self) -> bool:
        return self.g0_min == self.g0_max and self.g1_min == self.g1_max

    def point_params(self) -> MrfParams:
        if not self.is_point:
            raise ParameterError("box is not degenerate")
        return MrfParams(self.g0_min, self.g1_min)


def _check_dims(y: np.ndarray, g: Graph) -> np.ndarray:
    y = np.asarray(y, dtype=int)
    if y.shape != (g.n_nodes,):
        raise ParameterError(
            f"response length {y.shape} does not match graph on {g.n_nodes} nodes"
        )
    if np.any((y != 0) & (y != 1)):
        raise ParameterError("responses must be binary")
    return y


def suff_stats(y: np.ndarray, g: Graph) -> tuple[int, int]:
    """(V0, V1): response sum and count of edges with both endpoints one."""
    y = _check_dims(y, g)
    v0 = int(y.sum())
    v1 = int((np.outer(y, y) & g.adj).sum()) // 2
    return v0, v1


def mrf_log_unnorm(y: np.ndarray, g: Graph, params: MrfParams) -> float:
    """Unnormalized log-weight gamma0*V0 + gamma1*V1."""
    v0, v1 = suff_stats(y, g)
    return params.gamma0 * v0 + params.gamma1 * v1


def conditional_prob_one(i: int, y: np.ndarray, g: Graph, params: MrfParams) -> float:
    """P(Y(i)=1 | all other responses, G, gamma), the logistic full conditional."""
    y = np.asarray(y, dtype=int)
    if not 0 <= i < g.n_nodes:
        raise ParameterError(f"node index {i} out of range")
    s = int(y[g.adj[i]].sum())
    t = params.gamma0 + params.gamma1 * s
    return 1.0 / (1.0 + math.exp(-t))


def gibbs_sweep(
    y: np.ndarray, adj_lists: list[list[int]], params: MrfParams, rng: np.random.Generator
) -> None:
    """One systematic scan over nodes 0..N-1, in place."""
    g0, g1 = params.gamma0, params.gamma1
    u = rng.random(len(y))
    for i, neigh in enumerate(adj_lists):
        s = 0
        for j in neigh:
            s += y[j]
        t = g0 + g1 * s
        p1 = 1.0 / (1.0 + math.exp(-t))
        y[i] = 1 if u[i] < p1 else 0


def gibbs_sample(
    g: Graph,
    params: MrfParams,
    sweeps: int,
    rng: np.random.Generator,
    init: np.ndarray | None = None,
) -> np.ndarray:
    """Systematic-scan Gibbs draw after `sweeps` full scans from a random start."""
    if sweeps < 1:
        raise ParameterError("need at least one sweep")
    n = g.n_nodes
    if init is None:
        y = rng.integers(0, 2, size=n)
    else:
        y = _check_dims(init, g).copy()
    adj_lists = g.adjacency_lists()
    for _ in range(sweeps):
        gibbs_sweep(y, adj_lists, params, rng)
    return y


def state_table(n: int) -> np.ndarray:
    """All 2^n binary vectors; row s is the bits of s, lowest bit = node 0."""
    if n > MAX_EXACT_NODES:
        raise SizeError(f"state enumeration limited to n <= {MAX_EXACT_NODES}")
    states = np.arange(1 << n, dtype=np.int64)
    return (states[:, None] >> np.arange(n)) & 1


def state_stats(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """V0 and V1 for every binary state of the graph, indexed by state bitmask."""
    ys = state_table(g.n_nodes)
    v0 = ys.sum(axis=1)
    edges = g.edges()
    if edges:
        ei = np.array([e[0] for e in edges])
        ej = np.array([e[1] for e in edges])
        v1 = (ys[:, ei] & ys[:, ej]).sum(axis=1)
    else:
        v1 = np.zeros(ys.shape[0], dtype=np.int64)
    return v0, v1


def exact_mrf_dist(g: Graph, params: MrfParams) -> np.ndarray:
    """Exact probability of every 2^N response state (index = state bitmask)."""
    v0, v1 = state_stats(g)
    logw = params.gamma0 * v0 + params.gamma1 * v1
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def exact_mrf_sample(
    g: Graph, params: MrfParams, rng: np.random.Generator, dist: np.ndarray | None = None
) -> np.ndarray:
    """Perfect draw from the MRF via the exact state table (small N only)."""
    if dist is None:
        dist = exact_mrf_dist(g, params)
    s = int(rng.choice(len(dist), p=dist))
    n = g.n_nodes
    return (s >> np.arange(n)) & 1


def log_normalizer(g: Graph, params: MrfParams) -> float:
    """log Z(G, gamma) by exhaustive enumeration (small N only)."""
    v0, v1 = state_stats(g)
    logw = params.gamma0 * v0 + params.gamma1 * v1
    mx = float(logw.max())
    return mx + math.log(float(np.exp(logw - mx).sum()))


def simulate_response(
    g: Graph,
    params: MrfParams,
    rng: np.random.Generator,
    sweeps: int | None = None,
) -> np.ndarray:
    """Draw Y | G, gamma: exact for small graphs, long Gibbs otherwise."""
    if g.n_nodes <= MAX_EXACT_NODES:
        return exact_mrf_sample(g, params, rng)
    n_sweeps = sweeps if sweeps is not None else 100
    return gibbs_sample(g, params, n_sweeps, rng)
