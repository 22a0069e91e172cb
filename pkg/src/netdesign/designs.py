"""Network sampling mechanisms as trace-producing stochastic processes.

Implements respondent-driven sampling (RDS) and its relatives: link tracing,
snowball, ego-centric, a curve-shaped referral schedule, a two-level switch
schedule, and the sequential family optimized elsewhere. Every run produces a
SampleTrace recording who recruited whom at which wave, with observed
responses and (for degree-reporting designs) reported degrees.

The exact log-probability of a trace under the chain-referral process is
computed by replaying the trace against a graph: each recruiting node with
adjusted degree d (unsampled neighbors at its turn) that recruited w nodes
contributes a factor 1/C(d, w), and seed draws contribute the uniform
without-replacement term.

Process conventions (the generative model is pinned down so that trace
probabilities sum to one over all realizable traces):
  - recruits are appended in chronological order; actors act in list order;
  - a recruiting node takes w = min(budget, adjusted degree, slots left to
    reach the target sample size) uniform unsampled neighbors, recorded as a
    sorted batch;
  - fixed-n RDS variants draw a fresh uniform seed among unsampled nodes when
    every pending recruiter is blocked (stall), marking the trace exhausted;
  - wave-capped designs (link tracing, snowball) terminate short instead.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator

import numpy as np

from .graph import Graph, ParameterError, SizeError

SEED_MARKER = -1


class ConsistencyError(ValueError):
    """Trace is structurally incompatible with the graph or design."""


# ---------------------------------------------------------------------------
# Design specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rds:
    """Fixed-n RDS: w0 seeds, at most m referrals per node, re-seed on stall."""

    m: int
    w0: int
    target_n: int

    def __post_init__(self):
        if self.m < 1 or self.w0 < 1 or self.target_n < 1:
            raise ParameterError("RDS counts must be >= 1")


@dataclass(frozen=True)
class LinkTracing:
    """Wave-capped chain referral: s seeds, r referrals, w waves.

    record_degrees=True yields the degree-reporting variant used in the
    sufficiency checks; plain link tracing reports no degrees.
    """

    s: int
    r: int
    w: int
    target_n: int
    record_degrees: bool = False

    def __post_init__(self):
        if self.s < 1 or self.r < 1 or self.w < 0 or self.target_n < 1:
            raise ParameterError("link-tracing parameters out of range")


@dataclass(frozen=True)
class Snowball:
    """s seeds, k expansion waves, full rows of sampled nodes observed."""

    s: int
    k: int
    target_n: int | None = None  # None = grows until waves or network exhaust

    def __post_init__(self):
        if self.s < 1 or self.k < 0:
            raise ParameterError("snowball parameters out of range")


@dataclass(frozen=True)
class Ego:
    """Uniform sample of target_n nodes; induced pair statuses observed."""

    target_n: int

    def __post_init__(self):
        if self.target_n < 1:
            raise ParameterError("ego sample size must be >= 1")


@dataclass(frozen=True)
class CurveRds:
    """RDS whose referral budget follows ceil(c_max * (wave / w_max) ** eta)."""

    eta: float
    c_max: int
    w_max: int
    w0: int
    target_n: int

    def __post_init__(self):
        if self.eta <= 0:
            raise ParameterError("curve exponent must be positive")
        if self.c_max < 1 or self.w_max < 1 or self.w0 < 1 or self.target_n < 1:
            raise ParameterError("curve-RDS counts must be >= 1")


@dataclass(frozen=True)
class SwitchRds:
    """RDS with budget lambda_lo before the switch wave and lambda_hi after."""

    lambda_lo: int
    lambda_hi: int
    switch_wave: int
    w0: int
    target_n: int

    def __post_init__(self):
        if not 1 <= self.lambda_lo < self.lambda_hi:
            raise ParameterError("need 1 <= lambda_lo < lambda_hi")
        if self.switch_wave < 1 or self.w0 < 1 or self.target_n < 1:
            raise ParameterError("switch-RDS counts must be >= 1")


@dataclass(frozen=True)
class SequentialRds:
    """Grid of (w0, m) choices optimized by the sequential-design solver."""

    w0_grid: tuple[int, ...]
    m_grid: tuple[int, ...]
    target_n: int

    def __post_init__(self):
        if not self.w0_grid or not self.m_grid:
            raise ParameterError("sequential grids must be nonempty")
        if any(x < 1 for x in self.w0_grid) or any(x < 1 for x in self.m_grid):
            raise ParameterError("sequential grid entries must be >= 1")


DesignSpec = Rds | LinkTracing | Snowball | Ego | CurveRds | SwitchRds | SequentialRds

RDS_FAMILY = (Rds, CurveRds, SwitchRds)
CHAIN_FAMILY = (Rds, CurveRds, SwitchRds, LinkTracing)


def design_label(design: DesignSpec) -> str:
    if isinstance(design, Rds):
        return f"rds(m={design.m},w0={design.w0},n={design.target_n})"
    if isinstance(design, LinkTracing):
        tag = "rdsw" if design.record_degrees else "lt"
        return f"{tag}(s={design.s},r={design.r},w={design.w})"
    if isinstance(design, Snowball):
        return f"snowball(s={design.s},k={design.k})"
    if isinstance(design, Ego):
        return f"ego(n={design.target_n})"
    if isinstance(design, CurveRds):
        return (
            f"curve(eta={design.eta},c={design.c_max},W={design.w_max},"
            f"w0={design.w0},n={design.target_n})"
        )
    if isinstance(design, SwitchRds):
        return (
            f"switch(lo={design.lambda_lo},hi={design.lambda_hi},"
            f"k={design.switch_wave},w0={design.w0},n={design.target_n})"
        )
    if isinstance(design, SequentialRds):
        return f"seq(w0={list(design.w0_grid)},m={list(design.m_grid)},n={design.target_n})"
    raise ParameterError(f"unknown design {design!r}")


def n_seeds(design: DesignSpec) -> int:
    if isinstance(design, (Rds, CurveRds, SwitchRds)):
        return design.w0
    if isinstance(design, (LinkTracing, Snowball)):
        return design.s
    if isinstance(design, Ego):
        return design.target_n
    raise ParameterError(f"design {design!r} has no seed count")


def referral_schedule(design: DesignSpec, wave: int) -> int:
    """Referral budget for the given wave (waves are 1-based)."""
    if wave < 1:
        raise ParameterError(f"wave must be >= 1, got {wave}")
    if isinstance(design, Rds):
        return design.m
    if isinstance(design, LinkTracing):
        return design.r
    if isinstance(design, CurveRds):
        if wave > design.w_max:
            raise ParameterError(
                f"wave {wave} outside the curve domain 1..{design.w_max}"
            )
        z = design.c_max * (wave / design.w_max) ** design.eta
        return max(1, math.ceil(z - 1e-9))
    if isinstance(design, SwitchRds):
        return design.lambda_lo if wave < design.switch_wave else design.lambda_hi
    raise ParameterError(f"design {design!r} has no referral schedule")


def _wave_budget(design: DesignSpec, wave: int) -> int:
    """Budget as run_design applies it; curve waves clamp at the cap."""
    if isinstance(design, LinkTracing):
        return design.r if wave <= design.w else 0
    if isinstance(design, CurveRds):
        return referral_schedule(design, min(wave, design.w_max))
    return referral_schedule(design, wave)


def is_ignorable(design: DesignSpec) -> tuple[bool, str]:
    """Whether the design factor can be dropped from the likelihood, with a tag."""
    if isinstance(design, (Snowball, Ego)):
        return True, "selection probability depends on observed data only"
    if isinstance(design, CHAIN_FAMILY) or isinstance(design, SequentialRds):
        return False, "recruitment probabilities depend on unobserved adjusted degrees"
    raise ParameterError(f"unknown design {design!r}")


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


@dataclass
class SampleTrace:
    """Full record of one sampling run.

    Entries are chronological; recruiter_pos[i] is the index (into nodes) of
    the recruiter of nodes[i], or SEED_MARKER for seeds and re-seeds.
    """

    n_nodes: int
    nodes: list[int]
    waves: list[int]
    recruiter_pos: list[int]
    responses: dict[int, int] = field(default_factory=dict)
    reported_degrees: dict[int, int] = field(default_factory=dict)
    exhausted: bool = False
    design: DesignSpec | None = None

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def seed_ids(self) -> list[int]:
        return [v for v, r in zip(self.nodes, self.recruiter_pos) if r == SEED_MARKER]

    def recruitment_edges(self) -> list[tuple[int, int]]:
        return [
            (self.nodes[r], v)
            for v, r in zip(self.nodes, self.recruiter_pos)
            if r != SEED_MARKER
        ]

    def max_wave(self) -> int:
        return max(self.waves) if self.waves else 0

    def structure_key(self) -> tuple:
        return (tuple(self.nodes), tuple(self.waves), tuple(self.recruiter_pos))

    def validate(self, g: Graph | None = None) -> None:
        n = len(self.nodes)
        if not (len(self.waves) == len(self.recruiter_pos) == n):
            raise ConsistencyError("trace arrays have mismatched lengths")
        if len(set(self.nodes)) != n:
            raise ConsistencyError("a node appears twice in the trace")
        for i in range(1, n):
            if self.waves[i] < self.waves[i - 1]:
                raise ConsistencyError("wave indices must be non-decreasing")
        for i, r in enumerate(self.recruiter_pos):
            if r == SEED_MARKER:
                continue
            if not 0 <= r < i:
                raise ConsistencyError("recruiter must appear before its recruit")
            if self.waves[r] != self.waves[i] - 1:
                raise ConsistencyError("recruiter must sit exactly one wave earlier")
        if g is not None:
            if g.n_nodes != self.n_nodes:
                raise ConsistencyError("trace population size does not match graph")
            for u, v in self.recruitment_edges():
                if not g.has_edge(u, v):
                    raise ConsistencyError(f"recruitment edge ({u},{v}) absent in graph")
            for v, d in self.reported_degrees.items():
                if g.degree(v) != d:
                    raise ConsistencyError(f"reported degree of {v} differs from graph")


def trace_to_json(trace: SampleTrace) -> str:
    payload = {
        "n_nodes": trace.n_nodes,
        "seed_ids": trace.seed_ids,
        "recruits": [
            {
                "node": v,
                "wave": w,
                "recruiter": (None if r == SEED_MARKER else trace.nodes[r]),
            }
            for v, w, r in zip(trace.nodes, trace.waves, trace.recruiter_pos)
        ],
        "responses": {str(k): v for k, v in trace.responses.items()},
        "degrees": {str(k): v for k, v in trace.reported_degrees.items()},
        "exhausted": trace.exhausted,
    }
    return json.dumps(payload, indent=2)


def trace_from_json(text: str) -> SampleTrace:
    payload = json.loads(text)
    nodes = [rec["node"] for rec in payload["recruits"]]
    pos = {v: i for i, v in enumerate(nodes)}
    waves = [rec["wave"] for rec in payload["recruits"]]
    recruiter_pos = [
        SEED_MARKER if rec["recruiter"] is None else pos[rec["recruiter"]]
        for rec in payload["recruits"]
    ]
    return SampleTrace(
        n_nodes=payload["n_nodes"],
        nodes=nodes,
        waves=waves,
        recruiter_pos=recruiter_pos,
        responses={int(k): v for k, v in payload["responses"].items()},
        reported_degrees={int(k): v for k, v in payload["degrees"].items()},
        exhausted=payload["exhausted"],
    )


# ---------------------------------------------------------------------------
# The sampling process
# ---------------------------------------------------------------------------


def _as_pyrandom(rng: np.random.Generator | random.Random) -> random.Random:
    if isinstance(rng, random.Random):
        return rng
    return random.Random(int(rng.integers(0, 2**63 - 1)))


def _chain_process(
    design: DesignSpec,
    adj_lists: list[list[int]],
    n: int,
    pyrng: random.Random,
    seeds: list[int] | None = None,
) -> tuple[list[int], list[int], list[int], bool]:
    """Core chain-referral sampler shared by RDS, curve/switch RDS and LT.

    Returns (nodes, waves, recruiter_pos, exhausted) in chronological order.
    """
    w0 = n_seeds(design)
    target = design.target_n
    reseed = isinstance(design, RDS_FAMILY)
    wave_cap = design.w if isinstance(design, LinkTracing) else None

    if seeds is not None:
        if len(seeds) != w0 or len(set(seeds)) != w0:
            raise ParameterError("seed list must hold w0 distinct nodes")
        nodes = sorted(seeds)
    else:
        nodes = sorted(pyrng.sample(range(n), w0))
    waves = [0] * w0
    recruiter_pos = [SEED_MARKER] * w0
    sampled = bytearray(n)
    for v in nodes:
        sampled[v] = 1
    exhausted = False

    actor = 0
    while len(nodes) < target:
        if actor == len(nodes):
            # every pending recruiter processed and target not reached
            if not reseed:
                # capped designs terminate; short of the cap means the
                # frontier died (network exhausted)
                exhausted = wave_cap is None or max(waves) < wave_cap
                break
            exhausted = True
            fresh = [u for u in range(n) if not sampled[u]]
            u = fresh[pyrng.randrange(len(fresh))]
            nodes.append(u)
            waves.append(waves[-1] + 1)
            recruiter_pos.append(SEED_MARKER)
            sampled[u] = 1
            continue
        k = waves[actor] + 1
        if wave_cap is not None and k > wave_cap:
            actor += 1
            continue
        budget = _wave_budget(design, k)
        avail = [u for u in adj_lists[nodes[actor]] if not sampled[u]]
        take = min(budget, len(avail), target - len(nodes))
        if take > 0:
            batch = sorted(pyrng.sample(avail, take)) if take < len(avail) else avail
            for u in batch:
                nodes.append(u)
                waves.append(k)
                recruiter_pos.append(actor)
                sampled[u] = 1
        actor += 1
    return nodes, waves, recruiter_pos, exhausted


def _snowball_process(
    design: Snowball, adj_lists: list[list[int]], n: int, pyrng: random.Random
) -> tuple[list[int], list[int], list[int], bool]:
    nodes = sorted(pyrng.sample(range(n), design.s))
    waves = [0] * design.s
    recruiter_pos = [SEED_MARKER] * design.s
    sampled = bytearray(n)
    for v in nodes:
        sampled[v] = 1
    exhausted = False
    front_lo = 0
    for wave in range(1, design.k + 1):
        front_hi = len(nodes)
        incoming: dict[int, int] = {}
        for p in range(front_lo, front_hi):
            for u in adj_lists[nodes[p]]:
                if not sampled[u] and u not in incoming:
                    incoming[u] = p
        if not incoming:
            exhausted = True
            break
        for u in sorted(incoming):
            nodes.append(u)
            waves.append(wave)
            recruiter_pos.append(incoming[u])
            sampled[u] = 1
        front_lo = front_hi
    return nodes, waves, recruiter_pos, exhausted


def run_design(
    design: DesignSpec,
    g: Graph,
    y: np.ndarray,
    rng: np.random.Generator | random.Random,
) -> SampleTrace:
    """Run one sampling process over g with responses y; returns the trace."""
    n = g.n_nodes
    y = np.asarray(y, dtype=int)
    if y.shape != (n,):
        raise ParameterError("response vector length must equal node count")
    if isinstance(design, SequentialRds):
        raise ParameterError("sequential designs are policies; run a concrete (m, w0)")
    if isinstance(design, Snowball):
        if design.target_n is not None and design.target_n != n:
            raise ParameterError("snowball cannot truncate mid-wave; leave target_n unset")
        if design.s > n:
            raise ParameterError("more seeds than nodes")
    else:
        if design.target_n > n:
            raise ParameterError(f"target_n={design.target_n} exceeds population {n}")
        if n_seeds(design) > design.target_n:
            raise ParameterError("seed count exceeds target sample size")
    pyrng = _as_pyrandom(rng)
    adj_lists = g.adjacency_lists()

    if isinstance(design, Ego):
        nodes = sorted(pyrng.sample(range(n), design.target_n))
        waves = [0] * len(nodes)
        recruiter_pos = [SEED_MARKER] * len(nodes)
        exhausted = False
    elif isinstance(design, Snowball):
        nodes, waves, recruiter_pos, exhausted = _snowball_process(
            design, adj_lists, n, pyrng
        )
    else:
        nodes, waves, recruiter_pos, exhausted = _chain_process(
            design, adj_lists, n, pyrng
        )

    responses = {v: int(y[v]) for v in nodes}
    if isinstance(design, RDS_FAMILY) or (
        isinstance(design, LinkTracing) and design.record_degrees
    ):
        degrees = {v: g.degree(v) for v in nodes}
    else:
        degrees = {}
    return SampleTrace(
        n_nodes=n,
        nodes=nodes,
        waves=waves,
        recruiter_pos=recruiter_pos,
        responses=responses,
        reported_degrees=degrees,
        exhausted=exhausted,
        design=design,
    )


def run_design_from_seeds(
    design: DesignSpec,
    g: Graph,
    y: np.ndarray,
    seeds: list[int],
    rng: np.random.Generator | random.Random,
) -> SampleTrace:
    """Run a chain-referral design with wave 0 fixed to the given seeds."""
    if not isinstance(design, CHAIN_FAMILY):
        raise ParameterError("seed-conditioned runs apply to chain-referral designs")
    n = g.n_nodes
    y = np.asarray(y, dtype=int)
    pyrng = _as_pyrandom(rng)
    nodes, waves, recruiter_pos, exhausted = _chain_process(
        design, g.adjacency_lists(), n, pyrng, seeds=seeds
    )
    responses = {v: int(y[v]) for v in nodes}
    if isinstance(design, RDS_FAMILY) or (
        isinstance(design, LinkTracing) and design.record_degrees
    ):
        degrees = {v: g.degree(v) for v in nodes}
    else:
        degrees = {}
    return SampleTrace(
        n_nodes=n,
        nodes=nodes,
        waves=waves,
        recruiter_pos=recruiter_pos,
        responses=responses,
        reported_degrees=degrees,
        exhausted=exhausted,
        design=design,
    )


# ---------------------------------------------------------------------------
# Trace probability under the chain-referral process
# ---------------------------------------------------------------------------


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def rds_log_likelihood(
    trace: SampleTrace,
    g: Graph,
    design: DesignSpec,
    include_seed_term: bool = True,
) -> float:
    """Exact log-probability of a chain-referral trace given the full graph.

    Each recruiter contributes -log C(d, w) where d is its adjusted degree at
    its turn and w its realized batch size; the initial seed set contributes
    -log C(N, w0); a re-seed after a stall contributes -log(#unsampled).
    Returns -inf when the trace has probability zero under g (e.g. the batch
    size contradicts the min(budget, adjusted degree, remaining) rule), and
    raises ConsistencyError for structural violations.
    """
    if not isinstance(design, CHAIN_FAMILY):
        raise ParameterError("trace probability is defined for chain-referral designs")
    trace.validate(g)
    n = g.n_nodes
    target = design.target_n
    w0 = n_seeds(design)
    wave_cap = design.w if isinstance(design, LinkTracing) else None
    reseed_ok = isinstance(design, RDS_FAMILY)

    entries = list(zip(trace.nodes, trace.waves, trace.recruiter_pos))
    total = len(entries)
    if total > target:
        raise ConsistencyError("trace longer than the target sample size")
    if total < w0 or any(
        w != 0 or r != SEED_MARKER for _, w, r in entries[:w0]
    ):
        raise ConsistencyError("trace must start with exactly w0 wave-0 seeds")
    if any(r == SEED_MARKER and w == 0 for _, w, r in entries[w0:]):
        raise ConsistencyError("extra wave-0 seeds beyond the design's seed count")

    seeds = [v for v, _, _ in entries[:w0]]
    if seeds != sorted(seeds):
        raise ConsistencyError("seed prefix must be sorted (canonical trace order)")
    loglik = -_log_comb(n, w0) if include_seed_term else 0.0
    sampled = bytearray(n)
    for v in seeds:
        sampled[v] = 1
    commit = w0
    actor = 0
    while actor < total:
        # a pending re-seed is committed the moment every actor is exhausted
        while actor == commit and commit < total:
            v, w, r = entries[commit]
            if r != SEED_MARKER:
                raise ConsistencyError("recruit committed before its recruiter acted")
            if not reseed_ok:
                raise ConsistencyError("re-seed in a design without re-seeding")
            if commit >= target:
                raise ConsistencyError("re-seed after the target was reached")
            if w != entries[commit - 1][1] + 1:
                raise ConsistencyError("re-seed wave must follow the last wave")
            loglik -= math.log(n - commit)
            sampled[v] = 1
            commit += 1
        if actor >= commit:
            break
        node, wave, _ = entries[actor]
        k = wave + 1
        if wave_cap is not None and k > wave_cap:
            budget = 0
        else:
            budget = _wave_budget(design, k)
        avail = [u for u in g.neighbors(node) if not sampled[u]]
        expected = min(budget, len(avail), target - commit) if budget > 0 else 0
        batch = entries[commit : commit + expected]
        if len(batch) != expected:
            return float("-inf")
        batch_nodes = [v for v, _, _ in batch]
        if batch_nodes != sorted(batch_nodes):
            raise ConsistencyError("recruit batch must be sorted (canonical order)")
        for v, w, r in batch:
            if r != actor or w != k:
                return float("-inf")
            if not g.has_edge(node, v):
                raise ConsistencyError("recruitment edge absent in graph")
        if expected > 0 and not set(batch_nodes) <= set(avail):
            return float("-inf")
        if expected > 0:
            loglik -= _log_comb(len(avail), expected)
        for v in batch_nodes:
            sampled[v] = 1
        commit += expected
        actor += 1
    if commit != total:
        return float("-inf")
    if total < target and reseed_ok:
        return float("-inf")  # a fixed-n design would have re-seeded
    return loglik


def selection_log_prob(trace: SampleTrace, design: DesignSpec) -> float:
    """Log-probability of the selection event for ignorable designs."""
    n = trace.n_nodes
    if isinstance(design, Ego):
        return -_log_comb(n, design.target_n)
    if isinstance(design, Snowball):
        return -_log_comb(n, design.s)
    raise ParameterError("selection probability defined for ego/snowball only")


def trace_log_prob(trace: SampleTrace, g: Graph, design: DesignSpec) -> float:
    """Log p(I | G, design) for any supported design."""
    if isinstance(design, CHAIN_FAMILY):
        return rds_log_likelihood(trace, g, design)
    if isinstance(design, Ego):
        return selection_log_prob(trace, design)
    if isinstance(design, Snowball):
        # seeds determine everything else given g
        expected = run_snowball_from_seeds(design, g, trace.seed_ids)
        if expected.structure_key() != trace.structure_key():
            return float("-inf")
        return selection_log_prob(trace, design)
    raise ParameterError(f"unsupported design {design!r}")


def run_snowball_from_seeds(design: Snowball, g: Graph, seeds: list[int]) -> SampleTrace:
    """Deterministic snowball expansion from a fixed seed set."""
    adj_lists = g.adjacency_lists()
    n = g.n_nodes
    nodes = sorted(seeds)
    waves = [0] * len(nodes)
    recruiter_pos = [SEED_MARKER] * len(nodes)
    sampled = bytearray(n)
    for v in nodes:
        sampled[v] = 1
    exhausted = False
    front_lo = 0
    for wave in range(1, design.k + 1):
        front_hi = len(nodes)
        incoming: dict[int, int] = {}
        for p in range(front_lo, front_hi):
            for u in adj_lists[nodes[p]]:
                if not sampled[u] and u not in incoming:
                    incoming[u] = p
        if not incoming:
            exhausted = True
            break
        for u in sorted(incoming):
            nodes.append(u)
            waves.append(wave)
            recruiter_pos.append(incoming[u])
            sampled[u] = 1
        front_lo = front_hi
    return SampleTrace(
        n_nodes=n,
        nodes=nodes,
        waves=waves,
        recruiter_pos=recruiter_pos,
        exhausted=exhausted,
        design=design,
    )


# ---------------------------------------------------------------------------
# Observed data
# ---------------------------------------------------------------------------


@dataclass
class ObservedData:
    """The portion of (G, Y, D) revealed by a trace.

    pair_status maps (i, j) with i < j to the observed edge indicator; pairs
    absent from the map are unobserved.
    """

    trace: SampleTrace
    pair_status: dict[tuple[int, int], bool]
    y_inc: dict[int, int]
    d_inc: dict[int, int]

    @property
    def n_nodes(self) -> int:
        return self.trace.n_nodes

    @property
    def nodes_inc(self) -> list[int]:
        return list(self.trace.nodes)

    def observed_edge_count(self) -> int:
        return sum(1 for v in self.pair_status.values() if v)


def observed_data(trace: SampleTrace, g: Graph, y: np.ndarray) -> ObservedData:
    """Extract the observed subgraph, responses and degrees for a trace."""
    design = trace.design
    if design is None:
        raise ParameterError("trace carries no design; cannot derive observation rules")
    trace.validate(g)
    y = np.asarray(y, dtype=int)
    n = g.n_nodes
    sampled = sorted(trace.nodes)
    pair_status: dict[tuple[int, int], bool] = {}
    if isinstance(design, Ego):
        for a_idx in range(len(sampled)):
            for b_idx in range(a_idx + 1, len(sampled)):
                i, j = sampled[a_idx], sampled[b_idx]
                pair_status[(i, j)] = bool(g.adj[i, j])
    elif isinstance(design, Snowball):
        for i in sampled:
            for j in range(n):
                if j == i:
                    continue
                a, b = min(i, j), max(i, j)
                pair_status[(a, b)] = bool(g.adj[a, b])
    elif isinstance(design, CHAIN_FAMILY):
        for u, v in trace.recruitment_edges():
            a, b = min(u, v), max(u, v)
            pair_status[(a, b)] = True
    else:
        raise ParameterError(f"unsupported design {design!r}")
    y_inc = {v: int(y[v]) for v in trace.nodes}
    return ObservedData(
        trace=trace,
        pair_status=pair_status,
        y_inc=y_inc,
        d_inc=dict(trace.reported_degrees),
    )


# ---------------------------------------------------------------------------
# Exhaustive trace enumeration (oracle substrate)
# ---------------------------------------------------------------------------

MAX_ENUM_TRACES = 2_000_000


def enumerate_traces(
    design: DesignSpec, g: Graph
) -> Iterator[tuple[SampleTrace, float]]:
    """All realizable traces with their exact probabilities (tiny graphs only).

    Probabilities sum to one over the enumeration.
    """
    n = g.n_nodes
    if n > 8:
        raise SizeError("trace enumeration limited to n <= 8")
    if isinstance(design, Ego):
        p = 1.0 / math.comb(n, design.target_n)
        for subset in combinations(range(n), design.target_n):
            tr = SampleTrace(
                n_nodes=n,
                nodes=list(subset),
                waves=[0] * len(subset),
                recruiter_pos=[SEED_MARKER] * len(subset),
                exhausted=False,
                design=design,
            )
            yield tr, p
        return
    if isinstance(design, Snowball):
        p = 1.0 / math.comb(n, design.s)
        for subset in combinations(range(n), design.s):
            tr = run_snowball_from_seeds(design, g, list(subset))
            yield tr, p
        return
    if not isinstance(design, CHAIN_FAMILY):
        raise ParameterError(f"enumeration not supported for {design!r}")

    target = design.target_n
    w0 = n_seeds(design)
    wave_cap = design.w if isinstance(design, LinkTracing) else None
    reseed = isinstance(design, RDS_FAMILY)
    adj_lists = g.adjacency_lists()
    seed_p = 1.0 / math.comb(n, w0)
    emitted = 0

    def emit(nodes, waves, recruiter_pos, exhausted, prob):
        nonlocal emitted
        emitted += 1
        if emitted > MAX_ENUM_TRACES:
            raise SizeError("trace enumeration exploded; shrink the fixture")
        tr = SampleTrace(
            n_nodes=n,
            nodes=list(nodes),
            waves=list(waves),
            recruiter_pos=list(recruiter_pos),
            exhausted=exhausted,
            design=design,
        )
        return tr, prob

    def recurse(nodes, waves, recruiter_pos, sampled, actor, reseeded, prob):
        if len(nodes) == target:
            yield emit(nodes, waves, recruiter_pos, reseeded, prob)
            return
        if actor == len(nodes):
            if not reseed:
                exhausted = wave_cap is None or max(waves) < wave_cap
                yield emit(nodes, waves, recruiter_pos, exhausted, prob)
                return
            fresh = [u for u in range(n) if not sampled[u]]
            for u in fresh:
                nodes.append(u)
                waves.append(waves[-1] + 1)
                recruiter_pos.append(SEED_MARKER)
                sampled[u] = 1
                yield from recurse(
                    nodes, waves, recruiter_pos, sampled,
                    actor, True, prob / len(fresh),
                )
                sampled[u] = 0
                nodes.pop(); waves.pop(); recruiter_pos.pop()
            return
        k = waves[actor] + 1
        if wave_cap is not None and k > wave_cap:
            budget = 0
        else:
            budget = _wave_budget(design, k)
        avail = [u for u in adj_lists[nodes[actor]] if not sampled[u]]
        take = min(budget, len(avail), target - len(nodes)) if budget > 0 else 0
        if take <= 0:
            yield from recurse(
                nodes, waves, recruiter_pos, sampled, actor + 1, reseeded, prob
            )
            return
        p_branch = prob / math.comb(len(avail), take)
        for batch in combinations(avail, take):
            for u in batch:
                nodes.append(u)
                waves.append(k)
                recruiter_pos.append(actor)
                sampled[u] = 1
            yield from recurse(
                nodes, waves, recruiter_pos, sampled, actor + 1, reseeded, p_branch
            )
            for u in batch:
                sampled[u] = 0
            del nodes[-take:]
            del waves[-take:]
            del recruiter_pos[-take:]

    for seed_set in combinations(range(n), w0):
        sampled = bytearray(n)
        for v in seed_set:
            sampled[v] = 1
        yield from recurse(
            list(seed_set), [0] * w0, [SEED_MARKER] * w0, sampled, 0, False, seed_p
        )
