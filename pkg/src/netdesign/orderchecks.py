"""Stochastic trace transformations and empirical sufficiency checks.

A chain-referral trace is reduced to its canonical block structure (waves,
recruiter forest, optional reported degrees); three transformations act on
it: dropping the last wave, dropping the highest-indexed seed's component,
and thinning a referral budget by one. Distribution-equivalence tests verify
that a transformed source design reproduces a target design's trace law on a
fixed small graph, and counterexample statistics (mean observed degree,
component count) track why certain reductions are impossible.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from itertools import product

import numpy as np

from .designs import (
    CHAIN_FAMILY,
    SEED_MARKER,
    DesignSpec,
    LinkTracing,
    SampleTrace,
    _chain_process,
    n_seeds,
)
from .graph import Graph, ParameterError, SizeError

# raw structure: (waves, recruiters, degrees-or-None), all tuples, positions
# in chronological order with recruiter indices positional
Structure = tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...] | None]


@dataclass(frozen=True)
class CanonicalTrace:
    """Trace relabelled by the canonical indexing; node ids are forgotten."""

    waves: tuple[int, ...]
    recruiter: tuple[int, ...]  # canonical index of recruiter, -1 for seeds
    degrees: tuple[int, ...] | None
    design: DesignSpec | None = None

    def __len__(self) -> int:
        return len(self.waves)

    @property
    def n_seed_roots(self) -> int:
        return sum(1 for w, r in zip(self.waves, self.recruiter) if r == SEED_MARKER and w == 0)

    def structure(self) -> Structure:
        return (self.waves, self.recruiter, self.degrees)


def _structure_of_trace(trace: SampleTrace) -> Structure:
    degrees = None
    if trace.reported_degrees:
        degrees = tuple(trace.reported_degrees[v] for v in trace.nodes)
    return (tuple(trace.waves), tuple(trace.recruiter_pos), degrees)


def _children_lists(recruiter: tuple[int, ...]) -> list[list[int]]:
    children: list[list[int]] = [[] for _ in recruiter]
    for i, r in enumerate(recruiter):
        if r != SEED_MARKER:
            children[r].append(i)
    return children


def _component_root(recruiter: tuple[int, ...], i: int) -> int:
    while recruiter[i] != SEED_MARKER:
        i = recruiter[i]
    return i


def canonical_indexing(
    trace: SampleTrace, rng: np.random.Generator | random.Random
) -> CanonicalTrace:
    """Relabel a trace by wave, seed-component order and recruiter order.

    Seeds receive a random permutation; within each wave, nodes of
    lower-indexed seeds' components come first, then recruits of
    lower-indexed recruiters.
    """
    waves, recruiter, degrees = _structure_of_trace(trace)
    return CanonicalTrace(
        *(_canonicalize(waves, recruiter, degrees, rng)), design=trace.design
    )


def _canonicalize(
    waves: tuple[int, ...],
    recruiter: tuple[int, ...],
    degrees: tuple[int, ...] | None,
    rng: np.random.Generator | random.Random,
) -> Structure:
    n = len(waves)
    seeds = [i for i in range(n) if recruiter[i] == SEED_MARKER]
    if isinstance(rng, random.Random):
        perm = list(range(len(seeds)))
        rng.shuffle(perm)
    else:
        perm = rng.permutation(len(seeds)).tolist()
    seed_rank = {seeds[i]: perm[i] for i in range(len(seeds))}
    root_rank = [seed_rank[_component_root(recruiter, i)] for i in range(n)]

    phi = [0] * n  # original position -> canonical index
    order: list[int] = []
    max_wave = max(waves) if n else 0
    for w in range(max_wave + 1):
        members = [i for i in range(n) if waves[i] == w]
        members.sort(
            key=lambda i: (
                root_rank[i],
                phi[recruiter[i]] if recruiter[i] != SEED_MARKER else -1,
                i,
            )
        )
        for i in members:
            phi[i] = len(order)
            order.append(i)
    new_waves = tuple(waves[i] for i in order)
    new_recr = tuple(
        SEED_MARKER if recruiter[i] == SEED_MARKER else phi[recruiter[i]] for i in order
    )
    new_deg = tuple(degrees[i] for i in order) if degrees is not None else None
    return (new_waves, new_recr, new_deg)


# ---------------------------------------------------------------------------
# Transformations on structures
# ---------------------------------------------------------------------------


def _subset_structure(structure: Structure, keep: list[int]) -> Structure:
    waves, recruiter, degrees = structure
    remap = {old: new for new, old in enumerate(keep)}
    new_waves = tuple(waves[i] for i in keep)
    new_recr = tuple(
        SEED_MARKER if recruiter[i] == SEED_MARKER else remap[recruiter[i]] for i in keep
    )
    new_deg = tuple(degrees[i] for i in keep) if degrees is not None else None
    return (new_waves, new_recr, new_deg)


def _drop_wave_structure(structure: Structure, wave: int) -> Structure:
    waves = structure[0]
    if wave < max(waves, default=0):
        raise ParameterError("can only drop the final wave of a trace")
    keep = [i for i in range(len(waves)) if waves[i] != wave]
    return _subset_structure(structure, keep)


def _subtree(recruiter: tuple[int, ...], root: int) -> set[int]:
    children = _children_lists(recruiter)
    out = set()
    stack = [root]
    while stack:
        i = stack.pop()
        out.add(i)
        stack.extend(children[i])
    return out


def _drop_root_structure(structure: Structure, root: int) -> Structure:
    gone = _subtree(structure[1], root)
    keep = [i for i in range(len(structure[0])) if i not in gone]
    return _subset_structure(structure, keep)


def _full_batches(structure: Structure, budget: int) -> list[list[int]]:
    """Recruit batches of exactly `budget` children, deepest wave first."""
    waves, recruiter, _ = structure
    children = _children_lists(recruiter)
    batches = [
        (waves[kids[0]], kids)
        for kids in children
        if len(kids) == budget
    ]
    batches.sort(key=lambda t: -t[0])
    return [kids for _, kids in batches]


def _thin_structure(
    structure: Structure, budget: int, victims: tuple[int, ...]
) -> Structure:
    gone: set[int] = set()
    for v in victims:
        gone |= _subtree(structure[1], v)
    keep = [i for i in range(len(structure[0])) if i not in gone]
    return _subset_structure(structure, keep)


def _thin_enum(structure: Structure, budget: int) -> list[tuple[Structure, float]]:
    """Exact law of thinning: independent uniform victims per full batch."""
    batches = _full_batches(structure, budget)
    if not batches:
        return [(structure, 1.0)]
    out: list[tuple[Structure, float]] = []
    p = 1.0
    for kids in batches:
        p /= len(kids)
    for choice in product(*batches):
        out.append((_thin_structure(structure, budget, choice), p))
    return out


def project_drop_wave(ct: CanonicalTrace, wave: int | None = None) -> CanonicalTrace:
    """Remove the last wave's recruits (their edges, responses, degrees)."""
    if len(ct) == 0:
        return ct
    target_wave = wave
    if target_wave is None:
        if isinstance(ct.design, LinkTracing):
            target_wave = ct.design.w
        else:
            target_wave = max(ct.waves)
    s = _drop_wave_structure(ct.structure(), target_wave)
    return CanonicalTrace(*s, design=None)


def project_drop_seed(ct: CanonicalTrace) -> CanonicalTrace:
    """Remove the highest-indexed seed's entire recruitment component."""
    roots = [
        i for i in range(len(ct)) if ct.recruiter[i] == SEED_MARKER and ct.waves[i] == 0
    ]
    if len(roots) < 2:
        raise ParameterError("dropping a seed requires at least two seeds")
    s = _drop_root_structure(ct.structure(), roots[-1])
    return CanonicalTrace(*s, design=None)


def thin_referrals(
    ct: CanonicalTrace,
    rng: np.random.Generator | random.Random,
    budget: int | None = None,
) -> CanonicalTrace:
    """Reduce a referral budget of r+1 to r by uniform victim removal.

    The last wave is thinned first, then earlier waves; a removed recruit
    takes its whole descendant subtree with it.
    """
    if budget is None:
        if not isinstance(ct.design, LinkTracing):
            raise ParameterError("thinning needs the source referral budget")
        budget = ct.design.r
    pyrng = rng if isinstance(rng, random.Random) else random.Random(
        int(rng.integers(0, 2**63 - 1))
    )
    structure = ct.structure()
    victims = tuple(
        kids[pyrng.randrange(len(kids))] for kids in _full_batches(structure, budget)
    )
    s = _thin_structure(structure, budget, victims)
    return CanonicalTrace(*s, design=None)


def rds_project(
    ct: CanonicalTrace,
    which: str,
    rng: np.random.Generator | random.Random | None = None,
    **kwargs,
) -> CanonicalTrace:
    """Apply a link-tracing transformation to a degree-reporting trace.

    Degree entries of removed nodes are dropped alongside them.
    """
    if ct.degrees is None:
        raise ParameterError("rds_project expects a trace with reported degrees")
    if which == "wave":
        return project_drop_wave(ct, kwargs.get("wave"))
    if which == "seed":
        return project_drop_seed(ct)
    if which == "thin":
        if rng is None:
            raise ParameterError("thinning requires a random stream")
        return thin_referrals(ct, rng, kwargs.get("budget"))
    raise ParameterError(f"unknown transformation {which!r}")


def counterexample_stats(ct: CanonicalTrace) -> tuple[float, int]:
    """(mean degree in the observed forest, number of connected components)."""
    n = len(ct)
    if n == 0:
        return 0.0, 0
    children = _children_lists(ct.recruiter)
    deg = [
        len(children[i]) + (0 if ct.recruiter[i] == SEED_MARKER else 1)
        for i in range(n)
    ]
    components = sum(1 for r in ct.recruiter if r == SEED_MARKER)
    return sum(deg) / n, components


# ---------------------------------------------------------------------------
# Canonical keys (AHU encoding of the recruitment forest)
# ---------------------------------------------------------------------------


def structure_canonical_key(structure: Structure) -> tuple:
    """Hashable key identifying the trace up to node relabelling.

    Sibling subtrees are ordered by their own encoding and seed components
    likewise, so isomorphic recruitment forests share a key.
    """
    waves, recruiter, degrees = structure
    children = _children_lists(recruiter)

    def enc(i: int) -> tuple:
        subs = tuple(sorted(enc(c) for c in children[i]))
        d = degrees[i] if degrees is not None else -1
        return (d, subs)

    roots = [i for i in range(len(waves)) if recruiter[i] == SEED_MARKER]
    return tuple(sorted((waves[i], enc(i)) for i in roots))


def trace_key(ct: CanonicalTrace) -> tuple:
    return structure_canonical_key(ct.structure())


# ---------------------------------------------------------------------------
# Distribution equivalence testing
# ---------------------------------------------------------------------------

_TRANSFORMS = ("drop_wave", "drop_seed", "thin")


def _apply_transform_enum(
    structure: Structure, transform: str, design: DesignSpec
) -> list[tuple[Structure, float]]:
    """Exact pushforward of one transformation applied to one structure."""
    if transform == "drop_wave":
        wave = design.w if isinstance(design, LinkTracing) else max(structure[0])
        return [(_drop_wave_structure(structure, wave), 1.0)]
    if transform == "drop_seed":
        roots = [
            i
            for i in range(len(structure[0]))
            if structure[1][i] == SEED_MARKER and structure[0][i] == 0
        ]
        p = 1.0 / len(roots)
        return [(_drop_root_structure(structure, r), p) for r in roots]
    if transform == "thin":
        if not isinstance(design, LinkTracing):
            raise ParameterError("thinning transform needs a link-tracing source")
        return _thin_enum(structure, design.r)
    raise ParameterError(f"unknown transformation {transform!r}")


def _pushforward(
    dist: dict[Structure, float], transforms: list[str], design: DesignSpec
) -> dict[Structure, float]:
    current = dist
    for t in transforms:
        nxt: dict[Structure, float] = {}
        for s, p in current.items():
            for s2, p2 in _apply_transform_enum(s, t, design):
                nxt[s2] = nxt.get(s2, 0.0) + p * p2
        current = nxt
    return current


def _key_distribution(dist: dict[Structure, float]) -> dict[tuple, float]:
    out: dict[tuple, float] = {}
    for s, p in dist.items():
        k = structure_canonical_key(s)
        out[k] = out.get(k, 0.0) + p
    return out


def _sample_structures(
    design: DesignSpec, g: Graph, n_samples: int, pyrng: random.Random
) -> dict[Structure, float]:
    """Empirical structure distribution from n_samples process runs."""
    if not isinstance(design, CHAIN_FAMILY):
        raise ParameterError("equivalence sampling supports chain-referral designs")
    adj_lists = g.adjacency_lists()
    n = g.n_nodes
    wants_degrees = isinstance(design, LinkTracing) and design.record_degrees
    deg_of = [len(a) for a in adj_lists]
    counts: Counter[Structure] = Counter()
    for _ in range(n_samples):
        nodes, waves, recruiter_pos, _ = _chain_process(design, adj_lists, n, pyrng)
        degrees = tuple(deg_of[v] for v in nodes) if wants_degrees else None
        counts[(tuple(waves), tuple(recruiter_pos), degrees)] += 1
    return {s: c / n_samples for s, c in counts.items()}


def _exact_structures(design: DesignSpec, g: Graph) -> dict[Structure, float]:
    from .designs import enumerate_traces

    out: dict[Structure, float] = {}
    for tr, p in enumerate_traces(design, g):
        s = _structure_of_trace(tr)
        out[s] = out.get(s, 0.0) + p
    return out


def tv_distance(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def distribution_equivalence_test(
    source_design: DesignSpec,
    transforms: list[str],
    target_design: DesignSpec,
    g: Graph,
    n_samples: int | None,
    rng: np.random.Generator | random.Random,
    threshold: float = 0.02,
) -> tuple[float, bool]:
    """Compare transformed source traces to target traces on a fixed graph.

    n_samples=None enumerates both trace spaces exactly; otherwise both sides
    are simulated n_samples times (the transformation randomness is mixed in
    exactly per observed structure). Returns (TV estimate, TV < threshold).
    """
    if g.n_nodes > 8:
        raise SizeError("equivalence tests need a tiny fixture (n <= 8)")
    for t in transforms:
        if t not in _TRANSFORMS:
            raise ParameterError(f"unknown transformation {t!r}")
    if n_samples is None:
        src = _exact_structures(source_design, g)
        tgt = _exact_structures(target_design, g)
    else:
        pyrng = rng if isinstance(rng, random.Random) else random.Random(
            int(rng.integers(0, 2**63 - 1))
        )
        src = _sample_structures(source_design, g, n_samples, pyrng)
        tgt = _sample_structures(target_design, g, n_samples, pyrng)
    pushed = _pushforward(src, transforms, source_design)
    tv = tv_distance(_key_distribution(pushed), _key_distribution(tgt))
    return tv, tv < threshold
