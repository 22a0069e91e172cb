"""Multi-stage decision trees solved by backward induction.

Trees alternate decision layers (minimize over actions) and chance layers
(expectation over outcomes), with losses at the leaves. The one-shot design
problem is expressible as a two-stage tree (pick a design, observe data, pick
an inference, disclose the truth); the staged referral problem picks the seed
count first and the referral budget after seeing the wave-0 reported degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .designs import (
    DesignSpec,
    Rds,
    design_label,
    observed_data,
    run_design_from_seeds,
)
from .evaluation import (
    EvalConfig,
    LossSpec,
    POINTWISE,
    bayes_rule,
    bayes_rule_discrete,
    expected_posterior_loss,
    exact_outcome_distribution,
    loss_value,
    replicate_seeds,
)
from .graph import ParameterError
from .inference import InferenceConfig, posterior_sample


class StructureError(ValueError):
    """Malformed decision tree."""


@dataclass
class Leaf:
    loss: float


@dataclass
class ChanceNode:
    outcomes: list[tuple[str, float, "TreeNode"]]


@dataclass
class DecisionNode:
    actions: list[tuple[str, "TreeNode"]]


TreeNode = Leaf | ChanceNode | DecisionNode


@dataclass
class Policy:
    """Chosen action (by index and label) for every reachable decision history."""

    choices: dict[tuple[str, ...], tuple[int, str]]
    value: float

    def action_at(self, history: tuple[str, ...]) -> str:
        return self.choices[history][1]


def validate_tree(node: TreeNode, under_decision: bool | None = None) -> None:
    if isinstance(node, Leaf):
        if not math.isfinite(node.loss):
            raise StructureError("leaf loss must be finite")
        return
    if isinstance(node, DecisionNode):
        if under_decision is True:
            raise StructureError("decision layer directly under a decision layer")
        if not node.actions:
            raise StructureError("decision node without actions")
        for _, child in node.actions:
            validate_tree(child, under_decision=True)
        return
    if isinstance(node, ChanceNode):
        if under_decision is False:
            raise StructureError("chance layer directly under a chance layer")
        if not node.outcomes:
            raise StructureError("chance node without outcomes")
        total = sum(p for _, p, _ in node.outcomes)
        if abs(total - 1.0) > 1e-9:
            raise StructureError(f"chance probabilities sum to {total}, not 1")
        if any(p < 0 for _, p, _ in node.outcomes):
            raise StructureError("negative chance probability")
        for _, _, child in node.outcomes:
            validate_tree(child, under_decision=False)
        return
    raise StructureError(f"unknown node {node!r}")


def backward_induction(root: TreeNode) -> Policy:
    """Dynamic-programming solution: expectations at chance layers, minima at
    decision layers (ties broken by the lowest action index)."""
    validate_tree(root)
    choices: dict[tuple[str, ...], tuple[int, str]] = {}

    def value(node: TreeNode, history: tuple[str, ...]) -> float:
        if isinstance(node, Leaf):
            return node.loss
        if isinstance(node, ChanceNode):
            return sum(
                p * value(child, history + (label,))
                for label, p, child in node.outcomes
                if p > 0
            )
        best_idx, best_val = 0, math.inf
        for idx, (label, child) in enumerate(node.actions):
            v = value(child, history + (label,))
            if v < best_val - 0.0:
                best_idx, best_val = idx, v
        choices[history] = (best_idx, node.actions[best_idx][0])
        return best_val

    root_value = value(root, ())
    return Policy(choices=choices, value=root_value)


def enumerate_policies_value(root: TreeNode) -> float:
    """Brute-force check: minimal expected loss over all deterministic policies."""
    validate_tree(root)
    decisions: list[tuple[tuple[str, ...], DecisionNode]] = []

    def collect(node: TreeNode, history: tuple[str, ...]) -> None:
        if isinstance(node, Leaf):
            return
        if isinstance(node, DecisionNode):
            decisions.append((history, node))
            for label, child in node.actions:
                collect(child, history + (label,))
            return
        for label, _, child in node.outcomes:
            collect(child, history + (label,))

    collect(root, ())
    addresses = [h for h, _ in decisions]
    action_counts = [len(n.actions) for _, n in decisions]

    def evaluate(node: TreeNode, history: tuple[str, ...], assignment) -> float:
        if isinstance(node, Leaf):
            return node.loss
        if isinstance(node, ChanceNode):
            return sum(
                p * evaluate(child, history + (label,), assignment)
                for label, p, child in node.outcomes
                if p > 0
            )
        idx = assignment[history]
        label, child = node.actions[idx]
        return evaluate(child, history + (label,), assignment)

    best = math.inf
    for combo in product(*(range(c) for c in action_counts)):
        assignment = dict(zip(addresses, combo))
        best = min(best, evaluate(root, (), assignment))
    return best


def export_policy(policy: Policy) -> dict[str, str]:
    """JSON-ready map from history key to chosen action label."""
    return {" / ".join(h) if h else "<root>": a for h, (_, a) in policy.choices.items()}


# ---------------------------------------------------------------------------
# Lindley's problem as a two-stage tree (exact, tiny N)
# ---------------------------------------------------------------------------


def lindley_as_two_stage(
    candidates: list[DesignSpec],
    spec: LossSpec,
    config: InferenceConfig,
    action_grid: list[float] | None = None,
) -> DecisionNode:
    """Design-decision -> data-chance -> inference-decision -> truth-chance tree.

    Chance probabilities are the exact prior predictive over observations
    (point priors, tiny N); the inference layer defaults to the Bayes rule of
    the loss, optionally extended with a grid of alternative actions.
    """
    if not candidates:
        raise ParameterError("no candidate designs")
    if not isinstance(spec, POINTWISE):
        raise ParameterError("two-stage construction supports pointwise losses")
    design_actions: list[tuple[str, TreeNode]] = []
    for design in candidates:
        outcome = exact_outcome_distribution(design, config)
        chance_outcomes: list[tuple[str, float, TreeNode]] = []
        for idx, (key, cell) in enumerate(sorted(outcome.items(), key=lambda kv: repr(kv[0]))):
            w_obs = sum(cell.values())
            values = np.array(sorted(cell))
            probs = np.array([cell[v] for v in sorted(cell)]) / w_obs
            actions = [bayes_rule_discrete(spec, values, probs)]
            if action_grid:
                actions += [a for a in action_grid]
            act_nodes: list[tuple[str, TreeNode]] = []
            for a in actions:
                truth = ChanceNode(
                    outcomes=[
                        (f"q={v:.12g}", float(p), Leaf(loss_value(spec, a, float(v))))
                        for v, p in zip(values, probs)
                    ]
                )
                act_nodes.append((f"a={a:.12g}", truth))
            chance_outcomes.append((f"z{idx}", float(w_obs), DecisionNode(act_nodes)))
        design_actions.append((design_label(design), ChanceNode(chance_outcomes)))
    return DecisionNode(design_actions)


# ---------------------------------------------------------------------------
# Staged referral optimization (seed count, then referral budget)
# ---------------------------------------------------------------------------


@dataclass
class StagedResult:
    tree: DecisionNode
    policy: Policy
    w0_choice: int
    m_by_bin: dict[str, int]
    value: float
    cell_detail: dict[tuple[int, str, int], tuple[float, float, int]]  # mean, se, count


def _degree_bin_edges(
    config: InferenceConfig, seed: int, n_worlds: int = 200
) -> np.ndarray:
    """Quartile edges of the node-degree law under the model priors."""
    from .evaluation import draw_prior_world

    degs: list[int] = []
    for rng in replicate_seeds(seed ^ 0xB1A5, n_worlds):
        _, g, _, _ = draw_prior_world(config, rng)
        degs.extend(int(d) for d in g.degrees)
    return np.quantile(np.asarray(degs), [0.25, 0.5, 0.75])


def _bin_key(degrees: list[int], edges: np.ndarray, stat: str) -> str:
    if stat == "mean_degree":
        return f"mean<{int(np.searchsorted(edges, float(np.mean(degrees)), side='right'))}>"
    if stat == "full_multiset":
        return "deg" + ",".join(str(d) for d in sorted(degrees))
    bins = sorted(int(np.searchsorted(edges, d, side="right")) for d in degrees)
    return "q" + "".join(str(b) for b in bins)


def sequential_rds_optimize(
    w0_grid: list[int],
    m_grid: list[int],
    target_n: int,
    spec: LossSpec,
    config: EvalConfig,
    k_replicates: int,
    seed: int,
    bin_stat: str = "quartile_multiset",
) -> StagedResult:
    """Choose the seed count first, the referral budget after seeing the
    wave-0 reported degrees (summarized into bins); solved by backward
    induction over Monte Carlo stage estimates."""
    if not w0_grid or not m_grid:
        raise ParameterError("sequential grids must be nonempty")
    inf = config.inference
    n = inf.n_total
    edges = _degree_bin_edges(inf, seed)
    cell_losses: dict[tuple[int, str, int], list[float]] = {}
    bin_counts: dict[tuple[int, str], int] = {}
    from .evaluation import draw_prior_world

    for w0 in w0_grid:
        for rng in replicate_seeds(seed ^ (w0 << 16), k_replicates):
            alpha, g, gamma, y = draw_prior_world(inf, rng)
            seeds = sorted(rng.choice(n, size=w0, replace=False).tolist())
            key = _bin_key([g.degree(v) for v in seeds], edges, bin_stat)
            bin_counts[(w0, key)] = bin_counts.get((w0, key), 0) + 1
            for m in m_grid:
                sub = np.random.default_rng(rng.integers(0, 2**63 - 1))
                design = Rds(m=m, w0=w0, target_n=target_n)
                trace = run_design_from_seeds(design, g, y, seeds, sub)
                obs = observed_data(trace, g, y)
                res = posterior_sample(obs, inf, sub)
                q_draws = res.q_est if config.estimand == "est" else res.q_pred
                loss = expected_posterior_loss(spec, q_draws)
                cell_losses.setdefault((w0, key, m), []).append(loss)

    cell_detail = {}
    for (w0, key, m), losses in cell_losses.items():
        arr = np.asarray(losses)
        se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        cell_detail[(w0, key, m)] = (float(arr.mean()), se, len(arr))

    w0_actions: list[tuple[str, TreeNode]] = []
    for w0 in w0_grid:
        keys = sorted(k for (w, k) in bin_counts if w == w0)
        outcomes: list[tuple[str, float, TreeNode]] = []
        for key in keys:
            p = bin_counts[(w0, key)] / k_replicates
            m_actions = [
                (f"m={m}", Leaf(cell_detail[(w0, key, m)][0])) for m in m_grid
            ]
            outcomes.append((key, p, DecisionNode(m_actions)))
        w0_actions.append((f"w0={w0}", ChanceNode(outcomes)))
    tree = DecisionNode(w0_actions)
    policy = backward_induction(tree)
    w0_idx, w0_label = policy.choices[()]
    w0_choice = w0_grid[w0_idx]
    m_by_bin = {}
    for hist, (idx, label) in policy.choices.items():
        if len(hist) == 2 and hist[0] == w0_label:
            m_by_bin[hist[1]] = m_grid[idx]
    return StagedResult(
        tree=tree,
        policy=policy,
        w0_choice=w0_choice,
        m_by_bin=m_by_bin,
        value=policy.value,
        cell_detail=cell_detail,
    )
