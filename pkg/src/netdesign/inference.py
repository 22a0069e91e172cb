"""Posterior inference for (alpha, gamma, unobserved graph, unobserved responses).

The joint model factorizes as

    p(G | alpha) p(alpha) p(I | G, design) p(Y | G, gamma) p(gamma),

observed through a sampling trace. The sampler is a Metropolis-within-Gibbs
chain over completions of the unobserved adjacency (degree-constrained where
degrees were reported), the graph parameter, the unobserved responses, and
the MRF parameters. Doubly-intractable updates use the exchange construction
with auxiliary response draws; on small graphs the auxiliary draw is exact,
which also lets the adjacency updates carry the response-model factor so the
chain targets the full joint posterior. An exhaustive-enumeration oracle
computes the same posterior exactly on tiny populations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .designs import (
    CHAIN_FAMILY,
    DesignSpec,
    Ego,
    ObservedData,
    Snowball,
    rds_log_likelihood,
    selection_log_prob,
)
from .graph import (
    BetaErPrior,
    ErdosRenyi,
    Graph,
    GraphPrior,
    GridPrior,
    ParameterError,
    PointMassPrior,
    SizeError,
    gen_er,
    pair_index,
)
from .mrf import (
    GammaBox,
    MrfParams,
    exact_mrf_dist,
    exact_mrf_sample,
    gibbs_sample,
    gibbs_sweep,
    state_stats,
    state_table,
)

MAX_EXACT_ORACLE_NODES = 6


class InfeasibleError(ValueError):
    """Reported degrees cannot be satisfied by any completion."""


@dataclass
class InferenceConfig:
    """Chain controls, priors and oracle settings for one inference run."""

    n_total: int
    graph_prior: GraphPrior
    gamma_prior: GammaBox
    burn_in: int = 500
    n_draws: int = 2000
    thinning: int = 1
    graph_moves_per_iter: int | None = None
    aux_sweeps: int = 200
    exact_aux_threshold: int = 15
    mrf_in_graph_update: str = "auto"  # "auto" | "on" | "off"
    grid_points: int = 41
    predictive_sweeps: int = 60
    gamma_step: float = 0.25
    track_cells: bool = False  # record (G_EXC, Y_EXC) cell keys per draw
    compute_q_est: bool = True

    def __post_init__(self):
        if self.burn_in < 0 or self.n_draws < 1 or self.thinning < 1:
            raise ParameterError("bad chain controls")
        if self.mrf_in_graph_update not in ("auto", "on", "off"):
            raise ParameterError("mrf_in_graph_update must be auto/on/off")

    def mrf_factor_enabled(self) -> bool:
        if self.mrf_in_graph_update == "on":
            return True
        if self.mrf_in_graph_update == "off":
            return False
        return self.n_total <= self.exact_aux_threshold


@dataclass
class PosteriorDraw:
    """One retained draw from the chain."""

    alpha: float
    gamma: MrfParams
    g_exc: tuple[int, ...]  # indicator per unobserved pair
    y_exc: dict[int, int]
    q_est: float
    q_pred: float


@dataclass
class PosteriorResult:
    """Column-wise draw storage plus the layout of the unobserved pairs."""

    alpha: np.ndarray
    gamma0: np.ndarray
    gamma1: np.ndarray
    q_pred: np.ndarray
    q_est: np.ndarray
    unobs_pairs: list[tuple[int, int]]
    cells: list[tuple[tuple[int, ...], tuple[int, ...]]] | None = None
    accept_graph: float = 0.0
    accept_gamma: float = 0.0


# ---------------------------------------------------------------------------
# Prior draws
# ---------------------------------------------------------------------------


def draw_alpha(prior: GraphPrior, rng: np.random.Generator) -> float:
    if isinstance(prior, PointMassPrior):
        if not isinstance(prior.model, ErdosRenyi):
            raise ParameterError("posterior inference supports Erdos-Renyi graphs only")
        return prior.model.alpha
    if isinstance(prior, BetaErPrior):
        return float(rng.beta(prior.tau1, prior.tau2))
    if isinstance(prior, GridPrior):
        idx = int(rng.choice(len(prior.models), p=np.asarray(prior.weights)))
        model = prior.models[idx]
        if not isinstance(model, ErdosRenyi):
            raise ParameterError("posterior inference supports Erdos-Renyi graphs only")
        return model.alpha
    raise ParameterError(f"unknown graph prior {prior!r}")


def draw_gamma(box: GammaBox, rng: np.random.Generator) -> MrfParams:
    g0 = float(rng.uniform(box.g0_min, box.g0_max)) if box.g0_max > box.g0_min else box.g0_min
    g1 = float(rng.uniform(box.g1_min, box.g1_max)) if box.g1_max > box.g1_min else box.g1_min
    return MrfParams(g0, g1)


# ---------------------------------------------------------------------------
# Chain state
# ---------------------------------------------------------------------------


@dataclass
class ChainState:
    adj: np.ndarray  # full completion, symmetric bool, writable
    alpha: float
    gamma: MrfParams
    y: np.ndarray  # full response vector, observed entries clamped
    design_loglik: float
    n_accept_graph: int = 0
    n_prop_graph: int = 0
    n_accept_gamma: int = 0
    n_prop_gamma: int = 0


@dataclass
class _Problem:
    """Precomputed layout of one observation for the sampler."""

    obs: ObservedData
    n: int
    design: DesignSpec
    unobs_pairs: list[tuple[int, int]]
    free_pair_ids: list[int]  # indices into unobs_pairs, no constrained endpoint
    constrained: list[int]  # nodes with reported degrees
    required_unobs_deg: dict[int, int]  # edges each constrained node needs among unobserved pairs
    unobs_at: dict[int, list[int]]  # node -> indices of incident unobserved pairs
    observed_idx: list[int]  # unobserved response node ids
    design_relevant: bool  # whether completions can change the design factor


def build_problem(obs: ObservedData, config: InferenceConfig) -> _Problem:
    n = config.n_total
    if obs.n_nodes != n:
        raise ParameterError("config population size disagrees with observation")
    design = obs.trace.design
    if design is None:
        raise ParameterError("observation trace carries no design")
    status = obs.pair_status
    unobs_pairs = [p for p in pair_index(n) if p not in status]
    constrained = sorted(obs.d_inc)
    required: dict[int, int] = {}
    for v in constrained:
        observed_inc = sum(
            1
            for (i, j), present in status.items()
            if present and (i == v or j == v)
        )
        req = obs.d_inc[v] - observed_inc
        slots = sum(1 for (i, j) in unobs_pairs if i == v or j == v)
        if req < 0 or req > slots:
            raise InfeasibleError(
                f"node {v}: needs {req} unobserved edges with {slots} slots"
            )
        required[v] = req
    cset = set(constrained)
    free_pair_ids = [
        k for k, (i, j) in enumerate(unobs_pairs) if i not in cset and j not in cset
    ]
    unobs_at: dict[int, list[int]] = {}
    for k, (i, j) in enumerate(unobs_pairs):
        unobs_at.setdefault(i, []).append(k)
        unobs_at.setdefault(j, []).append(k)
    sampled = set(obs.trace.nodes)
    design_relevant = isinstance(design, CHAIN_FAMILY) and any(
        i in sampled or j in sampled for i, j in unobs_pairs
    )
    observed_y = set(obs.y_inc)
    return _Problem(
        obs=obs,
        n=n,
        design=design,
        unobs_pairs=unobs_pairs,
        free_pair_ids=free_pair_ids,
        constrained=constrained,
        required_unobs_deg=required,
        unobs_at=unobs_at,
        observed_idx=[v for v in range(n) if v not in observed_y],
        design_relevant=design_relevant,
    )


def _design_loglik(problem: _Problem, adj: np.ndarray) -> float:
    design = problem.design
    trace = problem.obs.trace
    if isinstance(design, CHAIN_FAMILY):
        return rds_log_likelihood(trace, Graph(adj.copy()), design)
    return selection_log_prob(trace, design)


def _initial_completion(
    problem: _Problem, rng: np.random.Generator
) -> np.ndarray:
    """A feasible completion: observed statuses fixed, degree deficits met."""
    n = problem.n
    status = problem.obs.pair_status
    base = np.zeros((n, n), dtype=bool)
    for (i, j), present in status.items():
        if present:
            base[i, j] = base[j, i] = True

    def deficits(adj):
        return {
            v: problem.required_unobs_deg[v]
            - int(
                sum(
                    adj[problem.unobs_pairs[k][0], problem.unobs_pairs[k][1]]
                    for k in problem.unobs_at.get(v, [])
                )
            )
            for v in problem.constrained
        }

    for attempt in range(300):
        adj = base.copy()
        need = dict(problem.required_unobs_deg)
        perm = rng.permutation(len(problem.constrained))
        order = [problem.constrained[i] for i in perm]
        ok = True
        for v in sorted(order, key=lambda x: -need[x]):
            while need[v] > 0:
                cands = []
                for k in problem.unobs_at.get(v, []):
                    i, j = problem.unobs_pairs[k]
                    u = j if i == v else i
                    if adj[v, u]:
                        continue
                    if u in need and need[u] <= 0:
                        continue
                    cands.append(u)
                if not cands:
                    ok = False
                    break
                # prefer partners that still need edges, then unconstrained
                needy = [u for u in cands if u in need and need[u] > 0]
                pool = needy if needy else [u for u in cands if u not in need] or cands
                u = int(pool[rng.integers(len(pool))])
                adj[v, u] = adj[u, v] = True
                need[v] -= 1
                if u in need:
                    need[u] -= 1
            if not ok:
                break
        if ok and all(x == 0 for x in need.values()):
            return adj
    raise InfeasibleError("could not construct a degree-feasible completion")


def _init_state(
    problem: _Problem, config: InferenceConfig, rng: np.random.Generator
) -> ChainState:
    adj = _initial_completion(problem, rng)
    prior = config.graph_prior
    if isinstance(prior, PointMassPrior):
        alpha = prior.model.alpha
    elif isinstance(prior, BetaErPrior):
        alpha = prior.tau1 / (prior.tau1 + prior.tau2)
    else:
        alpha = float(
            sum(w * m.alpha for w, m in zip(prior.weights, prior.models))
        )
    box = config.gamma_prior
    gamma = MrfParams(0.5 * (box.g0_min + box.g0_max), 0.5 * (box.g1_min + box.g1_max))
    y = np.zeros(problem.n, dtype=int)
    for v, val in problem.obs.y_inc.items():
        y[v] = val
    return ChainState(
        adj=adj,
        alpha=alpha,
        gamma=gamma,
        y=y,
        design_loglik=_design_loglik(problem, adj),
    )


# ---------------------------------------------------------------------------
# Move machinery
# ---------------------------------------------------------------------------


def _edge_logratio(alpha: float, adding: bool) -> float:
    if alpha <= 0.0 or alpha >= 1.0:
        return float("-inf") if (adding != (alpha >= 1.0)) else 0.0
    lr = math.log(alpha) - math.log1p(-alpha)
    return lr if adding else -lr


def _mrf_exchange_factor(
    state: ChainState,
    new_adj: np.ndarray,
    touched: list[tuple[int, int]],
    config: InferenceConfig,
    rng: np.random.Generator,
) -> float:
    """Exchange-corrected log-factor for the response model under a graph move.

    touched lists the pairs whose status flips. The auxiliary response vector
    is drawn under the proposed graph; unnormalized log-weight differences
    localize to the flipped pairs.
    """
    gamma = state.gamma
    if gamma.gamma1 == 0.0:
        return 0.0  # response factor independent of the graph
    g_new = Graph(new_adj.copy())
    n = state.y.shape[0]
    if n <= config.exact_aux_threshold:
        y_star = exact_mrf_sample(g_new, gamma, rng)
    else:
        y_star = gibbs_sample(g_new, gamma, config.aux_sweeps, rng, init=state.y)
    total = 0.0
    y = state.y
    for i, j in touched:
        sign = 1.0 if new_adj[i, j] else -1.0
        total += sign * gamma.gamma1 * (y[i] * y[j] - y_star[i] * y_star[j])
    return total


def _graph_logratio_pairs(
    state: ChainState, flips: list[tuple[int, int]]
) -> float:
    """Log p(G'|alpha) - log p(G|alpha) for a set of pair flips (ER)."""
    total = 0.0
    for i, j in flips:
        total += _edge_logratio(state.alpha, adding=not state.adj[i, j])
    return total


def _propose_graph_move(
    state: ChainState, problem: _Problem, rng: np.random.Generator
) -> list[tuple[int, int]] | None:
    """Return the pairs to flip, or None when the move draw is a no-op."""
    kinds = []
    if problem.free_pair_ids:
        kinds.append("toggle")
    if problem.constrained:
        kinds.append("swap")
        kinds.append("rewire")
    if not kinds:
        return None
    kind = kinds[int(rng.integers(len(kinds)))]
    unobs = problem.unobs_pairs
    adj = state.adj
    if kind == "toggle":
        k = problem.free_pair_ids[int(rng.integers(len(problem.free_pair_ids)))]
        return [unobs[k]]
    if kind == "swap":
        v = problem.constrained[int(rng.integers(len(problem.constrained)))]
        inc = problem.unobs_at.get(v, [])
        cur = [k for k in inc if adj[unobs[k][0], unobs[k][1]]]
        non = [k for k in inc if not adj[unobs[k][0], unobs[k][1]]]
        if not cur or not non:
            return None
        k_off = cur[int(rng.integers(len(cur)))]
        k_on = non[int(rng.integers(len(non)))]
        return [unobs[k_off], unobs[k_on]]
    # rewire: swap endpoints of two unobserved edges, preserving all degrees
    cur_edges = [k for k, (i, j) in enumerate(unobs) if adj[i, j]]
    if len(cur_edges) < 2:
        return None
    a, b = rng.choice(len(cur_edges), size=2, replace=False)
    (i, j) = unobs[cur_edges[int(a)]]
    (k, l) = unobs[cur_edges[int(b)]]
    if rng.random() < 0.5:
        k, l = l, k
    if len({i, j, k, l}) < 4:
        return None
    new1, new2 = (min(i, l), max(i, l)), (min(k, j), max(k, j))
    status = problem.obs.pair_status
    if new1 in status or new2 in status:
        return None
    if adj[new1] or adj[new2]:
        return None
    return [(i, j), (k, l), new1, new2]


def _degrees_ok(state: ChainState, problem: _Problem, flips: list[tuple[int, int]]) -> bool:
    delta: dict[int, int] = {}
    for i, j in flips:
        d = -1 if state.adj[i, j] else 1
        for v in (i, j):
            if v in problem.required_unobs_deg:
                delta[v] = delta.get(v, 0) + d
    return all(x == 0 for x in delta.values())


def impute_graph_step(
    state: ChainState,
    problem: _Problem,
    config: InferenceConfig,
    rng: np.random.Generator,
    n_moves: int | None = None,
) -> ChainState:
    """Metropolis updates of the unobserved adjacency plus the alpha draw."""
    if n_moves is None:
        n_moves = config.graph_moves_per_iter or max(1, min(len(problem.unobs_pairs), 40))
    use_mrf = config.mrf_factor_enabled()
    for _ in range(n_moves):
        if not problem.unobs_pairs:
            break
        flips = _propose_graph_move(state, problem, rng)
        if flips is None:
            continue
        state.n_prop_graph += 1
        if not _degrees_ok(state, problem, flips):
            continue
        logr = _graph_logratio_pairs(state, flips)
        new_adj = state.adj.copy()
        for i, j in flips:
            val = not new_adj[i, j]
            new_adj[i, j] = new_adj[j, i] = val
        if problem.design_relevant:
            new_design_ll = _design_loglik(problem, new_adj)
            logr += new_design_ll - state.design_loglik
        else:
            new_design_ll = state.design_loglik
        if logr == float("-inf"):
            continue
        if use_mrf:
            logr += _mrf_exchange_factor(state, new_adj, flips, config, rng)
        if logr >= 0 or rng.random() < math.exp(logr):
            state.adj = new_adj
            state.design_loglik = new_design_ll
            state.n_accept_graph += 1
    _update_alpha(state, config, rng)
    return state


def _update_alpha(
    state: ChainState, config: InferenceConfig, rng: np.random.Generator
) -> None:
    prior = config.graph_prior
    n = state.adj.shape[0]
    m_pairs = n * (n - 1) // 2
    e = int(np.triu(state.adj, 1).sum())
    if isinstance(prior, PointMassPrior):
        state.alpha = prior.model.alpha
    elif isinstance(prior, BetaErPrior):
        state.alpha = float(rng.beta(prior.tau1 + e, prior.tau2 + m_pairs - e))
    elif isinstance(prior, GridPrior):
        logs = []
        for w, model in zip(prior.weights, prior.models):
            a = model.alpha
            if w <= 0:
                logs.append(float("-inf"))
                continue
            if a <= 0.0:
                logs.append(math.log(w) if e == 0 else float("-inf"))
            elif a >= 1.0:
                logs.append(math.log(w) if e == m_pairs else float("-inf"))
            else:
                logs.append(math.log(w) + e * math.log(a) + (m_pairs - e) * math.log1p(-a))
        logs = np.asarray(logs)
        p = np.exp(logs - logs.max())
        p /= p.sum()
        state.alpha = prior.models[int(rng.choice(len(p), p=p))].alpha
    else:
        raise ParameterError(f"unknown graph prior {prior!r}")


def update_y_exc(
    state: ChainState, problem: _Problem, rng: np.random.Generator
) -> None:
    """One Gibbs sweep over unobserved responses."""
    if not problem.observed_idx:
        return
    g0, g1 = state.gamma.gamma0, state.gamma.gamma1
    adj = state.adj
    y = state.y
    u = rng.random(len(problem.observed_idx))
    for t, i in enumerate(problem.observed_idx):
        s = int(y[adj[i]].sum())
        p1 = 1.0 / (1.0 + math.exp(-(g0 + g1 * s)))
        y[i] = 1 if u[t] < p1 else 0


def update_gamma_step(
    state: ChainState,
    problem: _Problem,
    config: InferenceConfig,
    rng: np.random.Generator,
) -> ChainState:
    """Exchange-algorithm update of the MRF parameters on the completed graph."""
    box = config.gamma_prior
    if box.is_point:
        state.gamma = box.point_params()
        return state
    scale0 = config.gamma_step * max(box.g0_max - box.g0_min, 1e-12)
    scale1 = config.gamma_step * max(box.g1_max - box.g1_min, 1e-12)
    g0p = state.gamma.gamma0 + float(rng.normal(0.0, scale0)) if box.g0_max > box.g0_min else box.g0_min
    g1p = state.gamma.gamma1 + float(rng.normal(0.0, scale1)) if box.g1_max > box.g1_min else box.g1_min
    prop = MrfParams(g0p, g1p)
    state.n_prop_gamma += 1
    if not box.contains(prop):
        return state
    g = Graph(state.adj.copy())
    if problem.n <= config.exact_aux_threshold:
        y_star = exact_mrf_sample(g, prop, rng)
    else:
        y_star = gibbs_sample(g, prop, config.aux_sweeps, rng, init=state.y)
    v0, v1 = _stats_on_adj(state.y, state.adj)
    v0s, v1s = _stats_on_adj(y_star, state.adj)
    d0 = prop.gamma0 - state.gamma.gamma0
    d1 = prop.gamma1 - state.gamma.gamma1
    logr = d0 * (v0 - v0s) + d1 * (v1 - v1s)
    if logr >= 0 or rng.random() < math.exp(logr):
        state.gamma = prop
        state.n_accept_gamma += 1
    return state


def _stats_on_adj(y: np.ndarray, adj: np.ndarray) -> tuple[int, int]:
    v0 = int(y.sum())
    v1 = int((np.outer(y, y) & adj).sum()) // 2
    return v0, v1


def _simulate_q_est(
    alpha: float,
    gamma: MrfParams,
    n: int,
    config: InferenceConfig,
    rng: np.random.Generator,
) -> float:
    g = gen_er(n, alpha, rng)
    if n <= config.exact_aux_threshold:
        y = exact_mrf_sample(g, gamma, rng)
    else:
        y = gibbs_sample(g, gamma, config.predictive_sweeps, rng)
    return float(np.mean(y))


def posterior_sample(
    obs: ObservedData, config: InferenceConfig, rng: np.random.Generator
) -> PosteriorResult:
    """Run the chain and return the retained draws column-wise."""
    problem = build_problem(obs, config)
    state = _init_state(problem, config, rng)
    n_iter = config.burn_in + config.n_draws * config.thinning
    alphas = np.empty(config.n_draws)
    g0s = np.empty(config.n_draws)
    g1s = np.empty(config.n_draws)
    qpred = np.empty(config.n_draws)
    qest = np.full(config.n_draws, np.nan)
    cells = [] if config.track_cells else None
    kept = 0
    for it in range(n_iter):
        impute_graph_step(state, problem, config, rng)
        update_y_exc(state, problem, rng)
        update_gamma_step(state, problem, config, rng)
        if it >= config.burn_in and (it - config.burn_in) % config.thinning == 0:
            alphas[kept] = state.alpha
            g0s[kept] = state.gamma.gamma0
            g1s[kept] = state.gamma.gamma1
            qpred[kept] = float(state.y.mean())
            if config.compute_q_est:
                qest[kept] = _simulate_q_est(
                    state.alpha, state.gamma, problem.n, config, rng
                )
            if cells is not None:
                bits = tuple(
                    int(state.adj[i, j]) for i, j in problem.unobs_pairs
                )
                ybits = tuple(int(state.y[v]) for v in problem.observed_idx)
                cells.append((bits, ybits))
            kept += 1
    return PosteriorResult(
        alpha=alphas,
        gamma0=g0s,
        gamma1=g1s,
        q_pred=qpred,
        q_est=qest,
        unobs_pairs=problem.unobs_pairs,
        cells=cells,
        accept_graph=state.n_accept_graph / max(1, state.n_prop_graph),
        accept_gamma=state.n_accept_gamma / max(1, state.n_prop_gamma),
    )


def posterior_draws_iter(
    obs: ObservedData, config: InferenceConfig, rng: np.random.Generator
):
    """PosteriorDraw view of posterior_sample, for callers that want objects."""
    cfg_cells = config.track_cells
    config.track_cells = True
    res = posterior_sample(obs, config, rng)
    config.track_cells = cfg_cells
    problem_nodes = [v for v in range(config.n_total) if v not in obs.y_inc]
    for t in range(len(res.alpha)):
        bits, ybits = res.cells[t]
        yield PosteriorDraw(
            alpha=float(res.alpha[t]),
            gamma=MrfParams(float(res.gamma0[t]), float(res.gamma1[t])),
            g_exc=bits,
            y_exc={v: b for v, b in zip(problem_nodes, ybits)},
            q_est=float(res.q_est[t]),
            q_pred=float(res.q_pred[t]),
        )


# ---------------------------------------------------------------------------
# Exact oracle
# ---------------------------------------------------------------------------


@dataclass
class ParamGrids:
    alpha: np.ndarray
    alpha_prior: np.ndarray
    g0: np.ndarray
    g1: np.ndarray

    @property
    def alpha_edges(self) -> np.ndarray:
        return _cell_edges(self.alpha)

    @property
    def g0_edges(self) -> np.ndarray:
        return _cell_edges(self.g0)

    @property
    def g1_edges(self) -> np.ndarray:
        return _cell_edges(self.g1)


def _cell_edges(centers: np.ndarray) -> np.ndarray:
    c = np.asarray(centers, dtype=float)
    if len(c) == 1:
        return np.array([-np.inf, np.inf])
    mid = 0.5 * (c[1:] + c[:-1])
    return np.concatenate(([-np.inf], mid, [np.inf]))


def make_grids(config: InferenceConfig) -> ParamGrids:
    """Finite (alpha, gamma) grids representing the priors for the oracle."""
    m = config.grid_points
    prior = config.graph_prior
    if isinstance(prior, PointMassPrior):
        alphas = np.array([prior.model.alpha])
        weights = np.array([1.0])
    elif isinstance(prior, GridPrior):
        alphas = np.array([mod.alpha for mod in prior.models])
        weights = np.asarray(prior.weights, dtype=float)
    else:
        centers = (np.arange(m) + 0.5) / m
        dens = np.array(
            [
                math.exp(
                    (prior.tau1 - 1) * math.log(a) + (prior.tau2 - 1) * math.log1p(-a)
                )
                for a in centers
            ]
        )
        alphas = centers
        weights = dens / dens.sum()
    box = config.gamma_prior
    if box.g0_max > box.g0_min:
        g0 = box.g0_min + (np.arange(m) + 0.5) / m * (box.g0_max - box.g0_min)
    else:
        g0 = np.array([box.g0_min])
    if box.g1_max > box.g1_min:
        g1 = box.g1_min + (np.arange(m) + 0.5) / m * (box.g1_max - box.g1_min)
    else:
        g1 = np.array([box.g1_min])
    return ParamGrids(alpha=alphas, alpha_prior=weights, g0=g0, g1=g1)


@dataclass
class ExactPosterior:
    """Exhaustively enumerated posterior on finite parameter grids."""

    grids: ParamGrids
    unobs_pairs: list[tuple[int, int]]
    y_exc_nodes: list[int]
    completions: list[tuple[int, ...]]
    alpha_marg: np.ndarray
    gamma_marg: np.ndarray  # (len(g0), len(g1))
    cell_marg: dict[tuple[tuple[int, ...], tuple[int, ...]], float]
    q_pred_marg: dict[float, float]
    q_est_marg: dict[float, float] | None
    joint_ag: np.ndarray  # (len(alpha), len(g0), len(g1))

    @property
    def gamma0_marg(self) -> np.ndarray:
        return self.gamma_marg.sum(axis=1)

    @property
    def gamma1_marg(self) -> np.ndarray:
        return self.gamma_marg.sum(axis=0)


def _feasible_completions(problem: _Problem) -> list[tuple[int, ...]]:
    u = len(problem.unobs_pairs)
    if u > 20:
        raise SizeError("too many unobserved pairs for exact enumeration")
    bits = state_table(u) if u > 0 else np.zeros((1, 0), dtype=int)
    ok = np.ones(bits.shape[0], dtype=bool)
    for v in problem.constrained:
        cols = [k for k in problem.unobs_at.get(v, [])]
        wanted = problem.required_unobs_deg[v]
        count = bits[:, cols].sum(axis=1) if cols else np.zeros(bits.shape[0], dtype=int)
        ok &= count == wanted
    feas = [tuple(int(b) for b in bits[s]) for s in np.flatnonzero(ok)]
    if not feas:
        raise InfeasibleError("no completion satisfies the reported degrees")
    return feas


def _adj_from_completion(problem: _Problem, bits: tuple[int, ...]) -> np.ndarray:
    n = problem.n
    adj = np.zeros((n, n), dtype=bool)
    for (i, j), present in problem.obs.pair_status.items():
        if present:
            adj[i, j] = adj[j, i] = True
    for k, b in enumerate(bits):
        if b:
            i, j = problem.unobs_pairs[k]
            adj[i, j] = adj[j, i] = bool(b)
    return adj


_QEST_LAW_CACHE: dict = {}


def q_est_law(n: int, g0_grid: np.ndarray, g1_grid: np.ndarray) -> np.ndarray:
    """P(mean of a fresh response vector = j/n | alpha-class, gamma), summed per
    edge-count class: returns U[E, i0, i1, j] with sum over graphs of that size."""
    key = (n, tuple(np.round(g0_grid, 12)), tuple(np.round(g1_grid, 12)))
    if key in _QEST_LAW_CACHE:
        return _QEST_LAW_CACHE[key]
    from .graph import enumerate_graphs

    m_pairs = n * (n - 1) // 2
    ys = state_table(n)
    v0 = ys.sum(axis=1)
    graphs = list(enumerate_graphs(n))
    n_graphs = len(graphs)
    v1_max = m_pairs
    # per-graph counts of response states by (ones count, concordant edges)
    counts = np.zeros((n_graphs, n + 1, v1_max + 1), dtype=np.int32)
    e_counts = np.zeros(n_graphs, dtype=int)
    for gi, g in enumerate(graphs):
        edges = g.edges()
        e_counts[gi] = len(edges)
        if edges:
            ei = np.array([e[0] for e in edges])
            ej = np.array([e[1] for e in edges])
            v1 = (ys[:, ei] & ys[:, ej]).sum(axis=1)
        else:
            v1 = np.zeros(ys.shape[0], dtype=int)
        np.add.at(counts[gi], (v0, v1), 1)
    # sort graphs by edge count so class sums are contiguous reductions
    order = np.argsort(e_counts, kind="stable")
    counts = counts[order]
    e_sorted = e_counts[order]
    boundaries = np.searchsorted(e_sorted, np.arange(m_pairs + 1))
    e1_mat = np.exp(np.outer(np.arange(v1_max + 1), g1_grid))  # (v1, i1)
    t = np.tensordot(counts, e1_mat, axes=(2, 0))  # (graph, j, i1)
    out = np.zeros((m_pairs + 1, len(g0_grid), len(g1_grid), n + 1))
    for i0, g0 in enumerate(g0_grid):
        e0 = np.exp(g0 * np.arange(n + 1))
        w = t * e0[None, :, None]  # (graph, j, i1)
        z = w.sum(axis=1, keepdims=True)
        qj = w / z
        class_sums = np.add.reduceat(qj, boundaries, axis=0)  # (E, j, i1)
        out[:, i0, :, :] = class_sums.transpose(0, 2, 1)
    _QEST_LAW_CACHE[key] = out
    return out


def exact_posterior(
    obs: ObservedData,
    config: InferenceConfig,
    include_design_factor: bool = True,
) -> ExactPosterior:
    """Exhaustive posterior over (alpha-grid, gamma-grid, completions, y_exc).

    include_design_factor=False drops p(I | G) from the weights, which is only
    correct for ignorable designs; the flag exists to demonstrate how much a
    non-ignorable design factor moves the posterior.
    """
    n = config.n_total
    if n > MAX_EXACT_ORACLE_NODES:
        raise SizeError(f"exact oracle limited to n <= {MAX_EXACT_ORACLE_NODES}")
    problem = build_problem(obs, config)
    grids = make_grids(config)
    completions = _feasible_completions(problem)
    n_a, n_g0, n_g1 = len(grids.alpha), len(grids.g0), len(grids.g1)
    m_pairs = n * (n - 1) // 2

    y_nodes = problem.observed_idx
    n_free = len(y_nodes)
    y_states = state_table(n_free) if n_free > 0 else np.zeros((1, 0), dtype=int)
    base_y = np.zeros(n, dtype=int)
    for v, val in problem.obs.y_inc.items():
        base_y[v] = val

    alpha_marg = np.zeros(n_a)
    gamma_marg = np.zeros((n_g0, n_g1))
    joint_ag = np.zeros((n_a, n_g0, n_g1))
    cell_marg: dict[tuple[tuple[int, ...], tuple[int, ...]], float] = {}
    q_pred_marg: dict[float, float] = {}

    log_alpha = np.full(n_a, -np.inf)
    log_1m_alpha = np.full(n_a, -np.inf)
    for ai, a in enumerate(grids.alpha):
        if 0.0 < a < 1.0:
            log_alpha[ai] = math.log(a)
            log_1m_alpha[ai] = math.log1p(-a)

    for bits in completions:
        adj = _adj_from_completion(problem, bits)
        g = Graph(adj)
        if include_design_factor:
            ll_design = _design_loglik(problem, adj)
            if ll_design == float("-inf"):
                continue
            l_c = math.exp(ll_design)
        else:
            l_c = 1.0
        e = g.n_edges
        a_vec = np.zeros(n_a)
        for ai, a in enumerate(grids.alpha):
            if a <= 0.0:
                a_vec[ai] = grids.alpha_prior[ai] if e == 0 else 0.0
            elif a >= 1.0:
                a_vec[ai] = grids.alpha_prior[ai] if e == m_pairs else 0.0
            else:
                a_vec[ai] = grids.alpha_prior[ai] * math.exp(
                    e * log_alpha[ai] + (m_pairs - e) * log_1m_alpha[ai]
                )
        # response model: B[e_state, g0, g1] with the exact normalizer
        v0_all, v1_all = state_stats(g)
        logz = np.zeros((n_g0, n_g1))
        for i0, g0v in enumerate(grids.g0):
            for i1, g1v in enumerate(grids.g1):
                lw = g0v * v0_all + g1v * v1_all
                mx = lw.max()
                logz[i0, i1] = mx + math.log(np.exp(lw - mx).sum())
        b_mat = np.zeros((y_states.shape[0], n_g0, n_g1))
        q_of_state = np.zeros(y_states.shape[0])
        for si in range(y_states.shape[0]):
            y_full = base_y.copy()
            for t, v in enumerate(y_nodes):
                y_full[v] = y_states[si, t]
            v0 = int(y_full.sum())
            v1 = int((np.outer(y_full, y_full) & adj).sum()) // 2
            q_of_state[si] = y_full.mean()
            lw = grids.g0[:, None] * v0 + grids.g1[None, :] * v1 - logz
            b_mat[si] = np.exp(lw)
        # gamma prior is uniform over its box: constant weight cancels
        sb_per_gamma = b_mat.sum(axis=0)  # (g0, g1)
        sb = sb_per_gamma.sum()
        sa = a_vec.sum()
        alpha_marg += l_c * a_vec * sb
        gamma_marg += l_c * sa * sb_per_gamma
        joint_ag += l_c * a_vec[:, None, None] * sb_per_gamma[None, :, :]
        for si in range(y_states.shape[0]):
            w = l_c * sa * b_mat[si].sum()
            ybits = tuple(int(x) for x in y_states[si])
            cell_marg[(bits, ybits)] = cell_marg.get((bits, ybits), 0.0) + w
            qv = round(float(q_of_state[si]), 12)
            q_pred_marg[qv] = q_pred_marg.get(qv, 0.0) + w

    total = alpha_marg.sum()
    if total <= 0:
        raise InfeasibleError("observation has zero probability under the model")
    alpha_marg /= total
    gamma_marg /= gamma_marg.sum()
    joint_sum = joint_ag.sum()
    joint_ag /= joint_sum
    cell_total = sum(cell_marg.values())
    cell_marg = {k: v / cell_total for k, v in cell_marg.items()}
    qp_total = sum(q_pred_marg.values())
    q_pred_marg = {k: v / qp_total for k, v in q_pred_marg.items()}

    q_est_marg = None
    if config.compute_q_est:
        u_law = q_est_law(n, grids.g0, grids.g1)
        q_est = np.zeros(n + 1)
        for ai, a in enumerate(grids.alpha):
            # per-graph probability alpha^E (1-alpha)^(M-E); u_law already sums
            # P(j | G, gamma) over the graphs of each edge-count class
            pe = np.array(
                [(a**e_) * ((1 - a) ** (m_pairs - e_)) for e_ in range(m_pairs + 1)]
            )
            mix = np.tensordot(pe, u_law, axes=(0, 0))  # (g0, g1, j)
            q_est += np.einsum("gh,ghj->j", joint_ag[ai], mix)
        q_est /= q_est.sum()
        q_est_marg = {round(j / n, 12): float(q_est[j]) for j in range(n + 1)}

    return ExactPosterior(
        grids=grids,
        unobs_pairs=problem.unobs_pairs,
        y_exc_nodes=y_nodes,
        completions=completions,
        alpha_marg=alpha_marg,
        gamma_marg=gamma_marg,
        cell_marg=cell_marg,
        q_pred_marg=q_pred_marg,
        q_est_marg=q_est_marg,
        joint_ag=joint_ag,
    )
