"""Loss functions and design-ranking criteria.

Covers the decision-theoretic route (expected posterior loss of the Bayes
rule, averaged over the prior predictive), frequentist risk at a fixed
parameter, the information-preservation score based on Hellinger distances
between the true completion law and the posterior predictive, entropy and
code-length bounds for the graph models, and the KL-based two-prior
discrimination criterion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln

from .designs import (
    DesignSpec,
    ObservedData,
    SampleTrace,
    design_label,
    enumerate_traces,
    observed_data,
    run_design,
    trace_log_prob,
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
    enumerate_graphs,
    gen_er,
)
from .inference import (
    InferenceConfig,
    build_problem,
    draw_gamma,
    exact_posterior,
    posterior_sample,
    q_est_law,
)
from .mrf import GammaBox, MrfParams, exact_mrf_dist, simulate_response, state_stats


class DataError(ValueError):
    """Malformed distribution or empty draw set."""


# ---------------------------------------------------------------------------
# Loss specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Quadratic:
    pass


@dataclass(frozen=True)
class Multilinear:
    k1: float
    k2: float

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0:
            raise ParameterError("multilinear weights must be positive")


@dataclass(frozen=True)
class KlPredictive:
    pass


@dataclass(frozen=True)
class HellingerIntrinsic:
    pass


LossSpec = Quadratic | Multilinear | KlPredictive | HellingerIntrinsic

POINTWISE = (Quadratic, Multilinear)


def loss_value(spec: LossSpec, a: float, q: float) -> float:
    """Pointwise loss of estimate a against true quantity q."""
    if isinstance(spec, Quadratic):
        return (a - q) ** 2
    if isinstance(spec, Multilinear):
        return spec.k2 * (q - a) if q > a else spec.k1 * (a - q)
    raise ParameterError("loss_value applies to pointwise losses only")


def bayes_rule(spec: LossSpec, draws: np.ndarray) -> float:
    """Optimal action against an empirical posterior: mean or fractile."""
    draws = np.asarray(draws, dtype=float)
    if draws.size == 0:
        raise DataError("no posterior draws")
    if isinstance(spec, Quadratic):
        return float(draws.mean())
    if isinstance(spec, Multilinear):
        p = spec.k2 / (spec.k1 + spec.k2)
        return float(np.quantile(draws, p, method="inverted_cdf"))
    raise ParameterError("bayes_rule applies to pointwise losses only")


def bayes_rule_discrete(spec: LossSpec, values: np.ndarray, probs: np.ndarray) -> float:
    """Bayes rule against an exact discrete posterior (lower-quantile ties)."""
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if values.size == 0:
        raise DataError("empty posterior")
    order = np.argsort(values)
    v, p = values[order], probs[order]
    if isinstance(spec, Quadratic):
        return float(np.dot(v, p) / p.sum())
    if isinstance(spec, Multilinear):
        target = spec.k2 / (spec.k1 + spec.k2)
        cum = np.cumsum(p) / p.sum()
        idx = int(np.searchsorted(cum, target - 1e-12))
        return float(v[min(idx, len(v) - 1)])
    raise ParameterError("bayes_rule applies to pointwise losses only")


def expected_posterior_loss(
    spec: LossSpec, draws: np.ndarray, obs: ObservedData | None = None
) -> float:
    """Monte Carlo posterior expected loss of the Bayes rule."""
    a = bayes_rule(spec, draws)
    draws = np.asarray(draws, dtype=float)
    if isinstance(spec, Quadratic):
        return float(np.mean((a - draws) ** 2))
    return float(np.mean([loss_value(spec, a, q) for q in draws]))


# ---------------------------------------------------------------------------
# Distances between discrete distributions
# ---------------------------------------------------------------------------


def _check_table(p: np.ndarray, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DataError(f"{name} must be a nonempty vector")
    if np.any(p < -1e-15):
        raise DataError(f"{name} has negative entries")
    if abs(p.sum() - 1.0) > 1e-9:
        raise DataError(f"{name} is not normalized (sum={p.sum()!r})")
    return np.clip(p, 0.0, None)


def hellinger(p: np.ndarray, q: np.ndarray) -> float:
    """(1/2) sum (sqrt(p) - sqrt(q))^2, in [0, 1]; safe at zero cells."""
    p = _check_table(p, "p")
    q = _check_table(q, "q")
    if p.shape != q.shape:
        raise DataError("distributions must share a support")
    return float(0.5 * np.sum((np.sqrt(p) - np.sqrt(q)) ** 2))


def kl_predictive_loss(prior_pred: np.ndarray, post_pred: np.ndarray) -> float:
    """Negative KL(post || prior): lower values mean more informative data."""
    prior_pred = _check_table(prior_pred, "prior predictive")
    post_pred = _check_table(post_pred, "posterior predictive")
    if prior_pred.shape != post_pred.shape:
        raise DataError("predictive tables must share a support")
    mask = post_pred > 0
    if np.any(prior_pred[mask] <= 0):
        raise DataError("posterior predictive not absolutely continuous w.r.t. prior")
    return float(-np.sum(post_pred[mask] * np.log(post_pred[mask] / prior_pred[mask])))


def hellinger_intrinsic_loss(predictive_fn, theta_draw, a) -> float:
    """Hellinger distance between the predictives at theta and at the estimate."""
    return hellinger(predictive_fn(*theta_draw), predictive_fn(*a))


# ---------------------------------------------------------------------------
# Exact predictive table for the population mean
# ---------------------------------------------------------------------------


def predictive_q_table(n: int, alpha: float, gamma: MrfParams) -> np.ndarray:
    """Exact P(mean of a fresh response vector = j/n | alpha, gamma), tiny n."""
    u = q_est_law(n, np.array([gamma.gamma0]), np.array([gamma.gamma1]))
    m_pairs = n * (n - 1) // 2
    pe = np.array([(alpha**e) * ((1 - alpha) ** (m_pairs - e)) for e in range(m_pairs + 1)])
    table = np.tensordot(pe, u[:, 0, 0, :], axes=(0, 0))
    return table / table.sum()


def q_table_from_draws(draws: np.ndarray, n: int) -> np.ndarray:
    """Bin draws (multiples of 1/n) into the exact Q grid {0, 1/n, ..., 1}."""
    draws = np.asarray(draws, dtype=float)
    idx = np.rint(draws * n).astype(int)
    if np.any((idx < 0) | (idx > n)):
        raise DataError("draw outside the [0, 1] mean grid")
    table = np.bincount(idx, minlength=n + 1).astype(float)
    return table / table.sum()


# ---------------------------------------------------------------------------
# Entropy and compression bounds
# ---------------------------------------------------------------------------

LN2 = math.log(2.0)


def _bernoulli_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log(p) + (1 - p) * math.log(1 - p))


def entropy_er(n: int, alpha: float, bits: bool = False) -> float:
    """Graph entropy of G(n, alpha): C(n,2) independent Bernoulli pairs."""
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError("alpha must be in [0, 1]")
    h = (n * (n - 1) / 2) * _bernoulli_entropy(alpha)
    return h / LN2 if bits else h


def entropy_sbm(
    n: int,
    beta: tuple[float, ...],
    alpha_mat: tuple[tuple[float, ...], ...],
    bits: bool = False,
) -> float:
    """Block-model entropy 2*N*H_block + C(N,2)*H_inclusion."""
    k = len(beta)
    if abs(sum(beta) - 1.0) > 1e-12:
        raise ParameterError("block probabilities must sum to one")
    h_block = -sum(b * math.log(b) for b in beta if b > 0)
    h_incl = 0.0
    for i in range(k):
        for j in range(k):
            h_incl += beta[i] * beta[j] * _bernoulli_entropy(alpha_mat[i][j])
    h = 2.0 * n * h_block + (n * (n - 1) / 2) * h_incl
    return h / LN2 if bits else h


def compression_bound(entropy: float) -> tuple[float, float]:
    """(H, H+1): the attainable average code length window, in the same units."""
    if entropy < 0:
        raise ParameterError("entropy must be nonnegative")
    return entropy, entropy + 1.0


# ---------------------------------------------------------------------------
# Replicate engine and Lindley design loss
# ---------------------------------------------------------------------------


@dataclass
class EvalConfig:
    """Evaluation-time knobs wrapped around one inference configuration."""

    inference: InferenceConfig
    estimand: str = "pred"  # "pred" | "est"
    exact: bool = False
    psi_completion_draws: int = 100

    def __post_init__(self):
        if self.estimand not in ("pred", "est"):
            raise ParameterError("estimand must be 'pred' or 'est'")


@dataclass
class ReplicateOutcome:
    loss: float
    sq_error: float
    q_true: float
    estimate: float


def replicate_seeds(seed: int, k: int) -> list[np.random.Generator]:
    """Counter-split replicate streams: adding replicates never perturbs earlier ones."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def draw_prior_world(
    config: InferenceConfig, rng: np.random.Generator
) -> tuple[float, Graph, MrfParams, np.ndarray]:
    """One draw of (alpha, G, gamma, Y) from the model priors."""
    from .inference import draw_alpha

    alpha = draw_alpha(config.graph_prior, rng)
    g = gen_er(config.n_total, alpha, rng)
    gamma = draw_gamma(config.gamma_prior, rng)
    y = simulate_response(g, gamma, rng)
    return alpha, g, gamma, y


def _posterior_q_draws(
    obs: ObservedData, config: EvalConfig, rng: np.random.Generator
) -> np.ndarray:
    inf = config.inference
    res = posterior_sample(obs, inf, rng)
    return res.q_est if config.estimand == "est" else res.q_pred


def _evaluate_obs(
    spec: LossSpec,
    config: EvalConfig,
    obs: ObservedData,
    q_true: float,
    rng: np.random.Generator,
    prior_pred_table: np.ndarray | None,
    risk_mode: bool,
) -> ReplicateOutcome:
    """Posterior-based loss bookkeeping for one observed data set."""
    if isinstance(spec, POINTWISE):
        q_draws = _posterior_q_draws(obs, config, rng)
        a = bayes_rule(spec, q_draws)
        if risk_mode:
            loss = loss_value(spec, a, q_true)
        else:
            loss = expected_posterior_loss(spec, q_draws)
    elif isinstance(spec, KlPredictive):
        if prior_pred_table is None:
            raise DataError("KL-predictive replicate needs the prior predictive table")
        q_draws = _posterior_q_draws(obs, config, rng)
        post = q_table_from_draws(q_draws, config.inference.n_total)
        loss = kl_predictive_loss(prior_pred_table, post)
        a = float(np.dot(np.arange(len(post)) / (len(post) - 1), post))
    elif isinstance(spec, HellingerIntrinsic):
        n = config.inference.n_total
        res = posterior_sample(obs, config.inference, rng)
        a_alpha = float(res.alpha.mean())
        a_gamma = MrfParams(float(res.gamma0.mean()), float(res.gamma1.mean()))
        pred_a = predictive_q_table(n, a_alpha, a_gamma)
        idx = rng.choice(len(res.alpha), size=min(40, len(res.alpha)), replace=False)
        vals = [
            hellinger(
                predictive_q_table(
                    n, float(res.alpha[i]), MrfParams(float(res.gamma0[i]), float(res.gamma1[i]))
                ),
                pred_a,
            )
            for i in idx
        ]
        loss = float(np.mean(vals))
        a = a_alpha
    else:
        raise ParameterError(f"unsupported loss {spec!r}")
    sq = (a - q_true) ** 2
    return ReplicateOutcome(loss=loss, sq_error=sq, q_true=q_true, estimate=a)


def lindley_replicate(
    design: DesignSpec,
    spec: LossSpec,
    config: EvalConfig,
    seed_rng: np.random.Generator,
    prior_pred_table: np.ndarray | None = None,
) -> ReplicateOutcome:
    """One prior-predictive replicate of the design-loss simulation."""
    alpha, g, gamma, y = draw_prior_world(config.inference, seed_rng)
    trace = run_design(design, g, y, seed_rng)
    obs = observed_data(trace, g, y)
    q_true = float(np.mean(y))
    return _evaluate_obs(spec, config, obs, q_true, seed_rng, prior_pred_table, False)


def replicate_all_designs(
    designs: list[DesignSpec],
    spec: LossSpec,
    config: EvalConfig,
    rng: np.random.Generator,
    prior_pred_table: np.ndarray | None = None,
    fixed_theta: tuple[float, MrfParams] | None = None,
) -> list[ReplicateOutcome]:
    """One replicate world shared by every candidate design.

    With fixed_theta the world is drawn at that parameter and the loss is the
    risk-style loss against the realized truth; otherwise the world comes from
    the priors and the loss is the posterior expected loss.
    """
    inf = config.inference
    if fixed_theta is None:
        _, g, _, y = draw_prior_world(inf, rng)
    else:
        alpha_star, gamma_star = fixed_theta
        g = gen_er(inf.n_total, alpha_star, rng)
        y = simulate_response(g, gamma_star, rng)
    q_true = float(np.mean(y))
    out = []
    for design in designs:
        sub = rng.spawn(1)[0]
        trace = run_design(design, g, y, sub)
        obs = observed_data(trace, g, y)
        out.append(
            _evaluate_obs(
                spec, config, obs, q_true, sub, prior_pred_table, fixed_theta is not None
            )
        )
    return out


def prior_predictive_table(config: EvalConfig, seed: int = 0) -> np.ndarray:
    """Prior predictive of the population mean on the exact {j/n} grid."""
    inf = config.inference
    n = inf.n_total
    if n <= 6:
        from .inference import make_grids

        grids = make_grids(inf)
        table = np.zeros(n + 1)
        u = q_est_law(n, grids.g0, grids.g1)
        m_pairs = n * (n - 1) // 2
        for ai, a in enumerate(grids.alpha):
            pe = np.array([(a**e) * ((1 - a) ** (m_pairs - e)) for e in range(m_pairs + 1)])
            mix = np.tensordot(pe, u, axes=(0, 0))
            table += grids.alpha_prior[ai] * mix.mean(axis=(0, 1))
        return table / table.sum()
    rngs = replicate_seeds(seed, 4000)
    draws = []
    for r in rngs:
        _, g, gamma, y = draw_prior_world(inf, r)
        draws.append(float(np.mean(y)))
    return q_table_from_draws(np.asarray(draws), n)


def lindley_design_loss(
    design: DesignSpec,
    spec: LossSpec,
    config: EvalConfig,
    k_replicates: int,
    seed: int,
) -> tuple[float, float, list[ReplicateOutcome]]:
    """Prior-predictive average of the minimal posterior expected loss.

    Returns (mean, standard error, per-replicate detail).
    """
    if k_replicates < 2:
        raise ParameterError("need at least two replicates")
    if config.exact:
        value = exact_design_loss(design, spec, config.inference)
        return value, 0.0, []
    prior_table = None
    if isinstance(spec, KlPredictive):
        prior_table = prior_predictive_table(config, seed=seed ^ 0x5EED)
    outcomes = [
        lindley_replicate(design, spec, config, rng, prior_table)
        for rng in replicate_seeds(seed, k_replicates)
    ]
    losses = np.array([o.loss for o in outcomes])
    return float(losses.mean()), float(losses.std(ddof=1) / math.sqrt(k_replicates)), outcomes


# ---------------------------------------------------------------------------
# Exact design loss by full enumeration (tiny N, point priors)
# ---------------------------------------------------------------------------


def _point_params(config: InferenceConfig) -> tuple[float, MrfParams]:
    prior = config.graph_prior
    if not isinstance(prior, PointMassPrior) or not isinstance(prior.model, ErdosRenyi):
        raise ParameterError("exact design loss needs a point-mass ER graph prior")
    box = config.gamma_prior
    if not box.is_point:
        raise ParameterError("exact design loss needs a point-mass gamma prior")
    return prior.model.alpha, box.point_params()


def _obs_key(obs: ObservedData) -> tuple:
    return (
        obs.trace.structure_key(),
        tuple(sorted(obs.pair_status.items())),
        tuple(sorted(obs.y_inc.items())),
        tuple(sorted(obs.d_inc.items())),
    )


def exact_outcome_distribution(
    design: DesignSpec, config: InferenceConfig
) -> dict[tuple, dict[float, float]]:
    """Joint law of (observation, true mean) for point priors, fully enumerated.

    Returns obs_key -> {q_true: probability}; probabilities sum to one overall.
    """
    alpha, gamma = _point_params(config)
    n = config.n_total
    if n > 6:
        raise SizeError("exact outcome enumeration limited to n <= 6")
    out: dict[tuple, dict[float, float]] = {}
    from .mrf import state_table

    ys = state_table(n)
    for g in enumerate_graphs(n):
        lp_g = _er_log_prob(g, alpha)
        if lp_g == float("-inf"):
            continue
        p_g = math.exp(lp_g)
        y_dist = exact_mrf_dist(g, gamma)
        traces = list(enumerate_traces(design, g))
        for si in range(ys.shape[0]):
            p_y = float(y_dist[si])
            if p_y == 0.0:
                continue
            y = ys[si]
            q_true = round(float(y.mean()), 12)
            for trace, p_i in traces:
                obs = observed_data(trace, g, y)
                key = _obs_key(obs)
                w = p_g * p_y * p_i
                cell = out.setdefault(key, {})
                cell[q_true] = cell.get(q_true, 0.0) + w
    return out


def _er_log_prob(g: Graph, alpha: float) -> float:
    from .graph import graph_log_prob

    return graph_log_prob(g, ErdosRenyi(alpha))


def exact_design_loss(
    design: DesignSpec, spec: LossSpec, config: InferenceConfig
) -> float:
    """Exact Lindley loss: sum over observations of the minimal posterior loss."""
    if not isinstance(spec, POINTWISE):
        raise ParameterError("exact design loss supports pointwise losses")
    outcome = exact_outcome_distribution(design, config)
    total = 0.0
    for key, cell in outcome.items():
        w_obs = sum(cell.values())
        values = np.array(sorted(cell))
        probs = np.array([cell[v] for v in sorted(cell)]) / w_obs
        a = bayes_rule_discrete(spec, values, probs)
        exp_loss = float(sum(p * loss_value(spec, a, v) for v, p in zip(values, probs)))
        total += w_obs * exp_loss
    return total


# ---------------------------------------------------------------------------
# Frequentist risk
# ---------------------------------------------------------------------------


def frequentist_risk(
    design: DesignSpec,
    theta_star: tuple[float, MrfParams],
    spec: LossSpec,
    config: EvalConfig,
    k_replicates: int,
    seed: int,
) -> tuple[float, float, list[ReplicateOutcome]]:
    """Loss of the Bayes estimate against the fixed truth, averaged over data."""
    if k_replicates < 2:
        raise ParameterError("need at least two replicates")
    if not isinstance(spec, POINTWISE):
        raise ParameterError("risk is defined for pointwise losses")
    alpha_star, gamma_star = theta_star
    n = config.inference.n_total
    outcomes = []
    for rng in replicate_seeds(seed, k_replicates):
        g = gen_er(n, alpha_star, rng)
        y = simulate_response(g, gamma_star, rng)
        trace = run_design(design, g, y, rng)
        obs = observed_data(trace, g, y)
        q_true = float(np.mean(y))
        q_draws = _posterior_q_draws(obs, config, rng)
        a = bayes_rule(spec, q_draws)
        outcomes.append(
            ReplicateOutcome(
                loss=loss_value(spec, a, q_true),
                sq_error=(a - q_true) ** 2,
                q_true=q_true,
                estimate=a,
            )
        )
    losses = np.array([o.loss for o in outcomes])
    return float(losses.mean()), float(losses.std(ddof=1) / math.sqrt(k_replicates)), outcomes


# ---------------------------------------------------------------------------
# Optimal design selection and reporting
# ---------------------------------------------------------------------------


@dataclass
class DesignRow:
    design: DesignSpec
    label: str
    loss_mean: float
    loss_se: float
    mse_mean: float
    mse_se: float
    psi: float | None = None
    j_info: float | None = None
    n_replicates: int = 0


@dataclass
class EvaluationReport:
    rows: list[DesignRow] = field(default_factory=list)

    def best_index(self) -> int:
        means = [r.loss_mean for r in self.rows]
        return int(np.argmin(means))

    def csv_lines(self) -> list[str]:
        header = "design_id,params,loss_mean,loss_se,mse_mean,mse_se,psi,j_info,K"
        lines = [header]
        for i, r in enumerate(self.rows):
            psi = "" if r.psi is None else f"{r.psi:.10g}"
            j = "" if r.j_info is None else f"{r.j_info:.10g}"
            lines.append(
                f"{i},{r.label},{r.loss_mean:.10g},{r.loss_se:.10g},"
                f"{r.mse_mean:.10g},{r.mse_se:.10g},{psi},{j},{r.n_replicates}"
            )
        return lines


def optimal_design(
    candidates: list[DesignSpec],
    spec: LossSpec,
    config: EvalConfig,
    k_replicates: int,
    seed: int,
) -> tuple[DesignSpec, EvaluationReport]:
    """Minimize the Lindley loss over a finite design family (ties: lowest index)."""
    if not candidates:
        raise ParameterError("no candidate designs")
    report = EvaluationReport()
    for idx, design in enumerate(candidates):
        mean, se, outcomes = lindley_design_loss(
            design, spec, config, k_replicates, seed
        )
        if outcomes:
            sqs = np.array([o.sq_error for o in outcomes])
            mse_mean = float(sqs.mean())
            mse_se = float(sqs.std(ddof=1) / math.sqrt(len(sqs)))
        else:
            mse_mean, mse_se = float("nan"), 0.0
        report.rows.append(
            DesignRow(
                design=design,
                label=design_label(design),
                loss_mean=mean,
                loss_se=se,
                mse_mean=mse_mean,
                mse_se=mse_se,
                n_replicates=k_replicates if outcomes else 0,
            )
        )
    best = report.best_index()
    return candidates[best], report


# ---------------------------------------------------------------------------
# Information-preservation (compression) scores
# ---------------------------------------------------------------------------


def _log_marginal_er(e: int, m: int, prior: GraphPrior) -> float:
    """log of the prior-marginal probability of a graph with e of m pairs."""
    if isinstance(prior, PointMassPrior):
        a = prior.model.alpha
        if a <= 0.0:
            return 0.0 if e == 0 else float("-inf")
        if a >= 1.0:
            return 0.0 if e == m else float("-inf")
        return e * math.log(a) + (m - e) * math.log1p(-a)
    if isinstance(prior, BetaErPrior):
        return betaln(prior.tau1 + e, prior.tau2 + m - e) - betaln(prior.tau1, prior.tau2)
    if isinstance(prior, GridPrior):
        vals = []
        for w, model in zip(prior.weights, prior.models):
            if w <= 0:
                continue
            a = model.alpha
            if a <= 0.0:
                v = math.log(w) if e == 0 else None
            elif a >= 1.0:
                v = math.log(w) if e == m else None
            else:
                v = math.log(w) + e * math.log(a) + (m - e) * math.log1p(-a)
            if v is not None:
                vals.append(v)
        if not vals:
            return float("-inf")
        mx = max(vals)
        return mx + math.log(sum(math.exp(v - mx) for v in vals))
    raise ParameterError(f"unknown prior {prior!r}")


def psi_star_exact(
    design: DesignSpec, alpha_star: float, config: InferenceConfig
) -> float:
    """Exact averaged Hellinger distance between the truth-conditional and
    posterior-predictive completion laws, over the design's outcome law."""
    n = config.n_total
    if n > 6:
        raise SizeError("exact compression score limited to n <= 6")
    m_pairs = n * (n - 1) // 2
    graphs = list(enumerate_graphs(n))
    y0 = np.zeros(n, dtype=int)

    # group full-graph outcomes by observation key
    cells: dict[tuple, list[tuple[int, float, float]]] = {}
    for gi, g in enumerate(graphs):
        lp_g = _er_log_prob(g, alpha_star)
        if lp_g == float("-inf"):
            continue
        for trace, _ in enumerate_traces(design, g):
            lp_i = trace_log_prob(trace, g, design)
            if lp_i == float("-inf"):
                continue
            obs = observed_data(trace, g, y0)
            key = (_obs_key(obs)[0], _obs_key(obs)[1], _obs_key(obs)[3])
            cells.setdefault(key, []).append((gi, lp_g, lp_i))
    total = 0.0
    norm = 0.0
    for key, members in cells.items():
        # truth-conditional law and posterior predictive over completions
        w_true = np.array([math.exp(lg + li) for _, lg, li in members])
        w_post = np.array(
            [
                math.exp(
                    _log_marginal_er(graphs[gi].n_edges, m_pairs, config.graph_prior) + li
                )
                for gi, _, li in members
            ]
        )
        p_obs = w_true.sum()
        if p_obs <= 0 or w_post.sum() <= 0:
            continue
        h = hellinger(w_true / p_obs, w_post / w_post.sum())
        total += p_obs * h
        norm += p_obs
    return total / norm


def psi_star_mc(
    design: DesignSpec,
    alpha_star: float,
    config: InferenceConfig,
    k_replicates: int,
    seed: int,
    completion_draws: int = 100,
) -> tuple[float, float]:
    """Monte Carlo compression score for ignorable designs under ER priors.

    Each replicate runs the design on a fresh graph and estimates the
    Hellinger distance via completion draws from the posterior predictive.
    """
    from .designs import Ego, Snowball

    if not isinstance(design, (Ego, Snowball)):
        raise ParameterError("MC compression score supports ego/snowball designs")
    n = config.n_total
    m_pairs = n * (n - 1) // 2
    prior = config.graph_prior
    vals = []
    for rng in replicate_seeds(seed, k_replicates):
        g = gen_er(n, alpha_star, rng)
        trace = run_design(design, g, np.zeros(n, dtype=int), rng)
        obs = observed_data(trace, g, np.zeros(n, dtype=int))
        k_obs = len(obs.pair_status)
        e_obs = obs.observed_edge_count()
        u = m_pairs - k_obs  # unobserved pairs
        # posterior predictive over completions: exchangeable sequence law
        if isinstance(prior, BetaErPrior):
            t1, t2 = prior.tau1 + e_obs, prior.tau2 + (k_obs - e_obs)
        elif isinstance(prior, PointMassPrior):
            t1, t2 = None, None
        else:
            raise ParameterError("MC compression score needs a point or Beta prior")
        bc_terms = []
        for _ in range(completion_draws):
            log_q1 = 0.0
            log_q2 = 0.0
            e_run = 0
            for t in range(u):
                if t1 is None:
                    p_edge = prior.model.alpha
                else:
                    p_edge = (t1 + e_run) / (t1 + t2 + t)
                b = rng.random() < p_edge
                if b:
                    e_run += 1
                p1 = alpha_star if b else 1.0 - alpha_star
                p2 = p_edge if b else 1.0 - p_edge
                if p1 <= 0.0:
                    log_q1 = float("-inf")
                    break
                log_q1 += math.log(p1)
                log_q2 += math.log(p2)
            if log_q1 == float("-inf"):
                bc_terms.append(0.0)
            else:
                bc_terms.append(math.exp(0.5 * (log_q1 - log_q2)))
        vals.append(1.0 - float(np.mean(bc_terms)))
    vals = np.asarray(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(k_replicates))


def psi_star(
    design: DesignSpec,
    alpha_star: float,
    config: InferenceConfig,
    rng_seed: int | None = None,
    k_replicates: int = 200,
    exact: bool = True,
    completion_draws: int = 100,
) -> float | tuple[float, float]:
    """Compression score at a fixed graph parameter; exact or Monte Carlo."""
    if exact:
        return psi_star_exact(design, alpha_star, config)
    if rng_seed is None:
        raise ParameterError("MC mode needs a seed")
    return psi_star_mc(
        design, alpha_star, config, k_replicates, rng_seed, completion_draws
    )


# ---------------------------------------------------------------------------
# Mixtures over the graph parameter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointMassMixture:
    center: float


@dataclass(frozen=True)
class BetaMixture:
    """Beta(c * center, c * (1 - center)): mean = center, spread ~ 1/c."""

    center: float
    concentration: float

    def __post_init__(self):
        if not 0.0 < self.center < 1.0 or self.concentration <= 0:
            raise ParameterError("Beta mixture needs center in (0,1) and c > 0")


@dataclass(frozen=True)
class GridMixture:
    alphas: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.alphas) != len(self.weights) or not self.alphas:
            raise ParameterError("grid mixture arity mismatch")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-12:
            raise ParameterError("grid mixture weights must be a distribution")


AlphaMixture = PointMassMixture | BetaMixture | GridMixture

_GL_NODES = 48


def _gl_grid() -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(_GL_NODES)
    return 0.5 * (x + 1.0), 0.5 * w


def mixture_mean(mix: AlphaMixture) -> float:
    """Mean of the mixture by quadrature (validates the center invariant)."""
    if isinstance(mix, PointMassMixture):
        return mix.center
    if isinstance(mix, GridMixture):
        return float(sum(a * w for a, w in zip(mix.alphas, mix.weights)))
    nodes, weights = _gl_grid()
    dens = _beta_pdf(nodes, mix.concentration * mix.center, mix.concentration * (1 - mix.center))
    z = float(np.sum(weights * dens))
    return float(np.sum(weights * dens * nodes) / z)


def _beta_pdf(x: np.ndarray, a: float, b: float) -> np.ndarray:
    logc = -betaln(a, b)
    with np.errstate(divide="ignore"):
        lp = logc + (a - 1) * np.log(x) + (b - 1) * np.log1p(-x)
    return np.exp(lp)


def psi(
    design: DesignSpec,
    mixture: AlphaMixture,
    config: InferenceConfig,
    method: str = "quadrature",
    seed: int | None = None,
    n_mc: int = 200,
) -> float | tuple[float, float]:
    """Mixture-averaged compression score; quadrature or MC over the mixture."""
    if abs(mixture_mean(mixture) - _mixture_center(mixture)) > 1e-6:
        raise DataError("mixture mean drifted from its center")
    if isinstance(mixture, PointMassMixture):
        return psi_star_exact(design, mixture.center, config)
    if isinstance(mixture, GridMixture):
        return float(
            sum(
                w * psi_star_exact(design, a, config)
                for a, w in zip(mixture.alphas, mixture.weights)
                if w > 0
            )
        )
    if method == "quadrature":
        nodes, weights = _gl_grid()
        dens = _beta_pdf(
            nodes, mixture.concentration * mixture.center,
            mixture.concentration * (1 - mixture.center),
        )
        z = float(np.sum(weights * dens))
        vals = np.array([psi_star_exact(design, float(a), config) for a in nodes])
        return float(np.sum(weights * dens * vals) / z)
    if method == "mc":
        if seed is None:
            raise ParameterError("MC mixture evaluation needs a seed")
        rng = np.random.default_rng(seed)
        a_draws = rng.beta(
            mixture.concentration * mixture.center,
            mixture.concentration * (1 - mixture.center),
            size=n_mc,
        )
        vals = np.array([psi_star_exact(design, float(a), config) for a in a_draws])
        return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_mc))
    raise ParameterError("method must be 'quadrature' or 'mc'")


def _mixture_center(mix: AlphaMixture) -> float:
    if isinstance(mix, PointMassMixture):
        return mix.center
    if isinstance(mix, BetaMixture):
        return mix.center
    return float(sum(a * w for a, w in zip(mix.alphas, mix.weights)))


# ---------------------------------------------------------------------------
# Two-prior discrimination (Goel-DeGroot style J)
# ---------------------------------------------------------------------------


def goel_degroot_j(
    design: DesignSpec,
    prior1: GraphPrior,
    prior2: GraphPrior,
    config: InferenceConfig,
) -> float:
    """KL information for discriminating two graph priors from the design's
    full-data outcome law.

    The outcome is the pair (graph, selection); its density under prior i is
    p(I | G) * p_i(G). The design factor appears in both arguments of the log
    ratio and cancels for every outcome, which is the formal content of the
    cancellation result for ignorable designs.
    """
    n = config.n_total
    if n > 6:
        raise SizeError("exact J limited to n <= 6")
    m_pairs = n * (n - 1) // 2
    total = 0.0
    for g in enumerate_graphs(n):
        lp1 = _log_marginal_er(g.n_edges, m_pairs, prior1)
        lp2 = _log_marginal_er(g.n_edges, m_pairs, prior2)
        if lp1 == float("-inf"):
            continue
        if lp2 == float("-inf"):
            raise DataError("prior2 gives zero mass where prior1 does not")
        for trace, _ in enumerate_traces(design, g):
            lp_i = trace_log_prob(trace, g, design)
            if lp_i == float("-inf"):
                continue
            p_outcome = math.exp(lp_i + lp1)
            log_ratio = (lp_i + lp1) - (lp_i + lp2)
            total += p_outcome * log_ratio
    return total
