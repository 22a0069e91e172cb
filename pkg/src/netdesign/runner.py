"""Experiment orchestration: replicate scheduling, persistence, reporting.

Replicates are seeded by counter-based splitting of the master seed and
reduced in replicate order, so outputs are byte-identical for any worker
count. Each run writes report.csv, replicates.csv, plotdata.csv and example
traces under the output directory, and appends a run record to runs.csv.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, parse_mixture
from .designs import (
    DesignSpec,
    LinkTracing,
    design_label,
    observed_data,
    run_design,
    trace_to_json,
)
from .evaluation import (
    DesignRow,
    EvalConfig,
    EvaluationReport,
    KlPredictive,
    ReplicateOutcome,
    exact_design_loss,
    compression_bound,
    entropy_er,
    entropy_sbm,
    goel_degroot_j,
    prior_predictive_table,
    psi,
    psi_star_exact,
    psi_star_mc,
    replicate_all_designs,
    replicate_seeds,
)
from .graph import ErdosRenyi, Graph, ParameterError, PointMassPrior, Sbm
from .mrf import MrfParams, simulate_response
from .orderchecks import distribution_equivalence_test
from .sequential import export_policy, sequential_rds_optimize
from .inference import draw_alpha
from .evaluation import draw_prior_world
from .mrf import GammaBox

TRACE_SALT = 0x7E5
WORLD_SALT = 0x5EED


# ---------------------------------------------------------------------------
# Parallel replicate engine
# ---------------------------------------------------------------------------


def _compare_worker(args) -> list[ReplicateOutcome]:
    designs, spec, eval_cfg, seed_seq, prior_table, fixed_theta = args
    rng = np.random.default_rng(seed_seq)
    return replicate_all_designs(
        designs, spec, eval_cfg, rng, prior_table, fixed_theta=fixed_theta
    )


def _run_replicates(
    designs: list[DesignSpec],
    config: ExperimentConfig,
    eval_cfg: EvalConfig,
    fixed_theta: tuple[float, MrfParams] | None,
) -> list[list[ReplicateOutcome]]:
    """K replicates x designs, common worlds per replicate, order-stable."""
    prior_table = None
    if isinstance(config.loss, KlPredictive):
        prior_table = prior_predictive_table(eval_cfg, seed=config.seed ^ 0x5EED)
    seqs = np.random.SeedSequence(config.seed).spawn(config.replicates)
    tasks = [
        (designs, config.loss, eval_cfg, seqs[k], prior_table, fixed_theta)
        for k in range(config.replicates)
    ]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(_compare_worker, tasks, chunksize=1))
    else:
        results = [_compare_worker(t) for t in tasks]
    return results


def _report_from_outcomes(
    designs: list[DesignSpec], by_rep: list[list[ReplicateOutcome]], k: int
) -> EvaluationReport:
    report = EvaluationReport()
    for d_idx, design in enumerate(designs):
        losses = np.array([by_rep[r][d_idx].loss for r in range(k)])
        sqs = np.array([by_rep[r][d_idx].sq_error for r in range(k)])
        report.rows.append(
            DesignRow(
                design=design,
                label=design_label(design),
                loss_mean=float(losses.mean()),
                loss_se=float(losses.std(ddof=1) / math.sqrt(k)),
                mse_mean=float(sqs.mean()),
                mse_se=float(sqs.std(ddof=1) / math.sqrt(k)),
                n_replicates=k,
            )
        )
    return report


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def _write(path: Path, lines: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def _write_replicates_csv(
    path: Path, designs: list[DesignSpec], by_rep: list[list[ReplicateOutcome]]
) -> None:
    lines = ["design_id,design,replicate,loss,sq_error,q_true,estimate"]
    for d_idx, design in enumerate(designs):
        label = design_label(design)
        for r, outcomes in enumerate(by_rep):
            o = outcomes[d_idx]
            lines.append(
                f"{d_idx},{label},{r},{o.loss:.10g},{o.sq_error:.10g},"
                f"{o.q_true:.10g},{o.estimate:.10g}"
            )
    _write(path, lines)


def _write_plotdata(path: Path, report: EvaluationReport) -> None:
    lines = ["design,criterion,value,se"]
    for row in report.rows:
        lines.append(f"{row.label},loss,{row.loss_mean:.10g},{row.loss_se:.10g}")
        if not math.isnan(row.mse_mean):
            lines.append(f"{row.label},mse,{row.mse_mean:.10g},{row.mse_se:.10g}")
        if row.psi is not None:
            lines.append(f"{row.label},psi,{row.psi:.10g},0")
        if row.j_info is not None:
            lines.append(f"{row.label},j_info,{row.j_info:.10g},0")
    _write(path, lines)


def _write_example_traces(config: ExperimentConfig, out: Path) -> None:
    for d_idx, design in enumerate(config.designs):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, TRACE_SALT, d_idx]))
        try:
            _, g, gamma, y = draw_prior_world(config.inference, rng)
            trace = run_design(design, g, y, rng)
        except ParameterError:
            continue
        path = out / "traces" / f"design_{d_idx}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(trace_to_json(trace))


def _append_store(config: ExperimentConfig, out: Path, report_path: Path) -> None:
    store = out / "runs.csv"
    header = "run_id,experiment,config_hash,seed,report"
    row = (
        f"{config.config_hash()}-{config.kind},{config.kind},"
        f"{config.config_hash()},{config.seed},{report_path.name}"
    )
    if store.exists():
        content = store.read_text().rstrip("\n")
        store.write_text(content + "\n" + row + "\n")
    else:
        store.write_text(header + "\n" + row + "\n")


# ---------------------------------------------------------------------------
# Experiment dispatch
# ---------------------------------------------------------------------------


def run_experiment(config: ExperimentConfig) -> EvaluationReport | dict:
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if config.kind == "compare":
        result = _run_compare(config, out)
    elif config.kind == "risk":
        result = _run_risk(config, out)
    elif config.kind == "compress":
        result = _run_compress(config, out)
    elif config.kind == "entropy":
        result = _run_entropy(config, out)
    elif config.kind == "sequential":
        result = _run_sequential(config, out)
    elif config.kind == "suffcheck":
        result = _run_suffcheck(config, out)
    else:
        raise ParameterError(f"unknown experiment kind {config.kind!r}")
    _append_store(config, out, out / "report.csv")
    return result


def _run_compare(config: ExperimentConfig, out: Path) -> EvaluationReport:
    eval_cfg = EvalConfig(inference=config.inference, estimand=config.estimand, exact=config.exact)
    if config.exact:
        report = EvaluationReport()
        for design in config.designs:
            value = exact_design_loss(design, config.loss, config.inference)
            report.rows.append(
                DesignRow(
                    design=design,
                    label=design_label(design),
                    loss_mean=value,
                    loss_se=0.0,
                    mse_mean=float("nan"),
                    mse_se=0.0,
                    n_replicates=0,
                )
            )
        _write(out / "report.csv", report.csv_lines())
        _write_plotdata(out / "plotdata.csv", report)
        _write_example_traces(config, out)
        return report
    by_rep = _run_replicates(config.designs, config, eval_cfg, fixed_theta=None)
    report = _report_from_outcomes(config.designs, by_rep, config.replicates)
    _write(out / "report.csv", report.csv_lines())
    _write_replicates_csv(out / "replicates.csv", config.designs, by_rep)
    _write_plotdata(out / "plotdata.csv", report)
    _write_example_traces(config, out)
    return report


def _run_risk(config: ExperimentConfig, out: Path) -> EvaluationReport:
    section = config.extra["risk"]
    theta = (
        float(section["alpha_star"]),
        MrfParams(float(section.get("gamma0", 0.0)), float(section.get("gamma1", 0.0))),
    )
    eval_cfg = EvalConfig(inference=config.inference, estimand=config.estimand)
    by_rep = _run_replicates(config.designs, config, eval_cfg, fixed_theta=theta)
    report = _report_from_outcomes(config.designs, by_rep, config.replicates)
    _write(out / "report.csv", report.csv_lines())
    _write_replicates_csv(out / "replicates.csv", config.designs, by_rep)
    _write_plotdata(out / "plotdata.csv", report)
    _write_example_traces(config, out)
    return report


def _run_compress(config: ExperimentConfig, out: Path) -> EvaluationReport:
    section = config.extra["compress"]
    alpha_star = float(section["alpha_star"])
    exact = bool(section.get("exact", config.n_nodes <= 6))
    report = EvaluationReport()
    prior2 = None
    if "prior2" in section:
        from .config import _parse_graph_prior

        errs: list[str] = []
        prior2 = _parse_graph_prior(section["prior2"], errs)
        if errs:
            raise ParameterError("; ".join(errs))
    rep_lines = ["design_id,design,replicate,hellinger"]
    for d_idx, design in enumerate(config.designs):
        if "mixture" in section:
            mix = parse_mixture(section["mixture"])
            val = psi(design, mix, config.inference)
            se = 0.0
        elif exact:
            val = psi_star_exact(design, alpha_star, config.inference)
            se = 0.0
        else:
            val, se = psi_star_mc(
                design,
                alpha_star,
                config.inference,
                config.replicates,
                seed=config.seed ^ (d_idx << 8),
            )
        j_val = None
        if prior2 is not None:
            j_val = goel_degroot_j(design, config.graph_prior, prior2, config.inference)
        report.rows.append(
            DesignRow(
                design=design,
                label=design_label(design),
                loss_mean=float("nan"),
                loss_se=0.0,
                mse_mean=float("nan"),
                mse_se=0.0,
                psi=val,
                j_info=j_val,
                n_replicates=0 if exact else config.replicates,
            )
        )
        if not exact and "mixture" not in section:
            rep_lines.append(f"{d_idx},{design_label(design)},0,{val:.10g}")
    _write(out / "report.csv", report.csv_lines())
    if len(rep_lines) > 1:
        _write(out / "replicates.csv", rep_lines)
    _write_plotdata(out / "plotdata.csv", report)
    return report


def _run_entropy(config: ExperimentConfig, out: Path) -> dict:
    section = config.extra["entropy"]
    model = section["model"]
    bits = bool(section.get("bits", False))
    kind = model.get("kind", "er")
    if kind == "er":
        h = entropy_er(config.n_nodes, float(model["alpha"]), bits=bits)
        label = f"er(alpha={model['alpha']})"
    elif kind == "sbm":
        beta = tuple(float(b) for b in model["beta"])
        amat = tuple(tuple(float(x) for x in row) for row in model["alpha_mat"])
        h = entropy_sbm(config.n_nodes, beta, amat, bits=bits)
        label = f"sbm(K={len(beta)})"
    else:
        raise ParameterError(f"unknown entropy model {kind!r}")
    lo, hi = compression_bound(h)
    units = "bits" if bits else "nats"
    lines = [
        "model,entropy,bound_lower,bound_upper,units",
        f"{label},{h:.10g},{lo:.10g},{hi:.10g},{units}",
    ]
    _write(out / "report.csv", lines)
    return {"model": label, "entropy": h, "bounds": (lo, hi), "units": units}


def _run_sequential(config: ExperimentConfig, out: Path) -> dict:
    section = config.extra["sequential"]
    eval_cfg = EvalConfig(inference=config.inference, estimand=config.estimand)
    staged = sequential_rds_optimize(
        [int(x) for x in section["w0_grid"]],
        [int(x) for x in section["m_grid"]],
        int(section["target_n"]),
        config.loss,
        eval_cfg,
        config.replicates,
        config.seed,
        bin_stat=section.get("bin_stat", "quartile_multiset"),
    )
    policy_path = out / "policy.json"
    policy_path.write_text(json.dumps(export_policy(staged.policy), indent=2, sort_keys=True))
    lines = ["w0,bin,m,loss_mean,loss_se,count"]
    for (w0, key, m), (mean, se, cnt) in sorted(staged.cell_detail.items()):
        lines.append(f"{w0},{key},{m},{mean:.10g},{se:.10g},{cnt}")
    _write(out / "replicates.csv", lines)
    report = [
        "w0_choice,value",
        f"{staged.w0_choice},{staged.value:.10g}",
    ]
    _write(out / "report.csv", report)
    return {
        "w0_choice": staged.w0_choice,
        "m_by_bin": staged.m_by_bin,
        "value": staged.value,
    }


_FIXTURES = {
    "cycle6": [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)],
    "prism6": [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)],
}

_RELATIONS = {
    # relation -> (source (s,r,w), transform, target (s,r,w), degrees)
    "lt_wave": ((2, 2, 2), "drop_wave", (2, 2, 1), False),
    "lt_seed": ((2, 1, 1), "drop_seed", (1, 1, 1), False),
    "lt_thin": ((1, 2, 1), "thin", (1, 1, 1), False),
    "rds_wave": ((2, 2, 2), "drop_wave", (2, 2, 1), True),
    "rds_seed": ((2, 1, 1), "drop_seed", (1, 1, 1), True),
    "rds_thin": ((1, 2, 1), "thin", (1, 1, 1), True),
}


def suffcheck_fixture(name: str) -> Graph:
    if name not in _FIXTURES:
        raise ParameterError(f"unknown fixture {name!r}; have {sorted(_FIXTURES)}")
    return Graph.from_edges(6, _FIXTURES[name])


def _run_suffcheck(config: ExperimentConfig, out: Path) -> dict:
    section = config.extra["suffcheck"]
    fixture_name = section.get("fixture", "cycle6")
    g = suffcheck_fixture(fixture_name)
    n_samples = section.get("n_samples", 100_000)
    threshold = float(section.get("threshold", 0.02))
    relations = section.get("relations", list(_RELATIONS))
    rng = np.random.default_rng(config.seed)
    results = []
    for rel in relations:
        if rel not in _RELATIONS:
            raise ParameterError(f"unknown relation {rel!r}")
        (s1, r1, w1), transform, (s2, r2, w2), deg = _RELATIONS[rel]
        src = LinkTracing(s=s1, r=r1, w=w1, target_n=g.n_nodes, record_degrees=deg)
        tgt = LinkTracing(s=s2, r=r2, w=w2, target_n=g.n_nodes, record_degrees=deg)
        tv, passed = distribution_equivalence_test(
            src, [transform], tgt, g, n_samples, rng, threshold=threshold
        )
        results.append(
            {
                "relation": rel,
                "fixture": fixture_name,
                "tv_estimate": tv,
                "threshold": threshold,
                "pass": bool(passed),
            }
        )
    # negative control: distributions differ without the transformation
    src = LinkTracing(s=1, r=2, w=1, target_n=g.n_nodes)
    tgt = LinkTracing(s=1, r=1, w=1, target_n=g.n_nodes)
    tv, passed = distribution_equivalence_test(
        src, [], tgt, g, n_samples, rng, threshold=threshold
    )
    results.append(
        {
            "relation": "negative_control",
            "fixture": fixture_name,
            "tv_estimate": tv,
            "threshold": threshold,
            "pass": bool(passed),
        }
    )
    (out / "suffcheck.json").write_text(json.dumps(results, indent=2))
    lines = ["relation,fixture,tv_estimate,threshold,pass"]
    for r in results:
        lines.append(
            f"{r['relation']},{r['fixture']},{r['tv_estimate']:.10g},"
            f"{r['threshold']:.10g},{r['pass']}"
        )
    _write(out / "report.csv", lines)
    return {"results": results}


# ---------------------------------------------------------------------------
# Summaries over stored runs
# ---------------------------------------------------------------------------


def summarize(out_dir: str | Path, run_ids: list[str] | None = None) -> tuple[str, list[str]]:
    """Ranking table over stored design-comparison reports.

    Returns (text table, csv lines); designs are sorted by loss mean and ties
    are flagged when +-2 SE intervals overlap the previous design's.
    """
    out = Path(out_dir)
    store = out / "runs.csv"
    if not store.exists():
        raise FileNotFoundError(f"no runs.csv under {out}")
    rows = [line.split(",") for line in store.read_text().strip().splitlines()[1:]]
    if run_ids:
        known = {r[0] for r in rows}
        for rid in run_ids:
            if rid not in known:
                raise KeyError(f"run id {rid!r} not in store")
        rows = [r for r in rows if r[0] in run_ids]
    report_path = out / "report.csv"
    if not report_path.exists():
        raise FileNotFoundError(f"no report.csv under {out}")
    lines = report_path.read_text().strip().splitlines()
    header = lines[0].split(",")
    if "loss_mean" not in header:
        return report_path.read_text(), lines
    li = header.index("loss_mean")
    si = header.index("loss_se")
    name_i = header.index("params")
    entries = []
    for line in lines[1:]:
        parts = line.split(",")
        try:
            entries.append((parts[name_i], float(parts[li]), float(parts[si])))
        except ValueError:
            continue
    entries.sort(key=lambda t: t[1])
    csv_lines = ["rank,design,loss_mean,loss_se,tie_with_prev"]
    text = [f"{'rank':>4}  {'design':<40} {'loss':>12} {'se':>10}  tie"]
    prev = None
    for rank, (name, mean, se) in enumerate(entries, 1):
        tie = False
        if prev is not None:
            pm, ps = prev
            tie = (mean - 2 * se) <= (pm + 2 * ps)
        csv_lines.append(f"{rank},{name},{mean:.10g},{se:.10g},{tie}")
        text.append(f"{rank:>4}  {name:<40} {mean:>12.6g} {se:>10.3g}  {'~' if tie else ''}")
        prev = (mean, se)
    return "\n".join(text), csv_lines
