"""Declarative experiment configuration: parsing, validation, hashing.

One YAML file describes one experiment. Validation is all-or-nothing: every
problem is collected and reported together, never a partial acceptance. The
configuration hash covers the parsed semantic content only, so formatting
and key order do not perturb it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .designs import CurveRds, DesignSpec, Ego, LinkTracing, Rds, Snowball, SwitchRds
from .evaluation import (
    BetaMixture,
    GridMixture,
    HellingerIntrinsic,
    KlPredictive,
    LossSpec,
    Multilinear,
    PointMassMixture,
    Quadratic,
)
from .graph import BetaErPrior, ErdosRenyi, GraphPrior, GridPrior, PointMassPrior, Sbm
from .inference import InferenceConfig
from .mrf import GammaBox

EXPERIMENT_KINDS = (
    "compare",
    "risk",
    "compress",
    "entropy",
    "sequential",
    "suffcheck",
)


class ConfigError(ValueError):
    """Invalid experiment configuration; message lists every problem found."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    n_nodes: int
    graph_prior: GraphPrior
    gamma_prior: GammaBox
    designs: list[DesignSpec]
    loss: LossSpec
    estimand: str
    replicates: int
    inference: InferenceConfig
    exact: bool
    threads: int
    out_dir: Path
    extra: dict = field(default_factory=dict)
    semantic: dict = field(default_factory=dict)

    def config_hash(self) -> str:
        canon = json.dumps(self.semantic, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _parse_design(raw: dict, errors: list[str], idx: int) -> DesignSpec | None:
    fam = raw.get("family")
    try:
        if fam == "rds":
            return Rds(m=int(raw["m"]), w0=int(raw["w0"]), target_n=int(raw["target_n"]))
        if fam == "lt":
            return LinkTracing(
                s=int(raw["s"]),
                r=int(raw["r"]),
                w=int(raw["w"]),
                target_n=int(raw["target_n"]),
                record_degrees=bool(raw.get("record_degrees", False)),
            )
        if fam == "snowball":
            return Snowball(s=int(raw["s"]), k=int(raw["k"]))
        if fam == "ego":
            return Ego(target_n=int(raw["target_n"]))
        if fam == "curve":
            return CurveRds(
                eta=float(raw["eta"]),
                c_max=int(raw["c_max"]),
                w_max=int(raw["w_max"]),
                w0=int(raw["w0"]),
                target_n=int(raw["target_n"]),
            )
        if fam == "switch":
            return SwitchRds(
                lambda_lo=int(raw["lambda_lo"]),
                lambda_hi=int(raw["lambda_hi"]),
                switch_wave=int(raw["switch_wave"]),
                w0=int(raw["w0"]),
                target_n=int(raw["target_n"]),
            )
        errors.append(f"designs[{idx}]: unknown family {fam!r}")
    except KeyError as e:
        errors.append(f"designs[{idx}] ({fam}): missing field {e.args[0]!r}")
    except (TypeError, ValueError) as e:
        errors.append(f"designs[{idx}] ({fam}): {e}")
    return None


def _parse_graph_prior(raw: dict, errors: list[str]) -> GraphPrior | None:
    kind = raw.get("kind")
    try:
        if kind == "point_er":
            return PointMassPrior(ErdosRenyi(float(raw["alpha"])))
        if kind == "point_sbm":
            return PointMassPrior(
                Sbm(
                    beta=tuple(float(b) for b in raw["beta"]),
                    alpha_mat=tuple(tuple(float(x) for x in row) for row in raw["alpha_mat"]),
                )
            )
        if kind == "beta_er":
            return BetaErPrior(tau1=float(raw["tau1"]), tau2=float(raw["tau2"]))
        if kind == "grid_er":
            alphas = [float(a) for a in raw["alphas"]]
            weights = [float(w) for w in raw["weights"]]
            return GridPrior(
                models=tuple(ErdosRenyi(a) for a in alphas), weights=tuple(weights)
            )
        errors.append(f"graph_prior: unknown kind {kind!r}")
    except KeyError as e:
        errors.append(f"graph_prior ({kind}): missing field {e.args[0]!r}")
    except (TypeError, ValueError) as e:
        errors.append(f"graph_prior ({kind}): {e}")
    return None


def _parse_loss(raw: dict, errors: list[str]) -> LossSpec | None:
    kind = raw.get("kind", "quadratic")
    try:
        if kind == "quadratic":
            return Quadratic()
        if kind == "multilinear":
            return Multilinear(k1=float(raw["k1"]), k2=float(raw["k2"]))
        if kind == "kl_predictive":
            return KlPredictive()
        if kind == "hellinger_intrinsic":
            return HellingerIntrinsic()
        errors.append(f"loss: unknown kind {kind!r}")
    except KeyError as e:
        errors.append(f"loss ({kind}): missing field {e.args[0]!r}")
    except (TypeError, ValueError) as e:
        errors.append(f"loss ({kind}): {e}")
    return None


def parse_mixture(raw: dict):
    kind = raw.get("kind", "point")
    if kind == "point":
        return PointMassMixture(center=float(raw["center"]))
    if kind == "beta":
        return BetaMixture(center=float(raw["center"]), concentration=float(raw["concentration"]))
    if kind == "grid":
        return GridMixture(
            alphas=tuple(float(a) for a in raw["alphas"]),
            weights=tuple(float(w) for w in raw["weights"]),
        )
    raise ValueError(f"unknown mixture kind {kind!r}")


def parse_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Load, validate and normalize one experiment file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file {path} does not exist"])
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})

    errors: list[str] = []
    kind = raw.get("experiment")
    if kind not in EXPERIMENT_KINDS:
        errors.append(f"experiment: must be one of {EXPERIMENT_KINDS}, got {kind!r}")
    if "seed" not in raw:
        errors.append("seed: a master seed is mandatory")
    seed = int(raw.get("seed", 0))

    pop = raw.get("population", {})
    n_nodes = int(pop.get("n_nodes", 0))
    if n_nodes < 1:
        errors.append("population.n_nodes: must be a positive integer")

    gp_raw = raw.get("graph_prior")
    graph_prior = _parse_graph_prior(gp_raw, errors) if isinstance(gp_raw, dict) else None
    if gp_raw is None and kind != "entropy":
        errors.append("graph_prior: required")

    gb_raw = raw.get("gamma_prior", {}) or {}
    try:
        gamma_prior = GammaBox(
            g0_min=float(gb_raw.get("g0_min", -1.0)),
            g0_max=float(gb_raw.get("g0_max", 1.0)),
            g1_max=float(gb_raw.get("g1_max", 1.0)),
            g1_min=float(gb_raw.get("g1_min", 0.0)),
        )
    except (TypeError, ValueError) as e:
        errors.append(f"gamma_prior: {e}")
        gamma_prior = GammaBox()

    designs: list[DesignSpec] = []
    for i, d in enumerate(raw.get("designs", []) or []):
        spec = _parse_design(d, errors, i)
        if spec is not None:
            if hasattr(spec, "target_n") and spec.target_n is not None and spec.target_n > n_nodes:
                errors.append(f"designs[{i}]: target_n exceeds population size")
            designs.append(spec)
    if not designs and kind in ("compare", "risk", "compress"):
        errors.append("designs: at least one candidate is required")

    loss = _parse_loss(raw.get("loss", {"kind": "quadratic"}), errors)

    estimand = raw.get("estimand", "pred")
    if estimand not in ("pred", "est"):
        errors.append(f"estimand: must be 'pred' or 'est', got {estimand!r}")

    replicates = int(raw.get("replicates", 0) or 0)
    if kind in ("compare", "risk", "sequential") and replicates < 2:
        errors.append("replicates: need K >= 2")

    inf_raw = raw.get("inference", {}) or {}
    inference = None
    if graph_prior is not None:
        try:
            inference = InferenceConfig(
                n_total=n_nodes,
                graph_prior=graph_prior,
                gamma_prior=gamma_prior,
                burn_in=int(inf_raw.get("burn_in", 300)),
                n_draws=int(inf_raw.get("n_draws", 800)),
                thinning=int(inf_raw.get("thinning", 1)),
                graph_moves_per_iter=inf_raw.get("graph_moves_per_iter"),
                aux_sweeps=int(inf_raw.get("aux_sweeps", 200)),
                mrf_in_graph_update=str(inf_raw.get("mrf_in_graph_update", "auto")),
                grid_points=int(inf_raw.get("grid_points", 41)),
                predictive_sweeps=int(inf_raw.get("predictive_sweeps", 60)),
                gamma_step=float(inf_raw.get("gamma_step", 0.25)),
                compute_q_est=bool(inf_raw.get("compute_q_est", estimand == "est")),
            )
        except (TypeError, ValueError) as e:
            errors.append(f"inference: {e}")

    threads = int(raw.get("threads", 1) or 1)
    if threads < 1:
        errors.append("threads: must be >= 1")

    extra = {
        k: raw[k]
        for k in ("risk", "compress", "entropy", "sequential", "suffcheck")
        if k in raw
    }
    if kind == "risk" and "risk" not in extra:
        errors.append("risk: section with alpha_star/gamma0/gamma1 required")
    if kind == "compress" and "compress" not in extra:
        errors.append("compress: section with alpha_star required")
    if kind == "entropy" and "entropy" not in extra:
        errors.append("entropy: section with model required")
    if kind == "sequential" and "sequential" not in extra:
        errors.append("sequential: section with w0_grid/m_grid required")
    if kind == "suffcheck" and "suffcheck" not in extra:
        errors.append("suffcheck: section required")

    if errors:
        raise ConfigError(errors)

    semantic = {
        "experiment": kind,
        "seed": seed,
        "population": {"n_nodes": n_nodes},
        "graph_prior": gp_raw,
        "gamma_prior": {
            "g0_min": gamma_prior.g0_min,
            "g0_max": gamma_prior.g0_max,
            "g1_min": gamma_prior.g1_min,
            "g1_max": gamma_prior.g1_max,
        },
        "designs": raw.get("designs", []),
        "loss": raw.get("loss", {"kind": "quadratic"}),
        "estimand": estimand,
        "replicates": replicates,
        "inference": inf_raw,
        "exact": bool(raw.get("exact", False)),
        "extra": extra,
    }
    return ExperimentConfig(
        kind=kind,
        seed=seed,
        n_nodes=n_nodes,
        graph_prior=graph_prior,
        gamma_prior=gamma_prior,
        designs=designs,
        loss=loss,
        estimand=estimand,
        replicates=replicates,
        inference=inference,
        exact=bool(raw.get("exact", False)),
        threads=threads,
        out_dir=Path(raw.get("out_dir", "out")),
        extra=extra,
        semantic=semantic,
    )
