"""Replication harness: run the two-phase pipeline many times against a
known ground truth, score selections with the exact feasibility oracle, and
aggregate per-validator summaries.

Every output byte is a pure function of the configuration and the master
seed: replication r always consumes stream index r, so thread counts change
wall time but never results.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyInputError, PathvalError
from .instances import (
    GaussianLinearCcp,
    draw_samples,
    generate_canonical_instance,
    read_instance,
    split_data,
)
from .numerics import RngStream, chi_square_quantile, cholesky_psd, mean_and_cov
from .reformulations import (
    DEFAULT_BOX_BOUND,
    METHODS,
    GridSpec,
    build_path,
    solve_dro_point,
    solve_sca_benchmark,
    solve_so_point,
)
from .solvers import line_search_fast
from .validators import NORM_GS, RULES, UNNORM_GS, MarginRule, evaluate_h_matrix, select_candidate

__all__ = [
    "InstanceSpec",
    "ExperimentConfig",
    "RuleOutcome",
    "ReplicationRecord",
    "SummaryTable",
    "ExperimentResult",
    "run_replication",
    "run_experiment",
    "summarize_records",
    "write_records_csv",
    "BENCHMARK_NAMES",
]

RECORDS_HEADER = [
    "rep",
    "rule",
    "s_star",
    "objective",
    "true_prob",
    "feasible",
    "none_feasible",
    "benchmark_obj",
    "benchmark_feasible",
]

BENCHMARK_NAMES = {
    "ro": "sca",
    "dro": "dro_chi2",
    "so": "so_full",
    "fast": "fast_two_stage",
}

# Fixed per-rule sub-stream indices, independent of the order validators are
# requested in, so adding or dropping a rule never shifts another one's draws.
_RULE_STREAM = {UNNORM_GS: 1, NORM_GS: 2}


@dataclass(frozen=True)
class InstanceSpec:
    """Where the ground-truth instance comes from: the seeded canonical
    generator or an instance JSON file."""

    kind: str = "canonical"
    d: int = 10
    seed: int = 1
    alpha: float = 0.1
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("canonical", "file"):
            raise ConfigError(f"unknown instance kind {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ConfigError("instance kind 'file' requires a path")

    def build(self) -> GaussianLinearCcp:
        if self.kind == "file":
            return read_instance(self.path)
        return generate_canonical_instance(self.d, self.seed, alpha=self.alpha)

    def to_dict(self) -> dict:
        if self.kind == "file":
            return {"kind": "file", "path": self.path}
        return {"kind": "canonical", "d": self.d, "seed": self.seed, "alpha": self.alpha}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run depends on, plus execution knobs.

    ``threads`` and ``out_dir`` affect scheduling and file placement only;
    they are excluded from the config hash.
    """

    instance: InstanceSpec = field(default_factory=InstanceSpec)
    method: str = "ro"
    n: int = 200
    n1: int | None = None
    n2: int | None = None
    beta: float = 0.05
    validators: tuple[str, ...] = RULES
    replications: int = 100
    master_seed: int = 2024
    mc_budget: int = 200_000
    grid_size: int | None = None
    grid_pad: float = 20.0
    grid_inflation: float = 1.5
    box_bound: float = DEFAULT_BOX_BOUND
    threads: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        bad = [v for v in self.validators if v not in RULES]
        if bad:
            raise ConfigError(f"unknown validators {bad}; expected among {RULES}")
        if not self.validators:
            raise ConfigError("at least one validator is required")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        n1, n2 = self.split_sizes()
        if n1 + n2 != self.n or n1 < 1 or n2 < 1:
            raise ConfigError(f"invalid split n1={n1}, n2={n2} for n={self.n}")

    def split_sizes(self) -> tuple[int, int]:
        """Phase sizes; both halves default to n/2."""
        if self.n1 is None and self.n2 is None:
            return self.n // 2, self.n - self.n // 2
        if self.n1 is None:
            return self.n - self.n2, self.n2
        if self.n2 is None:
            return self.n1, self.n - self.n1
        return self.n1, self.n2

    def grid_spec(self) -> GridSpec:
        return GridSpec(
            method=self.method,
            size=self.grid_size,
            pad=self.grid_pad,
            inflation=self.grid_inflation,
        )

    def to_dict(self, include_runtime: bool = True) -> dict:
        n1, n2 = self.split_sizes()
        doc = {
            "instance": self.instance.to_dict(),
            "method": self.method,
            "n": self.n,
            "n1": n1,
            "n2": n2,
            "beta": self.beta,
            "validators": list(self.validators),
            "replications": self.replications,
            "master_seed": self.master_seed,
            "mc_budget": self.mc_budget,
            "grid": {
                "size": self.grid_size,
                "pad": self.grid_pad,
                "inflation": self.grid_inflation,
            },
            "box_bound": self.box_bound,
        }
        if include_runtime:
            doc["threads"] = self.threads
            doc["out_dir"] = self.out_dir
        return doc

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(include_runtime=False), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        known = {
            "instance",
            "method",
            "n",
            "n1",
            "n2",
            "beta",
            "validators",
            "replications",
            "master_seed",
            "mc_budget",
            "grid",
            "box_bound",
            "threads",
            "out_dir",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        inst_doc = dict(doc.pop("instance", {}))
        inst_known = {"kind", "d", "seed", "alpha", "path"}
        inst_unknown = set(inst_doc) - inst_known
        if inst_unknown:
            raise ConfigError(f"unknown instance keys: {sorted(inst_unknown)}")
        grid_doc = dict(doc.pop("grid", {}))
        grid_known = {"size", "pad", "inflation"}
        grid_unknown = set(grid_doc) - grid_known
        if grid_unknown:
            raise ConfigError(f"unknown grid keys: {sorted(grid_unknown)}")
        kwargs = dict(doc)
        if "validators" in kwargs:
            kwargs["validators"] = tuple(kwargs["validators"])
        if "size" in grid_doc:
            kwargs["grid_size"] = grid_doc["size"]
        if "pad" in grid_doc:
            kwargs["grid_pad"] = grid_doc["pad"]
        if "inflation" in grid_doc:
            kwargs["grid_inflation"] = grid_doc["inflation"]
        try:
            return cls(instance=InstanceSpec(**inst_doc), **kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class RuleOutcome:
    """One validator's result inside one replication."""

    rule: str
    s_star: float = math.nan
    objective: float = math.nan
    true_prob: float = math.nan
    feasible: bool = False
    none_feasible: bool = True
    passing: tuple[int, ...] = ()


@dataclass(frozen=True)
class ReplicationRecord:
    rep: int
    outcomes: dict[str, RuleOutcome]
    benchmark_objective: float = math.nan
    benchmark_prob: float = math.nan
    benchmark_feasible: bool = False
    failure: str = ""


@dataclass(frozen=True)
class SummaryTable:
    """Per-rule mean objective and empirical feasibility level.

    Objective means skip replications where the rule abstained
    (NoneFeasible); those count as infeasible in the feasibility level and
    are tallied separately.
    """

    method: str
    replications: int
    rules: dict[str, dict]
    benchmark_name: str
    benchmark_mean_objective: float | None
    benchmark_feasibility_level: float
    config_hash: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "replications": self.replications,
            "config_hash": self.config_hash,
            "benchmark": {
                "name": self.benchmark_name,
                "mean_objective": self.benchmark_mean_objective,
                "feasibility_level": self.benchmark_feasibility_level,
            },
            "rules": self.rules,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    summary: SummaryTable
    records: list[ReplicationRecord]


def _benchmark(config: ExperimentConfig, inst: GaussianLinearCcp, samples, split):
    """Method-matched baseline: SCA for RO, the chi-square-calibrated set for
    DRO, all sampled constraints for SO, and the two-stage segment solve for
    FAST."""
    method = config.method
    if method == "ro":
        cand = solve_sca_benchmark(inst)
        return cand.x, cand.objective
    if method == "dro":
        mu_hat, sigma_hat = mean_and_cov(split.phase1)
        factor = cholesky_psd(sigma_hat, policy="force")
        s_bench = chi_square_quantile(inst.dim, 1.0 - config.beta)
        cand = solve_dro_point(mu_hat, factor, s_bench, split.n1, inst.alpha, inst.c, inst.b)
        if not cand.is_optimal:
            raise EmptyInputError(f"benchmark solve failed: {cand.reason}")
        return cand.x, cand.objective
    if method == "so":
        cand = solve_so_point(samples.rows, samples.count, inst.c, inst.b, box=config.box_bound)
        if not cand.is_optimal:
            raise EmptyInputError(f"benchmark solve failed: {cand.reason}")
        return cand.x, cand.objective
    # fast: re-solve the first stage, then ratio-test along the segment
    full = solve_so_point(split.phase1, split.n1, inst.c, inst.b, box=config.box_bound)
    if not full.is_optimal:
        raise EmptyInputError(f"benchmark first stage failed: {full.reason}")
    x_o = np.zeros(inst.dim)
    _, x = line_search_fast(inst.c, x_o, full.x, split.phase2, inst.b)
    return x, float(inst.c @ x)


def run_replication(
    config: ExperimentConfig, inst: GaussianLinearCcp, rep: int
) -> ReplicationRecord:
    """One end-to-end replication: draw, split, build the path, validate
    with every configured rule, and score against the exact oracle.

    Fully deterministic in ``(config, rep)``; solver and validator failures
    are folded into the record instead of aborting the experiment.
    """
    n1, n2 = config.split_sizes()
    try:
        data_rng = RngStream(config.master_seed, rep)
        samples = draw_samples(inst, config.n, data_rng)
        split = split_data(samples, n1, n2)
        path = build_path(
            config.method,
            split.phase1,
            inst.c,
            inst.b,
            inst.alpha,
            config.beta,
            spec=config.grid_spec(),
            box=config.box_bound,
        )
        hmat = evaluate_h_matrix(path, split.phase2, inst.b)
        outcomes: dict[str, RuleOutcome] = {}
        for name in config.validators:
            rng = None
            if name in _RULE_STREAM:
                rng = data_rng.child(_RULE_STREAM[name])
            rule = MarginRule(rule=name, beta=config.beta, budget=config.mc_budget, rng=rng)
            report = select_candidate(path, hmat, inst.gamma, rule)
            if report.none_feasible:
                outcomes[name] = RuleOutcome(
                    rule=name, passing=tuple(report.passing_indices())
                )
                continue
            x = path.candidates[report.selected_index].x
            prob = inst.true_satisfaction_probability(x)
            outcomes[name] = RuleOutcome(
                rule=name,
                s_star=report.s_star,
                objective=report.objective,
                true_prob=prob,
                feasible=prob >= inst.gamma,
                none_feasible=False,
                passing=tuple(report.passing_indices()),
            )
        bench_x, bench_obj = _benchmark(config, inst, samples, split)
        bench_prob = inst.true_satisfaction_probability(bench_x)
        return ReplicationRecord(
            rep=rep,
            outcomes=outcomes,
            benchmark_objective=bench_obj,
            benchmark_prob=bench_prob,
            benchmark_feasible=bench_prob >= inst.gamma,
        )
    except (PathvalError, ArithmeticError) as exc:
        outcomes = {name: RuleOutcome(rule=name) for name in config.validators}
        return ReplicationRecord(rep=rep, outcomes=outcomes, failure=str(exc))


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every replication (optionally on a thread pool), aggregate, and
    emit ``summary.json`` plus ``records.csv`` when an output directory is
    configured. Aggregation folds records in replication order, so results
    do not depend on completion order."""
    inst = config.instance.build()
    reps = range(config.replications)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            records = list(pool.map(lambda r: run_replication(config, inst, r), reps))
    else:
        records = [run_replication(config, inst, r) for r in reps]
    summary = _aggregate(config.method, list(config.validators), records, config.config_hash())
    result = ExperimentResult(config=config, summary=summary, records=records)
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(summary.to_json(), encoding="utf-8")
        write_records_csv(records, out / "records.csv")
    return result


def _aggregate(
    method: str, rule_names: list[str], records: list[ReplicationRecord], config_hash: str | None
) -> SummaryTable:
    total = len(records)
    rules: dict[str, dict] = {}
    for name in rule_names:
        objectives = []
        s_values = []
        feasible = 0
        abstained = 0
        for rec in records:
            outcome = rec.outcomes[name]
            if outcome.none_feasible:
                abstained += 1
                continue
            objectives.append(outcome.objective)
            s_values.append(outcome.s_star)
            if outcome.feasible:
                feasible += 1
        rules[name] = {
            "mean_objective": (sum(objectives) / len(objectives)) if objectives else None,
            "feasibility_level": feasible / total,
            "none_feasible": abstained,
            "selected": len(objectives),
            # diagnostic only: which grid value gets picked most often (ties
            # resolve toward the smaller parameter)
            "modal_s_star": _mode(s_values),
        }
    bench_objs = [rec.benchmark_objective for rec in records if not math.isnan(rec.benchmark_objective)]
    bench_feasible = sum(1 for rec in records if rec.benchmark_feasible)
    return SummaryTable(
        method=method,
        replications=total,
        rules=rules,
        benchmark_name=BENCHMARK_NAMES[method],
        benchmark_mean_objective=(sum(bench_objs) / len(bench_objs)) if bench_objs else None,
        benchmark_feasibility_level=bench_feasible / total,
        config_hash=config_hash,
    )


def _mode(values: list[float]) -> float | None:
    if not values:
        return None
    counts: dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    best = max(counts.values())
    return min(v for v, k in counts.items() if k == best)


def _fmt(value: float) -> str:
    return "" if math.isnan(value) else repr(float(value))


def write_records_csv(records: list[ReplicationRecord], path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(RECORDS_HEADER)
        for rec in records:
            for name, outcome in rec.outcomes.items():
                writer.writerow(
                    [
                        rec.rep,
                        name,
                        _fmt(outcome.s_star),
                        _fmt(outcome.objective),
                        _fmt(outcome.true_prob),
                        int(outcome.feasible),
                        int(outcome.none_feasible),
                        _fmt(rec.benchmark_objective),
                        int(rec.benchmark_feasible),
                    ]
                )


def summarize_records(path, method: str = "ro", config_hash: str | None = None) -> SummaryTable:
    """Re-aggregate a saved records CSV; same fold as :func:`run_experiment`.

    The statistical content is recovered entirely from the file; the config
    hash is not stored in the CSV, so pass it in when provenance matters.
    """
    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: file is empty") from None
        if header != RECORDS_HEADER:
            raise ConfigError(f"{path}: unexpected header {header}")
        rows = list(reader)
    if not rows:
        raise EmptyInputError(f"{path}: no record rows")
    by_rep: dict[int, dict] = {}
    rule_names: list[str] = []
    for row in rows:
        rep = int(row[0])
        name = row[1]
        if name not in rule_names:
            rule_names.append(name)
        rec = by_rep.setdefault(
            rep,
            {
                "outcomes": {},
                "benchmark_objective": float(row[7]) if row[7] else math.nan,
                "benchmark_feasible": row[8] == "1",
            },
        )
        rec["outcomes"][name] = RuleOutcome(
            rule=name,
            s_star=float(row[2]) if row[2] else math.nan,
            objective=float(row[3]) if row[3] else math.nan,
            true_prob=float(row[4]) if row[4] else math.nan,
            feasible=row[5] == "1",
            none_feasible=row[6] == "1",
        )
    records = [
        ReplicationRecord(
            rep=rep,
            outcomes=doc["outcomes"],
            benchmark_objective=doc["benchmark_objective"],
            benchmark_feasible=doc["benchmark_feasible"],
        )
        for rep, doc in sorted(by_rep.items())
    ]
    return _aggregate(method, rule_names, records, config_hash)
