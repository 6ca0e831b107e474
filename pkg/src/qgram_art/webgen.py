"""Test-generation campaigns over navigation models and their metrics.

Four techniques are compared: ``rand``, ``dist`` (maxi-min method sequence
edit distance), ``qgrams_s`` (q-grams over method names) and ``qgrams_si``
(q-grams over methods with their argument values).
"""

from __future__ import annotations

import csv
import logging
import math
import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .navmodel import ModelExecutor, NavigationModel, PathGenerator, load_bundled, load_model_file
from .selectors import RunRecord, StoppingCriterion, run_strategy

__all__ = [
    "TECHNIQUES",
    "TechniqueConfig",
    "CoverageTrajectory",
    "CellResult",
    "Campaign",
    "run_technique",
    "run_campaign",
    "auc",
    "unique_targets",
    "length_trajectory",
    "hard_targets",
    "resolve_models",
    "write_campaign",
]

log = logging.getLogger(__name__)

TECHNIQUES = ("rand", "dist", "qgrams_s", "qgrams_si")
DEFAULT_MAX_EXECUTIONS = 2000


@dataclass(frozen=True)
class TechniqueConfig:
    name: str
    W: int = 30
    Q: int = 2
    max_executions: int | None = DEFAULT_MAX_EXECUTIONS
    budget_secs: float | None = None

    def __post_init__(self):
        if self.name not in TECHNIQUES:
            raise ValueError(f"unknown technique {self.name!r}; expected one of {TECHNIQUES}")
        if self.max_executions is None and self.budget_secs is None:
            raise ValueError("a technique needs an execution cap or a time budget")

    def stopping(self) -> StoppingCriterion:
        return StoppingCriterion(max_executions=self.max_executions, wall_budget=self.budget_secs)

    def strategy_args(self) -> dict:
        if self.name == "rand":
            return {"strategy": "rand"}
        if self.name == "dist":
            return {"strategy": "dist", "w_size": self.W, "mode": "sequence_only"}
        mode = "sequence_only" if self.name == "qgrams_s" else "sequence_plus_inputs"
        return {"strategy": "qgram", "w_size": self.W, "q": self.Q, "mode": mode}


@dataclass
class CoverageTrajectory:
    points: list  # (executions, covered)
    total_targets: int

    @classmethod
    def from_run(cls, run: RunRecord, total_targets: int) -> "CoverageTrajectory":
        return cls(run.coverage_curve(), total_targets)

    @property
    def executions(self) -> int:
        return self.points[-1][0] if self.points else 0

    def percentages(self) -> list[float]:
        return [100.0 * c / self.total_targets for _, c in self.points]


def auc(trajectory: CoverageTrajectory, fraction: float = 1.0,
        max_executions: int | None = None) -> float:
    """Normalized area under the coverage curve (x: executed tests, y: coverage %).

    The curve is right-padded with its last value up to ``max_executions``
    (default: its own length), the trapezoidal area over the first
    ``ceil(fraction * max_executions)`` points is taken, and the result is
    divided by the area of the full ``max_executions x 100`` rectangle.
    """
    if not trajectory.points:
        raise ValueError("empty trajectory")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    ys = trajectory.percentages()
    n_max = max_executions if max_executions is not None else len(ys)
    if n_max < len(ys):
        raise ValueError("max_executions is shorter than the trajectory")
    ys = ys + [ys[-1]] * (n_max - len(ys))
    k = max(1, math.ceil(fraction * n_max - 1e-9))
    if n_max == 1:
        return ys[0] / 100.0
    area = math.fsum((ys[i] + ys[i + 1]) / 2.0 for i in range(k - 1))
    return area / (100.0 * (n_max - 1))


def unique_targets(covered_sets: dict) -> dict:
    """Per technique, the number of its targets no other technique covered."""
    out = {}
    for name, targets in covered_sets.items():
        others = set()
        for other, t in covered_sets.items():
            if other != name:
                others |= set(t)
        out[name] = len(set(targets) - others)
    return out


def length_trajectory(run: RunRecord | Sequence[int], window: int = 100) -> list[tuple[int, float]]:
    """Trailing moving average of test lengths, indexed from 1.

    The first ``window - 1`` points average over the tests seen so far.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    lengths = run.lengths() if isinstance(run, RunRecord) else list(run)
    out = []
    acc = 0
    for i, x in enumerate(lengths):
        acc += x
        if i >= window:
            acc -= lengths[i - window]
        out.append((i + 1, acc / min(i + 1, window)))
    return out


def hard_targets(model: NavigationModel, rand_runs: Sequence) -> set:
    """Targets that none of the given random-testing runs covered."""
    if not rand_runs:
        raise ValueError("need at least one run")
    covered = set()
    for run in rand_runs:
        covered |= run.covered() if isinstance(run, RunRecord) else set(run)
    return set(model.targets) - covered


def run_technique(model: NavigationModel, tech: TechniqueConfig, seed) -> RunRecord:
    args = tech.strategy_args()
    strategy = args.pop("strategy")
    rec = run_strategy(strategy, PathGenerator(model), ModelExecutor(model), tech.stopping(),
                       rng=seed, **args)
    rec.config["technique"] = tech.name
    return rec


@dataclass
class CellResult:
    model: str
    technique: str
    rep: int
    seed: int
    total_targets: int
    coverage_pct: float
    exec_tests: int
    mean_length: float
    mean_exec_time: float
    mean_gen_time: float
    covered: frozenset
    trajectory: CoverageTrajectory = field(repr=False)
    lengths: list = field(repr=False)
    distance_calls: int = 0
    diversity_evals: int = 0
    auc: float = math.nan
    auc_at_20: float = math.nan
    unique_targets: int = 0

    def row(self) -> dict:
        keys = ("model", "technique", "rep", "seed", "coverage_pct", "auc", "auc_at_20",
                "unique_targets", "exec_tests", "mean_length", "mean_exec_time",
                "mean_gen_time", "distance_calls", "diversity_evals", "total_targets")
        return {k: getattr(self, k) for k in keys}


def _cell_seed(seed: int, model: str, technique: str, rep: int) -> int:
    return random.Random(f"{seed}:{model}:{technique}:{rep}").getrandbits(63)


def _run_cell(args) -> CellResult:
    model, tech, rep, seed = args
    cell_seed = _cell_seed(seed, model.name, tech.name, rep)
    rec = run_technique(model, tech, cell_seed)
    c = rec.counters
    n = max(c.executions, 1)
    total = len(model.targets)
    covered = frozenset(rec.covered())
    return CellResult(
        model=model.name,
        technique=tech.name,
        rep=rep,
        seed=cell_seed,
        total_targets=total,
        coverage_pct=100.0 * len(covered) / total,
        exec_tests=c.executions,
        mean_length=statistics.fmean(rec.lengths()) if rec.log else 0.0,
        mean_exec_time=c.wall_execution_time / n,
        mean_gen_time=c.wall_selection_time / n,
        covered=covered,
        trajectory=CoverageTrajectory.from_run(rec, total),
        lengths=rec.lengths(),
        distance_calls=c.distance_calls,
        diversity_evals=c.diversity_evals,
    )


@dataclass
class Campaign:
    cells: list
    errors: dict = field(default_factory=dict)

    def select(self, model: str | None = None, technique: str | None = None) -> list:
        return [c for c in self.cells
                if (model is None or c.model == model) and (technique is None or c.technique == technique)]

    def models(self) -> list[str]:
        return sorted({c.model for c in self.cells})

    def techniques(self) -> list[str]:
        seen = []
        for c in self.cells:
            if c.technique not in seen:
                seen.append(c.technique)
        return seen

    def mean(self, model: str, technique: str, metric: str) -> float:
        return statistics.fmean(getattr(c, metric) for c in self.select(model, technique))

    def uniques(self) -> list[dict]:
        rows = []
        for m in self.models():
            reps = sorted({c.rep for c in self.select(m)})
            for rep in reps:
                row = {"model": m, "rep": rep}
                row.update({c.technique: c.unique_targets for c in self.cells
                            if c.model == m and c.rep == rep})
                rows.append(row)
        return rows


def run_campaign(models: Iterable, techniques: Iterable, repetitions: int = 5, seed: int = 0,
                 workers: int | None = None) -> Campaign:
    """Run every model x technique x repetition cell and compute the metrics.

    ``models`` may hold loaded models or paths / bundled model names; a model
    that fails to load is reported in ``Campaign.errors`` and skipped.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    loaded, errors = resolve_models(models)
    techs = [t if isinstance(t, TechniqueConfig) else TechniqueConfig(t) for t in techniques]
    jobs = [(m, t, rep, seed) for m in loaded for t in techs for rep in range(repetitions)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell, jobs))
    else:
        cells = [_run_cell(job) for job in jobs]
    campaign = Campaign(cells, errors)
    _fill_metrics(campaign)
    return campaign


def _fill_metrics(campaign: Campaign) -> None:
    for m in campaign.models():
        cells = campaign.select(m)
        for rep in {c.rep for c in cells}:
            group = [c for c in cells if c.rep == rep]
            # pad to the longest run of this repetition
            n_max = max(c.trajectory.executions for c in group)
            for c in group:
                c.auc = auc(c.trajectory, 1.0, n_max)
                c.auc_at_20 = auc(c.trajectory, 0.2, n_max)
            uniq = unique_targets({c.technique: c.covered for c in group})
            for c in group:
                c.unique_targets = uniq[c.technique]


def resolve_models(models: Iterable) -> tuple[list, dict]:
    loaded, errors = [], {}
    for m in models:
        if isinstance(m, NavigationModel):
            loaded.append(m)
            continue
        try:
            path = Path(m)
            if path.is_dir():
                for p in sorted(path.glob("*.json")):
                    loaded.append(load_model_file(p))
            elif path.suffix == ".json" or path.exists():
                loaded.append(load_model_file(path))
            else:
                loaded.append(load_bundled(str(m)))
        except Exception as exc:  # reported per model, campaign goes on
            log.error("cannot load model %s: %s", m, exc)
            errors[str(m)] = str(exc)
    return loaded, errors


SUMMARY_FIELDS = ("model", "technique", "rep", "seed", "coverage_pct", "auc", "auc_at_20",
                  "unique_targets", "exec_tests", "mean_length", "mean_exec_time",
                  "mean_gen_time", "distance_calls", "diversity_evals", "total_targets")


def write_campaign(campaign: Campaign, out_dir) -> Path:
    """Write ``summary.csv``, ``uniques.csv`` and one CSV per trajectory."""
    out = Path(out_dir)
    (out / "trajectories").mkdir(parents=True, exist_ok=True)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        w.writeheader()
        for c in campaign.cells:
            w.writerow(c.row())
    techs = campaign.techniques()
    with open(out / "uniques.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["model", "rep", *techs])
        w.writeheader()
        for row in campaign.uniques():
            w.writerow(row)
    for c in campaign.cells:
        path = out / "trajectories" / f"{c.model}_{c.technique}_{c.rep}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["executions", "covered", "length"])
            for (n, cov), length in zip(c.trajectory.points, c.lengths):
                w.writerow([n, cov, length])
    if campaign.errors:
        with open(out / "errors.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["model", "error"])
            for k, v in campaign.errors.items():
                w.writerow([k, v])
    return out
