"""Desk-scale experiment grids comparing MML against C-MDL.

Each trial splits a labeled task into a training pool and a disjoint test
set, perturbs the training pool (sample size, class balance, noise) and
runs every cost kind on the same candidates, so per-trial deltas are paired.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, fields, replace
from typing import Callable, Iterable, Sequence

from . import cost as C
from .herbrand import HerbrandBase, build_herbrand_base
from .learners import (TaskContext, _finish, approx_learn, evaluate, random_candidates, select_best)
from .logic import Model, Task, least_model
from .rulegen import GenConfig
from .search import SearchBudget
from .taskio import InsufficientExamplesError, PerturbSpec, perturb, split_examples

CSV_SCHEMA = "runrecord/v1"
GRIDS = ("overall", "balance", "efficiency", "priors", "noise", "approx-balance")
PROPORTIONS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
BALANCE_SIZES = (20, 50)
EFFICIENCY_SIZES = (1, 5, 10, 20, 50, 100, 200, 500)
NOISE_LEVELS = (0.1, 0.2, 0.3, 0.4, 0.5)
APPROX_PROPORTIONS = (1.0, 0.0)


@dataclass(frozen=True)
class RunRecord:
    task_id: str
    learner: str
    cost_kind: str
    seed: int
    training_size: int
    positive_proportion: float | None
    noise_fraction: float
    balanced_accuracy: float
    exact_cost: float
    wall_time: float

    def sort_key(self):
        return (self.task_id, self.training_size, -1.0 if self.positive_proportion is None else self.positive_proportion,
                self.noise_fraction, self.seed, self.learner, self.cost_kind)


@dataclass(frozen=True)
class Cell:
    """One grid point: how the training pool is perturbed and which learner runs."""

    learner: str
    size: int | None = None
    proportion: float | None = None
    noise: float = 0.0
    prior_modes: tuple[str, ...] = ()


@dataclass(frozen=True)
class ExperimentConfig:
    repetitions: int = 10
    gen: GenConfig = GenConfig(max_rule_size=3, max_vars=4, max_rules_per_size=2000, max_clauses=3,
                               program_samples=2000)
    budget: SearchBudget = SearchBudget(solver_time_per_call=30.0, trial_timeout=60.0, max_nodes=50_000)
    test_fraction: float = 0.5
    noisy_prior: C.BetaPrior = C.NOISY_PRIOR
    noiseless_prior: C.BetaPrior = C.NOISELESS_PRIOR


def grid_cells(grid: str) -> list[Cell]:
    if grid == "overall":
        return [Cell("random")]
    if grid == "balance":
        return [Cell("random", s, p) for s in BALANCE_SIZES for p in PROPORTIONS]
    if grid == "efficiency":
        return [Cell("random", s) for s in EFFICIENCY_SIZES]
    if grid == "priors":
        return [Cell("random", s, prior_modes=("generality", "uniform")) for s in EFFICIENCY_SIZES]
    if grid == "noise":
        return [Cell("random", noise=f) for f in NOISE_LEVELS]
    if grid == "approx-balance":
        return [Cell("approx", 20, p) for p in APPROX_PROPORTIONS]
    raise ValueError(f"unknown grid {grid!r}; choose from {', '.join(GRIDS)}")


class _Source:
    """A labeled task plus its cached background model and Herbrand base."""

    def __init__(self, task_id: str, task: Task):
        self.task_id = task_id
        self.task = task
        self.bk_model: Model = least_model(task.background, task.rules)
        self.hb: HerbrandBase = build_herbrand_base(task)
        self.heads: dict = {}


def _training_set(src: _Source, cell: Cell, seed: int, noise_mode: str, test_fraction: float) -> tuple[Task, Task]:
    train, test = split_examples(src.task, test_fraction, seed)
    spec = PerturbSpec(cell.noise, cell.size, cell.proportion, seed, noise_mode)
    return perturb(train, spec), test


def run_trial(src: _Source, cell: Cell, seed: int, config: ExperimentConfig,
              noise_mode: str = "reassign") -> list[RunRecord]:
    train, test = _training_set(src, cell, seed, noise_mode, config.test_fraction)
    prior = config.noisy_prior if cell.noise > 0 else config.noiseless_prior
    gen = replace(config.gen, rng_seed=seed)
    if cell.prior_modes:
        variants = [("mml" if mode == "generality" else f"mml-{mode}", "mml", mode) for mode in cell.prior_modes]
    else:
        variants = [("mml", "mml", "generality"), ("cmdl", "cmdl", "generality")]
    records = []
    shared = None
    for label, kind, mode in variants:
        started = time.perf_counter()
        ctx = TaskContext(train, prior, mode, hb=src.hb, bk_model=src.bk_model, heads_cache=src.heads)
        if cell.learner == "random":
            if shared is None:
                shared = random_candidates(ctx, gen)
            # syntax lengths depend on the prior mode, coverage does not
            stats = [replace(s, syntax=C.rule_syntax_length(s.rule, ctx.priors)) for s in shared[0]]
            programs = shared[1]
            sel, _ = select_best(ctx, stats, programs, kind)
            hyp = _finish(ctx, stats, sel, kind, "random", seed, started)
        else:
            hyp = approx_learn(train, kind, gen, prior, mode, config.budget, ctx=ctx)
        metrics = evaluate(hyp, test.positives, test.negatives, src.bk_model)
        n = len(train.examples)
        records.append(RunRecord(src.task_id, cell.learner, label, seed, n,
                                 cell.proportion,
                                 cell.noise, metrics.balanced_accuracy, hyp.total_cost,
                                 time.perf_counter() - started))
    return records


@dataclass
class ExperimentResult:
    records: list[RunRecord]
    skipped: list[tuple[str, Cell, int, str]]

    def csv_text(self) -> str:
        return records_to_csv(self.records)


def run_grid(grid: str, tasks: Sequence[tuple[str, Task]], config: ExperimentConfig = ExperimentConfig(),
             noise_mode: str = "reassign", seeds: Iterable[int] | None = None,
             cells: Sequence[Cell] | None = None, progress: Callable[[str], None] | None = None) -> ExperimentResult:
    """Run every (task, cell, seed) trial; cells whose training pool is too small are skipped and reported."""
    cells = list(cells) if cells is not None else grid_cells(grid)
    seeds = list(seeds) if seeds is not None else list(range(config.repetitions))
    records: list[RunRecord] = []
    skipped = []
    for task_id, task in tasks:
        src = _Source(task_id, task)
        for cell in cells:
            for seed in seeds:
                try:
                    records.extend(run_trial(src, cell, seed, config, noise_mode))
                except InsufficientExamplesError as exc:
                    skipped.append((task_id, cell, seed, str(exc)))
                    if progress:
                        progress(f"skip {task_id} {cell} seed={seed}: {exc}")
            if progress:
                progress(f"done {task_id} {cell}")
    records.sort(key=RunRecord.sort_key)
    return ExperimentResult(records, skipped)


# --- CSV and summaries ----------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records: Iterable[RunRecord], include_time: bool = True) -> str:
    out = io.StringIO()
    out.write(f"# schema: {CSV_SCHEMA}\n")
    w = csv.writer(out, lineterminator="\n")
    names = [f.name for f in fields(RunRecord)]
    w.writerow(names)
    for r in sorted(records, key=RunRecord.sort_key):
        row = asdict(r)
        if not include_time:
            row["wall_time"] = 0.0
        w.writerow([_fmt(row[n]) for n in names])
    return out.getvalue()


def read_records(text: str) -> list[RunRecord]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"# schema: {CSV_SCHEMA}":
        raise ValueError("missing or unknown CSV schema header")
    out = []
    for row in csv.DictReader(lines[1:]):
        out.append(RunRecord(row["task_id"], row["learner"], row["cost_kind"], int(row["seed"]),
                             int(row["training_size"]),
                             float(row["positive_proportion"]) if row["positive_proportion"] else None,
                             float(row["noise_fraction"]), float(row["balanced_accuracy"]),
                             float(row["exact_cost"]), float(row["wall_time"])))
    return out


@dataclass(frozen=True)
class Summary:
    mean: float
    stderr: float
    n: int


def mean_se(values: Sequence[float]) -> Summary:
    values = list(values)
    if not values:
        return Summary(math.nan, math.nan, 0)
    if len(values) == 1:
        return Summary(values[0], 0.0, 1)
    return Summary(statistics.fmean(values), statistics.stdev(values) / math.sqrt(len(values)), len(values))


def _cell_key(r: RunRecord):
    return (r.learner, r.training_size, r.positive_proportion, r.noise_fraction)


def summarize(records: Iterable[RunRecord]) -> dict[tuple, Summary]:
    """Mean and standard error of balanced accuracy per (cell, cost kind)."""
    groups: dict[tuple, list[float]] = defaultdict(list)
    for r in records:
        groups[_cell_key(r) + (r.cost_kind,)].append(r.balanced_accuracy)
    return {k: mean_se(v) for k, v in sorted(groups.items(), key=lambda kv: str(kv[0]))}


def paired_deltas(records: Iterable[RunRecord], a: str = "mml", b: str = "cmdl") -> dict[tuple, list[tuple[str, int, float]]]:
    """Per cell, the (task, seed, accuracy[a] - accuracy[b]) of every trial where both ran."""
    by_trial: dict[tuple, dict[str, float]] = defaultdict(dict)
    for r in records:
        by_trial[_cell_key(r) + (r.task_id, r.seed)][r.cost_kind] = r.balanced_accuracy
    out: dict[tuple, list[tuple[str, int, float]]] = defaultdict(list)
    for key, accs in sorted(by_trial.items(), key=lambda kv: str(kv[0])):
        if a in accs and b in accs:
            out[key[:4]].append((key[4], key[5], accs[a] - accs[b]))
    return dict(out)


def task_level_delta(deltas: Sequence[tuple[str, int, float]]) -> Summary:
    """Average the paired deltas within each task, then summarize across tasks."""
    per_task: dict[str, list[float]] = defaultdict(list)
    for task_id, _, d in deltas:
        per_task[task_id].append(d)
    return mean_se([statistics.fmean(v) for _, v in sorted(per_task.items())])


def summary_text(records: Sequence[RunRecord], a: str = "mml", b: str = "cmdl") -> str:
    lines = ["# accuracy: learner size proportion noise cost_kind mean stderr n"]
    for key, s in summarize(records).items():
        lines.append(" ".join(_fmt(k) or "-" for k in key) + f" {s.mean:.4f} {s.stderr:.4f} {s.n}")
    lines.append(f"# paired delta {a} - {b}: learner size proportion noise mean stderr n_tasks")
    for key, ds in paired_deltas(records, a, b).items():
        s = task_level_delta(ds)
        lines.append(" ".join(_fmt(k) or "-" for k in key) + f" {s.mean:.4f} {s.stderr:.4f} {s.n}")
    return "\n".join(lines) + "\n"
