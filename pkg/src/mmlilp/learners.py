"""RandomLearner and ApproxLearner, plus held-out evaluation."""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import cost as C
from .herbrand import HerbrandBase, build_herbrand_base, predicate_priors
from .logic import Atom, Model, Program, Rule, RuleStats, Task, coverage_bitsets, least_model, rule_heads
from .rulegen import GenConfig, generate_pool, negative_tolerance, prune_generalisations, random_subset
from .search import (Constraints, Objective, SearchBudget, build_pl_approx, linear_pl, optimize,
                     rescore_exact)

COST_KINDS = ("mml", "cmdl")


class TaskContext:
    """Per-task state shared by every candidate: the background model, the
    Herbrand base, predicate priors and the a-priori cost context."""

    def __init__(self, task: Task, prior: C.BetaPrior = C.NOISELESS_PRIOR, prior_mode: str = "generality",
                 hb: HerbrandBase | None = None, bk_model: Model | None = None,
                 heads_cache: dict | None = None):
        self.task = task
        self.heads_cache = heads_cache
        self.bk_model = bk_model if bk_model is not None else least_model(task.background, task.rules)
        self.hb = hb if hb is not None else build_herbrand_base(task)
        self.priors = predicate_priors(self.hb, prior_mode)
        self.prior = prior
        self.target_index = self.hb.target_index()
        self.n_pos = len(task.positives)
        self.n_neg = len(task.negatives)
        example_mask = 0
        for ex in task.examples:
            k = self.target_index.get(ex)
            if k is None:
                raise ValueError(f"example {ex} is outside the Herbrand base")
            example_mask |= 1 << k
        self.extra_mask = ((1 << self.hb.total_target_atoms) - 1) & ~example_mask
        self.n_extra = self.hb.total_target_atoms - self.n_pos - self.n_neg
        self.cost_ctx = C.CostContext(self.priors, prior, self.n_pos, self.n_neg,
                                      self.hb.total_target_atoms, task.bias.M)

    def stats(self, rules: Iterable[Rule]) -> list[RuleStats]:
        out = []
        for s in coverage_bitsets(rules, self.task, self.bk_model, self.target_index, self.heads_cache):
            out.append(RuleStats(s.rule, s.pos, s.neg, s.atoms, C.rule_syntax_length(s.rule, self.priors)))
        return out

    def counts(self, pos: int, neg: int) -> C.ConfusionCounts:
        tp, fp = pos.bit_count(), neg.bit_count()
        return C.ConfusionCounts(tp, fp, self.n_neg - fp, self.n_pos - tp)

    def union(self, stats: Sequence[RuleStats], selection: Iterable[int]) -> tuple[int, int, int]:
        pos = neg = atoms = 0
        for i in selection:
            pos |= stats[i].pos
            neg |= stats[i].neg
            atoms |= stats[i].atoms
        return pos, neg, atoms

    def mml(self, stats: Sequence[RuleStats], selection: Sequence[int]) -> C.CostBreakdown:
        pos, neg, atoms = self.union(stats, selection)
        program = Program(tuple(stats[i].rule for i in selection))
        lengths = {stats[i].rule: stats[i].syntax for i in selection}
        return C.mml_total(program, self.counts(pos, neg), self.cost_ctx, atoms.bit_count(), lengths)

    def cmdl(self, stats: Sequence[RuleStats], selection: Sequence[int]) -> int:
        pos, neg, _ = self.union(stats, selection)
        c = self.counts(pos, neg)
        return C.cmdl_cost(sum(stats[i].literals + 1 for i in selection), c.fp, c.fn)

    def score(self, stats: Sequence[RuleStats], selection: Sequence[int], cost_kind: str) -> float:
        if cost_kind == "mml":
            if sum(stats[i].literals for i in selection) > self.task.bias.M:
                return math.inf
            return self.mml(stats, selection).total
        if cost_kind == "cmdl":
            return float(self.cmdl(stats, selection))
        raise ValueError(f"unknown cost kind {cost_kind!r}")


@dataclass
class LearnedHypothesis:
    program: Program
    thetas: C.ThetaPair
    counts: C.ConfusionCounts
    cost: C.CostBreakdown | float
    cost_kind: str
    learner: str
    seed: int
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def total_cost(self) -> float:
        return self.cost.total if isinstance(self.cost, C.CostBreakdown) else float(self.cost)


def _finish(ctx: TaskContext, stats: Sequence[RuleStats], selection: Sequence[int], cost_kind: str,
            learner: str, seed: int, started: float, **extra) -> LearnedHypothesis:
    pos, neg, atoms = ctx.union(stats, selection)
    counts = ctx.counts(pos, neg)
    program = Program.of(stats[i].rule for i in selection)
    thetas = C.fit_thetas(counts, ctx.prior)
    if cost_kind == "mml":
        cost: C.CostBreakdown | float = ctx.mml(stats, selection)
    else:
        cost = float(ctx.cmdl(stats, selection))
    extra.setdefault("entailed_atoms", atoms.bit_count())
    return LearnedHypothesis(program, thetas, counts, cost, cost_kind, learner, seed,
                             time.perf_counter() - started, extra)


def _tie_key(stats: Sequence[RuleStats]):
    def literals(sel):
        return sum(stats[i].literals for i in sel)

    def serialize(sel):
        return str(Program.of(stats[i].rule for i in sel))
    return literals, serialize


# --- RandomLearner --------------------------------------------------------------

def random_candidates(ctx: TaskContext, config: GenConfig, pool: Sequence[Rule] | None = None
                      ) -> tuple[list[RuleStats], list[tuple[int, ...]]]:
    """Rule statistics plus the seeded sequence of random programs (empty program first).

    The sequence depends only on the task and the seed, so both cost kinds
    score the same candidates.
    """
    config = config.limited_by(ctx.task)
    rules = list(pool) if pool is not None else generate_pool(ctx.task, config)
    stats = ctx.stats(rules)
    rng = random.Random(config.rng_seed)
    programs: list[tuple[int, ...]] = [()]
    if stats:
        for _ in range(config.program_samples):
            programs.append(random_subset(len(stats), config, rng))
    return stats, list(dict.fromkeys(programs))


def select_best(ctx: TaskContext, stats: Sequence[RuleStats], programs: Sequence[tuple[int, ...]],
                cost_kind: str) -> tuple[tuple[int, ...], float]:
    literals, serialize = _tie_key(stats)
    scores = [(ctx.score(stats, sel, cost_kind), sel) for sel in programs]
    best_value = min(v for v, _ in scores)
    tied = [sel for v, sel in scores if v == best_value]
    return rescore_exact(tied, lambda sel: best_value, literals, serialize)


def random_learn(task: Task, cost_kind: str = "mml", config: GenConfig = GenConfig(),
                 prior: C.BetaPrior = C.NOISELESS_PRIOR, prior_mode: str = "generality",
                 ctx: TaskContext | None = None, pool: Sequence[Rule] | None = None) -> LearnedHypothesis:
    started = time.perf_counter()
    ctx = ctx or TaskContext(task, prior, prior_mode)
    stats, programs = random_candidates(ctx, config, pool)
    sel, _ = select_best(ctx, stats, programs, cost_kind)
    return _finish(ctx, stats, sel, cost_kind, "random", config.rng_seed, started,
                   candidates=len(programs), pool_size=len(stats))


# --- ApproxLearner --------------------------------------------------------------

def _remainder(ctx: TaskContext, tp: int, fp: int, extra: int, literals: int) -> float:
    counts = C.ConfusionCounts(tp, fp, ctx.n_neg - fp, ctx.n_pos - tp)
    return C.remainder_length(counts, tp + fp + extra, literals, ctx.cost_ctx).total


def mml_surrogate(ctx: TaskContext, stats: Sequence[RuleStats],
                  anchors: Sequence[tuple[int, int, int, int]], n_breakpoints: int = 5) -> Objective:
    """Separable PL surrogate of the MML length.

    Each count gets a PL function of the exact remainder along that axis with
    the other counts held at an anchor; several anchors are averaged. Rule
    syntax lengths enter as exact linear weights.
    """
    M = ctx.task.bias.M
    domains = {"tp": ctx.n_pos, "fp": ctx.n_neg, "extra": ctx.n_extra, "literals": M}
    terms = {}
    for axis, name in enumerate(("tp", "fp", "extra", "literals")):
        def along(x, axis=axis):
            vals = []
            for a in anchors:
                point = list(a)
                point[axis] = x
                vals.append(_remainder(ctx, *point))
            return sum(vals) / len(vals)
        terms[name] = build_pl_approx(along, 0, domains[name], n_breakpoints)
    constant = -3.0 * sum(_remainder(ctx, *a) for a in anchors) / len(anchors)
    return Objective([s.syntax for s in stats], terms, constant)


def cmdl_objective(ctx: TaskContext, stats: Sequence[RuleStats]) -> Objective:
    terms = {
        "tp": linear_pl(-1.0, float(ctx.n_pos), 0, ctx.n_pos),
        "fp": linear_pl(1.0, 0.0, 0, ctx.n_neg),
    }
    return Objective([float(s.literals + 1) for s in stats], terms)


def approx_learn(task: Task, cost_kind: str = "mml", config: GenConfig = GenConfig(),
                 prior: C.BetaPrior = C.NOISELESS_PRIOR, prior_mode: str = "generality",
                 budget: SearchBudget = SearchBudget(), ctx: TaskContext | None = None,
                 pool: Sequence[Rule] | None = None, prune: bool = True, max_rounds: int = 6,
                 top_k: int = 10) -> LearnedHypothesis:
    """Generate rules, cache their statistics, search rule subsets, re-score exactly.

    For MML the surrogate is first built around the empty and the all-covered
    count vectors, then rebuilt around each new exact incumbent until the
    incumbent stops changing or the trial budget runs out.
    """
    started = time.perf_counter()
    ctx = ctx or TaskContext(task, prior, prior_mode)
    config = config.limited_by(task)
    rules = list(pool) if pool is not None else generate_pool(task, config)
    stats = ctx.stats(rules)
    if prune and stats:
        keep = prune_generalisations([s.rule for s in stats], [s.neg for s in stats],
                                     negative_tolerance(ctx.prior.error_rate, ctx.n_neg),
                                     [s.atoms for s in stats])
        stats = [stats[i] for i in keep]
    constraints = Constraints(task.bias.max_rules, task.bias.M)
    literals, serialize = _tie_key(stats)
    exact = lambda sel: ctx.score(stats, sel, cost_kind)  # noqa: E731
    deadline = started + budget.trial_timeout
    rounds = 0
    if cost_kind == "cmdl":
        found = optimize(stats, cmdl_objective(ctx, stats), budget, constraints, ctx.extra_mask, top_k)
        best, _ = rescore_exact([c.selection for c in found], exact, literals, serialize)
        rounds = 1
    elif cost_kind == "mml":
        empty = (0, 0, 0, 0)
        full = (ctx.n_pos, ctx.n_neg, ctx.n_extra, task.bias.M)
        anchors = [empty, full]
        pool_cands: list[tuple[int, ...]] = [()]
        best, _ = rescore_exact(pool_cands, exact, literals, serialize)
        seen_anchors = set()
        while rounds < max_rounds and time.perf_counter() < deadline:
            rounds += 1
            remaining = max(deadline - time.perf_counter(), 1e-3)
            call_budget = SearchBudget(min(budget.solver_time_per_call, remaining), remaining, budget.max_nodes)
            found = optimize(stats, mml_surrogate(ctx, stats, anchors), call_budget, constraints,
                             ctx.extra_mask, top_k)
            pool_cands.extend(c.selection for c in found)
            new_best, _ = rescore_exact(pool_cands, exact, literals, serialize)
            pos, neg, atoms = ctx.union(stats, new_best)
            anchor = (pos.bit_count(), neg.bit_count(), (atoms & ctx.extra_mask).bit_count(),
                      sum(stats[i].literals for i in new_best))
            if rounds > 1 and (new_best == best or anchor in seen_anchors):
                best = new_best
                break
            best = new_best
            seen_anchors.add(anchor)
            anchors = [anchor]
    else:
        raise ValueError(f"unknown cost kind {cost_kind!r}")
    return _finish(ctx, stats, tuple(best), cost_kind, "approx", config.rng_seed, started,
                   pool_size=len(stats), rounds=rounds)


# --- evaluation -------------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    balanced_accuracy: float
    counts: C.ConfusionCounts


def covered_examples(program: Program, examples: Sequence[Atom], bk_model: Model) -> list[bool]:
    heads: set[tuple[str, ...]] = set()
    for rule in program:
        heads |= rule_heads(rule, bk_model)
    return [ex.args in heads for ex in examples]


def balanced_accuracy(counts: C.ConfusionCounts) -> float:
    """Mean of the two class recalls; an absent class counts as recall 1."""
    tpr = counts.tp / counts.n_pos if counts.n_pos else 1.0
    tnr = counts.tn / counts.n_neg if counts.n_neg else 1.0
    return (tpr + tnr) / 2


def evaluate(hypothesis: LearnedHypothesis, test_pos: Sequence[Atom], test_neg: Sequence[Atom],
             bk_model: Model) -> Metrics:
    labels = []
    for covered in covered_examples(hypothesis.program, list(test_pos) + list(test_neg), bk_model):
        labels.append(C.predict_covered(covered, hypothesis.thetas)[0])
    n_pos = len(test_pos)
    tp = sum(labels[:n_pos])
    fp = sum(labels[n_pos:])
    counts = C.ConfusionCounts(tp, fp, len(test_neg) - fp, n_pos - tp)
    return Metrics(balanced_accuracy(counts), counts)
