"""Anytime search over rule subsets.

The objective is a per-rule linear part plus piecewise-linear terms over the
union-coverage counts of the selected rules: covered positives (``tp``),
covered negatives (``fp``), entailed target atoms outside the training set
(``extra``) and body literals (``literals``). C-MDL fits this form exactly;
the MML length is approximated by a separable surrogate and candidates are
re-scored exactly afterwards.
"""

from __future__ import annotations

import bisect
import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from .logic import RuleStats

COUNT_NAMES = ("tp", "fp", "extra", "literals")


@dataclass(frozen=True)
class PLFunction:
    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        if len(self.xs) < 2 or len(self.xs) != len(self.ys):
            raise ValueError("a PL function needs at least two breakpoints")
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    def __call__(self, x: float) -> float:
        xs, ys = self.xs, self.ys
        if x <= xs[0]:
            return ys[0]
        if x >= xs[-1]:
            return ys[-1]
        j = bisect.bisect_right(xs, x)
        x0, x1, y0, y1 = xs[j - 1], xs[j], ys[j - 1], ys[j]
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0)

    def min_on(self, lo: float, hi: float) -> float:
        best = min(self(lo), self(hi))
        for x, y in zip(self.xs, self.ys):
            if lo < x < hi and y < best:
                best = y
        return best


def build_pl_approx(exact_term: Callable[[int], float], lo: int, hi: int,
                    n_breakpoints: int = 5) -> PLFunction:
    """Interpolate ``exact_term`` through equally spaced integer breakpoints on [lo, hi]."""
    if hi < lo:
        raise ValueError("empty domain")
    if hi == lo:
        y = exact_term(lo)
        return PLFunction((lo, lo + 1), (y, y))
    n = max(2, n_breakpoints)
    xs = sorted({math.ceil(lo + i * (hi - lo) / (n - 1)) for i in range(n)} | {lo, hi})
    return PLFunction(tuple(xs), tuple(exact_term(x) for x in xs))


def linear_pl(slope: float, intercept: float, lo: int, hi: int) -> PLFunction:
    if hi <= lo:
        return PLFunction((lo, lo + 1), (intercept + slope * lo,) * 2)
    return PLFunction((lo, hi), (intercept + slope * lo, intercept + slope * hi))


@dataclass
class Objective:
    """Surrogate objective: constant + sum of rule weights + PL terms over the counts."""

    weights: Sequence[float]
    terms: dict[str, PLFunction] = field(default_factory=dict)
    constant: float = 0.0

    def term_value(self, tp: int, fp: int, extra: int, literals: int) -> float:
        v = self.constant
        for name, x in zip(COUNT_NAMES, (tp, fp, extra, literals)):
            f = self.terms.get(name)
            if f is not None:
                v += f(x)
        return v


@dataclass(frozen=True)
class SearchBudget:
    solver_time_per_call: float = 180.0
    trial_timeout: float = 1000.0
    max_nodes: int | None = 200_000

    def __post_init__(self):
        if self.solver_time_per_call <= 0 or self.trial_timeout <= 0:
            raise ValueError("time budgets must be positive")
        if self.max_nodes is not None and self.max_nodes <= 0:
            raise ValueError("node budget must be positive")

    @classmethod
    def exhaustive(cls) -> SearchBudget:
        return cls(max_nodes=None, solver_time_per_call=1e9, trial_timeout=1e9)


@dataclass(frozen=True)
class Constraints:
    max_rules: int | None = None
    max_literals: int | None = None


@dataclass(frozen=True)
class SubsetModel:
    rule_inclusion: tuple[bool, ...]
    example_covered: tuple[bool, ...]
    tp: int
    fp: int
    extra: int
    literals: int

    @classmethod
    def from_selection(cls, stats: Sequence[RuleStats], selection: Sequence[int],
                       n_pos: int, n_neg: int, extra_mask: int = 0) -> SubsetModel:
        chosen = set(selection)
        pos = neg = atoms = 0
        for i in chosen:
            pos |= stats[i].pos
            neg |= stats[i].neg
            atoms |= stats[i].atoms
        covered = tuple(bool(pos >> i & 1) for i in range(n_pos)) + tuple(bool(neg >> j & 1) for j in range(n_neg))
        return cls(tuple(i in chosen for i in range(len(stats))), covered, pos.bit_count(), neg.bit_count(),
                   (atoms & extra_mask).bit_count(), sum(stats[i].literals for i in chosen))


@dataclass(frozen=True, order=True)
class Candidate:
    value: float
    selection: tuple[int, ...]


class Optimizer(Protocol):
    def optimize(self, stats: Sequence[RuleStats], objective: Objective, budget: SearchBudget,
                 constraints: Constraints, extra_mask: int = 0, top_k: int = 10) -> list[Candidate]:
        ...


class BranchAndBound:
    """Depth-first branch and bound over rule inclusion bits.

    The bound adds the chosen rules' weights, the cheapest weights still
    available (only negative ones help) and the minimum of every PL term over
    the count range reachable from the node. The empty program seeds the
    incumbent, followed by a greedy pass.
    """

    def __init__(self):
        self.nodes = 0
        self.trace: list[float] = []
        self.timed_out = False

    def optimize(self, stats: Sequence[RuleStats], objective: Objective, budget: SearchBudget,
                 constraints: Constraints = Constraints(), extra_mask: int = 0,
                 top_k: int = 10) -> list[Candidate]:
        deadline = time.monotonic() + min(budget.solver_time_per_call, budget.trial_timeout)
        n = len(stats)
        w = list(objective.weights)
        max_rules = constraints.max_rules if constraints.max_rules is not None else n
        max_lits = constraints.max_literals if constraints.max_literals is not None else math.inf
        pos = [s.pos for s in stats]
        neg = [s.neg for s in stats]
        ext = [s.atoms & extra_mask for s in stats]
        lits = [s.literals for s in stats]
        terms = objective.terms

        def value(p: int, q: int, e: int, l: int, lin: float) -> float:
            return lin + objective.term_value(p.bit_count(), q.bit_count(), e.bit_count(), l)

        # heuristic order: best singleton first
        singles = [value(pos[i], neg[i], ext[i], lits[i], w[i]) for i in range(n)]
        order = sorted((i for i in range(n) if lits[i] <= max_lits), key=lambda i: (singles[i], i))
        m = len(order)
        suf_pos, suf_neg, suf_ext, suf_lit, suf_negw = [0] * (m + 1), [0] * (m + 1), [0] * (m + 1), [0] * (m + 1), [0.0] * (m + 1)
        for k in range(m - 1, -1, -1):
            i = order[k]
            suf_pos[k] = suf_pos[k + 1] | pos[i]
            suf_neg[k] = suf_neg[k + 1] | neg[i]
            suf_ext[k] = suf_ext[k + 1] | ext[i]
            suf_lit[k] = suf_lit[k + 1] + lits[i]
            suf_negw[k] = suf_negw[k + 1] + min(0.0, w[i])

        best: list[tuple[float, tuple[int, ...]]] = []   # max-heap via negated values
        seen: set[tuple[int, ...]] = set()
        incumbent = [math.inf]

        def offer(v: float, sel: tuple[int, ...]):
            key = tuple(sorted(sel))
            if key in seen:
                return
            seen.add(key)
            if len(best) < top_k:
                heapq.heappush(best, (-v, key))
            elif v < -best[0][0]:
                heapq.heapreplace(best, (-v, key))
            if v < incumbent[0]:
                incumbent[0] = v
                self.trace.append(v)

        offer(value(0, 0, 0, 0, 0.0), ())

        # greedy warm start
        sel: list[int] = []
        gp = gq = ge = 0
        gl, glin = 0, 0.0
        cur = value(0, 0, 0, 0, 0.0)
        for i in order:
            if len(sel) >= max_rules or gl + lits[i] > max_lits:
                continue
            v = value(gp | pos[i], gq | neg[i], ge | ext[i], gl + lits[i], glin + w[i])
            if v < cur:
                sel.append(i)
                gp, gq, ge, gl, glin, cur = gp | pos[i], gq | neg[i], ge | ext[i], gl + lits[i], glin + w[i], v
                offer(v, tuple(sel))

        def bound(k: int, p: int, q: int, e: int, l: int, lin: float, nr: int) -> float:
            if nr >= max_rules or k >= m:
                return value(p, q, e, l, lin)
            lb = lin + suf_negw[k] + objective.constant
            ranges = (
                (p.bit_count(), (p | suf_pos[k]).bit_count()),
                (q.bit_count(), (q | suf_neg[k]).bit_count()),
                (e.bit_count(), (e | suf_ext[k]).bit_count()),
                (l, min(max_lits, l + suf_lit[k])),
            )
            for name, (lo, hi) in zip(COUNT_NAMES, ranges):
                f = terms.get(name)
                if f is not None:
                    lb += f.min_on(lo, hi)
            return lb

        self.nodes = 0
        stack = [(0, (), 0, 0, 0, 0, 0.0)]
        while stack:
            if budget.max_nodes is not None and self.nodes >= budget.max_nodes:
                self.timed_out = True
                break
            if self.nodes % 1024 == 0 and time.monotonic() > deadline:
                self.timed_out = True
                break
            k, chosen, p, q, e, l, lin = stack.pop()
            self.nodes += 1
            if k >= m:
                continue
            # prune against the k-th best so the ranked list stays meaningful
            threshold = -best[0][0] if len(best) >= top_k else math.inf
            if bound(k, p, q, e, l, lin, len(chosen)) >= threshold:
                continue
            i = order[k]
            stack.append((k + 1, chosen, p, q, e, l, lin))
            if len(chosen) < max_rules and l + lits[i] <= max_lits:
                np_, nq, ne, nl, nlin = p | pos[i], q | neg[i], e | ext[i], l + lits[i], lin + w[i]
                nsel = chosen + (i,)
                offer(value(np_, nq, ne, nl, nlin), nsel)
                stack.append((k + 1, nsel, np_, nq, ne, nl, nlin))

        return sorted(Candidate(-v, sel) for v, sel in best)


def optimize(stats: Sequence[RuleStats], objective: Objective, budget: SearchBudget = SearchBudget(),
             constraints: Constraints = Constraints(), extra_mask: int = 0, top_k: int = 10,
             optimizer: Optimizer | None = None) -> list[Candidate]:
    """Best-found subsets, ranked by surrogate value; the empty program is always considered."""
    return (optimizer or BranchAndBound()).optimize(stats, objective, budget, constraints, extra_mask, top_k)


def rescore_exact(candidates: Sequence[tuple[int, ...]], exact: Callable[[tuple[int, ...]], float],
                  literals: Callable[[tuple[int, ...]], int],
                  serialize: Callable[[tuple[int, ...]], str]) -> tuple[tuple[int, ...], float]:
    """Exact argmin; ties go to fewer literals, then to the smaller serialization."""
    if not candidates:
        raise ValueError("no candidates to rescore")
    scored = [(exact(c), literals(c), serialize(c), c) for c in dict.fromkeys(candidates)]
    best = min(scored, key=lambda t: (t[0], t[1], t[2]))
    return best[3], best[0]
