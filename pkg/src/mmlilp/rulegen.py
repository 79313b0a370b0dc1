"""Candidate rule generation under the syntactic bias, and generalisation pruning."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

from .logic import Atom, Program, Rule, Task, canonicalize, is_variable

ANY = "_any"


@dataclass(frozen=True)
class GenConfig:
    max_rule_size: int = 4
    max_vars: int = 6
    max_rules_per_size: int = 10_000
    max_clauses: int = 5
    program_samples: int = 10_000
    rng_seed: int = 0
    enumeration_ceiling: int = 500_000

    def __post_init__(self):
        for name in ("max_rule_size", "max_vars", "max_rules_per_size", "max_clauses", "program_samples"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def limited_by(self, task: Task) -> GenConfig:
        """The tighter of these settings and the task's own bias."""
        b = task.bias
        return GenConfig(min(self.max_rule_size, b.max_body), min(self.max_vars, b.max_vars),
                         self.max_rules_per_size, min(self.max_clauses, b.max_rules),
                         self.program_samples, self.rng_seed, self.enumeration_ceiling)


def _compatible(t1: str, t2: str) -> bool:
    return t1 == ANY or t2 == ANY or t1 == t2


class _Vocabulary:
    def __init__(self, task: Task):
        bias = task.bias
        self.target = bias.target
        self.head_types = bias.types.get(bias.target[0], (ANY,) * bias.target[1])
        self.preds = sorted((p, a, bias.types.get(p, (ANY,) * a)) for p, a in bias.body_predicates)
        self.head_vars = [f"V{i}" for i in range(bias.target[1])]

    def head(self) -> Atom:
        return Atom(self.target[0], tuple(self.head_vars))


def _valid(body: Sequence[Atom], head_vars: Sequence[str]) -> bool:
    if len(set(body)) != len(body):
        return False
    used = {a for lit in body for a in lit.args}
    return all(v in used for v in head_vars)


def _literal_choices(types: tuple[str, ...], var_types: list[str], max_vars: int):
    """Argument tuples for one literal; a new variable always takes the next free index.

    Yields ``(args, new_var_types)`` with args as variable indices.
    """
    def rec(pos: int, vtypes: list[str], args: list[int]):
        if pos == len(types):
            yield tuple(args), vtypes[len(var_types):]
            return
        t = types[pos]
        for v, vt in enumerate(vtypes):
            if _compatible(vt, t):
                args.append(v)
                yield from rec(pos + 1, vtypes, args)
                args.pop()
        if len(vtypes) < max_vars:
            args.append(len(vtypes))
            yield from rec(pos + 1, vtypes + [t], args)
            args.pop()

    yield from rec(0, list(var_types), [])


class _TooMany(Exception):
    pass


def _enumerate_all(task: Task, size: int, max_vars: int, ceiling: int) -> set[Rule]:
    voc = _Vocabulary(task)
    n_head = len(voc.head_vars)
    head = voc.head()
    found: set[Rule] = set()
    visited = 0

    def name(v: int) -> str:
        return voc.head_vars[v] if v < n_head else f"W{v}"

    def rec(body: list[Atom], var_types: list[str], min_pred: int):
        nonlocal visited
        if len(body) == size:
            visited += 1
            if visited > ceiling:
                raise _TooMany
            if _valid(body, voc.head_vars):
                found.add(canonicalize(Rule(head, tuple(body))))
            return
        used = {a for lit in body for a in lit.args}
        missing = sum(1 for v in voc.head_vars if v not in used)
        slots_left = (size - len(body)) * max((a for _, a, _ in voc.preds), default=0)
        if missing > slots_left:
            return
        for pi in range(min_pred, len(voc.preds)):
            pred, _, types = voc.preds[pi]
            for args, new_types in _literal_choices(types, var_types, max_vars):
                body.append(Atom(pred, tuple(name(v) for v in args)))
                rec(body, var_types + new_types, pi)
                body.pop()

    rec([], list(voc.head_types), 0)
    return found


def _sample_random(task: Task, size: int, max_vars: int, count: int, rng: random.Random) -> set[Rule]:
    voc = _Vocabulary(task)
    head = voc.head()
    n_head = len(voc.head_vars)
    found: set[Rule] = set()
    attempts = 0
    while len(found) < count and attempts < 50 * count:
        attempts += 1
        var_types = list(voc.head_types)
        body = []
        for pred, _, types in sorted(rng.choice(voc.preds) for _ in range(size)):
            args = []
            for t in types:
                options = [v for v, vt in enumerate(var_types) if _compatible(vt, t)]
                if len(var_types) < max_vars:
                    options.append(len(var_types))
                v = rng.choice(options)
                if v == len(var_types):
                    var_types.append(t)
                args.append(voc.head_vars[v] if v < n_head else f"W{v}")
            body.append(Atom(pred, tuple(args)))
        if _valid(body, voc.head_vars):
            found.add(canonicalize(Rule(head, tuple(body))))
    return found


def _rule_key(rule: Rule) -> tuple:
    return tuple((lit.predicate, lit.args) for lit in rule.body)


def enumerate_rules(task: Task, config: GenConfig, size: int) -> list[Rule]:
    """Up to ``max_rules_per_size`` canonical rules with exactly ``size`` body literals.

    Small spaces are enumerated exhaustively and, when larger than the cap,
    subsampled without replacement by seed. Spaces past the enumeration
    ceiling are sampled directly.
    """
    if size < 1 or size > config.max_rule_size:
        return []
    cap = config.max_rules_per_size
    rng = random.Random(f"{config.rng_seed}:{size}")
    try:
        rules = sorted(_enumerate_all(task, size, config.max_vars, config.enumeration_ceiling), key=_rule_key)
    except _TooMany:
        rules = sorted(_sample_random(task, size, config.max_vars, cap, rng), key=_rule_key)
    if len(rules) > cap:
        rules = sorted(rng.sample(rules, cap), key=_rule_key)
    return rules


def generate_pool(task: Task, config: GenConfig) -> list[Rule]:
    config = config.limited_by(task)
    pool: list[Rule] = []
    for size in range(1, config.max_rule_size + 1):
        pool.extend(enumerate_rules(task, config, size))
    return pool


def random_subset(n_pool: int, config: GenConfig, rng: random.Random) -> tuple[int, ...]:
    if n_pool < 1:
        raise ValueError("rule pool is empty")
    c = rng.randint(1, config.max_clauses)
    return tuple(sorted(rng.sample(range(n_pool), min(c, n_pool))))


def random_program(rule_pool: Sequence[Rule], config: GenConfig, rng: random.Random) -> Program:
    return Program.of(rule_pool[i] for i in random_subset(len(rule_pool), config, rng))


def inclusion_probability(n_pool: int, max_clauses: int) -> float:
    """Chance that a given pool rule lands in one random program."""
    return sum(min(c, n_pool) / n_pool for c in range(1, max_clauses + 1)) / max_clauses


# --- generalisation ------------------------------------------------------------

def subsumes(general: Rule, specific: Rule) -> bool:
    """θ-subsumption restricted to rules with the same head predicate."""
    if general.head.signature != specific.head.signature:
        return False
    theta: dict[str, str] = {}
    for a, b in zip(general.head.args, specific.head.args):
        if is_variable(a):
            if theta.setdefault(a, b) != b:
                return False
        elif a != b:
            return False
    targets = specific.body
    lits = sorted(general.body, key=lambda l: -len(l.args))

    def match(i: int, theta: dict[str, str]) -> bool:
        if i == len(lits):
            return True
        lit = lits[i]
        for cand in targets:
            if cand.predicate != lit.predicate or cand.arity != lit.arity:
                continue
            ext = dict(theta)
            ok = True
            for a, b in zip(lit.args, cand.args):
                if is_variable(a):
                    if ext.setdefault(a, b) != b:
                        ok = False
                        break
                elif a != b:
                    ok = False
                    break
            if ok and match(i + 1, ext):
                return True
        return False

    return match(0, theta)


def negative_tolerance(error_rate: float, n_neg: int) -> int:
    return math.ceil(error_rate * n_neg)


def prune_generalisations(rules: Sequence[Rule], neg_coverage: Sequence[int],
                          tolerance: int, atom_coverage: Sequence[int] | None = None) -> list[int]:
    """Indices of rules that survive; strict generalisations of inconsistent rules are dropped.

    ``neg_coverage`` holds one negative-example bitset per rule. A rule is
    inconsistent when it covers more than ``tolerance`` negatives. The
    optional target-atom bitsets give a cheap superset filter before the
    subsumption test (a generalisation entails everything its
    specialisation does).
    """
    bad = [i for i, cov in enumerate(neg_coverage) if cov.bit_count() > tolerance]
    pruned: set[int] = set()
    for s in bad:
        spec = rules[s]
        spec_preds = {lit.predicate for lit in spec.body}
        for g, rule in enumerate(rules):
            if g == s or g in pruned or rule.size > spec.size:
                continue
            if not {lit.predicate for lit in rule.body} <= spec_preds:
                continue
            if (neg_coverage[s] & ~neg_coverage[g]) != 0:
                continue
            if atom_coverage is not None and (atom_coverage[s] & ~atom_coverage[g]) != 0:
                continue
            if subsumes(rule, spec) and not (rule.size == spec.size and subsumes(spec, rule)):
                pruned.add(g)
    return [i for i in range(len(rules)) if i not in pruned]
