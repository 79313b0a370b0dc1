import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import R, make_task
from mmlilp.learners import TaskContext
from mmlilp.logic import Atom, Rule, canonicalize, is_variable
from mmlilp.rulegen import (GenConfig, enumerate_rules, generate_pool, inclusion_probability,
                            negative_tolerance, prune_generalisations, random_program, random_subset, subsumes)
from mmlilp.synthetic import SyntheticParams, make_synthetic

VOCAB = [("q", 1), ("r", 2)]


def _task(body=VOCAB, **kw):
    return make_task([], [], [], body, **kw)


# --- brute-force oracles ---------------------------------------------------------

def _renaming_key(rule):
    """Smallest literal listing over every renaming of the body-only variables."""
    head = {v: f"h{i}" for i, v in enumerate(rule.head.args)}
    free = sorted({a for lit in rule.body for a in lit.args if is_variable(a) and a not in head})
    best = None
    for perm in itertools.permutations(range(len(free))):
        ren = dict(head, **{v: f"_{i}" for v, i in zip(free, perm)})
        body = tuple(sorted((l.predicate, tuple(ren.get(a, a) for a in l.args)) for l in rule.body))
        if best is None or body < best:
            best = body
    return best


def _all_rules(size, max_vars, vocab=VOCAB):
    head = Atom("p", ("X",))
    names = ["X", "Y", "Z", "U", "V"][:max_vars]
    keys = set()
    for preds in itertools.combinations_with_replacement(vocab, size):
        slots = sum(a for _, a in preds)
        for assign in itertools.product(names, repeat=slots):
            it = iter(assign)
            body = tuple(Atom(p, tuple(next(it) for _ in range(a))) for p, a in preds)
            if len(set(body)) != size or "X" not in assign:
                continue
            keys.add(_renaming_key(Rule(head, body)))
    return keys


def _subsumes_brute(g, s):
    if g.head.signature != s.head.signature:
        return False
    g_vars = sorted({a for lit in (g.head,) + g.body for a in lit.args if is_variable(a)})
    terms = sorted({a for lit in (s.head,) + s.body for a in lit.args})
    target = set(s.body)
    for image in itertools.product(terms, repeat=len(g_vars)):
        th = dict(zip(g_vars, image))
        sub = lambda lit: Atom(lit.predicate, tuple(th.get(a, a) for a in lit.args))  # noqa: E731
        if sub(g.head) == s.head and all(sub(l) in target for l in g.body):
            return True
    return False


# --- enumeration -------------------------------------------------------------------

def test_single_unary_predicate_by_hand():
    task = _task([("q", 1)], max_vars=2)
    cfg = GenConfig(max_rule_size=3, max_vars=2)
    assert [str(r) for r in enumerate_rules(task, cfg, 1)] == ["p(A) :- q(A)."]
    # the second literal can only be q on a fresh variable
    assert len(enumerate_rules(task, cfg, 2)) == 1
    assert enumerate_rules(task, cfg, 3) == []


def test_size_outside_range_is_empty():
    cfg = GenConfig(max_rule_size=2)
    assert enumerate_rules(_task(), cfg, 0) == []
    assert enumerate_rules(_task(), cfg, 3) == []


@pytest.mark.parametrize("size,max_vars", [(1, 2), (1, 3), (2, 2), (2, 3), (3, 3)])
def test_enumeration_matches_brute_force(size, max_vars):
    got = enumerate_rules(_task(max_vars=max_vars), GenConfig(max_rule_size=3, max_vars=max_vars), size)
    assert len(got) == len({_renaming_key(r) for r in got})
    assert {_renaming_key(r) for r in got} == _all_rules(size, max_vars)


def test_renamings_collapse():
    assert canonicalize(R("h(X) :- q(X,Y).")) == canonicalize(R("h(X) :- q(X,Z)."))
    rules = enumerate_rules(_task([("r", 2)], max_vars=2), GenConfig(max_rule_size=1, max_vars=2), 1)
    assert sorted(map(str, rules)) == ["p(A) :- r(A,A).", "p(A) :- r(A,B).", "p(A) :- r(B,A)."]


def test_enumerated_rules_respect_bias():
    task = _task(max_vars=3)
    for size in (1, 2, 3):
        for rule in enumerate_rules(task, GenConfig(max_rule_size=3, max_vars=3), size):
            assert rule.size == size
            assert len(rule.variables()) <= 3
            assert rule.is_safe() and not rule.is_recursive()
            assert canonicalize(rule) == rule


def test_truncation_is_deterministic_and_capped():
    task = _task(max_vars=3)
    cfg = GenConfig(max_rule_size=3, max_vars=3, max_rules_per_size=7, rng_seed=11)
    a = enumerate_rules(task, cfg, 3)
    assert len(a) == 7 and a == enumerate_rules(task, cfg, 3)
    full = set(enumerate_rules(task, GenConfig(max_rule_size=3, max_vars=3), 3))
    assert set(a) <= full


def test_sampling_past_the_ceiling_stays_in_the_space():
    task = _task(max_vars=3)
    cfg = GenConfig(max_rule_size=3, max_vars=3, max_rules_per_size=20, enumeration_ceiling=5)
    sampled = enumerate_rules(task, cfg, 3)
    assert 0 < len(sampled) <= 20
    full = set(enumerate_rules(task, GenConfig(max_rule_size=3, max_vars=3), 3))
    assert set(sampled) <= full


def test_typed_bias_restricts_arguments():
    task = make_task([], [], [], [("has_car", 2), ("short", 1)], target=("east", 1), max_vars=2,
                     types={"east": ("train",), "has_car": ("train", "car"), "short": ("car",)})
    rules = {str(r) for r in generate_pool(task, GenConfig(max_rule_size=2, max_vars=2))}
    assert "east(A) :- has_car(A,B), short(B)." in rules
    assert not any("short(A)" in r for r in rules)


def test_gen_config_defaults_and_validation():
    cfg = GenConfig()
    assert (cfg.max_rule_size, cfg.max_vars, cfg.max_rules_per_size, cfg.max_clauses, cfg.program_samples) == \
        (4, 6, 10_000, 5, 10_000)
    with pytest.raises(ValueError):
        GenConfig(max_clauses=0)


# --- random programs -----------------------------------------------------------------

def test_random_program_singleton_pool():
    rule = R("p(X) :- q(X).")
    rng = random.Random(0)
    for _ in range(20):
        assert list(random_program([rule], GenConfig(), rng)) == [canonicalize(rule)]


def test_random_program_reproducible():
    pool = enumerate_rules(_task(max_vars=3), GenConfig(max_rule_size=2, max_vars=3), 2)
    draw = lambda: [random_program(pool, GenConfig(), random.Random(5)) for _ in range(3)]  # noqa: E731
    assert draw() == draw()
    with pytest.raises(ValueError):
        random_subset(0, GenConfig(), random.Random(0))


def test_inclusion_frequency_matches_analytic_probability():
    n, cfg, draws = 10, GenConfig(max_clauses=5), 10_000
    p = (1 + 2 + 3 + 4 + 5) / 5 / n        # E[c] / n
    assert inclusion_probability(n, 5) == pytest.approx(p)
    rng = random.Random(2024)
    counts = [0] * n
    for _ in range(draws):
        for i in random_subset(n, cfg, rng):
            counts[i] += 1
    sigma = math.sqrt(draws * p * (1 - p))
    assert all(abs(c - draws * p) < 3 * sigma for c in counts)


# --- subsumption and pruning ------------------------------------------------------------

SMALL_RULES = sorted({r for size in (1, 2, 3)
                      for r in enumerate_rules(_task(max_vars=3), GenConfig(max_rule_size=3, max_vars=3), size)},
                     key=str)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(SMALL_RULES), st.sampled_from(SMALL_RULES))
def test_subsumption_matches_brute_force(g, s):
    assert subsumes(g, s) == _subsumes_brute(g, s)


def test_subsumption_examples():
    assert subsumes(R("p(X) :- q(X)."), R("p(X) :- q(X), r(X,Y)."))
    assert subsumes(R("p(X) :- r(X,Y)."), R("p(X) :- r(X,X)."))
    assert not subsumes(R("p(X) :- r(X,X)."), R("p(X) :- r(X,Y)."))
    assert not subsumes(R("p(X) :- q(X)."), R("s(X) :- q(X)."))


def test_prune_drops_generalisation_of_inconsistent_rule():
    rules = [R("p(X) :- q(X), r(X,Y)."), R("p(X) :- q(X)."), R("p(X) :- r(X,X).")]
    neg = [0b1, 0b11, 0b0]
    assert prune_generalisations(rules, neg, tolerance=0) == [0, 2]
    assert prune_generalisations(rules, [0, 0, 0], tolerance=0) == [0, 1, 2]
    # within tolerance nothing is inconsistent
    assert prune_generalisations(rules, neg, tolerance=2) == [0, 1, 2]


def test_prune_keeps_rules_with_consistent_specialisations():
    rules = [R("p(X) :- q(X), r(X,Y)."), R("p(X) :- q(X)."), R("p(X) :- r(X,Y).")]
    # only the general rules cover negatives, so no specialisation is inconsistent
    assert prune_generalisations(rules, [0, 1, 1], tolerance=0) == [0, 1, 2]


def test_negative_tolerance():
    assert negative_tolerance(1 / (1e6 + 1), 500) == 1
    assert negative_tolerance(0.0, 500) == 0
    assert negative_tolerance(0.1, 20) == 2


@pytest.mark.parametrize("family,seed", [("trains", 1), ("zendo_like", 1), ("zendo_like", 4)])
def test_pruning_soundness_on_noiseless_tasks(family, seed):
    synth = make_synthetic(family, SyntheticParams(n_objects=30, max_body=2, max_vars=3), seed)
    ctx = TaskContext(synth.task)
    stats = ctx.stats(generate_pool(synth.task, GenConfig(max_rule_size=2, max_vars=3)))
    assert len(stats) <= 200
    keep = set(prune_generalisations([s.rule for s in stats], [s.neg for s in stats], 0))

    def programs(indices):
        for k in (1, 2):
            yield from itertools.combinations(indices, k)

    best_unpruned = min(ctx.cmdl(stats, sel) for sel in [()] + list(programs(sorted(keep))))
    for sel in programs(range(len(stats))):
        if not set(sel) <= keep:
            assert ctx.cmdl(stats, sel) >= best_unpruned
