import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import A, R, make_task
from mmlilp.logic import (LogicError, Model, Program, ResourceLimitError, Rule, Term, UnsafeRuleError,
                          canonicalize, coverage_bitsets, covers, least_model, rule_heads, solve)


def test_terms_split_variables_and_constants():
    assert Term.parse("X") == ("variable", "X")
    assert Term.parse("_y") == ("variable", "_y")
    assert Term.parse("a") == ("constant", "a")
    assert Term.parse("42") == ("constant", "42")
    with pytest.raises(LogicError):
        Term.parse("")


def test_atom_and_rule_text():
    rule = R("p(X,Y) :- p1(X,Y), p2(X).")
    assert str(rule) == "p(X,Y) :- p1(X,Y), p2(X)."
    assert rule.size == 2
    assert rule.body_only_vars() == []
    assert R("h(X) :- q(X,Y).").body_only_vars() == ["Y"]
    assert not R("h(X,Y) :- q(X).").is_safe()
    assert R("h(X) :- h(X).").is_recursive()


def test_least_model_one_step_closure():
    m = least_model([A("q(a)")], [R("s(X) :- q(X).")])
    assert m.atoms() == {A("q(a)"), A("s(a)")}


def test_least_model_facts_only():
    assert least_model([A("q(a)")]).atoms() == {A("q(a)")}


def test_least_model_path_join():
    m = least_model([A("edge(a,b)"), A("edge(b,c)")], [R("path(X,Y) :- edge(X,Z), edge(Z,Y).")])
    assert m.atoms() - {A("edge(a,b)"), A("edge(b,c)")} == {A("path(a,c)")}


def test_least_model_recursive_background():
    edges = [A(f"e(n{i},n{i + 1})") for i in range(5)]
    m = least_model(edges, [R("t(X,Y) :- e(X,Y)."), R("t(X,Y) :- e(X,Z), t(Z,Y).")])
    assert len(m.tuples("t")) == 15


def test_least_model_ceiling():
    facts = [A(f"q(c{i})") for i in range(10)]
    with pytest.raises(ResourceLimitError):
        least_model(facts, [R("r(X,Y) :- q(X), q(Y).")], ceiling=50)


def test_least_model_rejects_unsafe_rules():
    with pytest.raises(UnsafeRuleError):
        least_model([A("q(a)")], [R("s(X,Y) :- q(X).")])


def test_covers_examples():
    m = least_model([A("q(a)")])
    rule = R("p(X) :- q(X).")
    assert covers(rule, m, A("p(a)"))
    assert not covers(rule, m, A("p(b)"))
    m2 = least_model([A("p1(a,b)"), A("p2(a)")])
    assert covers(R("p(X,Y) :- p1(X,Y), p2(X)."), m2, A("p(a,b)"))
    assert not covers(R("p(X,Y) :- p1(X,Y), p2(X)."), m2, A("p(b,a)"))


def test_covers_repeated_head_variable_needs_equal_arguments():
    rule = Rule(A("p(a,a)")._replace(args=("X", "X")), (A("q(a)")._replace(args=("X",)),))
    m = least_model([A("q(a)")])
    assert covers(rule, m, A("p(a,a)"))
    assert not covers(rule, m, A("p(a,b)"))


def test_solve_projects_disconnected_components():
    m = Model([A("q(a)"), A("q(b)"), A("r(c)"), A("r(d)")])
    assert solve((A("q(a)")._replace(args=("X",)), A("r(a)")._replace(args=("Y",))), ("X",), m) == {("a",), ("b",)}


def test_solve_repeated_variable_in_literal():
    m = Model([A("e(a,a)"), A("e(a,b)")])
    assert solve((Atom_("e", "X", "X"),), ("X",), m) == {("a",)}


def Atom_(pred, *args):
    return A(f"{pred}(a)")._replace(predicate=pred, args=tuple(args))


def test_canonicalize_renaming_and_order():
    r1 = R("h(X) :- q(X,Y), r(Y).")
    r2 = R("h(U) :- r(Z), q(U,Z).")
    assert canonicalize(r1) == canonicalize(r2)
    assert str(canonicalize(r1)) == "h(A) :- q(A,B), r(B)."
    assert canonicalize(R("h(X) :- q(X,Y).")) == canonicalize(R("h(X) :- q(X,Z)."))


def test_program_dedupes_and_orders():
    p = Program.of([R("h(X) :- q(X,Y), r(Y)."), R("h(X) :- s(X)."), R("h(Z) :- r(W), q(Z,W).")])
    assert len(p) == 2
    assert [r.size for r in p] == [1, 2]
    assert p.size == 5
    assert p.body_literals == 3


def test_task_invariants():
    with pytest.raises(LogicError):
        make_task(["q(a)"], ["p(a)"], ["p(a)"], [("q", 1)])
    with pytest.raises(LogicError):
        make_task(["q(a)"], ["r(a)"], [], [("q", 1)])
    with pytest.raises(LogicError):
        make_task(["q(a)"], ["p(X)"], [], [("q", 1)])
    with pytest.raises(LogicError):
        make_task(["q(a)"], [], [], [("p", 1)])
    t = make_task(["q(a)", "q(b)"], ["p(b)", "p(a)"], ["p(c)"], [("q", 1)])
    assert t.examples == (A("p(a)"), A("p(b)"), A("p(c)"))


def test_bias_bounds():
    with pytest.raises(LogicError):
        make_task(["q(a)"], [], [], [("q", 1)], max_body=0)
    t = make_task(["q(a)"], [], [], [("q", 1)], max_rules=3, max_body=2)
    assert t.bias.M == 6


def test_coverage_bitsets_examples():
    task = make_task(["q(a)", "q(b)", "r(b)", "r(c)"], ["p(a)", "p(b)"], ["p(c)"], [("q", 1), ("r", 1)])
    m = least_model(task.background)
    assert coverage_bitsets([], task, m) == []
    sq, sr = coverage_bitsets([R("p(X) :- q(X)."), R("p(X) :- r(X).")], task, m)
    assert (sq.pos, sq.neg) == (0b11, 0)
    assert (sr.pos, sr.neg) == (0b10, 0b1)
    union = sq.examples(2) | sr.examples(2)
    oracle = [covers(sq.rule, m, e) or covers(sr.rule, m, e) for e in task.examples]
    assert [bool(union >> i & 1) for i in range(3)] == oracle


# --- properties over small random instances -----------------------------------------

CONSTS = ["a", "b", "c"]
facts_strategy = st.sets(
    st.one_of(
        st.builds(lambda c: A(f"q({c})"), st.sampled_from(CONSTS)),
        st.builds(lambda x, y: A(f"e({x},{y})"), st.sampled_from(CONSTS), st.sampled_from(CONSTS)),
    ), max_size=8)
RULES = [R(t) for t in [
    "p(X) :- q(X).", "p(X) :- e(X,Y).", "p(X) :- e(X,Y), q(Y).", "p(X) :- e(Y,X), e(X,Y).",
    "p(X) :- e(X,X).", "p(X) :- q(X), e(Y,Z).", "p(X) :- e(X,Y), e(Y,Z), q(Z).",
]]


@settings(max_examples=60, deadline=None)
@given(facts_strategy, st.sampled_from(RULES))
def test_covers_matches_least_model_oracle(facts, rule):
    m = least_model(facts)
    full = least_model(facts, [rule])
    for c in CONSTS:
        atom = A(f"p({c})")
        assert covers(rule, m, atom) == (atom in full)
    assert {(c,) for c in CONSTS if A(f"p({c})") in full} == rule_heads(rule, m)


@settings(max_examples=40, deadline=None)
@given(facts_strategy)
def test_least_model_is_idempotent(facts):
    rules = [R("s(X,Y) :- e(X,Y)."), R("s(X,Y) :- e(X,Z), s(Z,Y).")]
    m = least_model(facts, rules)
    assert least_model(m.atoms(), rules).atoms() == m.atoms()


@settings(max_examples=40, deadline=None)
@given(facts_strategy, st.lists(st.sampled_from(RULES), min_size=1, max_size=4))
def test_program_coverage_is_monotone(facts, rules):
    task = make_task([str(f) for f in facts] or ["q(a)"], ["p(a)", "p(b)"], ["p(c)"], [("q", 1), ("e", 2)])
    m = least_model(task.background)
    stats = coverage_bitsets(rules, task, m)
    acc = 0
    for s in stats:
        new = acc | s.examples(2)
        assert new & acc == acc
        acc = new


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(RULES), st.permutations(["X", "Y", "Z"]))
def test_canonicalize_is_idempotent_and_renaming_invariant(rule, names):
    ren = dict(zip(["X", "Y", "Z"], [n + "1" for n in names]))
    renamed = Rule(rule.head.substitute(ren), tuple(reversed([l.substitute(ren) for l in rule.body])))
    c = canonicalize(rule)
    assert canonicalize(c) == c
    assert canonicalize(renamed) == c


def test_solve_matches_brute_force_join():
    facts = [A(f"e({x},{y})") for x, y in itertools.product(CONSTS, repeat=2) if x != y] + [A("q(a)")]
    m = least_model(facts)
    body = R("p(X) :- e(X,Y), e(Y,Z), q(Z).").body
    brute = set()
    for x, y, z in itertools.product(CONSTS, repeat=3):
        if all(atom.substitute({"X": x, "Y": y, "Z": z}) in m for atom in body):
            brute.add((x,))
    assert solve(body, ("X",), m) == brute
