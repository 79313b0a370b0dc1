from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import A, make_task
from mmlilp.logic import least_model
from mmlilp.taskio import (ArityMismatchError, InsufficientExamplesError, PerturbSpec, TaskParseError,
                           UndeclaredPredicateError, inject_noise, parse_task, parse_task_text, perturb,
                           rebalance, serialize_program, serialize_task, split_examples, subsample, write_task)

MINI = ("q(a). q(b).\n", "pos(p(a)).\nneg(p(b)).\n", "head_pred(p,1). body_pred(q,1). max_body(2).\n")


def test_fixture_has_hand_counted_contents(trains_files):
    task = parse_task(trains_files)
    counts = Counter(a.predicate for a in task.background)
    assert len(task.background) == 21
    assert counts == {"has_car": 7, "short": 3, "long": 4, "closed": 2, "open_car": 5}
    assert len(task.rules) == 1
    assert len(least_model(task.background, task.rules)) == 22
    assert [str(a) for a in task.positives] == ["east(t1)"]
    assert len(task.negatives) == 2
    assert task.bias.target == ("east", 1) and task.bias.max_rules == 2
    assert task.bias.types["has_car"] == ("train", "car")


def test_minimal_task_round_trips(tmp_path):
    task = parse_task_text(*MINI)
    assert parse_task_text(*serialize_task(task)) == task
    files = write_task(task, tmp_path, "mini")
    assert parse_task(files) == task


def test_fixture_round_trips(trains_files, tmp_path):
    task = parse_task(trains_files)
    assert parse_task(write_task(task, tmp_path)) == task


def test_comments_and_whitespace():
    task = parse_task_text("% facts\n  q( a ) .q(b).   % trailing\n", "pos(p(a)).neg(p(b)).",
                           "head_pred(p, 1).\n\n body_pred(q,1).")
    assert len(task.background) == 2 and len(task.examples) == 2


@pytest.mark.parametrize("bk,exs,bias,err", [
    ("q(a).", "pos(q(a)).", "head_pred(p,1). body_pred(q,1).", UndeclaredPredicateError),
    ("r(a).", "pos(p(a)).", "head_pred(p,1). body_pred(q,1).", UndeclaredPredicateError),
    ("q(a,b).", "pos(p(a)).", "head_pred(p,1). body_pred(q,1).", ArityMismatchError),
    ("q(a).", "pos(p(a,b)).", "head_pred(p,1). body_pred(q,1).", ArityMismatchError),
    ("q(a)", "pos(p(a)).", "head_pred(p,1). body_pred(q,1).", TaskParseError),
    ("q(X).", "pos(p(a)).", "head_pred(p,1). body_pred(q,1).", TaskParseError),
    ("q(a).", "pos(p(a)). neg(p(a)).", "head_pred(p,1). body_pred(q,1).", TaskParseError),
    ("q(a).", "pos(p(a)).", "body_pred(q,1).", TaskParseError),
    ("q(a).", "pos(p(a)).", "head_pred(p,1). colour(q).", TaskParseError),
])
def test_parse_errors(bk, exs, bias, err):
    with pytest.raises(err):
        parse_task_text(bk, exs, bias)


def test_parse_error_position():
    with pytest.raises(TaskParseError) as info:
        parse_task_text("q(a).\nq(b) q(c).\n", "pos(p(a)).", "head_pred(p,1). body_pred(q,1).")
    assert info.value.line == 2 and info.value.col == 6


def test_serialize_program_is_canonical():
    from mmlilp.logic import Program
    from conftest import R
    prog = Program((R("p(X) :- r(X), q(X)."), R("p(Y) :- q(Y).")))
    text = serialize_program(prog)
    assert text == serialize_program(Program(tuple(reversed(prog.rules))))
    assert text.endswith("\n") and text.count("\n") == 2
    assert serialize_program(Program()) == ""


# --- perturbations ---------------------------------------------------------------

def _labeled(n_pos, n_neg):
    objs = [f"o{i}" for i in range(n_pos + n_neg)]
    return make_task([f"q({o})" for o in objs], [f"p({o})" for o in objs[:n_pos]],
                     [f"p({o})" for o in objs[n_pos:]], [("q", 1)])


def _labels(task):
    return {a: True for a in task.positives} | {a: False for a in task.negatives}


def test_noise_zero_is_identity():
    task = _labeled(10, 10)
    assert inject_noise(task, PerturbSpec(0.0, seed=3)) is task


def test_noise_selects_floor_fraction():
    task = _labeled(25, 25)
    flipped = inject_noise(task, PerturbSpec(0.2, seed=9, noise_mode="flip"))
    before, after = _labels(task), _labels(flipped)
    assert sum(before[a] != after[a] for a in before) == 10
    assert flipped.background == task.background and flipped.bias == task.bias


def test_full_reassignment_is_seeded():
    task = _labeled(20, 20)
    a = inject_noise(task, PerturbSpec(1.0, seed=4))
    assert a == inject_noise(task, PerturbSpec(1.0, seed=4))
    assert set(a.examples) == set(task.examples)
    # about half the labels survive a fair reassignment
    kept = sum(_labels(a)[x] == _labels(task)[x] for x in task.examples)
    assert 10 <= kept <= 30


@pytest.mark.parametrize("prop,size,expected", [(1.0, 20, (20, 0)), (0.5, 20, (10, 10)), (0.8, 50, (40, 10)),
                                                (0.6, 20, (12, 8)), (0.0, 20, (0, 20))])
def test_rebalance_counts(prop, size, expected):
    out = rebalance(_labeled(60, 60), PerturbSpec(sample_size=size, positive_proportion=prop, seed=1))
    assert (len(out.positives), len(out.negatives)) == expected
    assert set(out.positives) <= set(_labeled(60, 60).positives)


def test_rebalance_insufficient():
    with pytest.raises(InsufficientExamplesError):
        rebalance(_labeled(5, 60), PerturbSpec(sample_size=20, positive_proportion=0.5))


def test_subsample_and_perturb():
    task = _labeled(30, 30)
    out = subsample(task, PerturbSpec(sample_size=1, seed=2))
    assert len(out.examples) == 1
    assert perturb(task, PerturbSpec()) is task
    with pytest.raises(InsufficientExamplesError):
        subsample(task, PerturbSpec(sample_size=61))


def test_perturb_spec_validation():
    with pytest.raises(ValueError):
        PerturbSpec(noise_fraction=1.5)
    with pytest.raises(ValueError):
        PerturbSpec(positive_proportion=-0.1)
    with pytest.raises(ValueError):
        PerturbSpec(noise_mode="shuffle")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 20), st.integers(0, 20), st.floats(0, 1), st.integers(0, 10**6))
def test_perturbations_only_touch_labels(n_pos, n_neg, frac, seed):
    task = _labeled(n_pos, n_neg)
    out = inject_noise(task, PerturbSpec(frac, seed=seed))
    assert out.background == task.background and out.bias == task.bias
    assert sorted(out.examples) == sorted(task.examples)


def test_split_is_stratified_and_disjoint():
    task = _labeled(20, 10)
    train, test = split_examples(task, 0.5, 7)
    assert (len(test.positives), len(test.negatives)) == (10, 5)
    assert not set(train.examples) & set(test.examples)
    assert set(train.examples) | set(test.examples) == set(task.examples)
    assert split_examples(task, 0.5, 7) == (train, test)
