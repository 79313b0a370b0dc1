"""Herbrand base under the syntactic bias and the predicate priors derived from it."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

from .logic import Atom, LogicError, Model, Program, ResourceLimitError, Task, is_variable, rule_heads

DEFAULT_HB_CEILING = 10_000_000


class DegenerateVocabularyError(LogicError):
    pass


@dataclass(frozen=True)
class HerbrandBase:
    """Ground atoms over the task constants for every bias predicate.

    Only the target atoms are materialized; membership and per-predicate
    counts for the body predicates are answered from the typed domains.
    """

    predicates: tuple[tuple[str, int], ...]
    target: tuple[str, int]
    domains: dict[str, tuple[str, ...]]          # type name -> constants
    arg_types: dict[str, tuple[str, ...]]        # predicate -> type per position
    target_atoms: tuple[Atom, ...]

    @property
    def per_predicate_counts(self) -> dict[str, int]:
        return {p: math.prod(len(self.domains[t]) for t in self.arg_types[p]) for p, _ in self.predicates}

    @property
    def size(self) -> int:
        return sum(self.per_predicate_counts.values())

    @property
    def total_target_atoms(self) -> int:
        return len(self.target_atoms)

    def __contains__(self, atom: Atom) -> bool:
        types = self.arg_types.get(atom.predicate)
        if types is None or len(types) != atom.arity:
            return False
        return all(c in self._domain_sets[t] for c, t in zip(atom.args, types))

    @property
    def _domain_sets(self) -> dict[str, frozenset[str]]:
        cached = self.__dict__.get("_sets")
        if cached is None:
            cached = {t: frozenset(cs) for t, cs in self.domains.items()}
            object.__setattr__(self, "_sets", cached)
        return cached

    def atoms(self) -> Iterator[Atom]:
        for pred, _ in self.predicates:
            doms = [self.domains[t] for t in self.arg_types[pred]]
            for args in itertools.product(*doms):
                yield Atom(pred, args)

    def target_index(self) -> dict[Atom, int]:
        return {a: i for i, a in enumerate(self.target_atoms)}


_UNTYPED = "_any"


def _collect_domains(task: Task) -> tuple[dict[str, tuple[str, ...]], dict[str, tuple[str, ...]]]:
    bias = task.bias
    preds = [bias.target, *bias.body_predicates]
    arg_types: dict[str, tuple[str, ...]] = {}
    for p, a in preds:
        arg_types[p] = tuple(bias.types.get(p, (_UNTYPED,) * a))
    constants = task.constants()
    domains: dict[str, set[str]] = {t: set() for ts in arg_types.values() for t in ts}
    if _UNTYPED in domains:
        domains[_UNTYPED] = set(constants)
    atoms = itertools.chain(task.background, task.positives, task.negatives)
    for atom in atoms:
        types = arg_types.get(atom.predicate)
        if types is None or len(types) != atom.arity:
            continue
        for c, t in zip(atom.args, types):
            if not is_variable(c):
                domains[t].add(c)
    return {t: tuple(sorted(cs)) for t, cs in domains.items()}, arg_types


def build_herbrand_base(task: Task, ceiling: int = DEFAULT_HB_CEILING) -> HerbrandBase:
    """Constants are harvested from background facts and examples.

    With declared argument types a position only ranges over the constants
    seen at positions of that type; otherwise every constant is admissible.
    """
    if not task.constants():
        raise LogicError("task has no constants")
    domains, arg_types = _collect_domains(task)
    preds = (task.bias.target, *task.bias.body_predicates)
    total = sum(math.prod(len(domains[t]) for t in arg_types[p]) for p, _ in preds)
    if total > ceiling:
        raise ResourceLimitError(f"Herbrand base of {total} atoms exceeds {ceiling}")
    tp, _ = task.bias.target
    targets = tuple(Atom(tp, args) for args in itertools.product(*(domains[t] for t in arg_types[tp])))
    return HerbrandBase(preds, task.bias.target, domains, arg_types, targets)


@dataclass(frozen=True)
class PredicatePriors:
    probs: dict[str, float]

    def __getitem__(self, pred: str) -> float:
        return self.probs.get(pred, 0.0)


def predicate_priors(hb: HerbrandBase, mode: str = "generality") -> PredicatePriors:
    body = [p for p, a in hb.predicates if (p, a) != hb.target]
    if mode == "uniform":
        if not body:
            raise DegenerateVocabularyError("no body predicates")
        return PredicatePriors({p: 1.0 / len(body) for p in body})
    if mode != "generality":
        raise ValueError(f"unknown prior mode {mode!r}")
    counts = hb.per_predicate_counts
    total = sum(counts[p] for p in body)
    if total == 0:
        raise DegenerateVocabularyError("every body predicate has an empty Herbrand base")
    return PredicatePriors({p: counts[p] / total for p in body})


def entailed_atoms(program: Program, hb: HerbrandBase, bk_model: Model) -> set[Atom]:
    tp = hb.target[0]
    out: set[Atom] = set()
    for rule in program:
        out.update(Atom(tp, args) for args in rule_heads(rule, bk_model))
    members = set(hb.target_atoms)
    return out & members


def entailed_space_size(program: Program, hb: HerbrandBase, bk_model: Model) -> int:
    """|e(H+)|; the complement within the target atoms is |e(H-)|."""
    return len(entailed_atoms(program, hb, bk_model))
