"""Definite programs over finite domains: atoms, rules, tasks and entailment.

Terms are plain strings using the Prolog convention: a name starting with an
uppercase letter or underscore is a variable, anything else is a constant.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

DEFAULT_MODEL_CEILING = 10_000_000


class LogicError(Exception):
    pass


class UnsafeRuleError(LogicError):
    pass


class ResourceLimitError(LogicError):
    pass


def is_variable(term: str) -> bool:
    return bool(term) and (term[0].isupper() or term[0] == "_")


class Term(NamedTuple):
    """Explicit view of a term; atoms store bare names."""

    kind: str
    name: str

    @classmethod
    def parse(cls, name: str) -> Term:
        if not name:
            raise LogicError("empty term name")
        return cls("variable" if is_variable(name) else "constant", name)


class Atom(NamedTuple):
    predicate: str
    args: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def signature(self) -> tuple[str, int]:
        return (self.predicate, len(self.args))

    def terms(self) -> tuple[Term, ...]:
        return tuple(Term.parse(a) for a in self.args)

    def variables(self) -> tuple[str, ...]:
        return tuple(a for a in self.args if is_variable(a))

    def is_ground(self) -> bool:
        return not any(is_variable(a) for a in self.args)

    def substitute(self, theta: dict[str, str]) -> Atom:
        return Atom(self.predicate, tuple(theta.get(a, a) for a in self.args))

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(self.args)})"


def _var_name(i: int) -> str:
    return chr(ord("A") + i) if i < 26 else f"V{i}"


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple[Atom, ...]

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))

    @property
    def size(self) -> int:
        """Body literal count."""
        return len(self.body)

    def head_vars(self) -> tuple[str, ...]:
        return self.head.variables()

    def body_var_occurrences(self) -> list[str]:
        return [a for lit in self.body for a in lit.args if is_variable(a)]

    def variables(self) -> list[str]:
        seen: dict[str, None] = {}
        for a in self.head.args + tuple(self.body_var_occurrences()):
            if is_variable(a):
                seen.setdefault(a)
        return list(seen)

    def body_only_vars(self) -> list[str]:
        head = set(self.head_vars())
        return [v for v in dict.fromkeys(self.body_var_occurrences()) if v not in head]

    def is_safe(self) -> bool:
        body = set(self.body_var_occurrences())
        return all(v in body for v in self.head_vars())

    def is_recursive(self) -> bool:
        return any(lit.predicate == self.head.predicate for lit in self.body)

    def canonical(self) -> Rule:
        return canonicalize(self)

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(str(b) for b in self.body)}."


def canonicalize(rule: Rule) -> Rule:
    """Rename variables and order the body so renaming-equivalent rules coincide.

    Head variables become A, B, ... in head order; body-only variables are
    numbered by first occurrence. The body order is the lexicographically
    least over all literal permutations, so literal reordering is also
    factored out (exhaustive up to 7 literals, sorted fallback beyond).
    """
    head_map: dict[str, str] = {}
    for a in rule.head.args:
        if is_variable(a) and a not in head_map:
            head_map[a] = _var_name(len(head_map))
    head = rule.head.substitute(head_map)
    body = tuple(dict.fromkeys(rule.body))  # drop duplicate literals
    n_head = len(head_map)

    def rename(seq: Iterable[Atom]) -> tuple[tuple[str, tuple[str, ...]], ...]:
        mapping = dict(head_map)
        out = []
        for lit in seq:
            args = []
            for a in lit.args:
                if is_variable(a):
                    if a not in mapping:
                        mapping[a] = _var_name(n_head + len(mapping) - len(head_map))
                    args.append(mapping[a])
                else:
                    args.append(a)
            out.append((lit.predicate, tuple(args)))
        return tuple(out)

    if len(body) <= 7:
        # only permute literals that can change the result: group by predicate
        # to cut the search, since lexicographic minimality orders predicates first
        body_sorted = sorted(body, key=lambda b: b.predicate)
        groups = [list(g) for _, g in itertools.groupby(body_sorted, key=lambda b: b.predicate)]
        best = None
        for combo in itertools.product(*(itertools.permutations(g) for g in groups)):
            cand = rename(itertools.chain.from_iterable(combo))
            if best is None or cand < best:
                best = cand
    else:
        best = rename(sorted(body))
    return Rule(head, tuple(Atom(p, args) for p, args in best))


@dataclass(frozen=True)
class Program:
    rules: tuple[Rule, ...] = ()

    @classmethod
    def of(cls, rules: Iterable[Rule]) -> Program:
        unique = {canonicalize(r) for r in rules}
        return cls(tuple(sorted(unique, key=lambda r: (r.size, str(r)))))

    @property
    def body_literals(self) -> int:
        return sum(r.size for r in self.rules)

    @property
    def size(self) -> int:
        """Literal count including one head per rule."""
        return sum(r.size + 1 for r in self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def __str__(self) -> str:
        return "\n".join(str(r) for r in self.rules)


@dataclass(frozen=True)
class Bias:
    target: tuple[str, int]
    body_predicates: tuple[tuple[str, int], ...]
    max_body: int = 4
    max_vars: int = 6
    max_rules: int = 5
    max_literals: int | None = None
    types: dict[str, tuple[str, ...]] = field(default_factory=dict, hash=False, compare=True)

    def __post_init__(self):
        for name in ("max_body", "max_vars", "max_rules"):
            if getattr(self, name) < 1:
                raise LogicError(f"bias bound {name} must be >= 1")
        if self.max_literals is not None and self.max_literals < 1:
            raise LogicError("bias bound max_literals must be >= 1")
        if self.target in self.body_predicates or self.target[0] in {p for p, _ in self.body_predicates}:
            raise LogicError("target predicate may not appear among body predicates")
        for pred, ts in self.types.items():
            arity = self.arity(pred)
            if arity is not None and arity != len(ts):
                raise LogicError(f"type declaration for {pred} has wrong arity")

    @property
    def M(self) -> int:
        return self.max_literals if self.max_literals is not None else self.max_rules * self.max_body

    def arity(self, pred: str) -> int | None:
        if pred == self.target[0]:
            return self.target[1]
        for p, a in self.body_predicates:
            if p == pred:
                return a
        return None

    def arg_types(self, pred: str) -> tuple[str, ...] | None:
        return self.types.get(pred)


@dataclass(frozen=True)
class Task:
    background: frozenset[Atom]
    rules: tuple[Rule, ...]
    positives: tuple[Atom, ...]
    negatives: tuple[Atom, ...]
    bias: Bias

    def __post_init__(self):
        object.__setattr__(self, "positives", tuple(sorted(set(self.positives))))
        object.__setattr__(self, "negatives", tuple(sorted(set(self.negatives))))
        if set(self.positives) & set(self.negatives):
            raise LogicError("an example is both positive and negative")
        for ex in self.positives + self.negatives:
            if ex.signature != self.target or not ex.is_ground():
                raise LogicError(f"example {ex} is not a ground {self.target[0]}/{self.target[1]} atom")

    @property
    def target(self) -> tuple[str, int]:
        return self.bias.target

    @property
    def examples(self) -> tuple[Atom, ...]:
        """Positives first, then negatives; this fixes example indices."""
        return self.positives + self.negatives

    def with_examples(self, positives: Iterable[Atom], negatives: Iterable[Atom]) -> Task:
        return Task(self.background, self.rules, tuple(positives), tuple(negatives), self.bias)

    def constants(self) -> set[str]:
        out = set()
        for atom in itertools.chain(self.background, self.positives, self.negatives):
            out.update(a for a in atom.args if not is_variable(a))
        for rule in self.rules:
            for atom in (rule.head, *rule.body):
                out.update(a for a in atom.args if not is_variable(a))
        return out


class Model:
    """A set of ground atoms indexed for joins."""

    def __init__(self, atoms: Iterable[Atom] = ()):
        self.relations: dict[str, set[tuple[str, ...]]] = {}
        self._index: dict[tuple[str, int], dict[str, list[tuple[str, ...]]]] = {}
        self._size = 0
        for a in atoms:
            self.add(a)

    def add(self, atom: Atom) -> bool:
        rel = self.relations.setdefault(atom.predicate, set())
        if atom.args in rel:
            return False
        rel.add(atom.args)
        self._size += 1
        for i, c in enumerate(atom.args):
            idx = self._index.get((atom.predicate, i))
            if idx is not None:
                idx.setdefault(c, []).append(atom.args)
        return True

    def lookup(self, pred: str, pos: int, value: str) -> list[tuple[str, ...]]:
        key = (pred, pos)
        idx = self._index.get(key)
        if idx is None:
            idx = {}
            for t in self.relations.get(pred, ()):
                idx.setdefault(t[pos], []).append(t)
            self._index[key] = idx
        return idx.get(value, [])

    def tuples(self, pred: str) -> set[tuple[str, ...]]:
        return self.relations.get(pred, set())

    def __contains__(self, atom: Atom) -> bool:
        return atom.args in self.relations.get(atom.predicate, ())

    def __len__(self) -> int:
        return self._size

    def __iter__(self) -> Iterator[Atom]:
        for pred in sorted(self.relations):
            for args in sorted(self.relations[pred]):
                yield Atom(pred, args)

    def atoms(self) -> frozenset[Atom]:
        return frozenset(self)


def _plan(body: tuple[Atom, ...], bound: set[str]) -> list[int]:
    """Greedy literal order: most bound arguments first, fewest new variables next."""
    order, bound = [], set(bound)
    remaining = list(range(len(body)))
    while remaining:
        def score(i):
            lit = body[i]
            n_bound = sum(1 for a in lit.args if not is_variable(a) or a in bound)
            n_new = len({a for a in lit.args if is_variable(a) and a not in bound})
            return (-(n_bound > 0), n_new, -n_bound, i)
        best = min(remaining, key=score)
        order.append(best)
        remaining.remove(best)
        bound.update(a for a in body[best].args if is_variable(a))
    return order


def solve(body: tuple[Atom, ...], out_vars: tuple[str, ...], model: Model,
          binding: dict[str, str] | None = None,
          sources: dict[int, Model] | None = None) -> set[tuple[str, ...]]:
    """All distinct bindings of ``out_vars`` satisfying every body literal.

    Variables not needed later are projected out after each join step, so
    disconnected body-only components cost an existence check, not a product.
    ``sources`` overrides the relation used for individual body positions
    (semi-naive evaluation feeds the delta through it).
    """
    binding = dict(binding or {})
    order = _plan(body, set(binding))
    cols: tuple[str, ...] = ()
    rows: set[tuple[str, ...]] = {()}
    for step, i in enumerate(order):
        lit = body[i]
        src = sources.get(i, model) if sources else model
        later = {a for j in order[step + 1:] for a in body[j].args if is_variable(a)}
        # per position: 0 constant, 1 earlier column, 2 new variable, 3 repeat within this literal
        spec: list[tuple[int, object]] = []
        first: dict[str, int] = {}
        for k, a in enumerate(lit.args):
            if not is_variable(a):
                spec.append((0, a))
            elif a in binding:
                spec.append((0, binding[a]))
            elif a in cols:
                spec.append((1, cols.index(a)))
            elif a in first:
                spec.append((3, first[a]))
            else:
                first[a] = k
                spec.append((2, k))
        new_vars = tuple(first)
        new_pos = tuple(first.values())
        all_cols = cols + new_vars
        keep = tuple(v for v in all_cols if v in later or v in out_vars)
        keep_idx = [all_cols.index(v) for v in keep]
        look = next((k for k, (kind, _) in enumerate(spec) if kind in (0, 1)), None)
        checks = [(k, kind, v) for k, (kind, v) in enumerate(spec) if kind != 2 and k != look]
        new_rows: set[tuple[str, ...]] = set()
        for row in rows:
            if look is None:
                candidates = src.tuples(lit.predicate)
            else:
                kind, v = spec[look]
                candidates = src.lookup(lit.predicate, look, v if kind == 0 else row[v])
            for tup in candidates:
                for k, kind, v in checks:
                    if tup[k] != (v if kind == 0 else row[v] if kind == 1 else tup[v]):
                        break
                else:
                    full = row + tuple(tup[p] for p in new_pos)
                    new_rows.add(tuple(full[j] for j in keep_idx))
        rows, cols = new_rows, keep
        if not rows:
            return set()
    out = set()
    for row in rows:
        env = dict(zip(cols, row))
        env.update(binding)
        out.add(tuple(env[v] for v in out_vars))
    return out


def _check_safe(rule: Rule) -> None:
    if not rule.is_safe():
        raise UnsafeRuleError(f"head variable missing from body in {rule}")


def least_model(facts: Iterable[Atom], rules: Iterable[Rule] = (),
                ceiling: int = DEFAULT_MODEL_CEILING) -> Model:
    """Least Herbrand model of a finite definite program by semi-naive iteration."""
    rules = list(rules)
    for r in rules:
        _check_safe(r)
    model = Model()
    delta = Model()
    for f in facts:
        if not f.is_ground():
            raise LogicError(f"non-ground fact {f}")
        if model.add(f):
            delta.add(f)
    for r in rules:
        if not r.body:
            if model.add(r.head):
                delta.add(r.head)
    if len(model) > ceiling:
        raise ResourceLimitError(f"model exceeds {ceiling} atoms")
    rules = [r for r in rules if r.body]
    while len(delta):
        fresh: list[Atom] = []
        for r in rules:
            head_vars = tuple(dict.fromkeys(r.head_vars()))
            for i, lit in enumerate(r.body):
                if not delta.tuples(lit.predicate):
                    continue
                for row in solve(r.body, head_vars, model, sources={i: delta}):
                    env = dict(zip(head_vars, row))
                    atom = r.head.substitute(env)
                    if atom not in model:
                        fresh.append(atom)
        delta = Model()
        for atom in fresh:
            if model.add(atom):
                delta.add(atom)
        if len(model) > ceiling:
            raise ResourceLimitError(f"model exceeds {ceiling} atoms")
    return model


def rule_heads(rule: Rule, model: Model) -> set[tuple[str, ...]]:
    """Argument tuples of every head atom the rule derives from ``model``."""
    _check_safe(rule)
    head_vars = tuple(dict.fromkeys(rule.head_vars()))
    rows = solve(rule.body, head_vars, model)
    if all(is_variable(a) for a in rule.head.args) and len(head_vars) == len(rule.head.args):
        return rows
    out = set()
    for row in rows:
        out.add(rule.head.substitute(dict(zip(head_vars, row))).args)
    return out


def covers(rule: Rule, model: Model, atom: Atom) -> bool:
    """True iff some grounding of ``rule`` has head ``atom`` and a body inside ``model``."""
    _check_safe(rule)
    if rule.head.predicate != atom.predicate or rule.head.arity != atom.arity:
        return False
    binding: dict[str, str] = {}
    for a, c in zip(rule.head.args, atom.args):
        if is_variable(a):
            if binding.setdefault(a, c) != c:
                return False
        elif a != c:
            return False
    return bool(solve(rule.body, (), model, binding=binding))


@dataclass(frozen=True)
class RuleStats:
    """Coverage of one rule as integer bitsets.

    ``pos`` and ``neg`` index the task's positives and negatives separately;
    ``atoms`` indexes the target atoms of a Herbrand base when one is given.
    ``syntax`` caches the rule's contribution to the rule-syntax length.
    """

    rule: Rule
    pos: int
    neg: int
    atoms: int = 0
    syntax: float = 0.0

    @property
    def literals(self) -> int:
        return self.rule.size

    def examples(self, n_pos: int) -> int:
        """Single bitset over example indices 0..N-1, positives first."""
        return self.pos | (self.neg << n_pos)


def coverage_bitsets(rules: Iterable[Rule], task: Task, bk_model: Model,
                     target_index: dict[Atom, int] | None = None,
                     heads_cache: dict[Rule, set[tuple[str, ...]]] | None = None) -> list[RuleStats]:
    """``heads_cache`` memoizes rule heads across tasks that share ``bk_model``."""
    pos_index = {a.args: i for i, a in enumerate(task.positives)}
    neg_index = {a.args: i for i, a in enumerate(task.negatives)}
    tp = task.target[0]
    out = []
    for rule in rules:
        if heads_cache is None:
            heads = rule_heads(rule, bk_model)
        else:
            heads = heads_cache.get(rule)
            if heads is None:
                heads = heads_cache[rule] = rule_heads(rule, bk_model)
        pos = neg = atoms = 0
        for args in heads:
            i = pos_index.get(args)
            if i is not None:
                pos |= 1 << i
            j = neg_index.get(args)
            if j is not None:
                neg |= 1 << j
            if target_index is not None:
                k = target_index.get(Atom(tp, args))
                if k is not None:
                    atoms |= 1 << k
        out.append(RuleStats(rule, pos, neg, atoms))
    return out
