"""Reading and writing task files, and label-set perturbations.

Three files make a task. The background file holds facts ``q(a,b).`` and
definite rules ``h(X) :- b1(X,Y), b2(Y).``; the examples file holds
``pos(p(a)).`` and ``neg(p(b)).``; the bias file holds directives::

    head_pred(p,1).  body_pred(q,2).  bk_pred(helper,1).
    max_body(3).  max_vars(4).  max_rules(2).  max_literals(6).
    type(q,(car,shape)).

``%`` starts a comment. ``bk_pred`` declares a background-only predicate
that may appear in background clauses but not in learned rule bodies.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from .logic import Atom, Bias, LogicError, Program, Rule, Task, is_variable


class TaskParseError(LogicError):
    def __init__(self, message: str, path: str = "<string>", line: int = 0, col: int = 0):
        self.path, self.line, self.col = path, line, col
        super().__init__(f"{path}:{line}:{col}: {message}")


class UndeclaredPredicateError(TaskParseError):
    pass


class ArityMismatchError(TaskParseError):
    pass


class InsufficientExamplesError(LogicError):
    pass


# --- tokenizer and clause parser ------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+|%[^\n]*)
  | (?P<neck>:-)
  | (?P<num>-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<quoted>'(?:[^'\\]|\\.)*')
  | (?P<punct>[(),.])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokens(text: str, path: str) -> list[_Tok]:
    out = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise TaskParseError(f"unexpected character {text[pos]!r}", path, line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            out.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        for i, ch in enumerate(m.group()):
            if ch == "\n":
                line, line_start = line + 1, pos + i + 1
        pos = m.end()
    out.append(_Tok("eof", "", line, pos - line_start + 1))
    return out


# a parsed term: a bare name, or (name, args, tok), or ("", items, tok) for a tuple
_Node = Union[str, tuple]


class _Parser:
    def __init__(self, text: str, path: str):
        self.toks = _tokens(text, path)
        self.i = 0
        self.path = path

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg: str, tok: _Tok | None = None) -> TaskParseError:
        tok = tok or self.peek()
        return TaskParseError(msg, self.path, tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            raise self.error(f"expected {text!r}, found {tok.text or 'end of file'!r}", tok)
        return tok

    def term(self) -> tuple[_Node, _Tok]:
        tok = self.next()
        if tok.text == "(":
            items = self.args()
            self.expect(")")
            return ("", items, tok), tok
        if tok.kind not in ("name", "num", "quoted"):
            raise self.error(f"expected a term, found {tok.text or 'end of file'!r}", tok)
        if self.peek().text == "(":
            self.next()
            items = self.args()
            self.expect(")")
            return (tok.text, items, tok), tok
        return tok.text, tok

    def args(self) -> list[_Node]:
        items = [self.term()[0]]
        while self.peek().text == ",":
            self.next()
            items.append(self.term()[0])
        return items

    def clauses(self):
        """Yields (head, body, head_token)."""
        while self.peek().kind != "eof":
            head, tok = self.term()
            body = []
            if self.peek().kind == "neck":
                self.next()
                body.append(self.term())
                while self.peek().text == ",":
                    self.next()
                    body.append(self.term())
            self.expect(".")
            yield head, body, tok


def _atom(node: _Node, tok: _Tok, path: str) -> Atom:
    if isinstance(node, str):
        if is_variable(node):
            raise TaskParseError(f"variable {node} where an atom is expected", path, tok.line, tok.col)
        return Atom(node, ())
    name, items, _ = node
    if not name:
        raise TaskParseError("tuple where an atom is expected", path, tok.line, tok.col)
    args = []
    for item in items:
        if not isinstance(item, str):
            raise TaskParseError("nested terms are not supported", path, tok.line, tok.col)
        args.append(item)
    return Atom(name, tuple(args))


def parse_rule(text: str) -> Rule:
    """A single clause, e.g. ``"p(X) :- q(X,Y)."``; the final period is optional."""
    text = text.strip()
    clauses = list(_Parser(text if text.endswith(".") else text + ".", "<rule>").clauses())
    if len(clauses) != 1:
        raise TaskParseError("expected exactly one clause", "<rule>", 1, 1)
    head, body, tok = clauses[0]
    return Rule(_atom(head, tok, "<rule>"), tuple(_atom(n, t, "<rule>") for n, t in body))


def parse_atom(text: str) -> Atom:
    rule = parse_rule(text)
    if rule.body:
        raise TaskParseError("expected an atom, found a rule", "<atom>", 1, 1)
    return rule.head


def _int_arg(node: _Node, tok: _Tok, path: str) -> int:
    if not isinstance(node, str) or not node.isdigit():
        raise TaskParseError(f"expected a natural number, found {node!r}", path, tok.line, tok.col)
    return int(node)


def _read(source: str | Path) -> tuple[str, str]:
    p = Path(source)
    return p.read_text(), str(p)


# --- parsing ----------------------------------------------------------------

@dataclass(frozen=True)
class TaskFiles:
    bk_path: Path
    examples_path: Path
    bias_path: Path


def parse_bias(text: str, path: str = "<bias>") -> tuple[Bias, dict[str, int]]:
    """Returns the bias and the background-only predicate arities."""
    target = None
    body: list[tuple[str, int]] = []
    aux: dict[str, int] = {}
    bounds: dict[str, int] = {}
    types: dict[str, tuple[str, ...]] = {}
    for head, body_lits, tok in _Parser(text, path).clauses():
        if body_lits:
            raise TaskParseError("bias directives cannot have a body", path, tok.line, tok.col)
        if isinstance(head, str) or not head[0]:
            raise TaskParseError("malformed directive", path, tok.line, tok.col)
        name, items, _ = head
        if name in ("head_pred", "body_pred", "bk_pred"):
            if len(items) != 2 or not isinstance(items[0], str):
                raise TaskParseError(f"{name} takes a predicate and an arity", path, tok.line, tok.col)
            sig = (items[0], _int_arg(items[1], tok, path))
            if name == "head_pred":
                if target is not None:
                    raise TaskParseError("only one head_pred is allowed", path, tok.line, tok.col)
                target = sig
            elif name == "body_pred":
                body.append(sig)
            else:
                aux[sig[0]] = sig[1]
        elif name in ("max_body", "max_vars", "max_rules", "max_literals"):
            if len(items) != 1:
                raise TaskParseError(f"{name} takes one argument", path, tok.line, tok.col)
            bounds[name] = _int_arg(items[0], tok, path)
        elif name == "type":
            if len(items) != 2 or not isinstance(items[0], str):
                raise TaskParseError("type takes a predicate and a tuple of types", path, tok.line, tok.col)
            spec = items[1]
            ts = (spec,) if isinstance(spec, str) else tuple(spec[1]) if not spec[0] else None
            if ts is None or not all(isinstance(t, str) for t in ts):
                raise TaskParseError("malformed type tuple", path, tok.line, tok.col)
            types[items[0]] = ts
        else:
            raise TaskParseError(f"unknown bias directive {name}", path, tok.line, tok.col)
    if target is None:
        raise TaskParseError("bias declares no head_pred", path, 1, 1)
    known = {p for p, _ in body} | {target[0]}
    for pred in types:
        if pred not in known and pred not in aux:
            raise UndeclaredPredicateError(f"type given for undeclared predicate {pred}", path, 1, 1)
    try:
        bias = Bias(target, tuple(body), types=types, **bounds)
    except LogicError as exc:
        raise TaskParseError(str(exc), path, 1, 1) from exc
    return bias, aux


def _check_atom(atom: Atom, arities: dict[str, int], tok: _Tok, path: str) -> None:
    arity = arities.get(atom.predicate)
    if arity is None:
        raise UndeclaredPredicateError(f"undeclared predicate {atom.predicate}", path, tok.line, tok.col)
    if arity != atom.arity:
        raise ArityMismatchError(f"{atom.predicate} has arity {arity}, used with {atom.arity}",
                                 path, tok.line, tok.col)


def parse_background(text: str, bias: Bias, aux: dict[str, int] | None = None,
                     path: str = "<bk>") -> tuple[frozenset[Atom], tuple[Rule, ...]]:
    arities = dict(bias.body_predicates)
    arities.update(aux or {})
    facts: set[Atom] = set()
    rules: list[Rule] = []
    for head, body, tok in _Parser(text, path).clauses():
        h = _atom(head, tok, path)
        if h.predicate == bias.target[0]:
            raise TaskParseError("background may not define the target predicate", path, tok.line, tok.col)
        _check_atom(h, arities, tok, path)
        if not body:
            if not h.is_ground():
                raise TaskParseError(f"fact {h} is not ground", path, tok.line, tok.col)
            facts.add(h)
            continue
        lits = []
        for node, btok in body:
            lit = _atom(node, btok, path)
            _check_atom(lit, arities, btok, path)
            lits.append(lit)
        rule = Rule(h, tuple(lits))
        if not rule.is_safe():
            raise TaskParseError(f"unsafe background rule {rule}", path, tok.line, tok.col)
        rules.append(rule)
    return frozenset(facts), tuple(rules)


def parse_examples(text: str, bias: Bias, path: str = "<examples>") -> tuple[list[Atom], list[Atom]]:
    pos: list[Atom] = []
    neg: list[Atom] = []
    arities = {bias.target[0]: bias.target[1]}
    for head, body, tok in _Parser(text, path).clauses():
        if body or isinstance(head, str) or head[0] not in ("pos", "neg") or len(head[1]) != 1:
            raise TaskParseError("expected pos(...) or neg(...)", path, tok.line, tok.col)
        atom = _atom(head[1][0], tok, path)
        if atom.predicate != bias.target[0]:
            raise UndeclaredPredicateError(f"example predicate {atom.predicate} is not the target "
                                           f"{bias.target[0]}", path, tok.line, tok.col)
        _check_atom(atom, arities, tok, path)
        if not atom.is_ground():
            raise TaskParseError(f"example {atom} is not ground", path, tok.line, tok.col)
        (pos if head[0] == "pos" else neg).append(atom)
    if set(pos) & set(neg):
        raise TaskParseError("an example is labeled both positive and negative", path, 1, 1)
    return pos, neg


def parse_task_text(bk: str, examples: str, bias: str) -> Task:
    b, aux = parse_bias(bias)
    facts, rules = parse_background(bk, b, aux)
    pos, neg = parse_examples(examples, b)
    return Task(facts, rules, tuple(pos), tuple(neg), b)


def parse_task(files: TaskFiles) -> Task:
    bias_text, bias_path = _read(files.bias_path)
    b, aux = parse_bias(bias_text, bias_path)
    bk_text, bk_path = _read(files.bk_path)
    facts, rules = parse_background(bk_text, b, aux, bk_path)
    ex_text, ex_path = _read(files.examples_path)
    pos, neg = parse_examples(ex_text, b, ex_path)
    return Task(facts, rules, tuple(pos), tuple(neg), b)


# --- serialization -------------------------------------------------------------

def serialize_bias(bias: Bias, aux: dict[str, int] | None = None) -> str:
    lines = [f"head_pred({bias.target[0]},{bias.target[1]})."]
    lines += [f"body_pred({p},{a})." for p, a in bias.body_predicates]
    lines += [f"bk_pred({p},{a})." for p, a in sorted((aux or {}).items())]
    lines += [f"max_body({bias.max_body}).", f"max_vars({bias.max_vars}).", f"max_rules({bias.max_rules})."]
    if bias.max_literals is not None:
        lines.append(f"max_literals({bias.max_literals}).")
    for pred, ts in sorted(bias.types.items()):
        lines.append(f"type({pred},({','.join(ts)})).")
    return "\n".join(lines) + "\n"


def serialize_background(task: Task) -> str:
    lines = [f"{a}." for a in sorted(task.background)]
    lines += [str(r) for r in task.rules]
    return "\n".join(lines) + "\n"


def serialize_examples(task: Task) -> str:
    lines = [f"pos({a})." for a in task.positives] + [f"neg({a})." for a in task.negatives]
    return "\n".join(lines) + "\n"


def background_only_predicates(task: Task) -> dict[str, int]:
    declared = {p for p, _ in task.bias.body_predicates}
    aux = {}
    for atom in task.background:
        if atom.predicate not in declared:
            aux[atom.predicate] = atom.arity
    for rule in task.rules:
        for atom in (rule.head, *rule.body):
            if atom.predicate not in declared:
                aux[atom.predicate] = atom.arity
    return aux


def serialize_task(task: Task) -> tuple[str, str, str]:
    """(background, examples, bias) texts; parsing them gives back an equal task."""
    return (serialize_background(task), serialize_examples(task),
            serialize_bias(task.bias, background_only_predicates(task)))


def write_task(task: Task, directory: str | Path, stem: str = "task") -> TaskFiles:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    bk, exs, bias = serialize_task(task)
    files = TaskFiles(d / f"{stem}_bk.pl", d / f"{stem}_exs.pl", d / f"{stem}_bias.pl")
    files.bk_path.write_text(bk)
    files.examples_path.write_text(exs)
    files.bias_path.write_text(bias)
    return files


def serialize_program(program: Program) -> str:
    """Canonical text, one rule per line, for reproducible diffs."""
    return str(Program.of(program)) + ("\n" if len(program) else "")


# --- perturbations -------------------------------------------------------------

@dataclass(frozen=True)
class PerturbSpec:
    noise_fraction: float = 0.0
    sample_size: int | None = None          # None keeps every example
    positive_proportion: float | None = None
    seed: int = 0
    noise_mode: str = "reassign"

    def __post_init__(self):
        if not 0.0 <= self.noise_fraction <= 1.0:
            raise ValueError("noise fraction must lie in [0, 1]")
        if self.positive_proportion is not None and not 0.0 <= self.positive_proportion <= 1.0:
            raise ValueError("positive proportion must lie in [0, 1]")
        if self.sample_size is not None and self.sample_size < 0:
            raise ValueError("sample size must be non-negative")
        if self.noise_mode not in ("reassign", "flip"):
            raise ValueError("noise mode is reassign or flip")


def inject_noise(task: Task, spec: PerturbSpec) -> Task:
    """Pick floor(f*N) examples; reassign each to a random class (or flip it in flip mode)."""
    examples = [(a, True) for a in task.positives] + [(a, False) for a in task.negatives]
    n_noisy = math.floor(spec.noise_fraction * len(examples))
    if n_noisy == 0:
        return task
    rng = random.Random(f"noise:{spec.seed}")
    chosen = rng.sample(range(len(examples)), n_noisy)
    for i in sorted(chosen):
        atom, label = examples[i]
        examples[i] = (atom, (not label) if spec.noise_mode == "flip" else rng.random() < 0.5)
    return task.with_examples([a for a, l in examples if l], [a for a, l in examples if not l])


def rebalance(task: Task, spec: PerturbSpec) -> Task:
    """Draw floor(proportion*size) positives and the rest negatives without replacement."""
    if spec.sample_size is None or spec.positive_proportion is None:
        raise ValueError("rebalancing needs a sample size and a positive proportion")
    n_pos = math.floor(spec.positive_proportion * spec.sample_size + 1e-9)
    n_neg = spec.sample_size - n_pos
    if n_pos > len(task.positives) or n_neg > len(task.negatives):
        raise InsufficientExamplesError(
            f"need {n_pos} positives and {n_neg} negatives, have {len(task.positives)} and {len(task.negatives)}")
    rng = random.Random(f"balance:{spec.seed}")
    return task.with_examples(rng.sample(task.positives, n_pos), rng.sample(task.negatives, n_neg))


def subsample(task: Task, spec: PerturbSpec) -> Task:
    """Uniform sample of ``sample_size`` examples regardless of class."""
    if spec.sample_size is None:
        return task
    examples = [(a, True) for a in task.positives] + [(a, False) for a in task.negatives]
    if spec.sample_size > len(examples):
        raise InsufficientExamplesError(f"need {spec.sample_size} examples, have {len(examples)}")
    rng = random.Random(f"sample:{spec.seed}")
    picked = rng.sample(examples, spec.sample_size)
    return task.with_examples([a for a, l in picked if l], [a for a, l in picked if not l])


def perturb(task: Task, spec: PerturbSpec) -> Task:
    if spec.positive_proportion is not None:
        task = rebalance(task, spec)
    elif spec.sample_size is not None:
        task = subsample(task, spec)
    return inject_noise(task, spec)


def split_examples(task: Task, test_fraction: float, seed: int) -> tuple[Task, Task]:
    """Stratified train/test split of the labeled examples."""
    rng = random.Random(f"split:{seed}")
    pos, neg = list(task.positives), list(task.negatives)
    rng.shuffle(pos)
    rng.shuffle(neg)
    kp, kn = round(len(pos) * test_fraction), round(len(neg) * test_fraction)
    return (task.with_examples(pos[kp:], neg[kn:]), task.with_examples(pos[:kp], neg[:kn]))


def atoms_text(atoms: Iterable[Atom]) -> str:
    return "".join(f"{a}.\n" for a in sorted(atoms))
