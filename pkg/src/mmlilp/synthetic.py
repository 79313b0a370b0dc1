"""Seeded synthetic task families labeled by a hidden rule.

``trains``: trains carry cars with unary attributes; the hidden rule says
which trains go east, e.g. ``east(A) :- has_car(A,B), short(B).``

``zendo_like``: pieces on a board with colours, sizes and orientations,
plus a sparse symmetric ``touching/2``; the hidden rule says which pieces
are marked.

Every object is labeled, so a harness can carve training and test sets
from one generated task.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path

from .logic import Atom, Bias, Rule, Task, canonicalize, least_model, rule_heads
from .taskio import TaskFiles, write_task

FAMILIES = ("trains", "zendo_like")

CAR_PROPERTIES = ("circle", "closed", "double", "jagged", "long", "open_car", "short", "triangle")
PIECE_PROPERTIES = ("blue", "flat", "green", "large", "red", "small", "upright")


@dataclass(frozen=True)
class SyntheticParams:
    n_objects: int = 200          # trains or pieces
    hidden_size: int = 2          # body literals of the hidden rule
    max_parts: int = 4            # cars per train
    touch_degree: float = 1.5     # mean touching partners per piece
    min_positive_rate: float = 0.25
    max_positive_rate: float = 0.75
    max_body: int = 3
    max_vars: int = 4
    max_rules: int = 2


@dataclass(frozen=True)
class SyntheticTask:
    task: Task
    hidden_rule: Rule
    family: str
    seed: int
    params: SyntheticParams

    def manifest(self) -> dict:
        return {
            "family": self.family,
            "seed": self.seed,
            "hidden_rule": str(self.hidden_rule),
            "hidden_size": self.hidden_rule.size,
            "positives": len(self.task.positives),
            "negatives": len(self.task.negatives),
            "params": asdict(self.params),
        }


def _trains_world(rng: random.Random, p: SyntheticParams) -> set[Atom]:
    facts = set()
    for t in range(p.n_objects):
        train = f"t{t}"
        for c in range(rng.randint(1, p.max_parts)):
            car = f"c{t}_{c}"
            facts.add(Atom("has_car", (train, car)))
            facts.add(Atom(rng.choice(("short", "long")), (car,)))
            facts.add(Atom(rng.choice(("open_car", "closed")), (car,)))
            if rng.random() < 0.3:
                facts.add(Atom("double", (car,)))
            if rng.random() < 0.2:
                facts.add(Atom("jagged", (car,)))
            load = rng.choice(("circle", "triangle", None))
            if load:
                facts.add(Atom(load, (car,)))
    return facts


def _trains_rules(size: int) -> list[Rule]:
    head = Atom("east", ("A",))
    out = []
    for props in itertools.combinations(CAR_PROPERTIES, size - 1):
        body = (Atom("has_car", ("A", "B")),) + tuple(Atom(q, ("B",)) for q in props)
        out.append(canonicalize(Rule(head, body)))
    return out


def _zendo_world(rng: random.Random, p: SyntheticParams) -> set[Atom]:
    facts = set()
    pieces = [f"p{i}" for i in range(p.n_objects)]
    for piece in pieces:
        facts.add(Atom(rng.choice(("red", "blue", "green")), (piece,)))
        facts.add(Atom(rng.choice(("small", "large")), (piece,)))
        facts.add(Atom(rng.choice(("upright", "flat")), (piece,)))
    n_edges = round(p.touch_degree * p.n_objects / 2)
    pairs = set()
    while len(pairs) < n_edges:
        a, b = rng.sample(range(p.n_objects), 2)
        pairs.add((min(a, b), max(a, b)))
    for a, b in sorted(pairs):
        facts.add(Atom("touching", (pieces[a], pieces[b])))
        facts.add(Atom("touching", (pieces[b], pieces[a])))
    return facts


def _zendo_rules(size: int) -> list[Rule]:
    head = Atom("zendo", ("A",))
    out = []
    # properties of the piece itself
    for props in itertools.combinations(PIECE_PROPERTIES, size):
        out.append(canonicalize(Rule(head, tuple(Atom(q, ("A",)) for q in props))))
    # properties of a touching piece
    for props in itertools.combinations(PIECE_PROPERTIES, size - 1):
        body = (Atom("touching", ("A", "B")),) + tuple(Atom(q, ("B",)) for q in props)
        out.append(canonicalize(Rule(head, body)))
    return out


def _bias(family: str, p: SyntheticParams) -> Bias:
    if family == "trains":
        body = (("has_car", 2),) + tuple((q, 1) for q in CAR_PROPERTIES)
        types = {"east": ("train",), "has_car": ("train", "car")}
        types.update({q: ("car",) for q in CAR_PROPERTIES})
        target = ("east", 1)
    else:
        body = tuple((q, 1) for q in PIECE_PROPERTIES) + (("touching", 2),)
        types = {"zendo": ("piece",), "touching": ("piece", "piece")}
        types.update({q: ("piece",) for q in PIECE_PROPERTIES})
        target = ("zendo", 1)
    return Bias(target, tuple(sorted(body)), max_body=p.max_body, max_vars=p.max_vars,
                max_rules=p.max_rules, types=types)


def make_synthetic(family: str, params: SyntheticParams = SyntheticParams(), seed: int = 0) -> SyntheticTask:
    """Build a world, pick a hidden rule with a usable positive rate, label every object."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if params.hidden_size < 1:
        raise ValueError("hidden rule needs at least one literal")
    rng = random.Random(f"{family}:{seed}")
    world, rules, prefix = ((_trains_world, _trains_rules, "t") if family == "trains"
                            else (_zendo_world, _zendo_rules, "p"))
    candidates = rules(params.hidden_size)
    if not candidates:
        raise ValueError(f"no hidden rule of size {params.hidden_size} in family {family}")
    bias = _bias(family, params)
    objects = [f"{prefix}{i}" for i in range(params.n_objects)]
    for _ in range(100):
        facts = world(rng, params)
        model = least_model(facts)
        order = rng.sample(candidates, len(candidates))
        for rule in order:
            covered = {args[0] for args in rule_heads(rule, model)}
            rate = len(covered) / len(objects)
            if params.min_positive_rate <= rate <= params.max_positive_rate:
                pos = tuple(Atom(bias.target[0], (o,)) for o in objects if o in covered)
                neg = tuple(Atom(bias.target[0], (o,)) for o in objects if o not in covered)
                return SyntheticTask(Task(frozenset(facts), (), pos, neg, bias), rule, family, seed, params)
    raise ValueError("could not find a hidden rule with a usable positive rate")


def gen_synthetic(family: str, params: SyntheticParams, seed: int, directory: str | Path) -> TaskFiles:
    """Write the task files plus a ``<stem>_manifest.json`` sidecar naming the hidden rule."""
    synth = make_synthetic(family, params, seed)
    stem = f"{family}_{seed}"
    files = write_task(synth.task, directory, stem)
    manifest = dict(synth.manifest(), files={
        "bk": files.bk_path.name, "examples": files.examples_path.name, "bias": files.bias_path.name})
    (Path(directory) / f"{stem}_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return files
