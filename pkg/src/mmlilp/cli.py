"""Command-line entry points: learn, predict, experiment, generate.

Exit status is 0 on success, 2 on malformed input files and 3 when a
resource ceiling (model or Herbrand base size) is hit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import cost as C
from .experiments import GRIDS, ExperimentConfig, records_to_csv, run_grid, summary_text
from .learners import LearnedHypothesis, TaskContext, approx_learn, balanced_accuracy, evaluate, random_learn
from .logic import Program, ResourceLimitError
from .rulegen import GenConfig
from .search import SearchBudget
from .synthetic import FAMILIES, SyntheticParams, gen_synthetic, make_synthetic
from .taskio import TaskFiles, TaskParseError, parse_rule, parse_task

REPORT_HEADER = "# mmlilp-report v1"
REPORT_KEYS = ("learner", "cost_kind", "seed", "alpha", "beta", "priors", "rules", "size",
               "theta_plus", "theta_minus", "tp", "fp", "tn", "fn", "entailed_atoms",
               "cost_total", "training_balanced_accuracy")
MML_COST_KEYS = ("cost_syntax", "cost_theta", "cost_groupsize", "cost_lits", "cost_truth")

EXIT_PARSE = 2
EXIT_RESOURCE = 3


class ReportError(ValueError):
    pass


def format_report(h: LearnedHypothesis, prior: C.BetaPrior, prior_mode: str) -> str:
    """Line-oriented ``key: value`` report; wall time is left out so reruns are byte-identical."""
    c = h.counts
    lines = [REPORT_HEADER,
             f"learner: {h.learner}", f"cost_kind: {h.cost_kind}", f"seed: {h.seed}",
             f"alpha: {prior.alpha!r}", f"beta: {prior.beta!r}", f"priors: {prior_mode}",
             f"rules: {len(h.program)}", f"size: {h.program.size}",
             f"theta_plus: {h.thetas.theta_plus!r}", f"theta_minus: {h.thetas.theta_minus!r}",
             f"tp: {c.tp}", f"fp: {c.fp}", f"tn: {c.tn}", f"fn: {c.fn}",
             f"entailed_atoms: {h.extra.get('entailed_atoms', 0)}"]
    if isinstance(h.cost, C.CostBreakdown):
        for key, value in zip(MML_COST_KEYS, (h.cost.c_syntax, h.cost.c_theta, h.cost.c_groupsize,
                                              h.cost.c_lits, h.cost.c_truth)):
            lines.append(f"{key}: {value!r}")
    lines.append(f"cost_total: {h.total_cost!r}")
    lines.append(f"training_balanced_accuracy: {balanced_accuracy(c)!r}")
    lines.append("balanced_accuracy_convention: absent class scores 1")
    for rule in h.program:
        lines.append(f"rule: {rule}")
    return "\n".join(lines) + "\n"


def validate_report(text: str) -> dict:
    """Parse a report and check it is complete and self-consistent."""
    lines = text.splitlines()
    if not lines or lines[0] != REPORT_HEADER:
        raise ReportError("missing report header")
    fields: dict = {"rule": []}
    for n, line in enumerate(lines[1:], start=2):
        key, sep, value = line.partition(": ")
        if not sep:
            raise ReportError(f"line {n} is not 'key: value'")
        if key == "rule":
            fields["rule"].append(value)
        elif key in fields:
            raise ReportError(f"duplicate key {key}")
        else:
            fields[key] = value
    missing = [k for k in REPORT_KEYS if k not in fields]
    if fields.get("cost_kind") == "mml":
        missing += [k for k in MML_COST_KEYS if k not in fields]
    if missing:
        raise ReportError(f"missing keys: {', '.join(missing)}")
    if fields["cost_kind"] not in ("mml", "cmdl") or fields["learner"] not in ("random", "approx"):
        raise ReportError("unknown cost kind or learner")
    for k in ("seed", "rules", "size", "tp", "fp", "tn", "fn", "entailed_atoms"):
        fields[k] = int(fields[k])
    for k in ("alpha", "beta", "theta_plus", "theta_minus", "cost_total", "training_balanced_accuracy",
              *MML_COST_KEYS):
        if k in fields:
            fields[k] = float(fields[k])
    if len(fields["rule"]) != fields["rules"]:
        raise ReportError("rule count does not match the listed rules")
    if fields["cost_kind"] == "mml":
        parts = sum(fields[k] for k in MML_COST_KEYS)
        if abs(parts - fields["cost_total"]) > 1e-6 * max(1.0, abs(parts)):
            raise ReportError("cost components do not sum to the total")
    elif fields["cost_total"] != fields["size"] + fields["fp"] + fields["fn"]:
        raise ReportError("C-MDL cost is not size + fp + fn")
    return fields


# --- argument plumbing ----------------------------------------------------------

def _add_gen_args(p: argparse.ArgumentParser, defaults: GenConfig) -> None:
    g = p.add_argument_group("rule generation")
    g.add_argument("--max-rule-size", type=int, default=defaults.max_rule_size)
    g.add_argument("--max-vars", type=int, default=defaults.max_vars)
    g.add_argument("--max-rules-per-size", type=int, default=defaults.max_rules_per_size)
    g.add_argument("--max-clauses", type=int, default=defaults.max_clauses)
    g.add_argument("--program-samples", type=int, default=defaults.program_samples)


def _gen_config(args, seed: int) -> GenConfig:
    return GenConfig(args.max_rule_size, args.max_vars, args.max_rules_per_size, args.max_clauses,
                     args.program_samples, seed)


def _prior(args) -> C.BetaPrior:
    base = C.NOISY_PRIOR if args.noisy else C.NOISELESS_PRIOR
    return C.BetaPrior(args.alpha if args.alpha is not None else base.alpha,
                       args.beta if args.beta is not None else base.beta)


def cmd_learn(args) -> int:
    task = parse_task(TaskFiles(Path(args.bk), Path(args.exs), Path(args.bias)))
    prior = _prior(args)
    config = _gen_config(args, args.seed)
    ctx = TaskContext(task, prior, args.priors)
    if args.learner == "random":
        h = random_learn(task, args.cost, config, prior, args.priors, ctx=ctx)
    else:
        budget = SearchBudget(args.solver_time, args.timeout, args.max_nodes)
        h = approx_learn(task, args.cost, config, prior, args.priors, budget, ctx=ctx)
    report = format_report(h, prior, args.priors)
    if args.out:
        Path(args.out).write_text(report)
    else:
        sys.stdout.write(report)
    return 0


def _parse_rules(lines: Sequence[str]) -> Program:
    return Program.of(parse_rule(text) for text in lines)


def cmd_predict(args) -> int:
    fields = validate_report(Path(args.report).read_text())
    program = _parse_rules(fields["rule"])
    thetas = C.ThetaPair(fields["theta_plus"], fields["theta_minus"])
    task = parse_task(TaskFiles(Path(args.bk), Path(args.exs), Path(args.bias)))
    ctx = TaskContext(task)
    out = []
    for label, atoms in (("pos", task.positives), ("neg", task.negatives)):
        for atom in atoms:
            predicted, p_true = C.predict(program, thetas, ctx.bk_model, atom)
            out.append(f"{atom} {label} {'true' if predicted else 'false'} {p_true!r}")
    h = LearnedHypothesis(program, thetas, C.ConfusionCounts(0, 0, 0, 0), 0.0, fields["cost_kind"],
                          fields["learner"], fields["seed"])
    metrics = evaluate(h, task.positives, task.negatives, ctx.bk_model)
    out.append(f"balanced_accuracy: {metrics.balanced_accuracy!r}")
    text = "\n".join(out) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _load_tasks(args):
    if args.task_dir:
        tasks = []
        for bias in sorted(Path(args.task_dir).glob("*_bias.pl")):
            stem = bias.name[: -len("_bias.pl")]
            files = TaskFiles(bias.with_name(f"{stem}_bk.pl"), bias.with_name(f"{stem}_exs.pl"), bias)
            tasks.append((stem, parse_task(files)))
        if not tasks:
            raise TaskParseError(f"no *_bias.pl task files in {args.task_dir}", str(args.task_dir), 0, 0)
        return tasks
    params = SyntheticParams(n_objects=args.n_objects, hidden_size=args.hidden_size)
    return [(f"{args.family}_{s}", make_synthetic(args.family, params, s).task)
            for s in range(args.task_seed, args.task_seed + args.n_tasks)]


def cmd_experiment(args) -> int:
    tasks = _load_tasks(args)
    config = ExperimentConfig(
        repetitions=args.repetitions, gen=_gen_config(args, 0),
        budget=SearchBudget(args.solver_time, args.timeout, args.max_nodes))
    progress = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    result = run_grid(args.grid, tasks, config, args.noise_mode, progress=progress)
    csv_text = records_to_csv(result.records)
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    other = "mml-uniform" if args.grid == "priors" else "cmdl"
    summary = summary_text(result.records, "mml", other)
    if result.skipped:
        summary += f"# skipped trials: {len(result.skipped)}\n"
        for task_id, cell, seed, why in result.skipped:
            summary += f"# skip {task_id} size={cell.size} proportion={cell.proportion} seed={seed}: {why}\n"
    if args.summary:
        Path(args.summary).write_text(summary)
    else:
        sys.stderr.write(summary)
    return 0


def cmd_generate(args) -> int:
    params = SyntheticParams(n_objects=args.n_objects, hidden_size=args.hidden_size)
    files = gen_synthetic(args.family, params, args.seed, args.out)
    print(json.dumps({"bk": str(files.bk_path), "examples": str(files.examples_path),
                      "bias": str(files.bias_path)}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmlilp", description="Learn logic programs by minimum message length.")
    sub = parser.add_subparsers(dest="command", required=True)

    def search_args(p, timeout_default=1000.0):
        p.add_argument("--solver-time", type=float, default=180.0, help="seconds per search call")
        p.add_argument("--timeout", type=float, default=timeout_default, help="seconds per trial")
        p.add_argument("--max-nodes", type=int, default=200_000, help="search node budget per call")

    learn = sub.add_parser("learn", help="learn a program from task files")
    learn.add_argument("--bk", required=True)
    learn.add_argument("--exs", required=True)
    learn.add_argument("--bias", required=True)
    learn.add_argument("--cost", choices=("mml", "cmdl"), default="mml")
    learn.add_argument("--learner", choices=("random", "approx"), default="approx")
    learn.add_argument("--alpha", type=float, default=None, help="beta prior alpha (default 1e6, 5000 with --noisy)")
    learn.add_argument("--beta", type=float, default=None, help="beta prior beta (default 1)")
    learn.add_argument("--noisy", action="store_true", help="use the noisy-task prior")
    learn.add_argument("--seed", type=int, default=0)
    learn.add_argument("--priors", choices=("generality", "uniform"), default="generality")
    learn.add_argument("--out", help="report path (default stdout)")
    search_args(learn)
    _add_gen_args(learn, GenConfig())
    learn.set_defaults(func=cmd_learn)

    predict = sub.add_parser("predict", help="label examples with a learned report")
    predict.add_argument("--report", required=True)
    predict.add_argument("--bk", required=True)
    predict.add_argument("--exs", required=True)
    predict.add_argument("--bias", required=True)
    predict.add_argument("--out")
    predict.set_defaults(func=cmd_predict)

    exp = sub.add_parser("experiment", help="run an MML vs C-MDL experiment grid")
    exp.add_argument("grid", choices=GRIDS)
    src = exp.add_mutually_exclusive_group()
    src.add_argument("--task-dir", help="directory of <stem>_{bk,exs,bias}.pl task files")
    src.add_argument("--family", choices=FAMILIES, default="zendo_like")
    exp.add_argument("--n-tasks", type=int, default=5)
    exp.add_argument("--task-seed", type=int, default=0)
    exp.add_argument("--n-objects", type=int, default=SyntheticParams.n_objects)
    exp.add_argument("--hidden-size", type=int, default=SyntheticParams.hidden_size)
    exp.add_argument("--repetitions", type=int, default=10)
    exp.add_argument("--noise-mode", choices=("reassign", "flip"), default="reassign")
    exp.add_argument("--out", help="CSV path (default stdout)")
    exp.add_argument("--summary", help="summary path (default stderr)")
    exp.add_argument("--verbose", action="store_true")
    search_args(exp, 60.0)
    _add_gen_args(exp, ExperimentConfig().gen)
    exp.set_defaults(func=cmd_experiment)

    gen = sub.add_parser("generate", help="write a synthetic task and its manifest")
    gen.add_argument("--family", choices=FAMILIES, default="trains")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--n-objects", type=int, default=SyntheticParams.n_objects)
    gen.add_argument("--hidden-size", type=int, default=SyntheticParams.hidden_size)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_generate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TaskParseError, ReportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
