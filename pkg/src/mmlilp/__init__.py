"""Learning probabilistic definite programs by minimum message length."""

from .cost import (NOISELESS_PRIOR, NOISY_PRIOR, BetaPrior, ConfusionCounts, CostBreakdown, CostContext,
                   ThetaPair, cmdl_cost, mml_total, predict)
from .herbrand import HerbrandBase, build_herbrand_base, predicate_priors
from .learners import LearnedHypothesis, TaskContext, approx_learn, evaluate, random_learn
from .logic import Atom, Bias, Model, Program, Rule, Task, covers, least_model
from .rulegen import GenConfig, enumerate_rules
from .search import SearchBudget, optimize
from .taskio import PerturbSpec, TaskFiles, inject_noise, parse_task, rebalance

__version__ = "0.1.0"

__all__ = [
    "NOISELESS_PRIOR", "NOISY_PRIOR", "Atom", "BetaPrior", "Bias", "ConfusionCounts", "CostBreakdown",
    "CostContext", "GenConfig", "HerbrandBase", "LearnedHypothesis", "Model", "PerturbSpec", "Program",
    "Rule", "SearchBudget", "Task", "TaskContext", "TaskFiles", "ThetaPair", "approx_learn",
    "build_herbrand_base", "cmdl_cost", "covers", "enumerate_rules", "evaluate", "inject_noise",
    "least_model", "mml_total", "optimize", "parse_task", "predicate_priors", "predict", "random_learn",
    "rebalance",
]
