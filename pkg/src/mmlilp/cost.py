"""Message lengths for probabilistic definite programs, in bits.

The two-part length of a hypothesis is the sum of five terms: rule syntax,
the two Bernoulli parameters, the size of the covered example group, the
choice of example literals, and their truth values. The C-MDL baseline
(literals + false positives + false negatives) lives here too.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

from .herbrand import PredicatePriors
from .logic import Atom, LogicError, Model, Program, Rule, covers, is_variable

LN2 = math.log(2.0)
THETA_EPS = 1e-12
MML87_CONSTANT = 0.7425


class InfeasibleHypothesisError(LogicError):
    """The hypothesis cannot encode the observed examples."""


class ZeroPriorError(LogicError):
    pass


class BiasViolationError(LogicError):
    pass


def log2_binom(n: int, k: int) -> float:
    if k < 0 or k > n:
        raise ValueError(f"binomial({n}, {k}) is zero")
    if k == 0 or k == n:
        return 0.0
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)) / LN2


def log2_factorial(n: int) -> float:
    return math.lgamma(n + 1) / LN2


def _logsumexp2(values: list[float]) -> float:
    m = max(values)
    if m == -math.inf:
        return -math.inf
    return m + math.log2(sum(2.0 ** (v - m) for v in values))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def n_pos(self) -> int:
        return self.tp + self.fn

    @property
    def n_neg(self) -> int:
        return self.tn + self.fp

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def k(self) -> int:
        """Number of examples the program covers."""
        return self.tp + self.fp


@dataclass(frozen=True)
class BetaPrior:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("beta prior parameters must be positive")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def error_rate(self) -> float:
        return self.beta / (self.alpha + self.beta)


NOISELESS_PRIOR = BetaPrior(1_000_000.0, 1.0)
NOISY_PRIOR = BetaPrior(5000.0, 1.0)


@dataclass(frozen=True)
class ThetaPair:
    theta_plus: float
    theta_minus: float


@dataclass(frozen=True)
class CostBreakdown:
    c_syntax: float
    c_theta: float
    c_groupsize: float
    c_lits: float
    c_truth: float
    thetas: ThetaPair

    @property
    def total(self) -> float:
        return self.c_syntax + self.c_theta + self.c_groupsize + self.c_lits + self.c_truth

    def as_dict(self) -> dict[str, float]:
        return {
            "syntax": self.c_syntax,
            "theta": self.c_theta,
            "groupsize": self.c_groupsize,
            "lits": self.c_lits,
            "truth": self.c_truth,
            "total": self.total,
        }


# --- rule syntax -------------------------------------------------------------

@lru_cache(maxsize=None)
def partition_count(n: int) -> int:
    """Number of unrestricted integer partitions of n (exact)."""
    if n < 0:
        return 0
    p = [1] + [0] * n
    for part in range(1, n + 1):
        for total in range(part, n + 1):
            p[total] += p[total - part]
    return p[n]


def log2_partition(l: int) -> float:
    return math.log2(partition_count(l))


def preds_length(rule: Rule, priors: PredicatePriors) -> float:
    freqs = Counter(lit.predicate for lit in rule.body)
    bits = -log2_factorial(sum(freqs.values()))
    for pred, fr in freqs.items():
        p = priors[pred]
        if p <= 0:
            raise ZeroPriorError(f"predicate {pred} has prior probability 0")
        bits += log2_factorial(fr) - fr * math.log2(p)
    return bits


def _var_stats(rule: Rule) -> tuple[int, int, int, Counter]:
    occ = [a for lit in rule.body for a in lit.args if is_variable(a)]
    freqs = Counter(occ)
    head = set(rule.head_vars())
    d_body_only = sum(1 for v in freqs if v not in head)
    return len(freqs), len(occ), d_body_only, freqs


def var_freqs_count(rule: Rule) -> int:
    """Stars-and-bars count of frequency assignments over the body slots."""
    d_vars, slots, _, _ = _var_stats(rule)
    if d_vars == 0:
        return 1
    return math.comb(d_vars + slots - 1, d_vars - 1)


def var_seqs_count(rule: Rule) -> float:
    """slots! / (d_body_only! * prod fr(v)!); may be fractional for unequal body-only frequencies."""
    _, slots, d_body_only, freqs = _var_stats(rule)
    denom = math.factorial(d_body_only) * math.prod(math.factorial(f) for f in freqs.values())
    num = math.factorial(slots)
    return num // denom if num % denom == 0 else num / denom


def rule_syntax_length(rule: Rule, priors: PredicatePriors) -> float:
    if not rule.body:
        return 0.0
    return preds_length(rule, priors) + math.log2(var_freqs_count(rule)) + math.log2(var_seqs_count(rule))


def program_syntax_length(program: Program, priors: PredicatePriors, max_literals: int | None = None) -> float:
    l = program.body_literals
    if max_literals is not None and l > max_literals:
        raise BiasViolationError(f"program has {l} body literals, bound is {max_literals}")
    return log2_partition(l) + sum(rule_syntax_length(r, priors) for r in program)


# --- parameters ---------------------------------------------------------------

def theta_estimate(successes: int, failures: int, prior: BetaPrior) -> float:
    theta = (successes + prior.alpha - 0.5) / (successes + failures + prior.alpha + prior.beta - 1.0)
    return min(max(theta, THETA_EPS), 1.0 - THETA_EPS)


def _log2_beta_fn(a: float, b: float) -> float:
    return (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)) / LN2


def theta_length(successes: int, failures: int, prior: BetaPrior) -> float:
    theta = theta_estimate(successes, failures, prior)
    k = -_log2_beta_fn(prior.alpha, prior.beta) - MML87_CONSTANT + log2_binom(successes + failures, successes)
    return (-(prior.alpha - 0.5) * math.log2(theta)
            - (prior.beta - 0.5) * math.log2(1.0 - theta) + k)


def fit_thetas(counts: ConfusionCounts, prior: BetaPrior) -> ThetaPair:
    return ThetaPair(theta_estimate(counts.tp, counts.fp, prior),
                     theta_estimate(counts.tn, counts.fn, prior))


# --- example group sizes and the examples themselves -------------------------

def _log2_trial(n: int, successes: int, r: float) -> float:
    failures = n - successes
    return (log2_binom(n, successes) + successes * math.log2(1.0 - r)
            + (failures * math.log2(r) if failures else 0.0))


def group_size_length(k: int, n_pos: int, n_neg: int, r: float) -> float:
    """-log2 P(tp + fp = k) with tp ~ Bin(n_pos, 1-r) and fp ~ Bin(n_neg, r)."""
    if not 0.0 < r < 1.0:
        raise ValueError("error rate must lie in (0, 1)")
    lo, hi = max(0, k - n_neg), min(k, n_pos)
    if lo > hi:
        raise InfeasibleHypothesisError(f"no outcome has {k} covered examples")
    terms = []
    for tp in range(lo, hi + 1):
        fp = k - tp
        tn = n_neg - fp
        terms.append(_log2_trial(n_pos, tp, r) + _log2_trial(n_neg, tn, r))
    return -_logsumexp2(terms)


def literals_length(counts: ConfusionCounts, e_plus: int, e_minus: int) -> float:
    if counts.k > e_plus or counts.tn + counts.fn > e_minus:
        raise InfeasibleHypothesisError("examples fall outside the entailed atom sets")
    return log2_binom(e_plus, counts.k) + log2_binom(e_minus, counts.tn + counts.fn)


def truth_length(counts: ConfusionCounts, thetas: ThetaPair) -> float:
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    bits = 0.0
    if tp:
        bits -= tp * math.log2(thetas.theta_plus)
    if fp:
        bits -= fp * math.log2(1.0 - thetas.theta_plus)
    if tn:
        bits -= tn * math.log2(thetas.theta_minus)
    if fn:
        bits -= fn * math.log2(1.0 - thetas.theta_minus)
    return bits


# --- totals -------------------------------------------------------------------

@dataclass(frozen=True)
class CostContext:
    """Everything the receiver knows a priori about a training set."""

    priors: PredicatePriors
    prior: BetaPrior
    n_pos: int
    n_neg: int
    n_target_atoms: int
    max_literals: int | None = None

    @property
    def r(self) -> float:
        return self.prior.error_rate


def remainder_length(counts: ConfusionCounts, e_plus: int, body_literals: int,
                     ctx: CostContext) -> CostBreakdown:
    """All terms except the per-rule syntax; the syntax slot carries only log partition(l)."""
    thetas = fit_thetas(counts, ctx.prior)
    c_theta = theta_length(counts.tp, counts.fp, ctx.prior) + theta_length(counts.tn, counts.fn, ctx.prior)
    try:
        c_group = group_size_length(counts.k, ctx.n_pos, ctx.n_neg, ctx.r)
        c_lits = literals_length(counts, e_plus, ctx.n_target_atoms - e_plus)
    except InfeasibleHypothesisError:
        return CostBreakdown(math.inf, c_theta, math.inf, math.inf, math.inf, thetas)
    return CostBreakdown(log2_partition(body_literals), c_theta, c_group, c_lits,
                         truth_length(counts, thetas), thetas)


def mml_total(program: Program, counts: ConfusionCounts, ctx: CostContext, e_plus: int,
              rule_lengths: dict[Rule, float] | None = None) -> CostBreakdown:
    """Full message length of ``program`` given its training confusion and |e(H+)|."""
    if counts.n_pos != ctx.n_pos or counts.n_neg != ctx.n_neg:
        raise ValueError("confusion counts do not match the training set")
    if ctx.max_literals is not None and program.body_literals > ctx.max_literals:
        raise BiasViolationError(f"program exceeds {ctx.max_literals} body literals")
    rest = remainder_length(counts, e_plus, program.body_literals, ctx)
    if rule_lengths is None:
        syntax = sum(rule_syntax_length(r, ctx.priors) for r in program)
    else:
        syntax = sum(rule_lengths[r] for r in program)
    return CostBreakdown(rest.c_syntax + syntax, rest.c_theta, rest.c_groupsize,
                         rest.c_lits, rest.c_truth, rest.thetas)


def cmdl_cost(program_size: int, fp: int, fn: int) -> int:
    return program_size + fp + fn


def predict_covered(covered: bool, thetas: ThetaPair) -> tuple[bool, float]:
    """Label and probability of "true" for one example."""
    if covered:
        return thetas.theta_plus > 0.5, thetas.theta_plus
    p_true = 1.0 - thetas.theta_minus
    return p_true > 0.5, p_true


def predict(program: Program, thetas: ThetaPair, bk_model: Model, atom: Atom) -> tuple[bool, float]:
    return predict_covered(any(covers(r, bk_model, atom) for r in program), thetas)
