"""Bounded formulas are absolute between transitive universes; unbounded ones need not be.

:func:`check_absolute` evaluates one bounded formula in an inner and an outer
universe after checking the hypotheses that make the two verdicts agree.
:func:`fuzz_absoluteness` runs that check over seeded random instances, and
:func:`find_nonabsolute` searches for an unbounded sentence separating two
universes.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .evaluation import Environment, Universe, evaluate
from .kernel import HFSet, default_store, format_set, is_subset, is_transitive, transitive_closure
from .logic import (
    And,
    Bot,
    BoundedExists,
    BoundedForall,
    Const,
    Equality,
    Exists,
    Forall,
    Formula,
    Implies,
    Membership,
    Not,
    Or,
    Param,
    PredA,
    Top,
    constants,
    enumerate_sentences,
    free_vars,
    is_bounded,
    parameters,
    parse,
    random_formula,
    to_text,
)

__all__ = [
    "Violation",
    "AbsolutenessPreconditionError",
    "AbsoluteVerdict",
    "Disagreement",
    "AbsolutenessReport",
    "NonAbsoluteWitness",
    "check_absolute",
    "fuzz_absoluteness",
    "find_nonabsolute",
    "random_transitive_subset",
    "MAX_OUTER_STAGE",
]

MAX_OUTER_STAGE = 4


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


class AbsolutenessPreconditionError(ValueError):
    def __init__(self, violations: list[Violation]) -> None:
        self.violations = violations
        super().__init__("; ".join(f"{v.code}: {v.message}" for v in violations))


@dataclass(frozen=True)
class AbsoluteVerdict:
    inner_value: bool
    outer_value: bool

    @property
    def agree(self) -> bool:
        return self.inner_value == self.outer_value


def _violations(f: Formula, env: Environment, inner: Universe, outer: Universe) -> list[Violation]:
    found: list[Violation] = []
    if not is_bounded(f):
        found.append(Violation("E_UNBOUNDED", "formula has an unbounded quantifier"))
    if not is_transitive(inner.carrier):
        found.append(Violation("E_NOT_TRANSITIVE", "inner carrier is not transitive"))
    if not is_subset(inner.carrier, outer.carrier):
        found.append(Violation("E_NOT_SUBUNIVERSE", "inner carrier is not a subset of the outer carrier"))
    cut = [x for x in outer.pred.children if x in inner.carrier]
    if list(inner.pred.children) != cut:
        found.append(Violation("E_PRED_MISMATCH", "inner A is not outer A restricted to the inner carrier"))
    carrier = inner.carrier.members
    for name in sorted(free_vars(f) - env.variables.keys()):
        found.append(Violation("E_UNBOUND", f"variable {name} has no value"))
    for name in sorted(parameters(f) - env.params.keys()):
        found.append(Violation("E_UNBOUND", f"parameter ${name} has no value"))
    for name, value in sorted(env.variables.items()):
        if value not in carrier:
            found.append(Violation("E_PARAM_ESCAPE", f"variable {name} lies outside the inner carrier"))
    for name, value in sorted(env.params.items()):
        if value not in carrier:
            found.append(Violation("E_PARAM_ESCAPE", f"parameter ${name} lies outside the inner carrier"))
    for c in constants(f):
        if c not in carrier:
            found.append(Violation("E_PARAM_ESCAPE", f"constant {format_set(c)} lies outside the inner carrier"))
    return found


def check_absolute(
    f: Formula, env: Environment | None, inner: Universe, outer: Universe
) -> AbsoluteVerdict:
    """Evaluate ``f`` in both universes; raises if a hypothesis fails.

    Every failed hypothesis is listed in the raised
    :class:`AbsolutenessPreconditionError`.
    """
    env = env or Environment()
    problems = _violations(f, env, inner, outer)
    if problems:
        raise AbsolutenessPreconditionError(problems)
    return AbsoluteVerdict(evaluate(f, env, inner), evaluate(f, env, outer))


# -- fuzzing -----------------------------------------------------------------

@dataclass(frozen=True)
class Disagreement:
    trial: int
    formula: Formula
    env: Environment
    inner: Universe
    outer: Universe
    inner_value: bool
    outer_value: bool

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "formula": to_text(self.formula),
            "variables": {k: format_set(v) for k, v in self.env.variables.items()},
            "params": {k: format_set(v) for k, v in self.env.params.items()},
            "inner": {"carrier": format_set(self.inner.carrier), "pred": format_set(self.inner.pred)},
            "outer": {"carrier": format_set(self.outer.carrier), "pred": format_set(self.outer.pred)},
            "inner_value": self.inner_value,
            "outer_value": self.outer_value,
        }


@dataclass
class AbsolutenessReport:
    trials: int = 0
    agreements: int = 0
    disagreements: list[Disagreement] = field(default_factory=list)
    log: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.disagreements

    def merge(self, other: AbsolutenessReport) -> AbsolutenessReport:
        return AbsolutenessReport(
            self.trials + other.trials,
            self.agreements + other.agreements,
            self.disagreements + other.disagreements,
            self.log + other.log,
        )

    def summary(self) -> str:
        return f"{self.agreements}/{self.trials} agree"

    def to_text(self, verbose: bool = False) -> str:
        lines = list(self.log) if verbose else []
        for d in self.disagreements:
            lines.append("DISAGREE " + json.dumps(d.to_dict(), sort_keys=True))
        lines.append(self.summary())
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "agreements": self.agreements,
            "disagreements": [d.to_dict() for d in self.disagreements],
        }


def random_transitive_subset(rng: random.Random, stage: HFSet, max_seeds: int = 4) -> HFSet:
    """Transitive closure of a few random members of ``stage`` (never empty)."""
    members = stage.children
    k = rng.randint(1, min(max_seeds, len(members)))
    picked = rng.sample(members, k)
    return transitive_closure(stage.store.make_set(picked))


def _random_instance(seed: int, trial: int, max_depth: int, max_stage: int):
    rng = random.Random(f"absoluteness/{seed}/{trial}")
    store = default_store()
    n = rng.randint(1, max_stage)
    outer_carrier = store.v_stage(n)
    pred = store.make_set(x for x in outer_carrier.children if rng.random() < 0.5)
    outer = Universe(outer_carrier, pred)
    if rng.random() < 0.25:
        inner_carrier = store.v_stage(rng.randint(1, n))
    else:
        inner_carrier = random_transitive_subset(rng, outer_carrier)
    inner = outer.restrict(inner_carrier)
    pool = inner_carrier.children
    free = ["x", "y"][: rng.randint(0, 2)]
    params = ["a", "b"][: rng.randint(0, 2)]
    consts = rng.sample(pool, min(len(pool), rng.randint(0, 2)))
    if not (free or params or consts):
        params = ["a"]
    env = Environment(
        {v: rng.choice(pool) for v in free},
        {p: rng.choice(pool) for p in params},
    )
    f = random_formula(
        rng, rng.randint(1, max_depth), free=free, params=params, consts=consts, bounded_only=True
    )
    return f, env, inner, outer


def _run_trials(seed: int, start: int, stop: int, max_depth: int, max_stage: int, verbose: bool) -> AbsolutenessReport:
    report = AbsolutenessReport()
    for trial in range(start, stop):
        f, env, inner, outer = _random_instance(seed, trial, max_depth, max_stage)
        verdict = check_absolute(f, env, inner, outer)
        report.trials += 1
        if verdict.agree:
            report.agreements += 1
        else:
            report.disagreements.append(
                Disagreement(trial, f, env, inner, outer, verdict.inner_value, verdict.outer_value)
            )
        if verbose:
            mark = "agree" if verdict.agree else "DISAGREE"
            report.log.append(
                f"trial {trial}\t{mark}\t{int(verdict.inner_value)}{int(verdict.outer_value)}"
                f"\t|inner|={len(inner.carrier)}\t|outer|={len(outer.carrier)}\t{to_text(f)}"
            )
    return report


def fuzz_absoluteness(
    seed: int,
    trials: int,
    max_depth: int = 5,
    max_stage: int = MAX_OUTER_STAGE,
    workers: int = 1,
    verbose: bool = False,
) -> AbsolutenessReport:
    """Check seeded random bounded instances for agreement.

    Trial ``i`` depends only on ``(seed, i)``, so the result does not depend
    on ``workers``.
    """
    if not 1 <= max_stage <= MAX_OUTER_STAGE:
        raise ValueError(f"max_stage must be between 1 and {MAX_OUTER_STAGE}")
    if max_depth < 1:
        raise ValueError("max_depth must be positive")
    if workers <= 1 or trials < 2 * workers:
        return _run_trials(seed, 0, trials, max_depth, max_stage, verbose)
    step = -(-trials // workers)
    bounds = [(i, min(i + step, trials)) for i in range(0, trials, step)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(
            _run_trials,
            *zip(*[(seed, a, b, max_depth, max_stage, verbose) for a, b in bounds]),
        )
        report = AbsolutenessReport()
        for part in parts:
            report = report.merge(part)
    return report


# -- non-absoluteness --------------------------------------------------------

def _naive_truth(f: Formula, carrier: HFSet, pred: HFSet, env: dict[str, HFSet]) -> bool:
    """Reference satisfaction, written without sharing code with ``evaluate``."""

    def val(t) -> HFSet:
        if isinstance(t, Const):
            return t.value
        if isinstance(t, Param):
            raise ValueError("sentences only")
        return env[t.name]

    if isinstance(f, Membership):
        return any(m is val(f.left) for m in val(f.right).children)
    if isinstance(f, Equality):
        return format_set(val(f.left)) == format_set(val(f.right))
    if isinstance(f, PredA):
        return any(m is val(f.term) for m in pred.children)
    if isinstance(f, Top):
        return True
    if isinstance(f, Bot):
        return False
    if isinstance(f, Not):
        return not _naive_truth(f.body, carrier, pred, env)
    if isinstance(f, (And, Or, Implies)):
        a = _naive_truth(f.left, carrier, pred, env)
        b = _naive_truth(f.right, carrier, pred, env)
        return {And: a and b, Or: a or b, Implies: (not a) or b}[type(f)]
    rng = val(f.bound).children if isinstance(f, (BoundedExists, BoundedForall)) else carrier.children
    results = [_naive_truth(f.body, carrier, pred, {**env, f.var: x}) for x in rng]
    return any(results) if isinstance(f, (Exists, BoundedExists)) else all(results)


@dataclass(frozen=True)
class NonAbsoluteWitness:
    formula: Formula
    inner_value: bool
    outer_value: bool


def find_nonabsolute(
    inner: Universe,
    outer: Universe,
    depth_budget: int = 4,
    vars: tuple[str, ...] = ("x", "y", "z"),
) -> NonAbsoluteWitness | None:
    """First sentence, in enumeration order, whose truth differs between the universes.

    Only parameter-free sentences over ``vars`` are considered.  A found
    witness is re-parsed from its printed form and re-evaluated in both
    universes before it is returned.
    """
    if not (is_transitive(inner.carrier) and is_transitive(outer.carrier)):
        raise ValueError("both carriers must be transitive")
    if not is_subset(inner.carrier, outer.carrier):
        raise ValueError("inner carrier must be a subset of the outer carrier")
    for f in enumerate_sentences(depth_budget, vars):
        a = evaluate(f, None, inner)
        b = evaluate(f, None, outer)
        if a == b:
            continue
        if is_bounded(f):
            raise AssertionError(f"bounded sentence {to_text(f)} is not absolute")
        replay = parse(to_text(f), inner.carrier.store)
        if (
            replay != f
            or _naive_truth(replay, inner.carrier, inner.pred, {}) != a
            or _naive_truth(replay, outer.carrier, outer.pred, {}) != b
        ):
            raise AssertionError(f"witness {to_text(f)} failed re-evaluation")
        return NonAbsoluteWitness(f, a, b)
    return None
