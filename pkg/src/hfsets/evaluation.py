"""Tarskian truth for set-theoretic formulas over finite universes.

A :class:`Universe` is a carrier set together with an interpretation of the
predicate ``A``.  Membership and equality are genuine HF membership and
identity.  Bounded quantifiers ``(Q x in t)`` run over the members of the
value of ``t``; unbounded quantifiers run over the carrier, so "unbounded"
always means "unbounded relative to this universe".  Iteration follows the
canonical member order and connectives short-circuit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .kernel import HFSet, default_store, is_subset, is_transitive, parse_set
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
    Term,
    Top,
    Var,
    constants,
    free_vars,
    parameters,
)

__all__ = [
    "Universe",
    "Environment",
    "EvaluationError",
    "UnboundNameError",
    "OutsideCarrierError",
    "evaluate",
    "eval_cost",
]


class EvaluationError(ValueError):
    code = "E_EVAL"


class UnboundNameError(EvaluationError):
    code = "E_UNBOUND"


class OutsideCarrierError(EvaluationError):
    code = "E_OUTSIDE_CARRIER"


@dataclass(frozen=True)
class Universe:
    carrier: HFSet
    pred: HFSet = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.pred is None:
            object.__setattr__(self, "pred", self.carrier.store.empty)
        if not is_subset(self.pred, self.carrier):
            raise ValueError("the interpretation of A must be a subset of the carrier")

    @classmethod
    def stage(cls, n: int, pred: HFSet | None = None) -> Universe:
        carrier = default_store().v_stage(n)
        if pred is not None:
            pred = carrier.store._intern(tuple(x for x in pred.children if x in carrier))
        return cls(carrier, pred)

    @classmethod
    def from_text(cls, carrier: str, pred: str = "{}") -> Universe:
        return cls(parse_set(carrier), parse_set(pred))

    def restrict(self, inner: HFSet) -> Universe:
        """The sub-universe on ``inner`` with ``A`` cut down to it."""
        pred = inner.store._intern(tuple(x for x in self.pred.children if x in inner))
        return Universe(inner, pred)

    @property
    def transitive(self) -> bool:
        return is_transitive(self.carrier)


@dataclass(frozen=True)
class Environment:
    variables: Mapping[str, HFSet] = field(default_factory=dict)
    params: Mapping[str, HFSet] = field(default_factory=dict)

    def values(self) -> list[HFSet]:
        return list(self.variables.values()) + list(self.params.values())


def _term_value(t: Term, variables: Mapping[str, HFSet], params: Mapping[str, HFSet]) -> HFSet:
    if isinstance(t, Var):
        try:
            return variables[t.name]
        except KeyError:
            raise UnboundNameError(f"unbound variable {t.name}") from None
    if isinstance(t, Param):
        try:
            return params[t.name]
        except KeyError:
            raise UnboundNameError(f"unbound parameter ${t.name}") from None
    return t.value


class _Evaluator:
    def __init__(self, u: Universe, params: Mapping[str, HFSet], strict: bool) -> None:
        self.u = u
        self.carrier = u.carrier.members
        self.pred = u.pred.members
        self.params = params
        self.strict = strict

    def term(self, t: Term, env: dict[str, HFSet]) -> HFSet:
        return _term_value(t, env, self.params)

    def range_of(self, bound: Term, env: dict[str, HFSet]) -> tuple[HFSet, ...]:
        value = self.term(bound, env)
        if self.strict:
            for m in value.children:
                if m not in self.carrier:
                    raise OutsideCarrierError(
                        f"bounded quantifier ranges over {m} which is outside the carrier"
                    )
        return value.children

    def run(self, f: Formula, env: dict[str, HFSet]) -> bool:
        kind = type(f)
        if kind is Membership:
            return self.term(f.left, env) in self.term(f.right, env).members
        if kind is Equality:
            return self.term(f.left, env) is self.term(f.right, env)
        if kind is PredA:
            return self.term(f.term, env) in self.pred
        if kind is Top:
            return True
        if kind is Bot:
            return False
        if kind is Not:
            return not self.run(f.body, env)
        if kind is And:
            return self.run(f.left, env) and self.run(f.right, env)
        if kind is Or:
            return self.run(f.left, env) or self.run(f.right, env)
        if kind is Implies:
            return (not self.run(f.left, env)) or self.run(f.right, env)
        if kind is BoundedExists or kind is BoundedForall:
            domain = self.range_of(f.bound, env)
        elif kind is Exists or kind is Forall:
            domain = self.u.carrier.children
        else:
            raise TypeError(f"not a formula: {f!r}")
        want = kind is Exists or kind is BoundedExists
        inner = dict(env)
        for value in domain:
            inner[f.var] = value
            if self.run(f.body, inner) is want:
                return want
        return not want


def evaluate(
    f: Formula,
    env: Environment | None,
    u: Universe,
    strict: bool = False,
) -> bool:
    """Truth value of ``f`` in ``u`` under ``env``.

    With ``strict`` every environment value and every constant must lie in
    the carrier, and so must every member a bounded quantifier visits.
    """
    env = env or Environment()
    missing = sorted(free_vars(f) - env.variables.keys())
    if missing:
        raise UnboundNameError(f"unbound variable {missing[0]}")
    missing = sorted(parameters(f) - env.params.keys())
    if missing:
        raise UnboundNameError(f"unbound parameter ${missing[0]}")
    if strict:
        carrier = u.carrier.members
        for name, value in list(env.variables.items()) + list(env.params.items()):
            if value not in carrier:
                raise OutsideCarrierError(f"value of {name} is outside the carrier")
        for c in constants(f):
            if c not in carrier:
                raise OutsideCarrierError(f"constant {c} is outside the carrier")
    return _Evaluator(u, env.params, strict).run(f, dict(env.variables))


def eval_cost(f: Formula, u: Universe) -> int:
    """Upper bound on the number of atomic evaluations of ``f`` over ``u``.

    A bound term whose value is not known statically is assumed to range
    over at most as many members as the largest carrier element has.
    """
    widest = max((len(x) for x in u.carrier.children), default=0)

    def cost(g: Formula) -> int:
        kind = type(g)
        if kind in (Membership, Equality, PredA, Top, Bot):
            return 1
        if kind is Not:
            return cost(g.body)
        if kind in (And, Or, Implies):
            return cost(g.left) + cost(g.right)
        if kind in (Exists, Forall):
            return len(u.carrier) * cost(g.body)
        size = len(g.bound.value) if isinstance(g.bound, Const) else widest
        return size * cost(g.body)

    return cost(f)
