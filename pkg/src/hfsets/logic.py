"""Formulas of set theory over the signature {in, =, A}.

Grammar (ASCII, whitespace-insensitive)::

    formula := quant | impl
    quant   := ("forall" | "exists") ident ["in" term] "." formula
    impl    := disj ["->" impl]
    disj    := conj {"|" conj}
    conj    := neg {"&" neg}
    neg     := "!" neg | atom
    atom    := "true" | "false" | "A(" term ")" | term ("in" | "=") term
             | "(" formula ")"
    term    := ident | "$" ident | set-literal

``$name`` is a parameter resolved at evaluation time; set literals are
constants.  The words ``forall exists in true false A`` are reserved.  A
quantifier body extends as far right as possible.  The parser renames any
binder that would shadow an enclosing binder of the same name, so ASTs never
contain shadowing.
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

from .kernel import HFSet, SetStore, default_store, format_set

__all__ = [
    "Var", "Const", "Param", "Term",
    "Membership", "Equality", "PredA", "Top", "Bot", "Not", "And", "Or", "Implies",
    "BoundedForall", "BoundedExists", "Forall", "Exists", "Formula",
    "QUANTIFIERS", "BOUNDED_QUANTIFIERS", "UNBOUNDED_QUANTIFIERS",
    "ParseError", "EnumerationBudgetError",
    "parse", "to_text", "free_vars", "parameters", "constants", "is_bounded",
    "depth", "bound_names", "all_names", "unshadow", "enumerate_formulas", "enumerate_sentences", "random_formula",
    "ENUMERATION_DEPTH_BUDGET", "RESERVED",
]

RESERVED = frozenset({"forall", "exists", "in", "true", "false", "A"})
ENUMERATION_DEPTH_BUDGET = 6

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


# -- terms -------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self) -> None:
        _check_ident(self.name)


@dataclass(frozen=True)
class Param:
    name: str

    def __post_init__(self) -> None:
        _check_ident(self.name)


@dataclass(frozen=True)
class Const:
    value: HFSet


Term = Union[Var, Param, Const]


def _check_ident(name: str) -> None:
    if not _IDENT.match(name) or name in RESERVED:
        raise ValueError(f"{name!r} is not a usable identifier")


# -- formulas ----------------------------------------------------------------

@dataclass(frozen=True)
class Membership:
    left: Term
    right: Term


@dataclass(frozen=True)
class Equality:
    left: Term
    right: Term


@dataclass(frozen=True)
class PredA:
    term: Term


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bot:
    pass


@dataclass(frozen=True)
class Not:
    body: Formula


@dataclass(frozen=True)
class And:
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or:
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies:
    left: Formula
    right: Formula


class _Binder:
    def __post_init__(self) -> None:
        _check_ident(self.var)


@dataclass(frozen=True)
class BoundedForall(_Binder):
    var: str
    bound: Term
    body: Formula


@dataclass(frozen=True)
class BoundedExists(_Binder):
    var: str
    bound: Term
    body: Formula


@dataclass(frozen=True)
class Forall(_Binder):
    var: str
    body: Formula


@dataclass(frozen=True)
class Exists(_Binder):
    var: str
    body: Formula


Formula = Union[
    Membership, Equality, PredA, Top, Bot, Not, And, Or, Implies,
    BoundedForall, BoundedExists, Forall, Exists,
]

ATOMS = (Membership, Equality, PredA, Top, Bot)
BINARY = (And, Or, Implies)
BOUNDED_QUANTIFIERS = (BoundedForall, BoundedExists)
UNBOUNDED_QUANTIFIERS = (Forall, Exists)
QUANTIFIERS = BOUNDED_QUANTIFIERS + UNBOUNDED_QUANTIFIERS


# -- syntactic queries -------------------------------------------------------

def _term_vars(t: Term) -> frozenset[str]:
    return frozenset((t.name,)) if isinstance(t, Var) else frozenset()


def free_vars(f: Formula) -> frozenset[str]:
    """Free variable names; parameters are reported by :func:`parameters`."""
    if isinstance(f, (Membership, Equality)):
        return _term_vars(f.left) | _term_vars(f.right)
    if isinstance(f, PredA):
        return _term_vars(f.term)
    if isinstance(f, (Top, Bot)):
        return frozenset()
    if isinstance(f, Not):
        return free_vars(f.body)
    if isinstance(f, BINARY):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, BOUNDED_QUANTIFIERS):
        return _term_vars(f.bound) | (free_vars(f.body) - {f.var})
    if isinstance(f, UNBOUNDED_QUANTIFIERS):
        return free_vars(f.body) - {f.var}
    raise TypeError(f"not a formula: {f!r}")


def _terms(f: Formula) -> Iterator[Term]:
    if isinstance(f, (Membership, Equality)):
        yield f.left
        yield f.right
    elif isinstance(f, PredA):
        yield f.term
    elif isinstance(f, Not):
        yield from _terms(f.body)
    elif isinstance(f, BINARY):
        yield from _terms(f.left)
        yield from _terms(f.right)
    elif isinstance(f, BOUNDED_QUANTIFIERS):
        yield f.bound
        yield from _terms(f.body)
    elif isinstance(f, UNBOUNDED_QUANTIFIERS):
        yield from _terms(f.body)


def parameters(f: Formula) -> frozenset[str]:
    return frozenset(t.name for t in _terms(f) if isinstance(t, Param))


def constants(f: Formula) -> list[HFSet]:
    seen: dict[int, HFSet] = {}
    for t in _terms(f):
        if isinstance(t, Const):
            seen.setdefault(id(t.value), t.value)
    return list(seen.values())


def is_bounded(f: Formula) -> bool:
    """True iff every quantifier has the shape ``(Q x in t)``."""
    if isinstance(f, ATOMS):
        return True
    if isinstance(f, Not):
        return is_bounded(f.body)
    if isinstance(f, BINARY):
        return is_bounded(f.left) and is_bounded(f.right)
    if isinstance(f, BOUNDED_QUANTIFIERS):
        return is_bounded(f.body)
    return False


def depth(f: Formula) -> int:
    if isinstance(f, ATOMS):
        return 1
    if isinstance(f, BINARY):
        return 1 + max(depth(f.left), depth(f.right))
    return 1 + depth(f.body)


def bound_names(f: Formula) -> frozenset[str]:
    """Every name bound by some quantifier inside ``f``."""
    if isinstance(f, ATOMS):
        return frozenset()
    if isinstance(f, Not):
        return bound_names(f.body)
    if isinstance(f, BINARY):
        return bound_names(f.left) | bound_names(f.right)
    return bound_names(f.body) | {f.var}


def all_names(f: Formula) -> frozenset[str]:
    """Every variable name occurring in ``f``, free or bound."""
    found = {t.name for t in _terms(f) if isinstance(t, Var)}
    return frozenset(found) | bound_names(f)


def unshadow(f: Formula) -> Formula:
    """Alpha-rename binders that rebind a name already bound outside them."""
    taken = set(all_names(f))

    def fresh(name: str) -> str:
        k = 1
        while f"{name}_{k}" in taken:
            k += 1
        taken.add(f"{name}_{k}")
        return f"{name}_{k}"

    def term(t: Term, ren: dict[str, str]) -> Term:
        if isinstance(t, Var) and t.name in ren:
            return Var(ren[t.name])
        return t

    def walk(g: Formula, ren: dict[str, str], bound: frozenset[str]) -> Formula:
        if isinstance(g, (Membership, Equality)):
            return type(g)(term(g.left, ren), term(g.right, ren))
        if isinstance(g, PredA):
            return PredA(term(g.term, ren))
        if isinstance(g, (Top, Bot)):
            return g
        if isinstance(g, Not):
            return Not(walk(g.body, ren, bound))
        if isinstance(g, BINARY):
            return type(g)(walk(g.left, ren, bound), walk(g.right, ren, bound))
        name = fresh(g.var) if g.var in bound else g.var
        inner = {**ren, g.var: name}
        body = walk(g.body, inner, bound | {name})
        if isinstance(g, BOUNDED_QUANTIFIERS):
            return type(g)(name, term(g.bound, ren), body)
        return type(g)(name, body)

    return walk(f, {}, frozenset())


# -- printing ----------------------------------------------------------------

_LEVEL_QUANT, _LEVEL_IMPL, _LEVEL_DISJ, _LEVEL_CONJ, _LEVEL_NEG, _LEVEL_ATOM = range(6)


def term_text(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Param):
        return "$" + t.name
    return format_set(t.value)


def to_text(f: Formula) -> str:
    """Print ``f`` so that :func:`parse` rebuilds the identical AST."""
    return _print(f, _LEVEL_QUANT)


def _wrap(text: str, own: int, ctx: int) -> str:
    return f"({text})" if ctx > own else text


def _print(f: Formula, ctx: int) -> str:
    if isinstance(f, Membership):
        return f"{term_text(f.left)} in {term_text(f.right)}"
    if isinstance(f, Equality):
        return f"{term_text(f.left)} = {term_text(f.right)}"
    if isinstance(f, PredA):
        return f"A({term_text(f.term)})"
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bot):
        return "false"
    if isinstance(f, Not):
        return "!" + _print(f.body, _LEVEL_NEG)
    if isinstance(f, Implies):
        text = f"{_print(f.left, _LEVEL_DISJ)} -> {_print(f.right, _LEVEL_IMPL)}"
        return _wrap(text, _LEVEL_IMPL, ctx)
    if isinstance(f, Or):
        text = f"{_print(f.left, _LEVEL_DISJ)} | {_print(f.right, _LEVEL_CONJ)}"
        return _wrap(text, _LEVEL_DISJ, ctx)
    if isinstance(f, And):
        text = f"{_print(f.left, _LEVEL_CONJ)} & {_print(f.right, _LEVEL_NEG)}"
        return _wrap(text, _LEVEL_CONJ, ctx)
    word = "forall" if isinstance(f, (Forall, BoundedForall)) else "exists"
    if isinstance(f, BOUNDED_QUANTIFIERS):
        head = f"{word} {f.var} in {term_text(f.bound)} . "
    else:
        head = f"{word} {f.var} . "
    return _wrap(head + _print(f.body, _LEVEL_QUANT), _LEVEL_QUANT, ctx)


# -- parsing -----------------------------------------------------------------

class ParseError(ValueError):
    """Syntax error with a 1-based position and the set of expected tokens."""

    def __init__(self, message: str, line: int, column: int, expected: Iterable[str] = ()):
        self.line = line
        self.column = column
        self.expected = frozenset(expected)
        self.message = message
        detail = f"; expected one of: {', '.join(sorted(self.expected))}" if self.expected else ""
        super().__init__(f"{line}:{column}: {message}{detail}")


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident', 'kw', 'sym', 'eof'
    text: str
    line: int
    column: int

    def describe(self) -> str:
        return "end of input" if self.kind == "eof" else repr(self.text)


_TOKEN_RE = re.compile(r"\s+|->|[A-Za-z_][A-Za-z0-9_]*|[{}(),.$|&!=]|.", re.S)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start = 1, 0
    for m in _TOKEN_RE.finditer(text):
        chunk = m.group()
        column = m.start() - line_start + 1
        if chunk.isspace():
            for i, ch in enumerate(chunk):
                if ch == "\n":
                    line += 1
                    line_start = m.start() + i + 1
            continue
        if chunk[0].isalpha() or chunk[0] == "_":
            kind = "kw" if chunk in RESERVED else "ident"
        elif chunk in ("->", "{", "}", "(", ")", ",", ".", "$", "|", "&", "!", "="):
            kind = "sym"
        else:
            raise ParseError(f"unexpected character {chunk!r}", line, column)
        tokens.append(Token(kind, chunk, line, column))
    tokens.append(Token("eof", "", line, len(text) - line_start + 1))
    return tokens


_TERM_START = frozenset({"identifier", "'$'", "'{'"})


class _Parser:
    def __init__(self, text: str, store: SetStore) -> None:
        self.tokens = tokenize(text)
        self.pos = 0
        self.store = store
        self.taken = {t.text for t in self.tokens if t.kind == "ident"}
        self.scope: list[tuple[str, str]] = []  # (source name, AST name)

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, expected: Iterable[str], message: str | None = None) -> ParseError:
        tok = self.tok
        return ParseError(message or f"unexpected {tok.describe()}", tok.line, tok.column, expected)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("kw", "sym") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error({repr(text)})
        tok = self.tok
        self.pos += 1
        return tok

    def parse(self) -> Formula:
        f = self.formula()
        if self.tok.kind != "eof":
            raise self.error({"end of input", "'->'", "'|'", "'&'"})
        return f

    def formula(self) -> Formula:
        if self.at("forall") or self.at("exists"):
            return self.quant()
        return self.impl()

    def fresh(self, name: str) -> str:
        k = 1
        while f"{name}_{k}" in self.taken:
            k += 1
        new = f"{name}_{k}"
        self.taken.add(new)
        return new

    def quant(self) -> Formula:
        word = self.tok.text
        self.pos += 1
        if self.tok.kind != "ident":
            raise self.error({"identifier"})
        source = self.tok.text
        self.pos += 1
        bound = None
        if self.at("in"):
            self.pos += 1
            bound = self.term()
        if not self.at("."):
            raise self.error({"'.'"} if bound is not None else {"'.'", "'in'"})
        self.pos += 1
        enclosing = {ast for _, ast in self.scope}
        name = self.fresh(source) if source in enclosing else source
        self.scope.append((source, name))
        try:
            body = self.formula()
        finally:
            self.scope.pop()
        if word == "forall":
            return Forall(name, body) if bound is None else BoundedForall(name, bound, body)
        return Exists(name, body) if bound is None else BoundedExists(name, bound, body)

    def impl(self) -> Formula:
        left = self.disj()
        if self.at("->"):
            self.pos += 1
            return Implies(left, self.impl_or_quant())
        return left

    def impl_or_quant(self) -> Formula:
        if self.at("forall") or self.at("exists"):
            raise self.error(
                {"'!'", "'('", "'true'", "'false'", "'A'"} | _TERM_START,
                "a quantifier after '->' must be parenthesised",
            )
        return self.impl()

    def disj(self) -> Formula:
        f = self.conj()
        while self.at("|"):
            self.pos += 1
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.neg()
        while self.at("&"):
            self.pos += 1
            f = And(f, self.neg())
        return f

    def neg(self) -> Formula:
        if self.at("!"):
            self.pos += 1
            return Not(self.neg())
        return self.atom()

    def atom(self) -> Formula:
        tok = self.tok
        if self.at("true"):
            self.pos += 1
            return Top()
        if self.at("false"):
            self.pos += 1
            return Bot()
        if self.at("A"):
            self.pos += 1
            self.expect("(")
            t = self.term()
            self.expect(")")
            return PredA(t)
        if self.at("("):
            self.pos += 1
            f = self.formula()
            self.expect(")")
            return f
        if tok.kind == "ident" or self.at("$") or self.at("{"):
            left = self.term()
            if self.at("in"):
                self.pos += 1
                return Membership(left, self.term())
            if self.at("="):
                self.pos += 1
                return Equality(left, self.term())
            raise self.error({"'in'", "'='"})
        raise self.error({"'!'", "'('", "'true'", "'false'", "'A'"} | _TERM_START)

    def term(self) -> Term:
        tok = self.tok
        if tok.kind == "ident":
            self.pos += 1
            for source, ast in reversed(self.scope):
                if source == tok.text:
                    return Var(ast)
            return Var(tok.text)
        if self.at("$"):
            self.pos += 1
            if self.tok.kind != "ident":
                raise self.error({"identifier"})
            name = self.tok.text
            self.pos += 1
            return Param(name)
        if self.at("{"):
            return Const(self.set_literal())
        raise self.error(_TERM_START)

    def set_literal(self) -> HFSet:
        self.expect("{")
        members: list[HFSet] = []
        if not self.at("}"):
            members.append(self.set_literal())
            while self.at(","):
                self.pos += 1
                if not self.at("{"):
                    raise self.error({"'{'"})
                members.append(self.set_literal())
        if not self.at("}"):
            raise self.error({"','", "'}'"})
        self.pos += 1
        return self.store.make_set(members)


def parse(text: str, store: SetStore | None = None) -> Formula:
    """Parse formula text; raises :class:`ParseError` with a position."""
    return _Parser(text, store or default_store()).parse()


# -- enumeration -------------------------------------------------------------

class EnumerationBudgetError(ValueError):
    pass


def _atoms(terms: Sequence[Term]) -> list[Formula]:
    out: list[Formula] = [Membership(s, t) for s in terms for t in terms]
    out += [Equality(s, t) for s in terms for t in terms]
    out += [PredA(t) for t in terms]
    out += [Top(), Bot()]
    return out


_Entry = tuple  # (formula, free names, bound names)
_NONE: frozenset[str] = frozenset()


class _Levels:
    """Formulas of exact depth d, optionally only those with <= k free variables.

    Filtering keeps the relative order of the unfiltered stream, because a
    formula with at most k free variables only has subformulas that pass the
    correspondingly relaxed filter.
    """

    def __init__(self, vars: Sequence[str], terms: Sequence[Term], keep: int) -> None:
        self.vars = list(vars)
        self.terms = [(t, frozenset((t.name,)) if isinstance(t, Var) else _NONE) for t in terms]
        self.keep = keep
        atoms = [(f, free_vars(f), _NONE) for f in _atoms(terms)]
        self.cache: dict[tuple[int, int | None], list[_Entry]] = {(1, None): atoms}

    def exact(self, d: int, k: int | None) -> Iterable[_Entry]:
        key = (d, k)
        if key in self.cache:
            return self.cache[key]
        if d == 1:
            found = [e for e in self.cache[(1, None)] if len(e[1]) <= k]
        elif d <= self.keep:
            found = list(self._generate(d, k))
        else:
            return self._generate(d, k)
        self.cache[key] = found
        return found

    def upto(self, d: int, k: int | None) -> Iterator[_Entry]:
        for level in range(1, d + 1):
            yield from self.exact(level, k)

    def _generate(self, d: int, k: int | None) -> Iterator[_Entry]:
        fits = (lambda names: True) if k is None else (lambda names: len(names) <= k)
        for body, fb, bb in self.exact(d - 1, None if k is None else k + 1):
            for v in self.vars:
                if v in bb:
                    continue
                inner = fb - {v}
                bound = bb | {v}
                if fits(inner):
                    yield Exists(v, body), inner, bound
                    yield Forall(v, body), inner, bound
                for t, ft in self.terms:
                    names = inner | ft
                    if fits(names):
                        yield BoundedExists(v, t, body), names, bound
                        yield BoundedForall(v, t, body), names, bound
        for body, fb, bb in self.exact(d - 1, k):
            yield Not(body), fb, bb
        for op in BINARY:
            for dl in range(1, d):
                for left, fl, bl in self.exact(dl, k):
                    rights = self.upto(d - 1, k) if dl == d - 1 else self.exact(d - 1, k)
                    for right, fr, br in rights:
                        names = fl | fr
                        if fits(names):
                            yield op(left, right), names, bl | br


def _stream(depth: int, vars: Sequence[str], params: Sequence[HFSet], budget: int, k: int | None):
    if depth > budget:
        raise EnumerationBudgetError(f"depth {depth} exceeds the enumeration budget {budget}")
    for v in vars:
        _check_ident(v)
    if depth < 1:
        return
    terms: list[Term] = [Var(v) for v in vars] + [Const(p) for p in params]
    levels = _Levels(vars, terms, keep=max(1, min(depth - 1, 2)))
    for f, _, _ in levels.upto(depth, k):
        yield f


def enumerate_sentences(
    depth: int,
    vars: Sequence[str],
    params: Sequence[HFSet] = (),
    budget: int = ENUMERATION_DEPTH_BUDGET,
) -> Iterator[Formula]:
    """The closed formulas of :func:`enumerate_formulas`, in the same order."""
    return _stream(depth, vars, params, budget, 0)


def enumerate_formulas(
    depth: int,
    vars: Sequence[str],
    params: Sequence[HFSet] = (),
    budget: int = ENUMERATION_DEPTH_BUDGET,
) -> Iterator[Formula]:
    """Stream every formula of AST depth <= ``depth`` (atoms have depth 1).

    Terms are the variables followed by the given sets as constants.  The
    stream lists depth 1, then exact depth 2, and so on, so it extends the
    stream for ``depth - 1``.  Within a level: quantifiers, negations, then
    binary connectives.  Quantifiers never rebind a variable already bound
    in their body.
    """
    return _stream(depth, vars, params, budget, None)


# -- random generation ---------------------------------------------------------

def random_formula(
    rng: random.Random,
    max_depth: int,
    free: Sequence[str] = ("x", "y"),
    params: Sequence[str] = ("a",),
    consts: Sequence[HFSet] = (),
    bounded_only: bool = False,
    weights: tuple[int, int, int] = (3, 2, 2),
) -> Formula:
    """A random shadow-free formula.

    ``weights`` are the relative odds of atom : connective : quantifier;
    the quantifier odds decay with nesting so deep towers stay rare.
    """
    counter = itertools.count()

    def choices(scope: list[str]) -> list[Term]:
        found: list[Term] = [Var(v) for v in scope] + [Param(p) for p in params]
        return found + [Const(c) for c in consts]

    def term(scope: list[str]) -> Term:
        return rng.choice(choices(scope))

    def atom(scope: list[str]) -> Formula:
        kind = rng.randrange(6) if choices(scope) else 5
        if kind in (0, 1):
            return Membership(term(scope), term(scope))
        if kind in (2, 3):
            return Equality(term(scope), term(scope))
        if kind == 4:
            return PredA(term(scope))
        return Top() if rng.random() < 0.5 else Bot()

    def build(d: int, scope: list[str], nesting: int) -> Formula:
        if d <= 1:
            return atom(scope)
        wa, wc, wq = weights
        wq = wq / (1 + nesting)
        pick = rng.uniform(0, wa + wc + wq)
        if pick < wa:
            return atom(scope)
        if pick < wa + wc:
            kind = rng.randrange(4)
            if kind == 0:
                return Not(build(d - 1, scope, nesting))
            op = BINARY[kind - 1]
            return op(build(d - 1, scope, nesting), build(d - 1, scope, nesting))
        bounded = bounded_only or rng.random() < 0.6
        if bounded and not choices(scope):
            return atom(scope)
        name = f"v{next(counter)}"
        body = build(d - 1, scope + [name], nesting + 1)
        universal = rng.random() < 0.5
        if bounded:
            bound = term(scope)
            return BoundedForall(name, bound, body) if universal else BoundedExists(name, bound, body)
        return Forall(name, body) if universal else Exists(name, body)

    return build(max_depth, list(free), 0)
