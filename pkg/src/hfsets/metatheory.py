"""Finite first-order structures, their HF encodings, and completeness up to caps.

A structure on ``{0, ..., n-1}`` over a relational signature is encoded as
the Kuratowski pair ``(D, I)``.  ``D`` is the set of numerals below ``n``,
and ``I`` holds one pair ``(j, R_j)`` for the j-th relation symbol.  A tuple
``(a,)`` is encoded as ``a``, and ``(a, b, ...)`` as ``pair(a, (b, ...))``.

:func:`sat_to_bounded` writes "the structure ``$M`` satisfies phi" as a
formula whose quantifiers are all bounded.  :func:`fo_evaluate` is a direct
evaluator kept independent of the set-theoretic route, so the two can check
each other.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

from .kernel import CapacityError, HFSet, SetStore, default_store
from .logic import (
    And,
    Bot,
    BoundedExists,
    BoundedForall,
    Const,
    EnumerationBudgetError,
    Equality,
    Exists,
    Forall,
    Formula,
    Implies,
    Membership,
    Not,
    Or,
    Param,
    ParseError,
    Top,
    Var,
    _Parser,
    _check_ident,
)

__all__ = [
    "Signature",
    "Rel",
    "FOFormula",
    "FinStructure",
    "Theory",
    "SignatureError",
    "StructureFormatError",
    "Complete",
    "Counterexample",
    "Inconsistent",
    "parse_fo",
    "fo_to_text",
    "fo_free_vars",
    "fo_depth",
    "fo_evaluate",
    "check_signature",
    "parse_signature",
    "format_signature",
    "parse_theory",
    "format_theory",
    "parse_structure",
    "format_structure",
    "encode_structure",
    "decode_structure",
    "sat_to_bounded",
    "translation_universe",
    "enumerate_models",
    "enumerate_fo_sentences",
    "check_complete_upto",
    "MAX_DOMAIN",
    "ENCODING_RANK_CAP",
    "MODEL_CANDIDATE_CAP",
]

MAX_DOMAIN = 4
MAX_DEPTH = 4
ENCODING_RANK_CAP = 16
MODEL_CANDIDATE_CAP = 1 << 20
REPRESENTATIVE_CAP = 200_000

Signature = tuple[tuple[str, int], ...]


class SignatureError(ValueError):
    pass


class StructureFormatError(ValueError):
    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


# -- syntax ------------------------------------------------------------------

@dataclass(frozen=True)
class Rel:
    """Relation atom ``name(args...)`` over variables."""

    name: str
    args: tuple[str, ...]

    def __post_init__(self) -> None:
        _check_ident(self.name)
        for a in self.args:
            _check_ident(a)


# Equality atoms reuse logic.Equality over Var terms; connectives and the
# unbounded quantifiers are shared with the set-theoretic language.
FOFormula = Union[Rel, Equality, Top, Bot, Not, And, Or, Implies, Forall, Exists]
_FO_BINARY = (And, Or, Implies)


def fo_free_vars(f: FOFormula) -> frozenset[str]:
    if isinstance(f, Rel):
        return frozenset(f.args)
    if isinstance(f, Equality):
        return frozenset((f.left.name, f.right.name))
    if isinstance(f, (Top, Bot)):
        return frozenset()
    if isinstance(f, Not):
        return fo_free_vars(f.body)
    if isinstance(f, _FO_BINARY):
        return fo_free_vars(f.left) | fo_free_vars(f.right)
    if isinstance(f, (Forall, Exists)):
        return fo_free_vars(f.body) - {f.var}
    raise TypeError(f"not a first-order formula: {f!r}")


def fo_depth(f: FOFormula) -> int:
    """AST depth with atoms at depth 1, as for set-theoretic formulas."""
    if isinstance(f, (Rel, Equality, Top, Bot)):
        return 1
    if isinstance(f, _FO_BINARY):
        return 1 + max(fo_depth(f.left), fo_depth(f.right))
    return 1 + fo_depth(f.body)


def _relations(f: FOFormula) -> Iterator[Rel]:
    if isinstance(f, Rel):
        yield f
    elif isinstance(f, Not) or isinstance(f, (Forall, Exists)):
        yield from _relations(f.body)
    elif isinstance(f, _FO_BINARY):
        yield from _relations(f.left)
        yield from _relations(f.right)


def check_signature(f: FOFormula, signature: Signature) -> None:
    arity = dict(signature)
    for atom in _relations(f):
        if atom.name not in arity:
            raise SignatureError(f"relation {atom.name} is not in the signature")
        if len(atom.args) != arity[atom.name]:
            raise SignatureError(
                f"relation {atom.name} has arity {arity[atom.name]}, used with {len(atom.args)}"
            )


_LEVEL_QUANT, _LEVEL_IMPL, _LEVEL_DISJ, _LEVEL_CONJ, _LEVEL_NEG = range(5)


def fo_to_text(f: FOFormula) -> str:
    return _fo_print(f, _LEVEL_QUANT)


def _fo_print(f: FOFormula, ctx: int) -> str:
    def wrap(text: str, own: int) -> str:
        return f"({text})" if ctx > own else text

    if isinstance(f, Rel):
        return f"{f.name}({','.join(f.args)})"
    if isinstance(f, Equality):
        return f"{f.left.name} = {f.right.name}"
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bot):
        return "false"
    if isinstance(f, Not):
        return "!" + _fo_print(f.body, _LEVEL_NEG)
    if isinstance(f, Implies):
        return wrap(f"{_fo_print(f.left, _LEVEL_DISJ)} -> {_fo_print(f.right, _LEVEL_IMPL)}", _LEVEL_IMPL)
    if isinstance(f, Or):
        return wrap(f"{_fo_print(f.left, _LEVEL_DISJ)} | {_fo_print(f.right, _LEVEL_CONJ)}", _LEVEL_DISJ)
    if isinstance(f, And):
        return wrap(f"{_fo_print(f.left, _LEVEL_CONJ)} & {_fo_print(f.right, _LEVEL_NEG)}", _LEVEL_CONJ)
    word = "forall" if isinstance(f, Forall) else "exists"
    return wrap(f"{word} {f.var} . {_fo_print(f.body, _LEVEL_QUANT)}", _LEVEL_QUANT)


class _FOParser(_Parser):
    """The set-theoretic grammar with ``R(x, ...)`` atoms and no terms but variables."""

    def __init__(self, text: str) -> None:
        super().__init__(text, default_store())

    def quant(self) -> Formula:
        # Look ahead for a bounded quantifier, which this language lacks.
        ahead = self.tokens[self.pos + 1 : self.pos + 3]
        if len(ahead) == 2 and ahead[0].kind == "ident" and ahead[1].text == "in":
            self.pos += 2
            raise self.error({"'.'"}, "first-order quantifiers are unbounded")
        return super().quant()

    def atom(self) -> Formula:
        tok = self.tok
        if tok.kind == "ident" and self.tokens[self.pos + 1].text == "(":
            self.pos += 2
            args = [self.var()]
            while self.at(","):
                self.pos += 1
                args.append(self.var())
            self.expect(")")
            return Rel(tok.text, tuple(args))
        if tok.kind == "ident":
            left = self.term()
            if not self.at("="):
                raise self.error({"'='", "'('"})
            self.pos += 1
            return Equality(left, self.term())
        if self.at("A") or self.at("$") or self.at("{"):
            raise self.error({"'!'", "'('", "'true'", "'false'", "identifier"})
        return super().atom()

    def var(self) -> str:
        return self.term().name

    def term(self) -> Var:
        if self.tok.kind != "ident":
            raise self.error({"identifier"})
        return super().term()


def parse_fo(text: str, signature: Signature | None = None) -> FOFormula:
    """Parse a first-order formula; with ``signature``, also check arities."""
    f = _FOParser(text).parse()
    if signature is not None:
        check_signature(f, signature)
    return f


# -- structures --------------------------------------------------------------

def parse_signature(text: str) -> Signature:
    """``"R/2 S/1"`` -> ``(("R", 2), ("S", 1))``."""
    out: list[tuple[str, int]] = []
    for item in text.split():
        m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)/([0-9]+)", item)
        if not m:
            raise SignatureError(f"bad signature item {item!r}; expected NAME/ARITY")
        name, arity = m.group(1), int(m.group(2))
        if name in ("forall", "exists", "in", "true", "false", "A"):
            raise SignatureError(f"{name} is reserved")
        if arity < 1:
            raise SignatureError(f"relation {name} needs arity at least 1")
        if name in dict(out):
            raise SignatureError(f"relation {name} declared twice")
        out.append((name, arity))
    return tuple(out)


def format_signature(signature: Signature) -> str:
    return " ".join(f"{name}/{arity}" for name, arity in signature)


@dataclass(frozen=True)
class FinStructure:
    """A structure on ``{0, ..., size-1}``.

    ``relations`` is a tuple aligned with ``signature``; each entry is a
    frozenset of tuples of the declared arity.
    """

    size: int
    signature: Signature = ()
    relations: tuple[frozenset[tuple[int, ...]], ...] = ()

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError("structures have nonempty domains")
        rels = tuple(frozenset(tuple(int(x) for x in t) for t in r) for r in self.relations)
        if len(rels) != len(self.signature):
            raise ValueError("one interpretation is needed per relation symbol")
        for (name, arity), r in zip(self.signature, rels):
            for t in r:
                if len(t) != arity:
                    raise ValueError(f"tuple {t} in {name} does not have arity {arity}")
                if not all(0 <= x < self.size for x in t):
                    raise ValueError(f"tuple {t} in {name} leaves the domain 0..{self.size - 1}")
        object.__setattr__(self, "signature", tuple(self.signature))
        object.__setattr__(self, "relations", rels)

    @classmethod
    def build(cls, size: int, signature: Signature, relations: Mapping[str, Iterable[tuple[int, ...]]]) -> FinStructure:
        return cls(size, signature, tuple(frozenset(relations.get(name, ())) for name, _ in signature))

    def relation(self, name: str) -> frozenset[tuple[int, ...]]:
        for (n, _), r in zip(self.signature, self.relations):
            if n == name:
                return r
        raise SignatureError(f"relation {name} is not in the signature")

    def permute(self, perm: Sequence[int]) -> FinStructure:
        """The image under the bijection ``i -> perm[i]``."""
        if sorted(perm) != list(range(self.size)):
            raise ValueError("not a permutation of the domain")
        rels = tuple(frozenset(tuple(perm[x] for x in t) for t in r) for r in self.relations)
        return FinStructure(self.size, self.signature, rels)

    def is_isomorphic(self, other: FinStructure) -> bool:
        if self.size != other.size or self.signature != other.signature:
            return False
        return any(self.permute(p) == other for p in itertools.permutations(range(self.size)))


def format_structure(m: FinStructure) -> str:
    lines = [f"sig {format_signature(m.signature)}".rstrip(), f"size {m.size}"]
    for (name, _), r in zip(m.signature, m.relations):
        lines.extend(f"{name} {' '.join(map(str, t))}" for t in sorted(r))
    return "\n".join(lines) + "\n"


def parse_structure(text: str) -> FinStructure:
    """Read ``sig ...``, ``size N``, then one ``R a b ...`` line per tuple."""
    signature: Signature | None = None
    size: int | None = None
    tuples: dict[str, set[tuple[int, ...]]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        try:
            if head == "sig":
                if signature is not None:
                    raise StructureFormatError("duplicate 'sig' line", lineno)
                signature = parse_signature(" ".join(rest))
                continue
            if head == "size":
                if size is not None or len(rest) != 1 or not rest[0].isdigit():
                    raise StructureFormatError("expected a single 'size N' line", lineno)
                size = int(rest[0])
                continue
        except SignatureError as exc:
            raise StructureFormatError(str(exc), lineno) from None
        if signature is None or size is None:
            raise StructureFormatError("tuples must follow the 'sig' and 'size' lines", lineno)
        arity = dict(signature)
        if head not in arity:
            raise StructureFormatError(f"relation {head} is not in the signature", lineno)
        if len(rest) != arity[head] or not all(x.isdigit() for x in rest):
            raise StructureFormatError(f"{head} needs {arity[head]} natural numbers", lineno)
        t = tuple(int(x) for x in rest)
        if max(t) >= size:
            raise StructureFormatError(f"element {max(t)} is outside 0..{size - 1}", lineno)
        tuples.setdefault(head, set()).add(t)
    if size is None:
        raise StructureFormatError("missing 'size N' line", 1)
    try:
        return FinStructure.build(size, signature or (), tuples)
    except ValueError as exc:
        raise StructureFormatError(str(exc), 1) from None


# -- direct evaluation -------------------------------------------------------

def fo_evaluate(f: FOFormula, m: FinStructure, env: Mapping[str, int] | None = None) -> bool:
    """Tarskian truth of ``f`` in ``m``; quantifiers range over the domain."""
    rels = {name: r for (name, _), r in zip(m.signature, m.relations)}
    domain = range(m.size)

    def sat(g: FOFormula, e: dict[str, int]) -> bool:
        if isinstance(g, Rel):
            if g.name not in rels:
                raise SignatureError(f"relation {g.name} is not in the signature")
            return tuple(e[a] for a in g.args) in rels[g.name]
        if isinstance(g, Equality):
            return e[g.left.name] == e[g.right.name]
        if isinstance(g, Top):
            return True
        if isinstance(g, Bot):
            return False
        if isinstance(g, Not):
            return not sat(g.body, e)
        if isinstance(g, And):
            return sat(g.left, e) and sat(g.right, e)
        if isinstance(g, Or):
            return sat(g.left, e) or sat(g.right, e)
        if isinstance(g, Implies):
            return not sat(g.left, e) or sat(g.right, e)
        if isinstance(g, Exists):
            return any(sat(g.body, {**e, g.var: d}) for d in domain)
        if isinstance(g, Forall):
            return all(sat(g.body, {**e, g.var: d}) for d in domain)
        raise TypeError(f"not a first-order formula: {g!r}")

    env = dict(env or {})
    missing = fo_free_vars(f) - env.keys()
    if missing:
        raise ValueError(f"unbound variable {sorted(missing)[0]}")
    return sat(f, env)


# -- encoding ----------------------------------------------------------------

def _encode_tuple(t: tuple[int, ...], nums: list[HFSet], store: SetStore) -> HFSet:
    out = nums[t[-1]]
    for x in reversed(t[:-1]):
        out = store.pair(nums[x], out)
    return out


def encode_structure(m: FinStructure, store: SetStore | None = None) -> HFSet:
    """The HF set ``pair(D, I)`` described in the module docstring."""
    store = store or default_store()
    if m.size > MAX_DOMAIN:
        raise CapacityError(f"domain size {m.size} exceeds {MAX_DOMAIN}")
    nums = [store.numeral(i) for i in range(max(m.size, len(m.signature)))]
    domain = store.make_set(nums[: m.size])
    entries = []
    for j, r in enumerate(m.relations):
        rel = store.make_set(_encode_tuple(t, nums, store) for t in r)
        entries.append(store.pair(nums[j], rel))
    enc = store.pair(domain, store.make_set(entries))
    if enc.rank > ENCODING_RANK_CAP:
        raise CapacityError(f"encoding has rank {enc.rank}, above the cap {ENCODING_RANK_CAP}")
    return enc


def _unpair(p: HFSet) -> tuple[HFSet, HFSet]:
    members = p.children
    if len(members) == 1 and len(members[0]) == 1:
        (a,) = members[0].children
        return a, a
    if len(members) == 2:
        small, big = sorted(members, key=len)
        if len(small) == 1 and len(big) == 2 and small.children[0] in big:
            a = small.children[0]
            (b,) = [x for x in big.children if x is not a]
            return a, b
    raise ValueError(f"{p} is not a Kuratowski pair")


def _numeral_value(s: HFSet) -> int:
    n = len(s)
    if s is not s.store.numeral(n):
        raise ValueError(f"{s} is not a numeral")
    return n


def _decode_tuple(s: HFSet, arity: int) -> tuple[int, ...]:
    out = []
    for _ in range(arity - 1):
        a, s = _unpair(s)
        out.append(_numeral_value(a))
    out.append(_numeral_value(s))
    return tuple(out)


def decode_structure(enc: HFSet, signature: Signature) -> FinStructure:
    """Inverse of :func:`encode_structure` given the signature."""
    domain, interp = _unpair(enc)
    size = _numeral_value(domain)
    rels: dict[int, frozenset[tuple[int, ...]]] = {}
    for entry in interp.children:
        index, rel = _unpair(entry)
        j = _numeral_value(index)
        if j >= len(signature) or j in rels:
            raise SignatureError(f"encoding has an unexpected relation index {j}")
        rels[j] = frozenset(_decode_tuple(t, signature[j][1]) for t in rel.children)
    if len(rels) != len(signature):
        raise SignatureError("encoding and signature list different relations")
    return FinStructure(size, signature, tuple(rels[j] for j in range(len(signature))))


# -- translation ---------------------------------------------------------------

def _is_pair(t: Var, a: Var, b: Var, fresh) -> Formula:
    """Bounded formula for ``t = {{a}, {a, b}}``."""
    w, z = fresh("w"), fresh("z")
    singleton = And(Membership(a, Var(w)), BoundedForall(z, Var(w), Equality(Var(z), a)))
    doubleton = And(
        And(Membership(a, Var(w)), Membership(b, Var(w))),
        BoundedForall(z, Var(w), Or(Equality(Var(z), a), Equality(Var(z), b))),
    )
    w1, w2 = fresh("w"), fresh("w")
    return And(
        BoundedForall(w, t, Or(singleton, doubleton)),
        And(
            BoundedExists(w1, t, _rename(singleton, w, w1)),
            BoundedExists(w2, t, _rename(doubleton, w, w2)),
        ),
    )


def _rename(f: Formula, old: str, new: str) -> Formula:
    def term(t):
        return Var(new) if isinstance(t, Var) and t.name == old else t

    if isinstance(f, (Membership, Equality)):
        return type(f)(term(f.left), term(f.right))
    if isinstance(f, (Top, Bot)):
        return f
    if isinstance(f, Not):
        return Not(_rename(f.body, old, new))
    if isinstance(f, (And, Or, Implies)):
        return type(f)(_rename(f.left, old, new), _rename(f.right, old, new))
    if isinstance(f, (BoundedForall, BoundedExists)):
        body = f.body if f.var == old else _rename(f.body, old, new)
        return type(f)(f.var, term(f.bound), body)
    raise TypeError(f"unexpected node {f!r}")


def _is_tuple(t: Var, args: Sequence[Var], fresh) -> Formula:
    if len(args) == 1:
        return Equality(t, args[0])
    if len(args) == 2:
        return _is_pair(t, args[0], args[1], fresh)
    w, s = fresh("w"), fresh("s")
    return BoundedExists(
        w, t, BoundedExists(s, Var(w), And(_is_pair(t, args[0], Var(s), fresh), _is_tuple(Var(s), args[1:], fresh)))
    )


def sat_to_bounded(phi: FOFormula, signature: Signature, param: str = "M") -> Formula:
    """A bounded formula in ``$param`` equivalent to "the encoded structure satisfies phi".

    ``phi`` must be a sentence over ``signature``.  Relation indices are
    numerals and appear as set constants; every quantifier is bounded by
    ``$param`` or by a set reached from it.
    """
    check_signature(phi, signature)
    if fo_free_vars(phi):
        raise SignatureError("sat_to_bounded needs a sentence")
    taken: set[str] = set()

    def collect(g):
        if isinstance(g, Rel):
            taken.update(g.args)
        elif isinstance(g, Equality):
            taken.update((g.left.name, g.right.name))
        elif isinstance(g, Not) or isinstance(g, (Forall, Exists)):
            if isinstance(g, (Forall, Exists)):
                taken.add(g.var)
            collect(g.body)
        elif isinstance(g, _FO_BINARY):
            collect(g.left)
            collect(g.right)

    collect(phi)
    counter = itertools.count()

    def fresh(stem: str) -> str:
        while True:
            name = f"_{stem}{next(counter)}"
            if name not in taken:
                taken.add(name)
                return name

    store = default_store()
    M = Param(param)
    D, I = fresh("D"), fresh("I")
    rel_vars = {name: fresh("R") for name, _ in signature}

    def tr(g: FOFormula) -> Formula:
        if isinstance(g, Rel):
            arity = len(g.args)
            target = Var(rel_vars[g.name])
            args = [Var(a) for a in g.args]
            if arity == 1:
                return Membership(args[0], target)
            t = fresh("t")
            return BoundedExists(t, target, _is_tuple(Var(t), args, fresh))
        if isinstance(g, (Equality, Top, Bot)):
            return g
        if isinstance(g, Not):
            return Not(tr(g.body))
        if isinstance(g, _FO_BINARY):
            return type(g)(tr(g.left), tr(g.right))
        bounded = BoundedForall if isinstance(g, Forall) else BoundedExists
        return bounded(g.var, Var(D), tr(g.body))

    body = tr(phi)
    # Bind each relation variable R_j through the entry pair (j, R_j) in I.
    for j in reversed(range(len(signature))):
        name = signature[j][0]
        e, c = fresh("e"), fresh("c")
        index = Const(store.numeral(j))
        rv = rel_vars[name]
        ix = fresh("j")
        picks = BoundedExists(
            ix, Var(c), And(Equality(Var(ix), index), _is_pair(Var(e), Var(ix), Var(rv), fresh))
        )
        body = BoundedExists(e, Var(I), BoundedExists(c, Var(e), BoundedExists(rv, Var(c), And(picks, body))))
    p, q, p2, q2 = fresh("p"), fresh("p"), fresh("p"), fresh("p")
    z = fresh("z")
    is_first = BoundedForall(p2, M, Membership(Var(D), Var(p2)))
    is_second = Or(
        Not(Equality(Var(I), Var(D))),
        BoundedForall(q2, M, BoundedForall(z, Var(q2), Equality(Var(z), Var(D)))),
    )
    return BoundedExists(
        p, M, BoundedExists(
            D, Var(p), And(is_first, BoundedExists(
                q, M, BoundedExists(I, Var(q), And(is_second, body))
            ))
        )
    )


def translation_universe(enc: HFSet):
    """The transitive closure of ``{enc}`` as a universe, with ``A`` empty."""
    from .evaluation import Universe
    from .kernel import transitive_closure

    return Universe(transitive_closure(enc.store.make_set([enc])))


# -- model enumeration -------------------------------------------------------

def _tuple_space(size: int, signature: Signature) -> list[tuple[int, tuple[int, ...]]]:
    return [
        (j, t)
        for j, (_, arity) in enumerate(signature)
        for t in itertools.product(range(size), repeat=arity)
    ]


def enumerate_models(signature: Signature, size: int) -> list[FinStructure]:
    """One structure per isomorphism class of the given domain size.

    Each class is represented by the member whose bitmask over the tuple
    space is smallest; the result is sorted by that mask.
    """
    if not 1 <= size <= MAX_DOMAIN:
        raise CapacityError(f"domain size must be between 1 and {MAX_DOMAIN}")
    space = _tuple_space(size, signature)
    bits = len(space)
    if (1 << bits) > MODEL_CANDIDATE_CAP:
        raise CapacityError(f"2^{bits} candidate structures exceed {MODEL_CANDIDATE_CAP}")
    position = {key: b for b, key in enumerate(space)}
    masks = np.arange(1 << bits, dtype=np.uint64)
    canonical = masks.copy()
    for perm in itertools.permutations(range(size)):
        moved = np.zeros_like(masks)
        for b, (j, t) in enumerate(space):
            target = position[(j, tuple(perm[x] for x in t))]
            moved |= ((masks >> np.uint64(b)) & np.uint64(1)) << np.uint64(target)
        np.minimum(canonical, moved, out=canonical)
    reps = masks[canonical == masks]
    out = []
    for mask in reps.tolist():
        rels: list[set[tuple[int, ...]]] = [set() for _ in signature]
        for b, (j, t) in enumerate(space):
            if mask >> b & 1:
                rels[j].add(t)
        out.append(FinStructure(size, signature, tuple(frozenset(r) for r in rels)))
    return out


# -- sentence enumeration ------------------------------------------------------

def _fo_atoms(signature: Signature, vars: Sequence[str]) -> list[FOFormula]:
    out: list[FOFormula] = []
    for name, arity in signature:
        out.extend(Rel(name, args) for args in itertools.product(vars, repeat=arity))
    out.extend(Equality(Var(a), Var(b)) for a, b in itertools.combinations(vars, 2))
    out.extend([Top(), Bot()])
    return out


def _fo_candidates(levels: list[list[tuple]], d: int, vars: Sequence[str]) -> Iterator[tuple]:
    """Depth-``d`` candidates from representatives of lower depths, normalized.

    No double negation, no vacuous or repeated binder, and the operands of
    ``&`` and ``|`` appear in strictly increasing enumeration order.
    Yields ``(shape, operand indices, free, bound)``.
    """
    below = [e for level in levels[:d] for e in level]
    for body, free, bound, i in levels[d - 1]:
        for v in vars:
            if v in free and v not in bound:
                yield ("E", v, body), (i,), free - {v}, bound | {v}
                yield ("A", v, body), (i,), free - {v}, bound | {v}
    for body, free, bound, i in levels[d - 1]:
        if not isinstance(body, Not):
            yield ("N", body), (i,), free, bound
    top = {e[3] for e in levels[d - 1]}
    for op in ("&", "|", ">"):
        for left in below:
            for right in below:
                if left[3] == right[3]:
                    continue
                if left[3] not in top and right[3] not in top:
                    continue
                if op != ">" and left[3] > right[3]:
                    continue
                yield (op, left[0], right[0]), (left[3], right[3]), left[1] | right[1], left[2] | right[2]


_BUILD = {
    "E": lambda v, b: Exists(v, b),
    "A": lambda v, b: Forall(v, b),
    "N": lambda b: Not(b),
    "&": lambda a, b: And(a, b),
    "|": lambda a, b: Or(a, b),
    ">": lambda a, b: Implies(a, b),
}


def _build(shape: tuple) -> FOFormula:
    return _BUILD[shape[0]](*shape[1:])


def enumerate_fo_sentences(
    signature: Signature, depth: int, vars: Sequence[str] = ("x", "y")
) -> Iterator[FOFormula]:
    """Every normalized first-order sentence of depth <= ``depth``, shallow first."""
    if depth > MAX_DEPTH:
        raise EnumerationBudgetError(f"depth {depth} exceeds {MAX_DEPTH}")
    if depth < 1:
        return
    levels: list[list[tuple]] = [[]]
    counter = itertools.count()
    for f in _fo_atoms(signature, vars):
        levels[0].append((f, fo_free_vars(f), frozenset(), next(counter)))
    # levels[i] holds depth i+1
    for e in levels[0]:
        if not e[1]:
            yield e[0]
    for d in range(1, depth):
        level = []
        for shape, _, free, bound in _fo_candidates(levels, d, vars):
            f = _build(shape)
            level.append((f, free, bound, next(counter)))
            if not free:
                yield f
        levels.append(level)


# -- completeness up to caps -------------------------------------------------

@dataclass(frozen=True)
class Theory:
    signature: Signature
    sentences: tuple[FOFormula, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "sentences", tuple(self.sentences))
        for s in self.sentences:
            check_signature(s, self.signature)
            if fo_free_vars(s):
                raise SignatureError(f"{fo_to_text(s)} is not a sentence")

    def holds_in(self, m: FinStructure) -> bool:
        return all(fo_evaluate(s, m) for s in self.sentences)


def parse_theory(text: str) -> Theory:
    """A ``sig R/2 ...`` line, then one sentence per line; ``#`` starts a comment."""
    signature: Signature | None = None
    sentences = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.split()[0] == "sig" and signature is None and not sentences:
            try:
                signature = parse_signature(line[3:])
            except SignatureError as exc:
                raise StructureFormatError(str(exc), lineno) from None
            continue
        try:
            f = parse_fo(line, signature or ())
        except ParseError as exc:
            raise ParseError(exc.message, lineno, exc.column, exc.expected) from None
        except SignatureError as exc:
            raise StructureFormatError(str(exc), lineno) from None
        if fo_free_vars(f):
            raise StructureFormatError(f"{fo_to_text(f)} is not a sentence", lineno)
        sentences.append(f)
    return Theory(signature or (), tuple(sentences))


def format_theory(t: Theory) -> str:
    lines = [f"sig {format_signature(t.signature)}".rstrip()]
    lines.extend(fo_to_text(s) for s in t.sentences)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Complete:
    size_cap: int
    depth_cap: int
    models: tuple[FinStructure, ...]
    sentences_checked: int

    def describe(self) -> str:
        return (
            f"complete up to domain size {self.size_cap} and depth {self.depth_cap} "
            f"({len(self.models)} model(s) up to isomorphism)"
        )


@dataclass(frozen=True)
class Counterexample:
    sentence: FOFormula
    model_true: FinStructure
    model_false: FinStructure

    def describe(self) -> str:
        return (
            f"incomplete: {fo_to_text(self.sentence)} holds in a model of size "
            f"{self.model_true.size} and fails in one of size {self.model_false.size}"
        )


@dataclass(frozen=True)
class Inconsistent:
    size_cap: int

    def describe(self) -> str:
        return f"inconsistent: no model with domain size <= {self.size_cap}"


@dataclass
class _Group:
    size: int
    models: list[FinStructure]
    rels: dict[str, np.ndarray] = field(default_factory=dict)
    grids: list[np.ndarray] = field(default_factory=list)


def _groups(models: list[FinStructure], k: int) -> list[_Group]:
    out: list[_Group] = []
    for size in sorted({m.size for m in models}):
        ms = [m for m in models if m.size == size]
        g = _Group(size, ms)
        for j, (name, arity) in enumerate(ms[0].signature):
            arr = np.zeros((len(ms),) + (size,) * arity, dtype=bool)
            for i, m in enumerate(ms):
                for t in m.relations[j]:
                    arr[(i,) + t] = True
            g.rels[name] = arr
        g.grids = [x.reshape(-1) for x in np.indices((size,) * k)]
        out.append(g)
    return out


class _Extensions:
    """Extensions of formulas over every model, one array per domain size."""

    def __init__(self, groups: list[_Group], vars: Sequence[str]) -> None:
        self.groups = groups
        self.vars = list(vars)

    def atom(self, f: FOFormula) -> list[np.ndarray]:
        out = []
        for g in self.groups:
            width = g.size ** len(self.vars)
            count = len(g.models)
            if isinstance(f, Rel):
                idx = tuple(g.grids[self.vars.index(a)] for a in f.args)
                out.append(g.rels[f.name][(slice(None),) + idx])
            elif isinstance(f, Equality):
                a, b = self.vars.index(f.left.name), self.vars.index(f.right.name)
                out.append(np.broadcast_to(g.grids[a] == g.grids[b], (count, width)))
            else:
                out.append(np.full((count, width), isinstance(f, Top)))
        return out

    def combine(self, shape: tuple, ext: dict[int, list[np.ndarray]], ids: tuple[int, ...]) -> list[np.ndarray]:
        op = shape[0]
        if op in ("E", "A"):
            axis = 1 + self.vars.index(shape[1])
            out = []
            for g, a in zip(self.groups, ext[ids[0]]):
                shaped = a.reshape((len(g.models),) + (g.size,) * len(self.vars))
                red = shaped.any(axis=axis, keepdims=True) if op == "E" else shaped.all(axis=axis, keepdims=True)
                out.append(np.broadcast_to(red, shaped.shape).reshape(len(g.models), -1))
            return out
        if op == "N":
            return [~a for a in ext[ids[0]]]
        left, right = ext[ids[0]], ext[ids[1]]
        if op == "&":
            return [a & b for a, b in zip(left, right)]
        if op == "|":
            return [a | b for a, b in zip(left, right)]
        return [~a | b for a, b in zip(left, right)]


def _key(free: frozenset[str], arrays: list[np.ndarray]) -> tuple:
    return (free, b"".join(np.packbits(a).tobytes() for a in arrays))


def check_complete_upto(
    t: Theory, size_cap: int, depth_cap: int, variables: Sequence[str] = ("x", "y", "z")
) -> Complete | Counterexample | Inconsistent:
    """Decide completeness of ``t`` relative to small models and shallow sentences.

    Models are all models of ``t`` with domain size <= ``size_cap``, one per
    isomorphism class.  Sentences over ``variables`` are searched up to
    depth ``depth_cap`` in enumeration order, keeping one representative per
    extension over the models; subformulas with equal extensions are
    interchangeable for every sentence built on top of them.
    """
    if not 1 <= size_cap <= MAX_DOMAIN:
        raise CapacityError(f"size_cap must be between 1 and {MAX_DOMAIN}")
    if not 1 <= depth_cap <= MAX_DEPTH:
        raise CapacityError(f"depth_cap must be between 1 and {MAX_DEPTH}")
    models = [m for size in range(1, size_cap + 1) for m in enumerate_models(t.signature, size) if t.holds_in(m)]
    if not models:
        return Inconsistent(size_cap)
    groups = _groups(models, len(variables))
    engine = _Extensions(groups, variables)
    seen: set[tuple] = set()
    ext: dict[int, list[np.ndarray]] = {}
    levels: list[list[tuple]] = [[]]
    checked = 0

    def truths(arrays: list[np.ndarray]) -> list[bool]:
        return [bool(v) for a in arrays for v in a[:, 0]]

    def consider(f, free, bound, arrays, level) -> Counterexample | None:
        nonlocal checked
        key = _key(free, arrays)
        if key in seen:
            return None
        if len(seen) >= REPRESENTATIVE_CAP:
            raise EnumerationBudgetError(f"more than {REPRESENTATIVE_CAP} inequivalent formulas")
        seen.add(key)
        index = len(ext)
        ext[index] = arrays
        level.append((f, free, bound, index))
        if free:
            return None
        checked += 1
        values = truths(arrays)
        if all(values) or not any(values):
            return None
        yes, no = models[values.index(True)], models[values.index(False)]
        if not (fo_evaluate(f, yes) and not fo_evaluate(f, no)):
            raise AssertionError(f"search and direct evaluation disagree on {fo_to_text(f)}")
        return Counterexample(f, yes, no)

    for f in _fo_atoms(t.signature, variables):
        found = consider(f, fo_free_vars(f), frozenset(), engine.atom(f), levels[0])
        if found:
            return found
    for d in range(1, depth_cap):
        level: list[tuple] = []
        for shape, ids, free, bound in _fo_candidates(levels, d, variables):
            f = _build(shape)
            found = consider(f, free, bound, engine.combine(shape, ext, ids), level)
            if found:
                return found
        levels.append(level)
    return Complete(size_cap, depth_cap, tuple(models), checked)
