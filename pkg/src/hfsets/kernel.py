"""Canonical hereditarily finite sets.

Every set lives in a :class:`SetStore`, an insert-only interning table keyed
by the canonical (sorted, duplicate-free) tuple of member handles.  Two sets
from the same store are equal exactly when they are the same object, so the
default identity ``__eq__``/``__hash__`` are the right ones.

Members are kept in ascending Ackermann order,
``code(s) = sum(2 ** code(e) for e in s)``.  Codes are computed lazily and
cached; codes too large to materialise (anything containing an element of
rank 5 or more with a huge code) raise :class:`CapacityError` and ordering
falls back to a structural comparison that agrees with the numeric one.

Thread safety: a store guards insertion with a lock, so concurrent
``make_set`` calls on one store return stable, identical handles.  Separate
stores share nothing and can be used from independent workers.
"""

from __future__ import annotations

import threading
from functools import cmp_to_key
from typing import Iterable, Iterator, Sequence

__all__ = [
    "CapacityError",
    "SetLiteralError",
    "HFSet",
    "SetStore",
    "default_store",
    "make_set",
    "empty",
    "powerset",
    "v_stage",
    "rank",
    "is_transitive",
    "transitive_closure",
    "ackermann_code",
    "ackermann_decode",
    "kuratowski_pair",
    "numeral",
    "parse_set",
    "format_set",
    "union",
    "intersection",
    "difference",
    "is_subset",
    "STAGE_CAP",
    "ELEMENT_BUDGET",
]

STAGE_CAP = 5
ELEMENT_BUDGET = 1 << 16
# 2 ** code is only built when code stays below this many bits.
_CODE_EXPONENT_LIMIT = 1 << 22


class CapacityError(ValueError):
    """A configured size cap would be exceeded."""


class SetLiteralError(ValueError):
    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} at offset {position}")
        self.position = position


class HFSet:
    """A canonical hereditarily finite set.

    Do not instantiate directly; go through :meth:`SetStore.make_set`.
    """

    __slots__ = ("children", "store", "rank", "_code", "_members", "__weakref__")

    children: tuple[HFSet, ...]
    store: SetStore
    rank: int

    def __init__(self, children: tuple[HFSet, ...], store: SetStore) -> None:
        self.children = children
        self.store = store
        self.rank = 1 + max(c.rank for c in children) if children else 0
        self._code: int | None = None
        self._members: frozenset[HFSet] | None = None

    @property
    def members(self) -> frozenset[HFSet]:
        if self._members is None:
            self._members = frozenset(self.children)
        return self._members

    def __contains__(self, item: object) -> bool:
        return item in self.members

    def __iter__(self) -> Iterator[HFSet]:
        return iter(self.children)

    def __len__(self) -> int:
        return len(self.children)

    def __bool__(self) -> bool:
        # An HFSet handle is always a value; emptiness is len() == 0.
        return True

    @property
    def code(self) -> int:
        if self._code is None:
            try:
                self._code = _compute_code(self)
            except CapacityError:
                self._code = -1
                raise
        if self._code < 0:
            raise CapacityError(
                f"Ackermann code of a rank-{self.rank} set is too large to materialise"
            )
        return self._code

    def code_is_cheap(self) -> bool:
        if self._code is None:
            try:
                self.code
            except CapacityError:
                return False
        return self._code >= 0

    def __lt__(self, other: HFSet) -> bool:
        return compare(self, other) < 0

    def __le__(self, other: HFSet) -> bool:
        return compare(self, other) <= 0

    def __gt__(self, other: HFSet) -> bool:
        return compare(self, other) > 0

    def __ge__(self, other: HFSet) -> bool:
        return compare(self, other) >= 0

    def __str__(self) -> str:
        return format_set(self)

    def __repr__(self) -> str:
        if len(self.children) > 8 or self.rank > 6:
            return f"<HFSet rank={self.rank} size={len(self.children)}>"
        return f"HFSet({format_set(self)})"

    def __reduce__(self):
        # Re-intern into the receiving process's default store.
        return (parse_set, (format_set(self),))


def _compute_code(s: HFSet) -> int:
    total = 0
    for child in s.children:
        c = child.code
        if c >= _CODE_EXPONENT_LIMIT:
            raise CapacityError(
                f"Ackermann code of a rank-{s.rank} set is too large to materialise"
            )
        total += 1 << c
    return total


def compare(a: HFSet, b: HFSet) -> int:
    """Three-way comparison in ascending Ackermann order."""
    if a is b:
        return 0
    if a.code_is_cheap() and b.code_is_cheap():
        return -1 if a.code < b.code else 1
    # The larger set is the one owning the largest element of the
    # symmetric difference (highest differing bit).
    i, j = len(a.children) - 1, len(b.children) - 1
    while i >= 0 and j >= 0:
        x, y = a.children[i], b.children[j]
        if x is y:
            i -= 1
            j -= 1
            continue
        return 1 if compare(x, y) > 0 else -1
    return 1 if i >= 0 else -1


_cmp_key = cmp_to_key(compare)


def _sort_unique(elements: Iterable[HFSet]) -> tuple[HFSet, ...]:
    unique = list({id(e): e for e in elements}.values())
    if all(e.code_is_cheap() for e in unique):
        unique.sort(key=lambda e: e.code)
    else:
        unique.sort(key=_cmp_key)
    return tuple(unique)


class SetStore:
    """Insert-only interning table for :class:`HFSet` handles."""

    def __init__(self, element_budget: int = ELEMENT_BUDGET, stage_cap: int = STAGE_CAP):
        self.element_budget = element_budget
        self.stage_cap = stage_cap
        self._table: dict[tuple[HFSet, ...], HFSet] = {}
        self._lock = threading.Lock()
        self._stages: list[HFSet] = []
        self.empty = self._intern(())

    def __len__(self) -> int:
        return len(self._table)

    def _intern(self, children: tuple[HFSet, ...]) -> HFSet:
        found = self._table.get(children)
        if found is not None:
            return found
        with self._lock:
            found = self._table.get(children)
            if found is None:
                found = HFSet(children, self)
                self._table[children] = found
            return found

    def _check_members(self, elements: Sequence[HFSet]) -> None:
        for e in elements:
            if e.store is not self:
                raise ValueError("cannot mix sets from different stores")

    def make_set(self, elements: Iterable[HFSet] = ()) -> HFSet:
        elements = list(elements)
        self._check_members(elements)
        return self._intern(_sort_unique(elements))

    def powerset(self, s: HFSet) -> HFSet:
        n = len(s.children)
        if n >= 63 or (1 << n) > self.element_budget:
            raise CapacityError(
                f"power set of a {n}-element set has 2^{n} elements, "
                f"over the budget of {self.element_budget}"
            )
        members = s.children
        subsets = []
        # With members in ascending code order, increasing masks give
        # increasing codes, so the output is already canonical.
        for mask in range(1 << n):
            subsets.append(
                self._intern(tuple(members[i] for i in range(n) if mask >> i & 1))
            )
        return self._intern(tuple(subsets))

    def v_stage(self, n: int) -> HFSet:
        if n < 0:
            raise ValueError("stage index must be a natural number")
        if n > self.stage_cap:
            raise CapacityError(f"V_{n} exceeds the stage cap {self.stage_cap}")
        with self._lock:
            stages = list(self._stages)
        if not stages:
            stages = [self.empty]
        while len(stages) <= n:
            stages.append(self.powerset(stages[-1]))
        with self._lock:
            if len(stages) > len(self._stages):
                self._stages = stages
        return stages[n]

    def decode(self, code: int) -> HFSet:
        if code < 0:
            raise ValueError("Ackermann codes are natural numbers")
        bits = bin(code)[:1:-1]
        members = tuple(self.decode(i) for i, b in enumerate(bits) if b == "1")
        return self._intern(members)

    def pair(self, a: HFSet, b: HFSet) -> HFSet:
        return self.make_set([self.make_set([a]), self.make_set([a, b])])

    def numeral(self, k: int) -> HFSet:
        """The von Neumann numeral ``{0, ..., k-1}``."""
        current = self.empty
        for _ in range(k):
            current = self.make_set(current.children + (current,))
        return current

    def parse(self, text: str) -> HFSet:
        value, pos = _parse_literal(self, text, _skip_ws(text, 0))
        pos = _skip_ws(text, pos)
        if pos != len(text):
            raise SetLiteralError("trailing characters after set literal", pos)
        return value


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def _parse_literal(store: SetStore, text: str, pos: int) -> tuple[HFSet, int]:
    """Iterative set-literal parser, returning the set and the end offset."""
    if pos >= len(text) or text[pos] != "{":
        raise SetLiteralError("expected '{'", pos)
    stack: list[list[HFSet]] = [[]]
    pos += 1
    expect_member = True
    while True:
        pos = _skip_ws(text, pos)
        if pos >= len(text):
            raise SetLiteralError("unterminated set literal", pos)
        ch = text[pos]
        if ch == "{":
            if not expect_member:
                raise SetLiteralError("expected ',' or '}'", pos)
            stack.append([])
            pos += 1
            expect_member = True
        elif ch == "}":
            if expect_member and stack[-1]:
                raise SetLiteralError("expected '{' after ','", pos)
            done = store.make_set(stack.pop())
            pos += 1
            if not stack:
                return done, pos
            stack[-1].append(done)
            expect_member = False
        elif ch == ",":
            if expect_member:
                raise SetLiteralError("expected '{'", pos)
            pos += 1
            expect_member = True
        else:
            raise SetLiteralError(f"unexpected character {ch!r}", pos)


def format_set(s: HFSet) -> str:
    """Canonical literal: members in ascending code order, no whitespace."""
    cache: dict[int, str] = {}

    def emit(x: HFSet) -> str:
        key = id(x)
        if key not in cache:
            cache[key] = "{" + ",".join(emit(c) for c in x.children) + "}"
        return cache[key]

    return emit(s)


_default_store = SetStore()


def default_store() -> SetStore:
    return _default_store


def make_set(elements: Iterable[HFSet] = (), store: SetStore | None = None) -> HFSet:
    elements = list(elements)
    if store is None:
        store = elements[0].store if elements else _default_store
    return store.make_set(elements)


def empty(store: SetStore | None = None) -> HFSet:
    return (store or _default_store).empty


def powerset(s: HFSet) -> HFSet:
    return s.store.powerset(s)


def v_stage(n: int, store: SetStore | None = None) -> HFSet:
    return (store or _default_store).v_stage(n)


def rank(s: HFSet) -> int:
    return s.rank


def is_transitive(s: HFSet) -> bool:
    members = s.members
    return all(m in members for x in s.children for m in x.children)


def transitive_closure(s: HFSet) -> HFSet:
    seen: dict[int, HFSet] = {}
    stack = list(s.children)
    while stack:
        x = stack.pop()
        if id(x) in seen:
            continue
        seen[id(x)] = x
        stack.extend(x.children)
    return s.store.make_set(seen.values())


def ackermann_code(s: HFSet) -> int:
    return s.code


def ackermann_decode(n: int, store: SetStore | None = None) -> HFSet:
    return (store or _default_store).decode(n)


def kuratowski_pair(a: HFSet, b: HFSet) -> HFSet:
    return a.store.pair(a, b)


def numeral(k: int, store: SetStore | None = None) -> HFSet:
    return (store or _default_store).numeral(k)


def parse_set(text: str, store: SetStore | None = None) -> HFSet:
    return (store or _default_store).parse(text)


def union(a: HFSet, b: HFSet) -> HFSet:
    return a.store.make_set(a.children + b.children)


def intersection(a: HFSet, b: HFSet) -> HFSet:
    return a.store._intern(tuple(x for x in a.children if x in b.members))


def difference(a: HFSet, b: HFSet) -> HFSet:
    return a.store._intern(tuple(x for x in a.children if x not in b.members))


def is_subset(a: HFSet, b: HFSet) -> bool:
    return all(x in b.members for x in a.children)
