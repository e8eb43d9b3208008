"""Definable subsets of finite structures (M, in, A) and the finite L_n[A].

Candidate formulas are handled by extension rather than by syntax.  With
``k`` variables, every formula defines a relation on ``M**k``.  The set of
definable relations is a Boolean algebra, so it is determined by its
partition of ``M**k`` into atoms.  The partition starts from the atomic
formulas (plus parameters, when allowed).  Each round then refines it by
``exists v . <cell>`` for every current cell and variable, which is exactly
one more quantifier level.  A round that splits nothing is a fixpoint: all
formulas of every depth over these variables have been accounted for.
Every cell keeps a defining formula, built greedily from the literals that
carve it out of its parent cell.

A subset S of M is definable iff ``S x M**(k-1)`` is a union of cells.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .kernel import CapacityError, HFSet, SetStore
from .logic import (
    And,
    Bot,
    Equality,
    Exists,
    Formula,
    Membership,
    Not,
    Or,
    Param,
    PredA,
    Term,
    Top,
    Var,
    free_vars,
    parameters,
    to_text,
    unshadow,
)

__all__ = [
    "DefReport",
    "definable_subsets",
    "l_stage",
    "constructible_hierarchy",
    "automorphisms",
    "orbits",
    "invariant_subsets",
    "SUBSET_FAMILY_CAP",
    "DEFAULT_DEPTH_BUDGET",
    "AUTOMORPHISM_SIZE_CAP",
]

SUBSET_FAMILY_CAP = 1 << 16
DEFAULT_DEPTH_BUDGET = 8
AUTOMORPHISM_SIZE_CAP = 16
_VAR_NAMES = ("x", "y", "z", "w", "u", "v")
_MAX_ASSIGNMENTS = 1 << 20


def _param_name(i: int) -> str:
    return f"p{i}"


class _Witnesses(Mapping):
    """Lazy map subset -> (formula, [(param name, value), ...])."""

    def __init__(self, report: DefReport) -> None:
        self._report = report

    def __getitem__(self, subset: HFSet) -> tuple[Formula, list[tuple[str, HFSet]]]:
        return self._report.witness_for(subset)

    def __iter__(self) -> Iterator[HFSet]:
        return iter(self._report.subsets)

    def __len__(self) -> int:
        return len(self._report.subsets)


@dataclass
class DefReport:
    """Definable subsets of ``carrier`` together with defining formulas.

    ``classes`` partitions the carrier into minimal definable pieces; every
    definable subset is a union of classes.  ``exhausted`` is true when the
    refinement reached a fixpoint inside the depth budget, and false when
    the budget cut it short.
    """

    carrier: HFSet
    pred: HFSet
    allow_params: bool
    variables: int
    rounds: int
    exhausted: bool
    classes: list[tuple[int, ...]]
    class_formulas: list[Formula]
    subsets: list[HFSet] = field(default_factory=list)
    _index: dict[int, int] = field(default_factory=dict, repr=False)

    @property
    def witness(self) -> Mapping[HFSet, tuple[Formula, list[tuple[str, HFSet]]]]:
        return _Witnesses(self)

    def params_of(self, f: Formula) -> list[tuple[str, HFSet]]:
        elems = self.carrier.children
        return [(name, elems[int(name[1:])]) for name in sorted(parameters(f), key=lambda n: int(n[1:]))]

    def witness_for(self, subset: HFSet) -> tuple[Formula, list[tuple[str, HFSet]]]:
        try:
            mask = self._index[id(subset)]
        except KeyError:
            raise KeyError(f"{subset} is not in the definable family") from None
        chosen = [i for i in range(len(self.classes)) if mask >> i & 1]
        others = [i for i in range(len(self.classes)) if not mask >> i & 1]
        if not others:
            f: Formula = Top()
        elif not chosen:
            f = Bot()
        elif len(others) < len(chosen):
            f = Not(_disjunction([self.class_formulas[i] for i in others]))
        else:
            f = _disjunction([self.class_formulas[i] for i in chosen])
        f = unshadow(f)
        return f, self.params_of(f)

    def to_text(self) -> str:
        """One line per subset: literal, tab, formula, tab, space-separated ``pN=literal``."""
        lines = []
        for s in self.subsets:
            f, params = self.witness_for(s)
            plist = " ".join(f"{name}={value}" for name, value in params)
            lines.append(f"{s}\t{to_text(f)}\t{plist}")
        return "\n".join(lines) + ("\n" if lines else "")


def _conjunction(parts: list[Formula]) -> Formula:
    if not parts:
        return Top()
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def _disjunction(parts: list[Formula]) -> Formula:
    if not parts:
        return Bot()
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def _carve(target: np.ndarray, parent: np.ndarray, gens: np.ndarray, gen_formulas: list[Formula]) -> list[Formula]:
    """Greedy literals whose conjunction with ``parent`` is exactly ``target``."""
    current = parent.copy()
    chosen: list[Formula] = []
    on_target = gens[:, target]
    full = on_target.all(axis=1)
    none = ~on_target.any(axis=1)
    candidates = np.flatnonzero(full | none)
    while (current != target).any():
        best, best_gain, best_neg = -1, 0, False
        for g in candidates:
            neg = bool(none[g])
            lit = ~gens[g] if neg else gens[g]
            gain = int(np.count_nonzero(current & ~lit))
            if gain > best_gain:
                best, best_gain, best_neg = g, gain, neg
        if best < 0:
            raise AssertionError("cell is not an atom of the generated algebra")
        lit = ~gens[best] if best_neg else gens[best]
        current &= lit
        chosen.append(Not(gen_formulas[best]) if best_neg else gen_formulas[best])
    return chosen


def _split(labels: np.ndarray, gens: np.ndarray) -> np.ndarray:
    """Refine ``labels`` by the generator bits; new labels in first-occurrence order."""
    rows = np.vstack([labels[None, :].astype(np.int64), gens.astype(np.int64)])
    _, first, inverse = np.unique(rows.T, axis=0, return_index=True, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return rank[inverse]


def definable_subsets(
    m: HFSet,
    a: HFSet | None = None,
    allow_params: bool = True,
    depth_budget: int = DEFAULT_DEPTH_BUDGET,
    variables: int | None = None,
) -> DefReport:
    """Subsets of ``m`` definable in ``(m, in, a & m)``.

    With ``allow_params`` the formulas may mention elements of ``m`` as
    parameters ``$p0, $p1, ...`` (numbered in canonical order).  The number
    of variables defaults to 1 with parameters and 3 without.
    ``depth_budget`` caps the number of quantifier rounds.
    """
    store: SetStore = m.store
    n = len(m)
    if n > 16 or (1 << n) > SUBSET_FAMILY_CAP:
        raise CapacityError(f"2^{n} subsets exceed the family cap {SUBSET_FAMILY_CAP}")
    a = a if a is not None else store.empty
    pred = store._intern(tuple(x for x in m.children if x in a.members))
    k = variables if variables is not None else (1 if allow_params else 3)
    if not 1 <= k <= len(_VAR_NAMES):
        raise ValueError(f"variables must be between 1 and {len(_VAR_NAMES)}")
    if n == 0:
        report = DefReport(m, pred, allow_params, k, 0, True, [], [])
        report.subsets = [store.empty]
        report._index = {id(store.empty): 0}
        return report
    if n ** k > _MAX_ASSIGNMENTS:
        raise CapacityError(f"{n}^{k} assignments exceed {_MAX_ASSIGNMENTS}")

    elems = m.children
    names = _VAR_NAMES[:k]
    shape = (n,) * k
    grids = [g.reshape(-1) for g in np.indices(shape)]
    size = n ** k
    member = np.array([[x in y.members for y in elems] for x in elems], dtype=bool)
    in_pred = np.array([x in pred.members for x in elems], dtype=bool)

    terms: list[tuple[Term, np.ndarray | int]] = [(Var(v), grids[i]) for i, v in enumerate(names)]
    if allow_params:
        terms += [(Param(_param_name(j)), j) for j in range(n)]

    gen_formulas: list[Formula] = []
    gen_rows: list[np.ndarray] = []
    seen: set[bytes] = set()

    def offer(f: Formula, rel: np.ndarray) -> None:
        rel = np.broadcast_to(rel, (size,)).astype(bool)
        if rel.all() or not rel.any():
            return
        key = np.packbits(rel).tobytes()
        if key in seen:
            return
        seen.add(key)
        gen_formulas.append(f)
        gen_rows.append(rel.copy())

    for s_term, s_val in terms:
        for t_term, t_val in terms:
            offer(Membership(s_term, t_term), member[s_val, t_val])
    for i, (s_term, s_val) in enumerate(terms):
        for t_term, t_val in terms[i + 1:]:
            offer(Equality(s_term, t_term), np.asarray(s_val) == np.asarray(t_val))
    for s_term, s_val in terms:
        offer(PredA(s_term), in_pred[s_val])

    labels = np.zeros(size, dtype=np.int64)
    cell_formulas: list[Formula] = [Top()]
    gens = np.array(gen_rows, dtype=bool).reshape(len(gen_rows), size)
    labels, cell_formulas = _refine(labels, cell_formulas, gens, gen_formulas)

    rounds, exhausted = 0, False
    while rounds < depth_budget:
        rounds += 1
        seen.clear()
        gen_formulas, gen_rows = [], []
        for c, phi in enumerate(cell_formulas):
            cell = (labels == c).reshape(shape)
            for axis, v in enumerate(names):
                offer(Exists(v, phi), np.broadcast_to(cell.any(axis=axis, keepdims=True), shape).reshape(-1))
        gens = np.array(gen_rows, dtype=bool).reshape(len(gen_rows), size)
        before = len(cell_formulas)
        labels, cell_formulas = _refine(labels, cell_formulas, gens, gen_formulas)
        if len(cell_formulas) == before:
            exhausted = True
            break

    classes, class_formulas = _classes(labels, cell_formulas, grids[0], names, n)
    report = DefReport(m, pred, allow_params, k, rounds, exhausted, classes, class_formulas)
    subsets: list[HFSet] = []
    index: dict[int, int] = {}
    for mask in range(1 << len(classes)):
        picked = sorted(i for c, cls in enumerate(classes) if mask >> c & 1 for i in cls)
        s = store._intern(tuple(elems[i] for i in picked))
        subsets.append(s)
        index[id(s)] = mask
    subsets.sort(key=lambda s: s.code)
    report.subsets = subsets
    report._index = index
    return report


def _refine(
    labels: np.ndarray, cell_formulas: list[Formula], gens: np.ndarray, gen_formulas: list[Formula]
) -> tuple[np.ndarray, list[Formula]]:
    if len(gen_formulas) == 0:
        return labels, cell_formulas
    new_labels = _split(labels, gens)
    if new_labels.max() + 1 == len(cell_formulas):
        return labels, cell_formulas
    formulas: list[Formula] = []
    for c in range(int(new_labels.max()) + 1):
        target = new_labels == c
        parent_label = int(labels[np.argmax(target)])
        parent = labels == parent_label
        if (parent == target).all():
            formulas.append(cell_formulas[parent_label])
            continue
        literals = _carve(target, parent, gens, gen_formulas)
        base = cell_formulas[parent_label]
        parts = literals if isinstance(base, Top) else [base] + literals
        formulas.append(_conjunction(parts))
    return new_labels, formulas


def _classes(labels, cell_formulas, xs, names, n):
    """Group carrier indices whose fibres are linked by a common cell."""
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    touching: dict[int, set[int]] = {}
    for pos, c in enumerate(labels.tolist()):
        touching.setdefault(c, set()).add(int(xs[pos]))
    for xs_of_cell in touching.values():
        first, *rest = sorted(xs_of_cell)
        for other in rest:
            parent[find(other)] = find(first)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    classes = sorted((tuple(g) for g in groups.values()), key=lambda g: g[0])
    formulas: list[Formula] = []
    for cls in classes:
        members = set(cls)
        uncovered = set(cls)
        cells = sorted((c for c, touched in touching.items() if touched & members), key=lambda c: _size(cell_formulas[c]))
        picked: list[int] = []
        while uncovered:
            best = max(cells, key=lambda c: len(touching[c] & uncovered))
            picked.append(best)
            uncovered -= touching[best]
        body = _disjunction([_close(cell_formulas[c], names[1:]) for c in picked])
        formulas.append(body)
    return [tuple(c) for c in classes], formulas


def _size(f: Formula) -> int:
    return len(to_text(f))


def _close(f: Formula, names) -> Formula:
    """Existentially bind the auxiliary variables that actually occur free."""
    free = free_vars(f)
    for v in reversed(names):
        if v in free:
            f = Exists(v, f)
    return f


def l_stage(n: int, a: HFSet | None = None, store: SetStore | None = None, **kwargs) -> HFSet:
    """L_n[A]: start from the empty set, then take definable subsets with parameters."""
    return constructible_hierarchy(n, a, store, **kwargs)[-1][0]


def constructible_hierarchy(
    n: int, a: HFSet | None = None, store: SetStore | None = None, **kwargs
) -> list[tuple[HFSet, DefReport | None]]:
    """``[(L_0, None), (L_1, report_0), ..., (L_n, report_{n-1})]``.

    ``report_i`` is the :class:`DefReport` for the definable subsets of L_i.
    """
    from .kernel import STAGE_CAP, default_store

    store = store or (a.store if a is not None else default_store())
    if n < 0:
        raise ValueError("stage index must be a natural number")
    if n > min(STAGE_CAP, store.stage_cap):
        raise CapacityError(f"L_{n} exceeds the stage cap")
    a = a if a is not None else store.empty
    kwargs.setdefault("allow_params", True)
    stages: list[tuple[HFSet, DefReport | None]] = [(store.empty, None)]
    for _ in range(n):
        current = stages[-1][0]
        report = definable_subsets(current, a, **kwargs)
        stages.append((store.make_set(report.subsets), report))
    return stages


# -- automorphisms -------------------------------------------------------------

def automorphisms(m: HFSet, a: HFSet | None = None, limit: int = 1_000_000) -> list[tuple[int, ...]]:
    """All permutations of ``m`` preserving membership and ``A``.

    A permutation is a tuple ``p`` with ``p[i] = j`` meaning the i-th member
    (canonical order) goes to the j-th member.
    """
    n = len(m)
    if n > AUTOMORPHISM_SIZE_CAP:
        raise CapacityError(f"automorphism search is capped at {AUTOMORPHISM_SIZE_CAP} elements")
    elems = m.children
    in_a = [a is not None and x in a.members for x in elems]
    member = [[x in y.members for y in elems] for x in elems]
    outdeg = [sum(row) for row in member]
    indeg = [sum(member[i][j] for i in range(n)) for j in range(n)]
    colour = [(in_a[i], outdeg[i], indeg[i]) for i in range(n)]
    found: list[tuple[int, ...]] = []
    image = [-1] * n
    used = [False] * n

    def extend(i: int) -> None:
        if i == n:
            found.append(tuple(image))
            if len(found) > limit:
                raise CapacityError(f"more than {limit} automorphisms")
            return
        for j in range(n):
            if used[j] or colour[j] != colour[i]:
                continue
            if any(
                member[i][p] != member[j][image[p]] or member[p][i] != member[image[p]][j]
                for p in range(i)
            ):
                continue
            image[i], used[j] = j, True
            extend(i + 1)
            image[i], used[j] = -1, False

    extend(0)
    return found


def orbits(m: HFSet, a: HFSet | None = None) -> list[tuple[int, ...]]:
    perms = automorphisms(m, a)
    n = len(m)
    seen = [False] * n
    out = []
    for i in range(n):
        if seen[i]:
            continue
        orbit = sorted({p[i] for p in perms})
        for j in orbit:
            seen[j] = True
        out.append(tuple(orbit))
    return out


def invariant_subsets(m: HFSet, a: HFSet | None = None) -> set[HFSet]:
    """Subsets of ``m`` fixed by every automorphism (unions of orbits)."""
    orbs = orbits(m, a)
    elems = m.children
    out = set()
    for mask in range(1 << len(orbs)):
        picked = [elems[i] for c, orb in enumerate(orbs) if mask >> c & 1 for i in orb]
        out.add(m.store.make_set(picked))
    return out
