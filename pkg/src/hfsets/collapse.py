"""Mostowski collapse of finite well-founded extensional digraphs.

Edges are oriented ``(u, v)`` meaning *u E v*, read "u is a member of v".
Nodes are ``0 .. node_count - 1``.

For a finite relation, well-foundedness is the same as acyclicity, so the
well-foundedness check peels off E-minimal nodes (Kahn's algorithm); whatever
survives has no E-minimal element and contains a cycle, which is reported.
The separate "predecessors form a set" clause is automatic for finite graphs
and is not checked.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .kernel import HFSet, SetStore, default_store, is_transitive

__all__ = [
    "Digraph",
    "CycleWitness",
    "ExtensionalityWitness",
    "CollapseResult",
    "CollapsePreconditionError",
    "NotTransitiveError",
    "EdgeListError",
    "check_well_founded",
    "check_extensional",
    "mostowski_collapse",
    "encode_as_graph",
    "read_edge_list",
    "write_edge_list",
]


class CollapsePreconditionError(ValueError):
    def __init__(self, witness: CycleWitness | ExtensionalityWitness) -> None:
        self.witness = witness
        super().__init__(witness.describe())


class NotTransitiveError(ValueError):
    pass


class EdgeListError(ValueError):
    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Digraph:
    node_count: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.node_count < 0:
            raise ValueError("node_count must be a natural number")
        edges = frozenset((int(u), int(v)) for u, v in self.edges)
        for u, v in edges:
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise ValueError(f"edge ({u}, {v}) has an endpoint outside 0..{self.node_count - 1}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int]]) -> Digraph:
        return cls(node_count, frozenset(edges))

    def predecessors(self) -> list[list[int]]:
        """``preds[v]`` lists every ``u`` with ``u E v``, ascending."""
        preds: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            preds[v].append(u)
        for p in preds:
            p.sort()
        return preds

    def successors(self) -> list[list[int]]:
        succs: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            succs[u].append(v)
        for s in succs:
            s.sort()
        return succs


@dataclass(frozen=True)
class CycleWitness:
    """``cycle[i] E cycle[i+1]`` and ``cycle[-1] E cycle[0]``.

    ``residual`` is every node left after peeling E-minimal nodes; it is a
    nonempty subset with no E-minimal element.
    """

    cycle: tuple[int, ...]
    residual: frozenset[int]

    def describe(self) -> str:
        return "not well-founded: E-cycle " + " E ".join(map(str, self.cycle + self.cycle[:1]))


@dataclass(frozen=True)
class ExtensionalityWitness:
    x: int
    y: int
    predecessors: frozenset[int]

    def describe(self) -> str:
        preds = ",".join(map(str, sorted(self.predecessors)))
        return f"not extensional: nodes {self.x} and {self.y} share predecessors {{{preds}}}"


@dataclass(frozen=True)
class CollapseResult:
    pi: tuple[HFSet, ...]
    image: HFSet

    def __getitem__(self, node: int) -> HFSet:
        return self.pi[node]


def _topological_order(g: Digraph) -> tuple[list[int], list[int]]:
    """Kahn order over E (members first) and the unpeeled remainder."""
    succs = g.successors()
    indegree = [0] * g.node_count
    for _, v in g.edges:
        indegree[v] += 1
    queue = deque(v for v in range(g.node_count) if indegree[v] == 0)
    order: list[int] = []
    while queue:
        u = queue.popleft()
        order.append(u)
        for v in succs[u]:
            indegree[v] -= 1
            if indegree[v] == 0:
                queue.append(v)
    residual = [v for v in range(g.node_count) if indegree[v] > 0]
    return order, residual


def check_well_founded(g: Digraph) -> CycleWitness | None:
    """Return ``None`` when ``g`` is well-founded, else a cycle witness."""
    _, residual = _topological_order(g)
    if not residual:
        return None
    remaining = set(residual)
    preds = g.predecessors()
    # Every residual node has a residual predecessor; walk backwards until
    # a node repeats.
    position: dict[int, int] = {}
    walk: list[int] = []
    node = residual[0]
    while node not in position:
        position[node] = len(walk)
        walk.append(node)
        node = next(p for p in preds[node] if p in remaining)
    back = walk[position[node]:]
    cycle = back[::-1]
    start = cycle.index(min(cycle))
    cycle = cycle[start:] + cycle[:start]
    return CycleWitness(tuple(cycle), frozenset(residual))


def check_extensional(g: Digraph) -> ExtensionalityWitness | None:
    """Return ``None`` when distinct nodes have distinct predecessor sets."""
    seen: dict[frozenset[int], int] = {}
    for v, p in enumerate(g.predecessors()):
        key = frozenset(p)
        if key in seen:
            return ExtensionalityWitness(seen[key], v, key)
        seen[key] = v
    return None


def mostowski_collapse(g: Digraph, store: SetStore | None = None) -> CollapseResult:
    """Compute the unique ``pi`` with ``pi(x) = {pi(z) : z E x}``.

    Raises :class:`CollapsePreconditionError` carrying the witness when ``g``
    is not well-founded or not extensional.
    """
    store = store or default_store()
    order, residual = _topological_order(g)
    if residual:
        raise CollapsePreconditionError(check_well_founded(g))
    bad = check_extensional(g)
    if bad is not None:
        raise CollapsePreconditionError(bad)
    preds = g.predecessors()
    pi: list[HFSet | None] = [None] * g.node_count
    for x in order:
        pi[x] = store.make_set([pi[z] for z in preds[x]])
    image = store.make_set(pi)
    return CollapseResult(tuple(pi), image)


def encode_as_graph(s: HFSet, seed: int) -> tuple[Digraph, tuple[HFSet, ...]]:
    """Lay a transitive set out as a digraph on ``0 .. |s|-1``.

    Returns the graph and the bijection ``f`` as a tuple (``f[u]`` is the
    member placed at node ``u``); ``(u, v)`` is an edge iff ``f[u] in f[v]``.
    The bijection is a uniformly random permutation drawn from ``seed``.
    """
    if not is_transitive(s):
        raise NotTransitiveError(
            "encode_as_graph needs a transitive set; apply transitive_closure first"
        )
    f = list(s.children)
    random.Random(seed).shuffle(f)
    node_of = {id(x): i for i, x in enumerate(f)}
    edges = frozenset(
        (node_of[id(member)], v) for v, x in enumerate(f) for member in x.children
    )
    return Digraph(len(f), edges), tuple(f)


def write_edge_list(g: Digraph) -> str:
    lines = [f"nodes {g.node_count}"]
    lines.extend(f"{u} {v}" for u, v in sorted(g.edges))
    return "\n".join(lines) + "\n"


def read_edge_list(text: str) -> Digraph:
    """Parse ``nodes N`` followed by ``u v`` lines (u E v); ``#`` comments."""
    node_count: int | None = None
    edges: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "nodes":
            if node_count is not None:
                raise EdgeListError("duplicate 'nodes' header", lineno)
            if len(parts) != 2 or not parts[1].isdigit():
                raise EdgeListError("expected 'nodes N'", lineno)
            node_count = int(parts[1])
            continue
        if node_count is None:
            raise EdgeListError("edge before the 'nodes N' header", lineno)
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise EdgeListError(f"expected 'u v', got {line!r}", lineno)
        u, v = int(parts[0]), int(parts[1])
        if u >= node_count or v >= node_count:
            raise EdgeListError(f"node id out of range 0..{node_count - 1}", lineno)
        edge = (u, v)
        if edge in edges:
            raise EdgeListError(f"duplicate edge {u} {v}", lineno)
        edges.add(edge)
    if node_count is None:
        raise EdgeListError("missing 'nodes N' header", 1)
    return Digraph(node_count, frozenset(edges))
