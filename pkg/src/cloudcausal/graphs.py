"""Directed acyclic graphs: reachability, d-separation, back-door criterion."""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from typing import Iterable

from .errors import ConsistencyError, CycleError, ValidationError


class Dag:
    """Immutable DAG over string-named nodes.

    Acyclicity is checked at construction.

    >>> g = Dag("HRSL", [("H", "R"), ("H", "S"), ("R", "L"), ("S", "L")])
    >>> sorted(g.parents("L"))
    ['R', 'S']
    """

    def __init__(self, nodes: Iterable[str], edges: Iterable[tuple[str, str]] = ()):
        self.nodes = frozenset(nodes)
        self.edges = frozenset((str(a), str(b)) for a, b in edges)
        self._parents: dict[str, set[str]] = {n: set() for n in self.nodes}
        self._children: dict[str, set[str]] = {n: set() for n in self.nodes}
        for a, b in self.edges:
            if a not in self.nodes or b not in self.nodes:
                raise ConsistencyError(f"edge {a}->{b} has an endpoint outside the node set")
            if a == b:
                raise CycleError([a, a])
            self._parents[b].add(a)
            self._children[a].add(b)
        self.order = self._topological_order()

    def __eq__(self, other):
        return isinstance(other, Dag) and self.nodes == other.nodes and self.edges == other.edges

    def __hash__(self):
        return hash((self.nodes, self.edges))

    def __repr__(self):
        parts = []
        for n in self.order:
            pa = sorted(self._parents[n])
            parts.append(f"[{n}|{','.join(pa)}]" if pa else f"[{n}]")
        return "Dag(" + "".join(parts) + ")"

    def _topological_order(self) -> tuple[str, ...]:
        # Kahn's algorithm, smallest name first among ready nodes.
        indeg = {n: len(p) for n, p in self._parents.items()}
        ready = [n for n, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        out = []
        while ready:
            n = heapq.heappop(ready)
            out.append(n)
            for c in self._children[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        if len(out) != len(self.nodes):
            raise CycleError(self._find_cycle(set(self.nodes) - set(out)))
        return tuple(out)

    def _find_cycle(self, candidates: set[str]) -> list[str]:
        start = min(candidates)
        path, seen = [start], {start}
        node = start
        while True:
            node = min(p for p in self._parents[node] if p in candidates)
            if node in seen:
                return list(reversed(path[path.index(node):] + [node]))
            path.append(node)
            seen.add(node)

    def _check(self, xs: Iterable[str]) -> set[str]:
        xs = set(xs)
        unknown = xs - self.nodes
        if unknown:
            raise ValidationError(f"unknown nodes: {sorted(unknown)}")
        return xs

    def parents(self, x: str) -> frozenset[str]:
        self._check([x])
        return frozenset(self._parents[x])

    def children(self, x: str) -> frozenset[str]:
        self._check([x])
        return frozenset(self._children[x])

    @property
    def roots(self) -> frozenset[str]:
        return frozenset(n for n, p in self._parents.items() if not p)

    def ancestors(self, xs: Iterable[str]) -> frozenset[str]:
        """All nodes with a directed path into ``xs``, including ``xs``."""
        return self._closure(self._check(xs), self._parents)

    def descendants(self, xs: Iterable[str]) -> frozenset[str]:
        """All nodes reachable from ``xs``, including ``xs``."""
        return self._closure(self._check(xs), self._children)

    @staticmethod
    def _closure(start: set[str], step: dict[str, set[str]]) -> frozenset[str]:
        seen = set(start)
        queue = deque(start)
        while queue:
            n = queue.popleft()
            for m in step[n]:
                if m not in seen:
                    seen.add(m)
                    queue.append(m)
        return frozenset(seen)

    def has_directed_path(self, sources: Iterable[str], targets: Iterable[str]) -> bool:
        return bool(self.descendants(sources) & self._check(targets))

    def without_edges(self, edges: Iterable[tuple[str, str]]) -> "Dag":
        return Dag(self.nodes, self.edges - set(edges))

    def subgraph(self, nodes: Iterable[str]) -> "Dag":
        keep = self._check(nodes)
        return Dag(keep, [(a, b) for a, b in self.edges if a in keep and b in keep])

    # -- d-separation -----------------------------------------------------------

    def reachable(self, sources: Iterable[str], given: Iterable[str]) -> frozenset[str]:
        """Nodes d-connected to ``sources`` given ``given`` (active-trail reachability)."""
        sources, given = self._check(sources), self._check(given)
        anc_given = self.ancestors(given) if given else frozenset()
        # "up": trail enters the node from a child; "down": from a parent.
        queue = deque((s, "up") for s in sources)
        visited = set()
        found = set()
        while queue:
            node, direction = queue.popleft()
            if (node, direction) in visited:
                continue
            visited.add((node, direction))
            if node not in given:
                found.add(node)
            if direction == "up" and node not in given:
                queue.extend((p, "up") for p in self._parents[node])
                queue.extend((c, "down") for c in self._children[node])
            elif direction == "down":
                if node not in given:
                    queue.extend((c, "down") for c in self._children[node])
                if node in anc_given:
                    queue.extend((p, "up") for p in self._parents[node])
        return frozenset(found)

    def d_separated(self, a: Iterable[str], b: Iterable[str], z: Iterable[str] = ()) -> bool:
        a, b, z = self._check(a), self._check(b), self._check(z)
        if a & b or a & z or b & z:
            raise ValidationError("d-separation needs pairwise disjoint sets")
        return not (self.reachable(a, z) & b)

    # -- back-door criterion ----------------------------------------------------

    def backdoor_admissible(self, x: str, y: str, z: Iterable[str]) -> bool:
        """Whether ``z`` satisfies the back-door criterion relative to (x, y)."""
        z = self._check(z)
        self._check([x, y])
        if x == y:
            raise ValidationError("back-door criterion needs x != y")
        if x in z or y in z:
            raise ValidationError("adjustment set must exclude x and y")
        if z & self.descendants([x]):
            return False
        cut = self.without_edges((x, c) for c in self._children[x])
        return cut.d_separated({x}, {y}, z)

    def find_backdoor_set(self, x: str, y: str, observable: Iterable[str]) -> frozenset[str] | None:
        """Smallest admissible subset of ``observable``; ties go to the lexicographically first.

        Exhaustive over subsets, so exponential in ``len(observable)``.
        """
        pool = sorted(self._check(observable) - {x, y})
        for size in range(len(pool) + 1):
            for combo in itertools.combinations(pool, size):
                if self.backdoor_admissible(x, y, combo):
                    return frozenset(combo)
        return None


G1 = Dag("HRSL", [("H", "R"), ("H", "S"), ("R", "L"), ("S", "L")])

G2 = Dag(
    ["C", "D", "W_1", "W_2", "X_0", "X_1", "X_2", "pi_1", "pi_2", "Y_1", "Y_2", "Z"],
    [
        ("C", "W_1"), ("C", "W_2"), ("C", "X_0"),
        ("D", "W_1"), ("D", "W_2"), ("D", "X_0"),
        ("W_1", "X_1"), ("W_2", "X_2"),
        ("X_1", "Y_1"), ("X_2", "Y_2"),
        ("pi_1", "Y_1"), ("pi_2", "Y_2"),
        ("Y_1", "Z"), ("Y_2", "Z"), ("X_0", "Z"),
    ],
)
