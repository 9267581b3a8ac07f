"""Singly connected tree machinery shared by the node and border engines.

Path finding uses the hub method (pre-loaded hub-to-hub and node-to-hub
paths, loops erased) with plain BFS as the oracle and fallback.  Evidential
cores are the smallest subtrees covering marked nodes; collection schedules
orient core edges toward a pivot, and distribution schedules walk from the
gate of the informed set out to a target.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from itertools import product as _product
from typing import Hashable, Iterable, Optional, Sequence

from .errors import BordertreeError, NotSinglyConnectedError

Node = Hashable


class Tree:
    """Directed polytree: parent->child edges whose undirected form is acyclic."""

    def __init__(self, nodes: Iterable[Node], edges: Iterable[tuple[Node, Node]]):
        self.nodes = tuple(nodes)
        self.edges = tuple(edges)
        node_set = set(self.nodes)
        self.parents: dict[Node, list[Node]] = {n: [] for n in self.nodes}
        self.children: dict[Node, list[Node]] = {n: [] for n in self.nodes}
        seen = set()
        for p, c in self.edges:
            if p not in node_set or c not in node_set:
                raise ValueError(f"edge ({p}, {c}) references unknown node")
            key = frozenset((p, c))
            if key in seen or p == c:
                raise NotSinglyConnectedError("parallel edge or self-loop")
            seen.add(key)
            self.parents[c].append(p)
            self.children[p].append(c)
        self._check_acyclic()

    def _check_acyclic(self):
        rep = {n: n for n in self.nodes}

        def find(x):
            while rep[x] != x:
                rep[x] = rep[rep[x]]
                x = rep[x]
            return x

        for p, c in self.edges:
            a, b = find(p), find(c)
            if a == b:
                raise NotSinglyConnectedError(f"undirected cycle through {p!r}")
            rep[a] = b

    def neighbors(self, v: Node) -> list[Node]:
        return [*self.parents[v], *self.children[v]]

    def has_edge(self, p: Node, c: Node) -> bool:
        return c in self.children[p]

    def bfs_path(self, x: Node, y: Node) -> list[Node]:
        """The unique undirected path; raises if x and y are disconnected."""
        if x == y:
            return [x]
        prev: dict[Node, Node] = {x: x}
        queue = deque([x])
        while queue:
            v = queue.popleft()
            for u in self.neighbors(v):
                if u in prev:
                    continue
                prev[u] = v
                if u == y:
                    path = [y]
                    while path[-1] != x:
                        path.append(prev[path[-1]])
                    return path[::-1]
                queue.append(u)
        raise BordertreeError(f"nodes {x!r} and {y!r} are disconnected")

    def component_of(self, x: Node) -> set[Node]:
        out = {x}
        queue = deque([x])
        while queue:
            v = queue.popleft()
            for u in self.neighbors(v):
                if u not in out:
                    out.add(u)
                    queue.append(u)
        return out


@dataclass
class HubIndex:
    hubs: tuple[Node, ...]
    hub_paths: dict[tuple[Node, Node], list[Node]]  # between-hub path, ends excluded
    nearest: dict[Node, tuple[Node, list[Node]]]  # node -> (hub, path incl. both ends)


def build_hub_index(tree: Tree, hubs: Optional[Sequence[Node]] = None) -> HubIndex:
    """Pick about sqrt(n) hubs per component (high degree, spread out by
    skipping neighbors of chosen hubs) unless an explicit hub set is given."""
    if hubs is None:
        chosen: list[Node] = []
        remaining = set(tree.nodes)
        while remaining:
            comp = sorted(tree.component_of(min(remaining, key=str)), key=str)
            remaining -= set(comp)
            want = max(1, math.isqrt(len(comp)))
            ranked = sorted(comp, key=lambda v: (-len(tree.neighbors(v)), str(v)))
            picked: list[Node] = []
            for v in ranked:
                if len(picked) >= want:
                    break
                if any(v in tree.neighbors(h) for h in picked):
                    continue
                picked.append(v)
            for v in ranked:  # fill if the spread constraint starved us
                if len(picked) >= want:
                    break
                if v not in picked:
                    picked.append(v)
            chosen.extend(picked)
        hubs = chosen
    hubs = tuple(hubs)
    hub_paths: dict[tuple[Node, Node], list[Node]] = {}
    for i, a in enumerate(hubs):
        for b in hubs[i + 1 :]:
            try:
                p = tree.bfs_path(a, b)
            except BordertreeError:
                continue
            hub_paths[(a, b)] = p[1:-1]
            hub_paths[(b, a)] = p[-2:0:-1]
    nearest: dict[Node, tuple[Node, list[Node]]] = {}
    dist: dict[Node, int] = {}
    queue = deque()
    for h in hubs:
        nearest[h] = (h, [h])
        dist[h] = 0
        queue.append(h)
    while queue:
        v = queue.popleft()
        hub, path = nearest[v]
        for u in tree.neighbors(v):
            if u not in nearest:
                nearest[u] = (hub, [u, *path])
                dist[u] = dist[v] + 1
                queue.append(u)
    return HubIndex(hubs, hub_paths, nearest)


def _erase_loops(walk: list[Node]) -> list[Node]:
    """Loop-erasure of a walk; in a tree this leaves the unique simple path."""
    stack: list[Node] = []
    pos: dict[Node, int] = {}
    for v in walk:
        if v in pos:
            while stack[-1] != v:
                pos.pop(stack.pop())
        else:
            pos[v] = len(stack)
            stack.append(v)
    return stack


def tree_path(tree: Tree, index: Optional[HubIndex], x: Node, y: Node) -> list[Node]:
    """Hub-method path: x to its hub, hub to hub, hub to y, loops erased.

    Falls back to BFS when either endpoint has no hub in its component.
    """
    if x == y:
        return [x]
    if index is None or x not in index.nearest or y not in index.nearest:
        return tree.bfs_path(x, y)
    hx, px = index.nearest[x]
    hy, py = index.nearest[y]
    if hx == hy:
        walk = [*px, *py[::-1]]
    else:
        between = index.hub_paths.get((hx, hy))
        if between is None:
            return tree.bfs_path(x, y)
        walk = [*px, *between, *py[::-1]]
    path = _erase_loops(walk)
    if path[0] != x or path[-1] != y:
        raise BordertreeError(f"nodes {x!r} and {y!r} are disconnected")
    return path


@dataclass
class EvidentialCore:
    nodes: frozenset[Node]
    edges: frozenset[tuple[Node, Node]]  # directed, as in the tree
    roots: frozenset[Node]  # no parent inside the core
    leaves: frozenset[Node]  # no child inside the core

    def degree(self, v: Node) -> int:
        return sum(1 for p, c in self.edges if v in (p, c))

    def endpoints(self) -> frozenset[Node]:
        """Undirected path ends of the core (all marked by construction)."""
        if len(self.nodes) == 1:
            return self.nodes
        return frozenset(v for v in self.nodes if self.degree(v) <= 1)


def _core_from_nodes(tree: Tree, nodes: set[Node]) -> EvidentialCore:
    edges = frozenset((p, c) for p, c in tree.edges if p in nodes and c in nodes)
    roots = frozenset(v for v in nodes if not any(c == v for _, c in edges))
    leaves = frozenset(v for v in nodes if not any(p == v for p, _ in edges))
    return EvidentialCore(frozenset(nodes), edges, roots, leaves)


def evidential_core(tree: Tree, marked: Iterable[Node]) -> EvidentialCore:
    """Smallest subtree containing all marked nodes (union of pairwise paths)."""
    marked = list(dict.fromkeys(marked))
    if not marked:
        raise ValueError("marked set must be non-empty")
    base = marked[0]
    nodes: set[Node] = {base}
    for m in marked[1:]:
        nodes.update(tree.bfs_path(base, m))
    # The union of paths from one marked node to all others spans every
    # pairwise path (tree geometry), so a single sweep suffices.
    return _core_from_nodes(tree, nodes)


def core_by_pruning(tree: Tree, marked: Iterable[Node]) -> EvidentialCore:
    """Alternative construction: repeatedly prune unmarked undirected leaves."""
    marked = set(marked)
    if not marked:
        raise ValueError("marked set must be non-empty")
    comp = tree.component_of(next(iter(marked)))
    if not marked <= comp:
        raise BordertreeError("marked nodes span multiple components")
    nodes = set(comp)
    deg = {v: sum(1 for u in tree.neighbors(v) if u in nodes) for v in nodes}
    queue = deque(v for v in nodes if deg[v] <= 1 and v not in marked)
    while queue:
        v = queue.popleft()
        if v not in nodes or v in marked or deg[v] > 1:
            continue
        nodes.discard(v)
        for u in tree.neighbors(v):
            if u in nodes:
                deg[u] -= 1
                if deg[u] <= 1 and u not in marked:
                    queue.append(u)
    return _core_from_nodes(tree, nodes)


def smallest_hitting_core(tree: Tree, groups: Sequence[Iterable[Node]]) -> EvidentialCore:
    """Smallest connected subtree meeting every group (each group is the
    connected home set of one evidence variable).

    Exact when the product of group sizes is small: a minimum hitting
    subtree is the span of one representative per group, so enumerating
    representative combinations finds the optimum, with ties broken by the
    lexicographically least node sequence.  Very large products fall back
    to greedy leaf pruning, which still yields a minimal core.
    """
    groups = [set(g) for g in groups if g]
    if not groups:
        raise ValueError("need at least one non-empty group")
    comp = tree.component_of(next(iter(groups[0])))
    for g in groups:
        if not g <= comp:
            raise BordertreeError("groups span multiple components")
    combos = math.prod(len(g) for g in groups)
    if combos <= 4096:
        best = None
        for combo in _product(*[sorted(g, key=str) for g in groups]):
            anchor = combo[0]
            nodes = {anchor}
            for m in combo[1:]:
                nodes.update(tree.bfs_path(anchor, m))
            key = (len(nodes), tuple(sorted(nodes, key=str)))
            if best is None or key < best[0]:
                best = (key, nodes)
        return _core_from_nodes(tree, best[1])
    nodes = set(comp)
    deg = {v: sum(1 for u in tree.neighbors(v) if u in nodes) for v in nodes}
    changed = True
    while changed:
        changed = False
        for v in sorted(nodes, key=str, reverse=True):
            if deg[v] > 1:
                continue
            rest = nodes - {v}
            if all(g & rest for g in groups):
                nodes.discard(v)
                for u in tree.neighbors(v):
                    if u in nodes:
                        deg[u] -= 1
                changed = True
    return _core_from_nodes(tree, nodes)


@dataclass(frozen=True)
class Message:
    source: Node
    target: Node
    direction: str  # "downward" if source is the tree parent, else "upward"


@dataclass
class Schedule:
    messages: list[Message] = field(default_factory=list)

    def __len__(self):
        return len(self.messages)

    def __iter__(self):
        return iter(self.messages)


def _directed(tree: Tree, src: Node, dst: Node) -> Message:
    return Message(src, dst, "downward" if tree.has_edge(src, dst) else "upward")


def collection_schedule(tree: Tree, core: EvidentialCore, pivot: Node) -> Schedule:
    """Post-order toward the pivot: one message per core edge, prerequisites
    (messages further from the pivot) always first."""
    if pivot not in core.nodes:
        raise BordertreeError(f"pivot {pivot!r} is outside the evidential core")
    adj: dict[Node, list[Node]] = {v: [] for v in core.nodes}
    for p, c in sorted(core.edges, key=lambda e: (str(e[0]), str(e[1]))):
        adj[p].append(c)
        adj[c].append(p)
    sched = Schedule()
    seen = {pivot}

    def visit(v: Node):
        for u in adj[v]:
            if u in seen:
                continue
            seen.add(u)
            visit(u)
            sched.messages.append(_directed(tree, u, v))

    visit(pivot)
    return sched


def distribution_schedule(
    tree: Tree, informed: set[Node], target: Node
) -> tuple[Node, Schedule]:
    """Walk from the unique gate of the connected informed set out to the
    target; the returned schedule informs every node along the way."""
    if target in informed:
        return target, Schedule()
    if not informed:
        raise ValueError("informed set must be non-empty")
    path = tree.bfs_path(target, min(informed, key=str))
    gate = next(v for v in path if v in informed)
    out_path = path[: path.index(gate) + 1][::-1]  # gate ... target
    sched = Schedule()
    for a, b in zip(out_path, out_path[1:]):
        sched.messages.append(_directed(tree, a, b))
    return gate, sched


def default_pivot(core: EvidentialCore, holding: Optional[Iterable[Node]] = None) -> Node:
    """Core root or leaf, preferring one that holds the first-listed
    evidence variable (``holding`` = the core nodes that contain it)."""
    rl = sorted(core.roots | core.leaves, key=str)
    if holding is not None:
        hits = [v for v in rl if v in set(holding)]
        if hits:
            return hits[0]
    return rl[0]
