"""Candidate DAG representation, structural clean-up and d-separation."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .data import TemporalTag

Edge = tuple[str, str]


class DagError(ValueError):
    pass


@dataclass(frozen=True)
class Dag:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise DagError("duplicate nodes")
        seen = set()
        for p, c in self.edges:
            if p == c:
                raise DagError(f"self-loop on {p!r}")
            if p not in node_set or c not in node_set:
                raise DagError(f"edge {p!r}->{c!r} references a node outside the graph")
            if (p, c) in seen:
                raise DagError(f"duplicate edge {p!r}->{c!r}")
            seen.add((p, c))

    def __contains__(self, name: str) -> bool:
        return name in self.nodes

    def parents(self, node: str) -> list[str]:
        return [p for p, c in self.edges if c == node]

    def children(self, node: str) -> list[str]:
        return [c for p, c in self.edges if p == node]

    def _check(self, *names: str) -> None:
        for n in names:
            if n not in self.nodes:
                raise DagError(f"{n!r} is not in the graph")

    def without_edges(self, drop: Iterable[Edge]) -> "Dag":
        drop = set(drop)
        return Dag(self.nodes, tuple(e for e in self.edges if e not in drop))

    def without_nodes(self, drop: Iterable[str]) -> "Dag":
        drop = set(drop)
        return Dag(
            tuple(n for n in self.nodes if n not in drop),
            tuple((p, c) for p, c in self.edges if p not in drop and c not in drop),
        )

    def is_acyclic(self) -> bool:
        indeg = {n: 0 for n in self.nodes}
        for _, c in self.edges:
            indeg[c] += 1
        queue = deque(n for n in self.nodes if indeg[n] == 0)
        seen = 0
        while queue:
            n = queue.popleft()
            seen += 1
            for c in self.children(n):
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        return seen == len(self.nodes)

    def to_dot(self, treatment: str | None = None, outcome: str | None = None) -> str:
        """Graphviz source; treatment is a blue box, outcome a red double octagon."""
        lines = ["digraph dag {", "  rankdir=LR;"]
        for n in self.nodes:
            attrs = ""
            if n == treatment:
                attrs = ' [shape=box, style=filled, fillcolor="lightblue"]'
            elif n == outcome:
                attrs = ' [shape=doubleoctagon, style=filled, fillcolor="salmon"]'
            lines.append(f"  {_quote(n)}{attrs};")
        for p, c in self.edges:
            lines.append(f"  {_quote(p)} -> {_quote(c)};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def build_dag(edges: Sequence[Sequence[str]], known_columns: Iterable[str]) -> Dag:
    known = set(known_columns)
    nodes: list[str] = []
    out: list[Edge] = []
    for e in edges:
        if len(e) != 2:
            raise DagError(f"edge {e!r} is not a (parent, child) pair")
        p, c = e
        for n in (p, c):
            if n not in known:
                raise DagError(f"unknown column {n!r}")
            if n not in nodes:
                nodes.append(n)
        out.append((p, c))
    return Dag(tuple(nodes), tuple(out))


def prune_temporal(dag: Dag, tags: Mapping[str, TemporalTag]) -> tuple[Dag, list[Edge]]:
    """Drop edges whose parent is effective strictly later than its child."""
    missing = [n for n in dag.nodes if n not in tags]
    if missing:
        raise DagError(f"no temporal tag for {missing}")
    pruned = [
        (p, c) for p, c in dag.edges if tags[p].effective_time > tags[c].effective_time
    ]
    return dag.without_edges(pruned), pruned


def _find_cycle(dag: Dag) -> list[Edge] | None:
    adj: dict[str, list[str]] = {n: [] for n in dag.nodes}
    for p, c in dag.edges:
        adj[p].append(c)
    state = {n: 0 for n in dag.nodes}  # 0 new, 1 on stack, 2 done
    for root in dag.nodes:
        if state[root]:
            continue
        path = [root]
        iters = [iter(adj[root])]
        state[root] = 1
        while iters:
            nxt = next(iters[-1], None)
            if nxt is None:
                state[path.pop()] = 2
                iters.pop()
            elif state[nxt] == 1:
                cyc = path[path.index(nxt):] + [nxt]
                return list(zip(cyc[:-1], cyc[1:]))
            elif state[nxt] == 0:
                state[nxt] = 1
                path.append(nxt)
                iters.append(iter(adj[nxt]))
    return None


def break_cycles(dag: Dag) -> tuple[Dag, list[Edge]]:
    """Remove, per cycle found, the cycle edge that comes last in the edge order."""
    removed: list[Edge] = []
    order = {e: i for i, e in enumerate(dag.edges)}
    while (cycle := _find_cycle(dag)) is not None:
        victim = max(cycle, key=order.__getitem__)
        removed.append(victim)
        dag = dag.without_edges([victim])
    return dag, removed


def _component(dag: Dag, start: str) -> set[str]:
    nbrs: dict[str, set[str]] = {n: set() for n in dag.nodes}
    for p, c in dag.edges:
        nbrs[p].add(c)
        nbrs[c].add(p)
    seen = {start}
    queue = deque([start])
    while queue:
        for m in nbrs[queue.popleft()]:
            if m not in seen:
                seen.add(m)
                queue.append(m)
    return seen


def prune_disconnected(dag: Dag, treatment: str, outcome: str) -> tuple[Dag, list[str]]:
    """Drop nodes with no undirected path to the treatment nor to the outcome."""
    keep: set[str] = set()
    for anchor in (treatment, outcome):
        if anchor in dag.nodes:
            keep |= _component(dag, anchor)
    removed = [n for n in dag.nodes if n not in keep]
    return dag.without_nodes(removed), removed


def descendants(dag: Dag, x: str) -> set[str]:
    dag._check(x)
    out: set[str] = set()
    queue = deque([x])
    while queue:
        for c in dag.children(queue.popleft()):
            if c not in out:
                out.add(c)
                queue.append(c)
    out.discard(x)
    return out


def ancestors(dag: Dag, nodes: Iterable[str]) -> set[str]:
    """The given nodes together with all their ancestors."""
    out = set(nodes)
    queue = deque(out)
    while queue:
        for p in dag.parents(queue.popleft()):
            if p not in out:
                out.add(p)
                queue.append(p)
    return out


def d_separated(dag: Dag, x: str, y: str, z: Iterable[str]) -> bool:
    """Reachability ("Bayes ball") test of whether ``z`` blocks every x-y path."""
    z = set(z)
    dag._check(x, y, *z)
    if x == y:
        raise DagError("x and y must differ")
    if x in z or y in z:
        raise DagError("x and y must not be in the conditioning set")
    parents = {n: [] for n in dag.nodes}
    children = {n: [] for n in dag.nodes}
    for p, c in dag.edges:
        parents[c].append(p)
        children[p].append(c)
    anc_z = ancestors(dag, z)

    # direction "up": arrived from a child (or start); "down": arrived from a parent
    visited: set[tuple[str, str]] = set()
    stack = [(x, "up")]
    while stack:
        node, direction = stack.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node == y:
            return False
        if direction == "up" and node not in z:
            stack.extend((p, "up") for p in parents[node])
            stack.extend((c, "down") for c in children[node])
        elif direction == "down":
            if node not in z:
                stack.extend((c, "down") for c in children[node])
            if node in anc_z:
                stack.extend((p, "up") for p in parents[node])
    return True


@dataclass
class StructuralReport:
    temporal_edges_pruned: list[Edge]
    cycle_edges_pruned: list[Edge]
    disconnected_nodes_pruned: list[str]
    structurally_valid: bool

    def to_dict(self) -> dict:
        return {
            "temporal_edges_pruned": [list(e) for e in self.temporal_edges_pruned],
            "cycle_edges_pruned": [list(e) for e in self.cycle_edges_pruned],
            "disconnected_nodes_pruned": list(self.disconnected_nodes_pruned),
            "n_temporal_edges_pruned": len(self.temporal_edges_pruned),
            "n_cycle_edges_pruned": len(self.cycle_edges_pruned),
            "n_disconnected_nodes_pruned": len(self.disconnected_nodes_pruned),
            "structurally_valid": self.structurally_valid,
        }


def structural_preprocess(
    dag: Dag, tags: Mapping[str, TemporalTag], treatment: str, outcome: str
) -> tuple[Dag, StructuralReport]:
    """Temporal pruning, then cycle breaking, then connectivity pruning."""
    dag, temporal = prune_temporal(dag, tags)
    dag, cyc = break_cycles(dag)
    dag, disconnected = prune_disconnected(dag, treatment, outcome)
    valid = treatment in dag.nodes and outcome in dag.nodes
    return dag, StructuralReport(temporal, cyc, disconnected, valid)
