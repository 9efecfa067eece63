"""Directed activation graphs plus the graph algorithms the rest of the lab uses.

A :class:`Network` is immutable. Growth operations build new networks instead of
editing old ones, so a network can be shared freely between simulation runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ContractError, SchemaError

NodeId = str
LoopId = tuple  # tuple[NodeId, ...] in canonical rotation

DEFAULT_MAX_LEN = 8

NODE_DEFAULTS = {
    "threshold": 1.0,
    "refractory": 1,
    "energy_capacity": 10.0,
    "energy_recharge_rate": 1.0,
    "firing_cost": 1.0,
}


@dataclass(frozen=True)
class Node:
    id: NodeId
    threshold: float = 1.0
    refractory: int = 1
    energy_capacity: float = 10.0
    energy_recharge_rate: float = 1.0
    firing_cost: float = 1.0


@dataclass(frozen=True)
class Edge:
    src: NodeId
    dst: NodeId
    weight: float


@dataclass(frozen=True)
class Network:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    input_surface: tuple[NodeId, ...] = ()
    output_surface: tuple[NodeId, ...] = ()
    _index: Mapping[NodeId, int] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {n.id: i for i, n in enumerate(self.nodes)})

    @property
    def node_ids(self) -> tuple[NodeId, ...]:
        return tuple(n.id for n in self.nodes)

    def index(self, node_id: NodeId) -> int:
        return self._index[node_id]

    def node(self, node_id: NodeId) -> Node:
        return self.nodes[self._index[node_id]]

    def __contains__(self, node_id) -> bool:
        return node_id in self._index

    def successors(self) -> dict[NodeId, list[NodeId]]:
        out: dict[NodeId, list[NodeId]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            out[e.src].append(e.dst)
        return out

    def edge_map(self) -> dict[tuple[NodeId, NodeId], float]:
        return {(e.src, e.dst): e.weight for e in self.edges}

    def with_edges(self, edges: Iterable[Edge]) -> "Network":
        return validate(replace(self, edges=tuple(edges)))

    def with_node_params(self, **params) -> "Network":
        """Copy with the given node parameters set on every node."""
        return replace(self, nodes=tuple(replace(n, **params) for n in self.nodes))

    def scaled(self, factor: float) -> "Network":
        """Copy with every edge weight multiplied by ``factor``."""
        return self.with_edges(Edge(e.src, e.dst, e.weight * factor) for e in self.edges)

    def to_spec(self) -> dict:
        return {
            "nodes": [
                {
                    "id": n.id,
                    "threshold": n.threshold,
                    "refractory": n.refractory,
                    "energy_capacity": n.energy_capacity,
                    "energy_recharge_rate": n.energy_recharge_rate,
                    "firing_cost": n.firing_cost,
                }
                for n in self.nodes
            ],
            "edges": [{"src": e.src, "dst": e.dst, "weight": e.weight} for e in self.edges],
            "input_surface": list(self.input_surface),
            "output_surface": list(self.output_surface),
        }


def validate(net: Network) -> Network:
    seen: set[NodeId] = set()
    for n in net.nodes:
        if n.id in seen:
            raise SchemaError(f"duplicate node {n.id}")
        seen.add(n.id)
    pairs = set()
    for e in net.edges:
        for end in (e.src, e.dst):
            if end not in seen:
                raise SchemaError(f"unknown node {end}")
        if e.src == e.dst:
            raise SchemaError(f"self-edge on node {e.src}")
        if not math.isfinite(e.weight):
            raise SchemaError(f"non-finite weight on edge {e.src}->{e.dst}")
        if (e.src, e.dst) in pairs:
            raise SchemaError(f"duplicate edge {e.src}->{e.dst}")
        pairs.add((e.src, e.dst))
    for surface in (net.input_surface, net.output_surface):
        for node_id in surface:
            if node_id not in seen:
                raise SchemaError(f"unknown node {node_id}")
    return net


def build_network(spec: Mapping) -> Network:
    """Build a validated :class:`Network` from a NetworkSpec mapping.

    Missing numeric node fields take the values in ``NODE_DEFAULTS``.
    Raises :class:`SchemaError` naming the offending node or edge.
    """
    if not isinstance(spec, Mapping) or "nodes" not in spec:
        raise SchemaError("network spec needs a 'nodes' list")
    nodes = []
    for raw in spec["nodes"]:
        if isinstance(raw, str):
            raw = {"id": raw}
        if "id" not in raw:
            raise SchemaError(f"node without id: {raw!r}")
        unknown = set(raw) - set(NODE_DEFAULTS) - {"id"}
        if unknown:
            raise SchemaError(f"unknown node field(s) {sorted(unknown)} on {raw['id']}")
        params = {**NODE_DEFAULTS, **{k: v for k, v in raw.items() if k != "id"}}
        params["refractory"] = int(params["refractory"])
        nodes.append(Node(id=str(raw["id"]), **params))
    edges = []
    for raw in spec.get("edges", []):
        try:
            edges.append(Edge(str(raw["src"]), str(raw["dst"]), float(raw.get("weight", 1.0))))
        except KeyError as exc:
            raise SchemaError(f"edge missing field {exc.args[0]}: {raw!r}") from None
    net = Network(
        nodes=tuple(nodes),
        edges=tuple(edges),
        input_surface=tuple(spec.get("input_surface", ())),
        output_surface=tuple(spec.get("output_surface", ())),
    )
    return validate(net)


def load_network(path) -> Network:
    with open(Path(path), encoding="utf-8") as fh:
        return build_network(json.load(fh))


# -- loops -----------------------------------------------------------------


def canonical_loop(nodes: Sequence[NodeId]) -> LoopId:
    """Lexicographically smallest rotation of a cyclic node sequence."""
    seq = tuple(nodes)
    if not seq:
        return seq
    return min(seq[i:] + seq[:i] for i in range(len(seq)))


def loop_sort_key(loop_id: LoopId):
    return (len(loop_id), loop_id)


@dataclass(frozen=True)
class Loop:
    id: LoopId
    nodes: tuple[NodeId, ...]

    @property
    def length(self) -> int:
        return len(self.nodes)


def enumerate_simple_cycles(net: Network, max_len: int = DEFAULT_MAX_LEN) -> list[Loop]:
    """All simple directed cycles with at most ``max_len`` nodes.

    Returned in canonical rotation, sorted by (length, id). A cycle is found
    once, from its smallest node, by a depth-first search that only visits
    nodes larger than the start.
    """
    if max_len < 2:
        raise ContractError("max_len must be >= 2")
    succ = {k: sorted(v) for k, v in net.successors().items()}
    found: list[Loop] = []
    for start in sorted(succ):
        path = [start]
        on_path = {start}
        stack = [iter(succ[start])]
        while stack:
            nxt = next(stack[-1], None)
            if nxt is None:
                stack.pop()
                on_path.discard(path.pop())
                continue
            if nxt == start:
                if len(path) >= 2:
                    found.append(Loop(canonical_loop(path), tuple(canonical_loop(path))))
                continue
            if nxt < start or nxt in on_path or len(path) >= max_len:
                continue
            path.append(nxt)
            on_path.add(nxt)
            stack.append(iter(succ[nxt]))
    found.sort(key=lambda lp: loop_sort_key(lp.id))
    return found


# -- strongly connected components ----------------------------------------


@dataclass(frozen=True)
class SccPartition:
    components: tuple[frozenset, ...]
    component_of: Mapping[NodeId, int]

    def condensation(self, edges: Iterable[tuple[NodeId, NodeId]]) -> set[tuple[int, int]]:
        return {
            (self.component_of[u], self.component_of[v])
            for u, v in edges
            if self.component_of[u] != self.component_of[v]
        }


def scc_of_graph(nodes: Sequence, succ: Mapping[object, Sequence]) -> SccPartition:
    """Iterative Tarjan. Components come out in reverse topological order."""
    index_of: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    components: list[frozenset] = []
    counter = 0
    for root in nodes:
        if root in index_of:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index_of[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index_of:
                    index_of[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index_of[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index_of[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                components.append(frozenset(comp))
    component_of = {n: i for i, comp in enumerate(components) for n in comp}
    return SccPartition(tuple(components), component_of)


def strongly_connected_components(net: Network) -> SccPartition:
    return scc_of_graph(net.node_ids, net.successors())
