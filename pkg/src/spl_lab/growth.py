"""Slow-timescale changes to a network: new loops, lateral links, Hebbian
strengthening and pruning. Every operation returns fresh objects."""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

from .continuity import PredictionGraph, exercised_pairs
from .dynamics import Trace
from .errors import ContractError
from .fixedsets import FixedSetRegistry
from .network import Edge, Network, Node, NodeId, validate


@dataclass(frozen=True)
class GrowthParams:
    branch_factor: int = 2
    new_loop_len: int = 3
    coactivation_window: int = 1
    hebb_increment: float = 0.1
    link_weight: float = 0.4
    prune_threshold: float = 0.0
    seed: int = 0
    input_weight: float = 0.7
    max_weight: float = 5.0

    def __post_init__(self):
        if self.branch_factor < 1:
            raise ContractError("branch_factor must be >= 1")
        if self.new_loop_len < 2:
            raise ContractError("new_loop_len must be >= 2")
        if self.coactivation_window < 1:
            raise ContractError("coactivation_window must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: Mapping | None) -> "GrowthParams":
        return cls(**dict(raw or {}))


def attach_node(loop_id: Sequence[NodeId]) -> NodeId:
    # canonical rotation starts at the smallest id, so this is the lowest-indexed node
    return loop_id[0]


def _fresh_loop_names(net: Network, count: int) -> list[str]:
    used = set()
    for node_id in net.node_ids:
        m = re.match(r"L(\d+)_", node_id)
        if m:
            used.add(int(m.group(1)))
    names, k = [], 1
    while len(names) < count:
        if k not in used:
            names.append(f"L{k}")
        k += 1
    return names


def _letters(n: int) -> list[str]:
    out = []
    for i in range(n):
        s, i = "", i
        while True:
            s = chr(ord("a") + i % 26) + s
            i = i // 26 - 1
            if i < 0:
                break
        out.append(s)
    return out


def extend_longitudinal(
    net: Network,
    registry: FixedSetRegistry,
    fs: str,
    gp: GrowthParams,
    inputs: Sequence[NodeId] = (),
) -> tuple[Network, FixedSetRegistry]:
    """Grow ``branch_factor`` new loops downstream of fixed set ``fs``.

    Each new loop is named ``L<k>`` with nodes ``L<k>_a, L<k>_b, ...`` and
    copies the parameters of the first attach node. Its entry node (``_a``)
    is joined both ways to the attach node of every loop in ``fs`` at
    ``gp.link_weight``. Optional ``inputs`` (input-surface nodes) feed the
    entry at ``gp.input_weight``.
    """
    src = registry[fs]
    for i in inputs:
        if i not in net.input_surface:
            raise ContractError(f"{i} is not on the input surface")
    attaches = sorted({attach_node(lp) for lp in src.loop_ids})
    template = net.node(attaches[0])
    nodes = list(net.nodes)
    edges = list(net.edges)
    new_loops = []
    for name in _fresh_loop_names(net, gp.branch_factor):
        members = [f"{name}_{s}" for s in _letters(gp.new_loop_len)]
        nodes += [Node(m, template.threshold, template.refractory, template.energy_capacity,
                       template.energy_recharge_rate, template.firing_cost) for m in members]
        edges += [Edge(a, b, 1.0) for a, b in zip(members, members[1:] + members[:1])]
        entry = members[0]
        for a in attaches:
            edges += [Edge(a, entry, gp.link_weight), Edge(entry, a, gp.link_weight)]
        edges += [Edge(i, entry, gp.input_weight) for i in inputs]
        new_loops.append(tuple(members))
    grown = validate(Network(tuple(nodes), tuple(edges), net.input_surface, net.output_surface))
    return grown, registry.with_candidates(fs, new_loops)


def associate_lateral(
    net: Network, registry: FixedSetRegistry, a: str, b: str, gp: GrowthParams
) -> tuple[Network, FixedSetRegistry]:
    """Join every loop of ``a`` to every loop of ``b`` through their attach nodes."""
    if a == b:
        raise ContractError("cannot associate a fixed set with itself")
    fa, fb = registry[a], registry[b]
    existing = net.edge_map()
    added: dict[tuple[str, str], float] = {}
    for x in sorted({attach_node(lp) for lp in fa.loop_ids}):
        for y in sorted({attach_node(lp) for lp in fb.loop_ids}):
            if x == y:
                continue
            for pair in ((x, y), (y, x)):
                if pair not in existing:
                    added[pair] = gp.link_weight
    edges = list(net.edges) + [Edge(s, d, w) for (s, d), w in sorted(added.items())]
    return net.with_edges(edges), registry.with_link(a, b, gp.link_weight)


def cofiring_counts(net: Network, trace: Trace, window: int) -> dict[tuple[str, str], int]:
    """For each edge u->v, the number of u firings followed by v within ``window`` steps."""
    times = trace.fire_times()
    fired_sets = trace.firings
    out = {}
    for e in net.edges:
        count = 0
        for t in times.get(e.src, ()):
            if any(e.dst in fired_sets[s] for s in range(t + 1, min(t + window, len(fired_sets) - 1) + 1)):
                count += 1
        out[(e.src, e.dst)] = count
    return out


def hebbian_update(net: Network, trace: Trace, gp: GrowthParams) -> Network:
    """Strengthen existing edges by ``hebb_increment`` per co-firing, capped at ``max_weight``."""
    known = set(net.node_ids)
    for fired in trace.firings:
        stray = fired - known
        if stray:
            raise ContractError(f"trace mentions nodes absent from the network: {sorted(stray)}")
    counts = cofiring_counts(net, trace, gp.coactivation_window)
    edges = []
    for e in net.edges:
        c = counts[(e.src, e.dst)]
        w = e.weight
        if c:
            w = max(w, min(w + gp.hebb_increment * c, gp.max_weight))
        edges.append(Edge(e.src, e.dst, w))
    return net.with_edges(edges)


def prune(
    net: Network,
    registry: FixedSetRegistry,
    graph: PredictionGraph,
    counterexamples: Sequence[Sequence[str]],
) -> tuple[Network, PredictionGraph, list[str]]:
    """Drop successor entries used only by counterexamples.

    A successor entry ``context -> token`` is removed when some counterexample
    exercises it and no training sentence does. If both ends of a removed
    entry map to fixed sets joined by a lateral link, the edges between their
    attach nodes go too. Counterexamples with unknown tokens are skipped and
    reported in the third return value.
    """
    skipped = []
    doomed = set()
    for seq in counterexamples:
        seq = list(seq)
        unknown = [t for t in seq if t not in graph.vocabulary]
        if unknown:
            skipped.append(f"{' '.join(seq)}: unknown tokens {unknown}")
            continue
        for ctx, tok in exercised_pairs(graph, seq):
            if (ctx, tok) not in graph.training_pairs:
                doomed.add((ctx, tok))
    if not doomed:
        return net, graph, skipped
    new_graph = graph.without_pairs(doomed)
    cut = set()
    linked = {frozenset((a, b)) for a, b, _ in registry.links}
    for ctx, tok in doomed:
        if not ctx:
            continue
        fa = graph.token_to_fixedset.get(ctx[-1])
        fb = graph.token_to_fixedset.get(tok)
        if fa and fb and fa != fb and frozenset((fa, fb)) in linked:
            xs = {attach_node(lp) for lp in registry[fa].loop_ids}
            ys = {attach_node(lp) for lp in registry[fb].loop_ids}
            cut |= {(x, y) for x in xs for y in ys} | {(y, x) for x in xs for y in ys}
    new_net = net.with_edges(e for e in net.edges if (e.src, e.dst) not in cut) if cut else net
    return new_net, new_graph, skipped
