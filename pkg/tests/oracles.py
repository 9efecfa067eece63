"""Slow, obviously-correct reference implementations used to check the fast ones."""

from __future__ import annotations

import itertools
from collections import deque

from hypothesis import strategies as st

from spl_lab.network import build_network


def min_rotation(seq):
    return min(tuple(seq[i:] + seq[:i]) for i in range(len(seq)))


def brute_cycles(nodes, edges, max_len):
    """Every simple cycle up to ``max_len`` by trying every ordered node tuple."""
    eset = set(edges)
    found = set()
    for k in range(2, max_len + 1):
        for combo in itertools.permutations(nodes, k):
            pairs = list(zip(combo, combo[1:] + combo[:1]))
            if all(p in eset for p in pairs):
                found.add(min_rotation(list(combo)))
    return found


def reachable(succ, start):
    seen, todo = {start}, deque([start])
    while todo:
        u = todo.popleft()
        for v in succ.get(u, ()):
            if v not in seen:
                seen.add(v)
                todo.append(v)
    return seen


def brute_scc(nodes, edges):
    succ = {}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
    reach = {u: reachable(succ, u) for u in nodes}
    comps = set()
    for u in nodes:
        comps.add(frozenset(v for v in nodes if v in reach[u] and u in reach[v]))
    return comps


def brute_ngrams(corpus, max_order):
    """Sliding-window successor tally, counted independently of the library."""
    table = {}
    for sent in corpus:
        sent = list(sent)
        if sent:
            table.setdefault((), set()).add(sent[0])
        for i in range(len(sent)):
            for n in range(1, max_order + 1):
                if i - n < 0:
                    break
                table.setdefault(tuple(sent[i - n : i]), set()).add(sent[i])
    return {k: frozenset(v) for k, v in table.items()}


def brute_cofiring(edges, firings, window):
    horizon = len(firings)
    out = {}
    for a, b in edges:
        count = 0
        for t in range(horizon):
            if a in firings[t] and any(b in firings[s] for s in range(t + 1, min(t + window + 1, horizon))):
                count += 1
        out[(a, b)] = count
    return out


def brute_minimal_seed_sets(species, succ, targets):
    """Minimal species subsets whose downstream closure covers ``targets``."""
    targets = set(targets)
    good = []
    for k in range(1, len(species) + 1):
        for combo in itertools.combinations(species, k):
            cover = set()
            for s in combo:
                cover |= reachable(succ, s)
            if targets <= cover and not any(set(g) <= set(combo) for g in good):
                good.append(combo)
    return good


def net_from(nodes, edges):
    return build_network({"nodes": list(nodes), "edges": [{"src": a, "dst": b} for a, b in edges]})


@st.composite
def digraphs(draw, max_nodes=8, min_nodes=1):
    n = draw(st.integers(min_nodes, max_nodes))
    nodes = [f"n{i}" for i in range(n)]
    pairs = [(a, b) for a in nodes for b in nodes if a != b]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    return nodes, sorted(edges)
