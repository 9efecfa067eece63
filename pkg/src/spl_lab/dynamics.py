"""Discrete-time, energy-budgeted activation dynamics.

Model, per node and step ``t`` (all nodes update synchronously):

* drive = (1 - decay) * residual + sum of weights from nodes that fired at t-1
  + external stimulus + routed feedback;
* the node fires iff drive >= threshold, it is past its refractory period and
  its energy reservoir holds at least ``firing_cost``;
* firing costs ``firing_cost`` and clears the residual; a refractory node
  loses its residual; the reservoir then recharges by ``energy_recharge_rate``
  up to ``energy_capacity``.

A loop counts as traversed when its canonical first node fires, then each
following node in cyclic order at strictly later steps, and finally the first
node again, all within ``trigger_window`` steps.
"""

from __future__ import annotations

import bisect
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ContractError
from .network import DEFAULT_MAX_LEN, Edge, Loop, LoopId, Network, Node, NodeId, build_network, enumerate_simple_cycles

EPS = 1e-12


@dataclass(frozen=True)
class Stimulus:
    pattern: Mapping[NodeId, float]
    duration: int = 1
    onset: int = 0

    def __post_init__(self):
        if self.duration < 0:
            raise ContractError("stimulus duration must be >= 0")
        object.__setattr__(self, "pattern", dict(self.pattern))

    @property
    def offset(self) -> int:
        return self.onset + self.duration

    def clipped(self, cutoff: int) -> "Stimulus":
        return replace(self, duration=max(0, min(self.offset, cutoff) - self.onset))

    @classmethod
    def pulse(cls, nodes: Iterable[NodeId], amplitude: float = 1.0, duration: int = 1, onset: int = 0):
        return cls({n: amplitude for n in nodes}, duration, onset)

    def to_dict(self) -> dict:
        return {"pattern": dict(sorted(self.pattern.items())), "duration": self.duration, "onset": self.onset}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Stimulus":
        pattern = raw["pattern"]
        if isinstance(pattern, (list, tuple)):
            pattern = {n: float(raw.get("amplitude", 1.0)) for n in pattern}
        return cls(pattern, int(raw.get("duration", 1)), int(raw.get("onset", 0)))


@dataclass(frozen=True)
class DynParams:
    activation_decay: float = 0.0
    trigger_window: int | None = None  # None -> 2 x loop length
    min_traversals: int = 2
    sustain_horizon: int | None = None  # None -> 10 x slowest loop period
    noise_rate: float = 0.0
    seed: int = 0
    energy_jitter: float = 0.0  # initial energy = capacity * (1 - jitter * U[0,1))
    max_loop_len: int = DEFAULT_MAX_LEN
    routing: tuple = ()  # (output node, input node) feedback pairs

    def __post_init__(self):
        if not 0.0 <= self.activation_decay <= 1.0:
            raise ContractError("activation_decay must lie in [0, 1]")
        if self.min_traversals < 2:
            raise ContractError("min_traversals must be >= 2")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ContractError("noise_rate must lie in [0, 1]")
        if not 0.0 <= self.energy_jitter <= 1.0:
            raise ContractError("energy_jitter must lie in [0, 1]")
        object.__setattr__(self, "routing", tuple(tuple(p) for p in self.routing))

    def window_for(self, loop_len: int) -> int:
        return self.trigger_window if self.trigger_window is not None else 2 * loop_len

    @classmethod
    def from_dict(cls, raw: Mapping | None) -> "DynParams":
        raw = dict(raw or {})
        if "routing" in raw and isinstance(raw["routing"], Mapping):
            raw["routing"] = tuple(sorted(raw["routing"].items()))
        return cls(**raw)


@dataclass(frozen=True)
class Trace:
    firings: tuple[frozenset, ...]
    loop_activations: tuple[frozenset, ...]
    horizon: int
    seed: int
    routed: tuple[frozenset, ...] = ()  # per step: input nodes that received feedback
    loops: tuple[Loop, ...] = field(default=(), repr=False)
    initial_energy: Mapping[NodeId, float] = field(default_factory=dict, repr=False)

    def fire_times(self) -> dict[NodeId, list[int]]:
        out: dict[NodeId, list[int]] = {}
        for t, fired in enumerate(self.firings):
            for n in fired:
                out.setdefault(n, []).append(t)
        return out

    def firing_count(self, node_id: NodeId) -> int:
        return sum(node_id in f for f in self.firings)

    def is_empty(self) -> bool:
        return not any(self.firings)


@lru_cache(maxsize=256)
def loops_of(net: Network, max_len: int = DEFAULT_MAX_LEN) -> tuple[Loop, ...]:
    return tuple(enumerate_simple_cycles(net, max_len))


def _check_stimuli(net: Network, stimuli: Sequence[Stimulus]):
    surface = set(net.input_surface)
    for s in stimuli:
        for n in s.pattern:
            if n not in surface:
                raise ContractError(f"stimulus targets {n}, which is not on the input surface")


def _initial_energy(net: Network, params: DynParams, rng: np.random.Generator) -> list[float]:
    draws = rng.random(len(net.nodes))
    return [n.energy_capacity * (1.0 - params.energy_jitter * u) for n, u in zip(net.nodes, draws)]


def run(net: Network, stimuli: Sequence[Stimulus], params: DynParams, horizon: int) -> Trace:
    """Simulate ``horizon`` steps and return the full firing trace."""
    if horizon < 1:
        raise ContractError("horizon must be >= 1")
    _check_stimuli(net, stimuli)
    n = len(net.nodes)
    idx = {node.id: i for i, node in enumerate(net.nodes)}
    incoming: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for e in net.edges:
        incoming[idx[e.dst]].append((idx[e.src], e.weight))
    thr = [node.threshold for node in net.nodes]
    refr = [node.refractory for node in net.nodes]
    cap = [node.energy_capacity for node in net.nodes]
    rech = [node.energy_recharge_rate for node in net.nodes]
    cost = [node.firing_cost for node in net.nodes]
    keep = 1.0 - params.activation_decay
    routes = [(idx[o], idx[i]) for o, i in params.routing]

    ext = [dict() for _ in range(horizon)]
    last_stim = -1
    for s in stimuli:
        for t in range(s.onset, min(s.offset, horizon)):
            for node_id, amp in s.pattern.items():
                j = idx[node_id]
                ext[t][j] = ext[t].get(j, 0.0) + amp
            last_stim = max(last_stim, t)

    rng = np.random.default_rng(params.seed)
    energy = _initial_energy(net, params, rng)
    init_energy = {node.id: e for node, e in zip(net.nodes, energy)}
    resid = [0.0] * n
    last_fire = [-(10**9)] * n
    fired_prev: list[int] = []
    firings: list[frozenset] = []
    routed: list[frozenset] = []
    noisy = params.noise_rate > 0.0
    ids = [node.id for node in net.nodes]

    for t in range(horizon):
        syn = [0.0] * n
        if fired_prev:
            fp = set(fired_prev)
            for i in range(n):
                acc = 0.0
                for j, w in incoming[i]:
                    if j in fp:
                        acc += w
                syn[i] = acc
        feedback = {}
        if routes and fired_prev:
            fp = set(fired_prev)
            for o, i in routes:
                if o in fp:
                    feedback[i] = thr[i]
        stim_t = ext[t]
        noise = rng.random(n) if noisy else None
        fired_now = []
        for i in range(n):
            drive = keep * resid[i] + syn[i] + stim_t.get(i, 0.0) + feedback.get(i, 0.0)
            refractory = t - last_fire[i] <= refr[i]
            fires = (
                not refractory
                and energy[i] >= cost[i] - EPS
                and (drive >= thr[i] - EPS or (noisy and noise[i] < params.noise_rate))
            )
            if fires:
                energy[i] -= cost[i]
                resid[i] = 0.0
                last_fire[i] = t
                fired_now.append(i)
            elif refractory:
                resid[i] = 0.0
            else:
                resid[i] = drive if drive > 0.0 else 0.0
            e = energy[i] + rech[i]
            energy[i] = e if e < cap[i] else cap[i]
        firings.append(frozenset(ids[i] for i in fired_now))
        routed.append(frozenset(ids[i] for i in feedback))
        fired_prev = fired_now
        if (
            not fired_now
            and not noisy
            and t >= last_stim
            and all(keep * r < th - EPS for r, th in zip(resid, thr))
        ):
            pad = horizon - t - 1
            firings.extend([frozenset()] * pad)
            routed.extend([frozenset()] * pad)
            break

    loops = loops_of(net, params.max_loop_len)
    partial = Trace(tuple(firings), (), horizon, params.seed, tuple(routed), loops, init_energy)
    return replace(partial, loop_activations=loop_activations(partial, loops, params))


# -- loop detection ----------------------------------------------------------


def traversals(fire_times: Mapping[NodeId, Sequence[int]], loop_nodes: Sequence[NodeId], window: int):
    """Anchored traversals of one loop as (start, end) step pairs.

    For each firing of the first node the earliest continuation in cyclic
    order is taken; it is kept when it returns to the first node within
    ``window`` steps of the start.
    """
    anchor = loop_nodes[0]
    starts = fire_times.get(anchor, ())
    if not starts:
        return []
    seqs = [fire_times.get(node, ()) for node in loop_nodes[1:]] + [starts]
    if any(not s for s in seqs):
        return []
    out = []
    for t0 in starts:
        t = t0
        ok = True
        for times in seqs:
            k = bisect.bisect_right(times, t)
            if k == len(times):
                ok = False
                break
            t = times[k]
            if t - t0 > window:
                ok = False
                break
        if ok:
            out.append((t0, t))
    return out


def loop_activations(trace: Trace, loops: Sequence[Loop], params: DynParams) -> tuple[frozenset, ...]:
    """Per step, the loops whose traversal interval covers that step."""
    times = trace.fire_times()
    per_step: list[set] = [set() for _ in range(len(trace.firings))]
    for loop in loops:
        for start, end in traversals(times, loop.nodes, params.window_for(loop.length)):
            for t in range(start, end + 1):
                per_step[t].add(loop.id)
    return tuple(frozenset(s) for s in per_step)


def triggered_loops(trace: Trace, net: Network, loops: Iterable[Loop], params: DynParams) -> set[LoopId]:
    """Loops traversed at least ``min_traversals`` times in ``trace``."""
    times = trace.fire_times()
    out = set()
    for loop in loops:
        if len(traversals(times, loop.nodes, params.window_for(loop.length))) >= params.min_traversals:
            out.add(loop.id)
    return out


def first_completion(trace: Trace, loop: Loop, params: DynParams) -> int | None:
    """Step at which the loop completes its first traversal, or None."""
    trav = traversals(trace.fire_times(), loop.nodes, params.window_for(loop.length))
    return min(end for _, end in trav) if trav else None


# -- self-sustain -------------------------------------------------------------


def default_sustain_horizon(net: Network, params: DynParams) -> int:
    if params.sustain_horizon is not None:
        return params.sustain_horizon
    loops = loops_of(net, params.max_loop_len)
    slowest = max((lp.length for lp in loops), default=1)
    return 10 * slowest


def self_sustain_time(net: Network, stimuli: Sequence[Stimulus], cutoff: int, params: DynParams) -> int:
    """Steps at or after ``cutoff`` during which at least one loop is active.

    Stimuli are clipped at ``cutoff``; the run continues for the sustain
    horizon afterwards.
    """
    if stimuli and cutoff < max(s.offset for s in stimuli):
        raise ContractError("cutoff precedes the end of a stimulus")
    horizon = cutoff + default_sustain_horizon(net, params)
    trace = run(net, [s.clipped(cutoff) for s in stimuli], params, max(horizon, 1))
    return sum(1 for t in range(cutoff, horizon) if trace.loop_activations[t])


# -- linked vs isolated loops -------------------------------------------------


@dataclass(frozen=True)
class LinkedLoopConfig:
    loop_sizes: tuple[int, int] = (3, 3)
    link_weight: float = 1.0
    loop_weight: float = 1.0
    energy_capacity: float = 10.0
    energy_recharge_rate: float = 0.3
    firing_cost: float = 1.0
    energy_jitter: float = 0.5
    replicates: int = 100
    seed: int = 0
    sustain_horizon: int = 2000

    @classmethod
    def from_dict(cls, raw: Mapping | None) -> "LinkedLoopConfig":
        raw = dict(raw or {})
        if "loop_sizes" in raw:
            raw["loop_sizes"] = tuple(raw["loop_sizes"])
        return cls(**raw)


def linked_loop_network(cfg: LinkedLoopConfig, linked: bool) -> Network:
    """Two loops A and B, each fed by one input; optionally joined A0 <-> B0."""
    nodes, edges = [], []
    for name, size, inp in (("A", cfg.loop_sizes[0], "IA"), ("B", cfg.loop_sizes[1], "IB")):
        nodes.append({"id": inp, "refractory": 1})
        members = [f"{name}{k}" for k in range(size)]
        for m in members:
            nodes.append(
                {
                    "id": m,
                    "refractory": size - 1,
                    "energy_capacity": cfg.energy_capacity,
                    "energy_recharge_rate": cfg.energy_recharge_rate,
                    "firing_cost": cfg.firing_cost,
                }
            )
        for a, b in zip(members, members[1:] + members[:1]):
            edges.append({"src": a, "dst": b, "weight": cfg.loop_weight})
        edges.append({"src": inp, "dst": members[0], "weight": 1.0})
    if linked:
        edges.append({"src": "A0", "dst": "B0", "weight": cfg.link_weight})
        edges.append({"src": "B0", "dst": "A0", "weight": cfg.link_weight})
    return build_network({"nodes": nodes, "edges": edges, "input_surface": ["IA", "IB"]})


@dataclass(frozen=True)
class ComparisonReport:
    seeds: tuple[int, ...]
    linked: tuple[int, ...]
    isolated: tuple[int, ...]

    @property
    def median_linked(self) -> float:
        return float(statistics.median(self.linked)) if self.linked else math.nan

    @property
    def median_isolated(self) -> float:
        return float(statistics.median(self.isolated)) if self.isolated else math.nan

    @property
    def median_ratio(self) -> float:
        if not self.linked:
            return math.nan
        if self.median_isolated == 0:
            return math.inf if self.median_linked > 0 else math.nan
        return self.median_linked / self.median_isolated

    def rows(self) -> list[dict]:
        out = []
        for rep, (seed, lk, iso) in enumerate(zip(self.seeds, self.linked, self.isolated)):
            out.append({"replicate": rep, "seed": seed, "variant": "linked", "sustain_steps": lk})
            out.append({"replicate": rep, "seed": seed, "variant": "isolated", "sustain_steps": iso})
        return out

    def to_csv(self) -> str:
        lines = ["replicate,seed,variant,sustain_steps"]
        lines += [f"{r['replicate']},{r['seed']},{r['variant']},{r['sustain_steps']}" for r in self.rows()]
        return "\n".join(lines) + "\n"


def worker_count() -> int:
    env = os.environ.get("SPL_LAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def ordered_map(fn: Callable, items: Sequence) -> list:
    """Map ``fn`` over ``items``, concurrently when allowed, preserving order."""
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _claim3_replicate(args):
    cfg, seed = args
    params = DynParams(
        activation_decay=1.0,
        seed=seed,
        energy_jitter=cfg.energy_jitter,
        sustain_horizon=cfg.sustain_horizon,
    )
    stim = [Stimulus.pulse(["IA", "IB"])]
    linked = self_sustain_time(linked_loop_network(cfg, True), stim, 1, params)
    isolated = self_sustain_time(linked_loop_network(cfg, False), stim, 1, params)
    return linked, isolated


def claim3_experiment(cfg: LinkedLoopConfig) -> ComparisonReport:
    """Self-sustain times of two loops, linked vs isolated, over seeded replicates.

    Replicate ``r`` uses seed ``cfg.seed + r`` for both variants, so the only
    difference between a linked and an isolated run is the pair of link edges.
    """
    seeds = tuple(cfg.seed + r for r in range(cfg.replicates))
    results = ordered_map(_claim3_replicate, [(cfg, s) for s in seeds])
    return ComparisonReport(seeds, tuple(r[0] for r in results), tuple(r[1] for r in results))
