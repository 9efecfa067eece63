"""Chemical looped networks: mapping from track blueprints, exact stochastic
simulation with an external energy budget, and persistence / regeneration
analyses."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dynamics import ordered_map
from .errors import ContractError, SchemaError
from .network import scc_of_graph
from .physical import TrackBlueprint

DOWNHILL, UPHILL = "downhill", "uphill"


@dataclass(frozen=True)
class Species:
    id: str
    energy_level: float = 0.0
    initial_count: int = 0

    def __post_init__(self):
        if self.initial_count < 0:
            raise SchemaError(f"species {self.id} has a negative count")


@dataclass(frozen=True)
class Reaction:
    reactants: tuple[str, ...]
    products: tuple[str, ...]
    enzyme: str | None = None
    activation_energy: float = 0.0
    direction: str = DOWNHILL
    rate_constant: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "reactants", tuple(self.reactants))
        object.__setattr__(self, "products", tuple(self.products))
        if not self.reactants or not self.products:
            raise SchemaError("reactions need nonempty reactants and products")
        if self.direction not in (DOWNHILL, UPHILL):
            raise SchemaError(f"unknown direction {self.direction!r}")
        if self.rate_constant < 0 or self.activation_energy < 0:
            raise SchemaError("rate constants and activation energies must be >= 0")

    @property
    def needs_energy(self) -> bool:
        return self.direction == UPHILL

    def to_dict(self) -> dict:
        return {
            "reactants": list(self.reactants),
            "products": list(self.products),
            "enzyme": self.enzyme,
            "activation_energy": self.activation_energy,
            "direction": self.direction,
            "rate_constant": self.rate_constant,
        }


@dataclass(frozen=True)
class ReactionNetwork:
    species: tuple[Species, ...]
    reactions: tuple[Reaction, ...]
    energy_supply: float = 0.0
    abundant_species: frozenset = frozenset()
    decay_rates: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        object.__setattr__(self, "abundant_species", frozenset(self.abundant_species))
        ids = [s.id for s in self.species]
        if len(set(ids)) != len(ids):
            raise SchemaError("duplicate species id")
        known = set(ids)
        for r in self.reactions:
            for sid in (*r.reactants, *r.products, *([r.enzyme] if r.enzyme else [])):
                if sid not in known:
                    raise SchemaError(f"reaction references unknown species {sid}")
        for sid in (*self.abundant_species, *self.decay_rates):
            if sid not in known:
                raise SchemaError(f"unknown species {sid}")
        if self.energy_supply < 0:
            raise SchemaError("energy_supply must be >= 0")

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.species)

    def enzymes(self) -> set[str]:
        return {r.enzyme for r in self.reactions if r.enzyme}

    def tracked(self) -> list[str]:
        """Species that take part in reactions as reactant or product and are not abundant."""
        inner = {sid for r in self.reactions for sid in (*r.reactants, *r.products)}
        return [s for s in self.ids if s in inner and s not in self.abundant_species]

    def with_counts(self, counts: Mapping[str, int]) -> "ReactionNetwork":
        sp = tuple(replace(s, initial_count=int(counts.get(s.id, s.initial_count))) for s in self.species)
        return replace(self, species=sp)

    def to_dict(self) -> dict:
        return {
            "species": [
                {"id": s.id, "energy_level": s.energy_level, "initial_count": s.initial_count} for s in self.species
            ],
            "reactions": [r.to_dict() for r in self.reactions],
            "energy_supply": self.energy_supply,
            "abundant_species": sorted(self.abundant_species),
            "decay_rates": dict(sorted(self.decay_rates.items())),
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ReactionNetwork":
        try:
            return cls(
                tuple(Species(s["id"], float(s.get("energy_level", 0.0)), int(s.get("initial_count", 0))) for s in raw["species"]),
                tuple(
                    Reaction(
                        tuple(r["reactants"]),
                        tuple(r["products"]),
                        r.get("enzyme"),
                        float(r.get("activation_energy", 0.0)),
                        r.get("direction", DOWNHILL),
                        float(r.get("rate_constant", 1.0)),
                    )
                    for r in raw["reactions"]
                ),
                float(raw.get("energy_supply", 0.0)),
                frozenset(raw.get("abundant_species", ())),
                dict(raw.get("decay_rates", {})),
            )
        except KeyError as exc:
            raise SchemaError(f"reaction network missing field {exc.args[0]}") from None


def load_reaction_network(path) -> ReactionNetwork:
    with open(path, encoding="utf-8") as fh:
        return ReactionNetwork.from_dict(json.load(fh))


# -- mapping -----------------------------------------------------------------


def map_physical_to_chemical(
    bp: TrackBlueprint,
    initial_count: int = 20,
    energy_supply: float = 5.0,
    energy_scale: float = 1.0,
) -> ReactionNetwork:
    """One species per stable point (valley or loop) of the main circuit.

    Stable points are visited in track order and named ``M1, M2, ...``; the
    species level is minus the depth. Consecutive points, wrapping around,
    are joined by a reaction with its own enzyme ``E<i><j>``: downhill when
    the level falls, uphill otherwise. The activation energy is the depth of
    the source point plus the tallest hill crossed on the way. Uphill rate
    constants are ``exp(-activation_energy / energy_scale)``. A loop feature
    adds a partner ``M<i>*`` and a pair of reactions forming a 2-cycle.
    """
    if bp.extra_circuits or bp.connections:
        raise ContractError("only single-circuit blueprints can be mapped")
    if len(bp.segments) < 2:
        raise ContractError("blueprint needs at least two features")
    stable = [i for i, f in enumerate(bp.segments) if f.kind in ("valley", "loop")]
    if len(stable) < 2:
        raise ContractError("blueprint needs at least two stable points to form a loop")
    n = len(bp.segments)
    names = [f"M{k + 1}" for k in range(len(stable))]
    species = [Species(nm, -bp.segments[i].value, initial_count) for nm, i in zip(names, stable)]
    reactions = []
    enzymes = []
    for k, i in enumerate(stable):
        j = stable[(k + 1) % len(stable)]
        between = [bp.segments[m % n] for m in range(i + 1, j if j > i else j + n)]
        barrier = max((f.value for f in between if f.kind == "hill"), default=0.0)
        ea = bp.segments[i].value + barrier
        src, dst = species[k], species[(k + 1) % len(stable)]
        uphill = dst.energy_level > src.energy_level
        enz = f"E{k + 1}{(k + 1) % len(stable) + 1}"
        enzymes.append(enz)
        reactions.append(
            Reaction(
                (src.id,),
                (dst.id,),
                enz,
                ea,
                UPHILL if uphill else DOWNHILL,
                math.exp(-ea / energy_scale) if uphill else 1.0,
            )
        )
    for k, i in enumerate(stable):
        f = bp.segments[i]
        if f.kind == "loop":
            star = f"{names[k]}*"
            species.append(Species(star, -f.value, 0))
            reactions.append(Reaction((names[k],), (star,), None, f.loop_friction, DOWNHILL, 1.0))
            reactions.append(Reaction((star,), (names[k],), None, f.loop_friction, DOWNHILL, 1.0))
    species += [Species(e, 0.0, 1) for e in enzymes]
    return ReactionNetwork(tuple(species), tuple(reactions), energy_supply, frozenset(enzymes))


def chemical_counts(rnet: ReactionNetwork) -> dict:
    """Distinct chemicals needed with and without sharing species between reactions."""
    naive = sum(len(r.reactants) + len(r.products) + (1 if r.enzyme else 0) for r in rnet.reactions)
    used = {sid for r in rnet.reactions for sid in (*r.reactants, *r.products)}
    return {"naive": naive, "shared": len(used) + len(rnet.enzymes()), "species": len(used), "enzymes": len(rnet.enzymes())}


def species_graph(rnet: ReactionNetwork) -> dict[str, list[str]]:
    succ: dict[str, set] = {s: set() for s in rnet.ids if s not in rnet.enzymes()}
    for r in rnet.reactions:
        for a in r.reactants:
            for b in r.products:
                succ.setdefault(a, set()).add(b)
    return {k: sorted(v) for k, v in succ.items()}


def chemical_loop_count(rnet: ReactionNetwork, max_len: int | None = None) -> int:
    from .network import build_network, enumerate_simple_cycles

    g = species_graph(rnet)
    edges = [{"src": a, "dst": b} for a, bs in g.items() for b in bs if a != b]
    net = build_network({"nodes": sorted(g), "edges": edges})
    return len(enumerate_simple_cycles(net, max_len or max(2, len(g))))


# -- stochastic simulation ---------------------------------------------------


@dataclass(frozen=True)
class ChemSimParams:
    horizon: float = 50.0
    seed: int = 0
    method: str = "stochastic"
    max_events: int = 2_000_000

    def __post_init__(self):
        if self.method != "stochastic":
            raise ContractError(f"unsupported method {self.method!r}")
        if self.horizon < 0:
            raise ContractError("horizon must be >= 0")

    @classmethod
    def from_dict(cls, raw: Mapping | None) -> "ChemSimParams":
        return cls(**dict(raw or {}))


@dataclass(frozen=True)
class ConcentrationTrace:
    species: tuple[str, ...]
    times: np.ndarray  # event times, starting with 0
    counts: np.ndarray  # counts after each event, one row per time
    fired: np.ndarray  # reaction index per event (-1 for the initial row, -2 for decay)
    uphill_energy: float  # energy spent on uphill events
    seed: int
    horizon: float

    def final(self) -> dict[str, int]:
        return {s: int(c) for s, c in zip(self.species, self.counts[-1])}

    def ever_present(self) -> dict[str, bool]:
        return {s: bool(self.counts[:, k].max() > 0) for k, s in enumerate(self.species)}

    def to_csv(self) -> str:
        lines = ["time,species,count"]
        for t, row in zip(self.times, self.counts):
            lines += [f"{t:.9g},{s},{int(c)}" for s, c in zip(self.species, row)]
        return "\n".join(lines) + "\n"


def _falling(n: int, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= n - i
    return out if out > 0 else 0.0


def propensities(rnet: ReactionNetwork, counts: np.ndarray, index: Mapping[str, int]) -> np.ndarray:
    out = np.zeros(len(rnet.reactions))
    for k, r in enumerate(rnet.reactions):
        if r.enzyme and counts[index[r.enzyme]] <= 0:
            continue
        a = r.rate_constant
        for sid in set(r.reactants):
            a *= _falling(int(counts[index[sid]]), r.reactants.count(sid))
            if a == 0:
                break
        out[k] = a
    return out


def simulate_reactions(rnet: ReactionNetwork, sim: ChemSimParams = ChemSimParams()) -> ConcentrationTrace:
    """Exact event-by-event simulation.

    Waiting times are exponential in the total propensity of enabled
    reactions. An uphill reaction is enabled only while the energy budget,
    ``energy_supply * t`` minus energy already spent, covers its activation
    energy. Because the budget grows deterministically, the simulation jumps
    to the moment a gate opens whenever that comes before the next event.
    Abundant species are reset to their initial counts after every event.
    """
    if sim.horizon <= 0:
        raise ContractError("horizon must be > 0")
    rng = np.random.default_rng(sim.seed)
    ids = rnet.ids
    index = {s: k for k, s in enumerate(ids)}
    counts = np.array([s.initial_count for s in rnet.species], dtype=np.int64)
    abundant = [(index[sp.id], sp.initial_count) for sp in rnet.species if sp.id in rnet.abundant_species]
    decay = [(index[s], rate) for s, rate in sorted(rnet.decay_rates.items()) if rate > 0]
    deltas = []
    for r in rnet.reactions:
        d = np.zeros(len(ids), dtype=np.int64)
        for s in r.reactants:
            d[index[s]] -= 1
        for s in r.products:
            d[index[s]] += 1
        deltas.append(d)
    cost = np.array([r.activation_energy if r.needs_energy else 0.0 for r in rnet.reactions])
    gated = np.array([r.needs_energy for r in rnet.reactions])
    t, spent = 0.0, 0.0
    times, rows, fired = [0.0], [counts.copy()], [-1]
    supply = rnet.energy_supply
    for _ in range(sim.max_events):
        a = propensities(rnet, counts, index)
        budget = supply * t - spent
        blocked = gated & (cost > budget + 1e-12)
        a_on = np.where(blocked, 0.0, a)
        # next moment a blocked reaction with positive propensity becomes affordable
        opens = math.inf
        if supply > 0 and np.any(blocked & (a > 0)):
            opens = (spent + cost[blocked & (a > 0)].min()) / supply
        dec = np.array([rate * counts[k] for k, rate in decay], dtype=float)
        total = a_on.sum() + dec.sum()
        wait = rng.exponential(1.0 / total) if total > 0 else math.inf
        if t + wait >= opens and opens < sim.horizon:
            t = opens
            continue
        if t + wait > sim.horizon:
            break
        t += wait
        pick = rng.random() * total
        acc = np.cumsum(np.concatenate([a_on, dec]))
        k = int(min(np.searchsorted(acc, pick, side="right"), len(acc) - 1))
        if k < len(a_on):
            counts += deltas[k]
            spent += cost[k]
            fired.append(k)
        else:
            counts[decay[k - len(a_on)][0]] -= 1
            fired.append(-2)
        for j, c in abundant:
            counts[j] = c
        times.append(t)
        rows.append(counts.copy())
    else:
        raise ContractError(f"event cap {sim.max_events} reached before the horizon")
    return ConcentrationTrace(ids, np.array(times), np.array(rows), np.array(fired), spent, sim.seed, sim.horizon)


# -- exact small-state oracle --------------------------------------------------


def markov_mean_counts(rnet: ReactionNetwork, horizon: float, max_states: int = 30) -> dict[str, float]:
    """Expected counts at ``horizon`` by solving the master equation exactly.

    States are enumerated by breadth-first search from the initial counts.
    Energy gating is not modelled, so every uphill activation energy must be 0.
    """
    from scipy.linalg import expm

    if any(r.needs_energy and r.activation_energy > 0 for r in rnet.reactions):
        raise ContractError("the exact solver needs zero activation energy on uphill reactions")
    if rnet.abundant_species or rnet.decay_rates:
        raise ContractError("the exact solver does not handle abundant species or decay")
    index = {s: k for k, s in enumerate(rnet.ids)}
    start = tuple(s.initial_count for s in rnet.species)
    deltas = []
    for r in rnet.reactions:
        d = [0] * len(start)
        for s in r.reactants:
            d[index[s]] -= 1
        for s in r.products:
            d[index[s]] += 1
        deltas.append(d)
    states, order = {start: 0}, [start]
    edges = []
    k = 0
    while k < len(order):
        st = order[k]
        a = propensities(rnet, np.array(st), index)
        for rate, d in zip(a, deltas):
            if rate <= 0:
                continue
            nxt = tuple(x + y for x, y in zip(st, d))
            if nxt not in states:
                states[nxt] = len(order)
                order.append(nxt)
                if len(order) > max_states:
                    raise ContractError(f"state space exceeds {max_states}")
            edges.append((states[st], states[nxt], rate))
        k += 1
    q = np.zeros((len(order), len(order)))
    for i, j, rate in edges:
        q[i, j] += rate
        q[i, i] -= rate
    p0 = np.zeros(len(order))
    p0[0] = 1.0
    p = p0 @ expm(q * horizon)
    mat = np.array(order, dtype=float)
    means = p @ mat
    return {s: float(means[index[s]]) for s in rnet.ids}


# -- persistence ---------------------------------------------------------------


@dataclass(frozen=True)
class PersistenceReport:
    seeds: tuple[int, ...]
    loop_survived: tuple[bool, ...]
    chain_survived: tuple[bool, ...]

    @property
    def loop_fraction(self) -> float:
        return sum(self.loop_survived) / len(self.seeds) if self.seeds else math.nan

    @property
    def chain_fraction(self) -> float:
        return sum(self.chain_survived) / len(self.seeds) if self.seeds else math.nan

    def rows(self) -> list[dict]:
        out = []
        for rep, (seed, lp, ch) in enumerate(zip(self.seeds, self.loop_survived, self.chain_survived)):
            out.append({"replicate": rep, "seed": seed, "loop_survived": int(lp), "chain_survived": int(ch)})
        return out


def chain_of(loop_net: ReactionNetwork) -> ReactionNetwork:
    """``loop_net`` without its closing (uphill) reaction."""
    ups = [k for k, r in enumerate(loop_net.reactions) if r.needs_energy]
    if len(ups) != 1:
        raise ContractError("loop network must have exactly one uphill reaction to open")
    return replace(loop_net, reactions=tuple(r for k, r in enumerate(loop_net.reactions) if k != ups[0]))


def _check_pair(loop_net: ReactionNetwork, chain_net: ReactionNetwork):
    if loop_net.species != chain_net.species or loop_net.abundant_species != chain_net.abundant_species:
        raise ContractError("loop and chain networks must share species")
    extra = list(loop_net.reactions)
    for r in chain_net.reactions:
        if r not in extra:
            raise ContractError("chain has a reaction the loop lacks")
        extra.remove(r)
    if len(extra) != 1 or not extra[0].needs_energy:
        raise ContractError("loop and chain must differ by exactly the closing uphill reaction")


def survives(rnet: ReactionNetwork, sim: ChemSimParams) -> bool:
    tracked = rnet.tracked()
    if sim.horizon == 0:
        counts = {s.id: s.initial_count for s in rnet.species}
        return all(counts[s] > 0 for s in tracked)
    final = simulate_reactions(rnet, sim).final()
    return all(final[s] > 0 for s in tracked)


def persistence_experiment(
    loop_net: ReactionNetwork, chain_net: ReactionNetwork, sim: ChemSimParams, replicates: int = 100
) -> PersistenceReport:
    """Fraction of seeds in which every tracked species is present at the horizon."""
    _check_pair(loop_net, chain_net)
    seeds = tuple(sim.seed + r for r in range(replicates))

    def one(seed):
        s = replace(sim, seed=seed)
        return survives(loop_net, s), survives(chain_net, s)

    res = ordered_map(one, seeds)
    return PersistenceReport(seeds, tuple(r[0] for r in res), tuple(r[1] for r in res))


# -- generator sets --------------------------------------------------------------


def cyclic_components(rnet: ReactionNetwork) -> list[frozenset]:
    g = species_graph(rnet)
    part = scc_of_graph(sorted(g), g)
    out = []
    for comp in part.components:
        if len(comp) > 1 or any(v in g[v] for v in comp):
            out.append(comp)
    return sorted(out, key=lambda c: sorted(c))


def generator_sets(rnet: ReactionNetwork, cap: int = 100) -> dict:
    """One species from each cyclic strongly connected component regenerates it."""
    comps = cyclic_components(rnet)
    choices = [sorted(c) for c in comps]
    total = math.prod(len(c) for c in choices) if choices else 0
    samples = [list(x) for x in itertools.islice(itertools.product(*choices), cap)] if choices else []
    return {
        "scc_partition": [sorted(c) for c in comps],
        "per_component_choices": [len(c) for c in choices],
        "total_count": total,
        "sample_generators": samples,
    }


def closure(rnet: ReactionNetwork, seed_set: Iterable[str]) -> set[str]:
    """Species producible from ``seed_set`` with all enzymes and abundant species available."""
    have = set(seed_set) | rnet.enzymes() | set(rnet.abundant_species)
    changed = True
    while changed:
        changed = False
        for r in rnet.reactions:
            if (r.enzyme is None or r.enzyme in have) and set(r.reactants) <= have and not set(r.products) <= have:
                have |= set(r.products)
                changed = True
    return have


def brute_force_generator_count(rnet: ReactionNetwork) -> int:
    """Count minimal seed sets whose closure covers every cyclic species."""
    comps = cyclic_components(rnet)
    target = set().union(*comps) if comps else set()
    cand = sorted(target)
    good = []
    for size in range(1, len(cand) + 1):
        for combo in itertools.combinations(cand, size):
            s = set(combo)
            if any(g <= s for g in good):
                continue
            if target <= closure(rnet, s):
                good.append(frozenset(s))
    return len(good)


def split_regeneration_test(
    rnet: ReactionNetwork,
    sim: ChemSimParams,
    seed: int = 0,
    split: Mapping[str, int] | None = None,
) -> dict:
    """Split tracked molecules into two parts and check each regrows every species.

    Each molecule goes to part A with probability 1/2 unless ``split`` gives
    part A's counts directly. Enzymes and abundant species are available to
    both parts. A part regenerates when every tracked species is present at
    some point before the horizon.
    """
    comps = cyclic_components(rnet)
    small = [sorted(c) for c in comps if len(c) < 2]
    if small:
        raise ContractError(f"cyclic components with fewer than two species cannot be split reliably: {small}")
    tracked = rnet.tracked()
    init = {s.id: s.initial_count for s in rnet.species}
    if split is None:
        rng = np.random.default_rng(seed)
        part_a = {s: int(rng.binomial(init[s], 0.5)) for s in tracked}
    else:
        part_a = {s: int(split.get(s, 0)) for s in tracked}
        if any(not 0 <= part_a[s] <= init[s] for s in tracked):
            raise ContractError("split counts must lie between 0 and the initial count")
    part_b = {s: init[s] - part_a[s] for s in tracked}
    out = {"part_a_counts": part_a, "part_b_counts": part_b}
    for name, counts in (("part_a", part_a), ("part_b", part_b)):
        trace = simulate_reactions(rnet.with_counts(counts), replace(sim, seed=sim.seed))
        seen = trace.ever_present()
        out[f"{name}_regenerates"] = all(seen[s] for s in tracked)
        out[f"{name}_covers_components"] = all(any(counts[s] > 0 for s in comp) for comp in comps)
    return out
