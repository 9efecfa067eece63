"""Fixed sets: loops that stay triggered across every variation of a stimulus."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .dynamics import DynParams, Stimulus, Trace, default_sustain_horizon, first_completion, loops_of, run, triggered_loops
from .errors import ContractError, PromotionError
from .network import LoopId, Network, loop_sort_key

DIRECT = "direct"
META = "meta"


@dataclass(frozen=True)
class StimulusFamily:
    average: Stimulus
    variations: tuple[Stimulus, ...]
    label: str = "family"

    def __post_init__(self):
        object.__setattr__(self, "variations", tuple(self.variations))

    @property
    def scenarios(self) -> tuple[Stimulus, ...]:
        return (self.average,) + self.variations

    @classmethod
    def from_dict(cls, raw: Mapping) -> "StimulusFamily":
        return cls(
            Stimulus.from_dict(raw["average"]),
            tuple(Stimulus.from_dict(v) for v in raw.get("variations", ())),
            raw.get("label", "family"),
        )


@dataclass(frozen=True)
class FixedSet:
    id: str
    label: str
    loop_ids: frozenset
    kind: str = DIRECT
    parents: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "loop_ids", frozenset(tuple(x) for x in self.loop_ids))
        object.__setattr__(self, "parents", frozenset(self.parents))
        if not self.loop_ids:
            raise ContractError(f"fixed set {self.id} has no loops")
        if self.kind not in (DIRECT, META):
            raise ContractError(f"unknown fixed-set kind {self.kind!r}")
        if (self.kind == META) != bool(self.parents):
            raise ContractError(f"fixed set {self.id}: kind meta iff parents nonempty")

    def sorted_loops(self) -> list[LoopId]:
        return sorted(self.loop_ids, key=loop_sort_key)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "kind": self.kind,
            "loops": [list(lp) for lp in self.sorted_loops()],
            "parents": sorted(self.parents),
        }


@dataclass(frozen=True)
class FixedSetRegistry:
    entries: Mapping[str, FixedSet] = field(default_factory=dict)
    links: tuple[tuple[str, str, float], ...] = ()
    candidates: Mapping[str, tuple[LoopId, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for a, b, _ in self.links:
            if a not in self.entries or b not in self.entries:
                raise ContractError(f"link {a}-{b} references an unregistered fixed set")

    def __contains__(self, fs_id) -> bool:
        return fs_id in self.entries

    def __getitem__(self, fs_id) -> FixedSet:
        try:
            return self.entries[fs_id]
        except KeyError:
            raise ContractError(f"unknown fixed set {fs_id}") from None

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[str]:
        return sorted(self.entries)

    def meta_ids(self) -> list[str]:
        return [k for k in self.ids() if self.entries[k].kind == META]

    def all_loops(self) -> set[LoopId]:
        return set().union(*(fs.loop_ids for fs in self.entries.values())) if self.entries else set()

    def with_entry(self, fs: FixedSet) -> "FixedSetRegistry":
        if fs.id in self.entries:
            raise ContractError(f"fixed set id {fs.id} already registered")
        for p in fs.parents:
            if p not in self.entries:
                raise ContractError(f"parent {p} of {fs.id} is not registered")
        return FixedSetRegistry({**self.entries, fs.id: fs}, self.links, self.candidates)

    def with_link(self, a: str, b: str, weight: float) -> "FixedSetRegistry":
        a, b = sorted((a, b))  # links are undirected
        return FixedSetRegistry(dict(self.entries), self.links + ((a, b, weight),), self.candidates)

    def with_candidates(self, fs_id: str, loop_ids: Sequence[LoopId]) -> "FixedSetRegistry":
        merged = tuple(self.candidates.get(fs_id, ())) + tuple(loop_ids)
        return FixedSetRegistry(dict(self.entries), self.links, {**self.candidates, fs_id: merged})

    def to_dict(self) -> dict:
        return {
            "fixed_sets": [self.entries[k].to_dict() for k in self.ids()],
            "links": [{"a": a, "b": b, "weight": w} for a, b, w in self.links],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, raw: Mapping) -> "FixedSetRegistry":
        entries = {}
        for item in raw.get("fixed_sets", ()):
            fs = FixedSet(
                item["id"],
                item.get("label", item["id"]),
                frozenset(tuple(lp) for lp in item["loops"]),
                item.get("kind", DIRECT),
                frozenset(item.get("parents", ())),
            )
            entries[fs.id] = fs
        links = tuple((lk["a"], lk["b"], float(lk["weight"])) for lk in raw.get("links", ()))
        return cls(entries, links)


def _horizon(net: Network, stimuli: Sequence[Stimulus], params: DynParams) -> int:
    last = max((s.offset for s in stimuli), default=0)
    return last + default_sustain_horizon(net, params)


def run_scenario(net: Network, stimulus: Stimulus, params: DynParams, horizon: int | None = None) -> Trace:
    return run(net, [stimulus], params, horizon or _horizon(net, [stimulus], params))


def triggered_by(net: Network, stimulus: Stimulus, params: DynParams, horizon: int | None = None) -> set[LoopId]:
    trace = run_scenario(net, stimulus, params, horizon)
    return triggered_loops(trace, net, trace.loops, params)


def extract_fixed_set(
    net: Network,
    family: StimulusFamily,
    params: DynParams,
    quorum: float = 1.0,
    fs_id: str | None = None,
    horizon: int | None = None,
) -> FixedSet | None:
    """Loops triggered in at least ``quorum`` of the family's runs.

    Runs once for the average scenario and once per variation. ``quorum=1``
    is the plain intersection. Returns None when no loop qualifies.
    """
    if not family.variations:
        raise ContractError("stimulus family needs at least one variation")
    if not 0.0 < quorum <= 1.0:
        raise ContractError("quorum must lie in (0, 1]")
    runs = [triggered_by(net, s, params, horizon) for s in family.scenarios]
    counts: dict[LoopId, int] = {}
    for loops in runs:
        for lp in loops:
            counts[lp] = counts.get(lp, 0) + 1
    need = quorum * len(runs)
    chosen = frozenset(lp for lp, c in counts.items() if c >= need - 1e-12)
    if not chosen:
        return None
    return FixedSet(fs_id or family.label, family.label, chosen)


def promote_meta_fixed_set(
    registry: FixedSetRegistry,
    parent_ids: Iterable[str],
    net: Network,
    family: StimulusFamily,
    params: DynParams,
    fs_id: str | None = None,
    horizon: int | None = None,
) -> FixedSet:
    """Build a meta fixed set from loops that start strictly after their parents.

    In every run of the family at least one parent loop must complete a
    traversal. A loop counts as downstream when it shares no node with a
    parent loop and its first traversal completes after the earliest parent
    completion. The result is the intersection of downstream loops over all
    runs.
    """
    parent_ids = frozenset(parent_ids)
    if not parent_ids:
        raise ContractError("meta promotion needs at least one parent")
    parent_loops: set[LoopId] = set()
    for pid in parent_ids:
        parent_loops |= registry[pid].loop_ids
    if not family.variations:
        raise ContractError("stimulus family needs at least one variation")
    parent_nodes = set().union(*parent_loops)
    loops = {lp.id: lp for lp in loops_of(net, params.max_loop_len)}
    downstream_sets = []
    for k, stim in enumerate(family.scenarios):
        trace = run_scenario(net, stim, params, horizon)
        triggered = triggered_loops(trace, net, trace.loops, params)
        fired_parents = [lp for lp in triggered if lp in parent_loops]
        if not fired_parents:
            name = "average" if k == 0 else f"variation {k}"
            raise PromotionError(f"no parent loop triggered in run {k} ({name}) of {family.label}")
        parent_done = min(first_completion(trace, loops[lp], params) for lp in fired_parents)
        downstream = {
            lp
            for lp in triggered
            if parent_nodes.isdisjoint(lp) and first_completion(trace, loops[lp], params) > parent_done
        }
        downstream_sets.append(downstream)
    common = frozenset(set.intersection(*downstream_sets))
    if not common:
        raise PromotionError(f"no loop is downstream of {sorted(parent_ids)} in every run of {family.label}")
    return FixedSet(fs_id or family.label, family.label, common, META, parent_ids)


def overlap(fs: FixedSet, triggered: set[LoopId]) -> float:
    return len(fs.loop_ids & triggered) / len(fs.loop_ids)


def classify_stimulus(
    net: Network,
    registry: FixedSetRegistry,
    stimulus: Stimulus,
    params: DynParams,
    horizon: int | None = None,
    kind: str | None = None,
) -> list[tuple[str, float]]:
    """Registered fixed sets ranked by the fraction of their loops ``stimulus`` triggers.

    ``kind`` restricts the ranking to direct or meta sets.
    """
    if not len(registry):
        raise ContractError("registry is empty")
    triggered = triggered_by(net, stimulus, params, horizon)
    ids = [fid for fid in registry.ids() if kind is None or registry[fid].kind == kind]
    scored = [(fid, overlap(registry[fid], triggered)) for fid in ids]
    return sorted(scored, key=lambda x: (-x[1], x[0]))
