"""Activation-rate bands and detection of a self-sustaining membrane of fixed sets.

Rates count fixed-set activation events in a trailing window of
``rate_window`` steps (100 by default, read as one "second"). A fixed set
fires at step ``t`` when one of its loops completes a traversal at ``t`` while
all of its loops are active.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dynamics import DynParams, Stimulus, Trace, run, traversals
from .errors import ContractError
from .fixedsets import META, FixedSetRegistry
from .network import Network

BANDS = ("delta", "theta", "alpha", "beta", "gamma")


@dataclass(frozen=True)
class BandThresholds:
    delta_max: float = 4.0
    theta_range: tuple[float, float] = (4.0, 8.0)
    alpha_range: tuple[float, float] = (8.0, 12.0)
    beta_range: tuple[float, float] = (12.0, 30.0)
    gamma_min: float = 30.0
    rate_window: int = 100

    def __post_init__(self):
        for name in ("theta_range", "alpha_range", "beta_range"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        edges = [self.delta_max, *self.theta_range, *self.alpha_range, *self.beta_range, self.gamma_min]
        if any(b < a for a, b in zip(edges, edges[1:])):
            raise ContractError("band thresholds must be ordered delta < theta < alpha < beta < gamma")
        if (self.theta_range[0] != self.delta_max or self.alpha_range[0] != self.theta_range[1]
                or self.beta_range[0] != self.alpha_range[1] or self.gamma_min != self.beta_range[1]):
            raise ContractError("band intervals must be contiguous")
        if self.rate_window < 1:
            raise ContractError("rate_window must be >= 1")

    @classmethod
    def from_dict(cls, raw: Mapping | None) -> "BandThresholds":
        return cls(**dict(raw or {}))


def band_classify(rate: float, thr: BandThresholds = BandThresholds()) -> str:
    """Band for ``rate``; gamma needs a rate strictly above ``gamma_min``."""
    if rate < 0:
        raise ContractError("rate must be >= 0")
    if rate > thr.gamma_min:
        return "gamma"
    if rate >= thr.beta_range[0]:
        return "beta"
    if rate >= thr.alpha_range[0]:
        return "alpha"
    if rate >= thr.theta_range[0]:
        return "theta"
    return "delta"


def _loop_index(trace: Trace):
    return {lp.id: lp for lp in trace.loops}


def set_activity(trace: Trace, registry: FixedSetRegistry, params: DynParams) -> tuple[dict, dict]:
    """Per fixed set: boolean activity per step and the steps it fires."""
    loops = _loop_index(trace)
    times = trace.fire_times()
    horizon = len(trace.firings)
    active, events = {}, {}
    for fid in registry.ids():
        lids = registry[fid].loop_ids
        missing = [lp for lp in lids if lp not in loops]
        if missing:
            raise ContractError(f"fixed set {fid} names loops absent from the traced network")
        on = np.ones(horizon, dtype=bool)
        for lp in lids:
            on &= np.fromiter((lp in la for la in trace.loop_activations), bool, horizon)
        done = np.zeros(horizon, dtype=bool)
        for lp in lids:
            loop = loops[lp]
            for _, end in traversals(times, loop.nodes, params.window_for(loop.length)):
                done[end] = True
        active[fid] = on
        events[fid] = np.flatnonzero(done & on)
    return active, events


def _trailing_count(event_steps: np.ndarray, horizon: int, window: int) -> np.ndarray:
    marks = np.zeros(horizon + 1)
    np.add.at(marks, event_steps + 1, 1)
    csum = np.cumsum(marks)
    idx = np.arange(horizon)
    lo = np.maximum(idx - window + 1, 0)
    return csum[idx + 1] - csum[lo]


def rate_series(trace: Trace, registry: FixedSetRegistry, params: DynParams, window: int) -> np.ndarray:
    """Fixed-set activation events in the ``window`` steps ending at each step."""
    horizon = len(trace.firings)
    _, events = set_activity(trace, registry, params)
    allev = np.concatenate([e for e in events.values()] or [np.zeros(0, int)]).astype(int)
    return _trailing_count(allev, horizon, window)


def activation_rate(trace: Trace, registry: FixedSetRegistry, window: int, params: DynParams = DynParams()) -> list[dict]:
    """Rates over consecutive, non-overlapping windows.

    Each entry holds the window start, the activation-event ``rate`` and the
    number of ``distinct`` fixed sets that fired inside the window.
    """
    if window < 1:
        raise ContractError("window must be >= 1")
    horizon = len(trace.firings)
    _, events = set_activity(trace, registry, params)
    out = []
    for start in range(0, horizon, window):
        stop = start + window
        per = {fid: int(((e >= start) & (e < stop)).sum()) for fid, e in events.items()}
        out.append({"start": start, "rate": sum(per.values()), "distinct": sum(1 for v in per.values() if v)})
    return out


def closed_loop_series(trace: Trace, registry: FixedSetRegistry, params: DynParams, window: int) -> np.ndarray:
    """Step ``t`` is closed when a routed input fired at some ``t'`` in the
    trailing window and a fixed set fired in ``(t', t]``."""
    horizon = len(trace.firings)
    _, events = set_activity(trace, registry, params)
    fs_fire = np.zeros(horizon, dtype=bool)
    for e in events.values():
        fs_fire[e] = True
    routed_fire = [t for t in range(horizon) if trace.routed and trace.routed[t] & trace.firings[t]]
    out = np.zeros(horizon, dtype=bool)
    # latest routed input firing strictly before a fixed-set event, then extend by window
    last_routed = -1
    last_closing = None  # t' of the most recent (routed t', fs event > t') pairing
    r = 0
    for t in range(horizon):
        if fs_fire[t] and last_routed >= 0:
            last_closing = last_routed
        if last_closing is not None and t - last_closing < window:
            out[t] = True
        while r < len(routed_fire) and routed_fire[r] <= t:
            last_routed = routed_fire[r]
            r += 1
    return out


@dataclass(frozen=True)
class Membrane:
    active_sets: frozenset
    rate: float
    band: str
    sustained_for: int
    closed_loop: bool
    start: int = 0

    def to_dict(self) -> dict:
        return {
            "active_sets": sorted(self.active_sets),
            "rate": self.rate,
            "band": self.band,
            "sustained_for": self.sustained_for,
            "closed_loop": self.closed_loop,
        }


@dataclass(frozen=True)
class MembraneAnalysis:
    """Per-step condition masks behind a membrane decision."""

    gamma: np.ndarray
    closed: np.ndarray
    meta: np.ndarray
    rates: np.ndarray
    active: Mapping[str, np.ndarray] = field(repr=False)
    min_sustain: int = 0


def default_min_sustain(registry: FixedSetRegistry) -> int:
    longest = max((len(lp) for lp in registry.all_loops()), default=1)
    return 10 * longest


def default_horizon(drive: Sequence[Stimulus]) -> int:
    return max((s.offset for s in drive), default=0) + 300


def longest_run(mask: np.ndarray) -> tuple[int, int]:
    """(start, length) of the longest run of True values; (0, 0) if none."""
    best = (0, 0)
    start = None
    for t, v in enumerate(list(mask) + [False]):
        if v and start is None:
            start = t
        elif not v and start is not None:
            if t - start > best[1]:
                best = (start, t - start)
            start = None
    return best


def analyse(
    net: Network,
    registry: FixedSetRegistry,
    drive: Sequence[Stimulus],
    params: DynParams,
    thr: BandThresholds = BandThresholds(),
    min_sustain: int | None = None,
    horizon: int | None = None,
) -> MembraneAnalysis:
    horizon = horizon or default_horizon(drive)
    trace = run(net, list(drive), params, horizon)
    if min_sustain is None:
        min_sustain = default_min_sustain(registry)
    if not len(registry):
        zeros = np.zeros(horizon, dtype=bool)
        return MembraneAnalysis(zeros, zeros, zeros, np.zeros(horizon), {}, min_sustain)
    active, _ = set_activity(trace, registry, params)
    rates = rate_series(trace, registry, params, thr.rate_window)
    gamma = rates > thr.gamma_min
    closed = closed_loop_series(trace, registry, params, thr.rate_window)
    meta = np.zeros(horizon, dtype=bool)
    for fid in registry.meta_ids():
        meta |= active[fid]
    return MembraneAnalysis(gamma, closed, meta, rates, active, min_sustain)


def membrane_from(analysis: MembraneAnalysis, thr: BandThresholds) -> Membrane | None:
    start, length = longest_run(analysis.gamma & analysis.closed & analysis.meta)
    if length == 0 or length < analysis.min_sustain:
        return None
    span = slice(start, start + length)
    rate = float(analysis.rates[span].min())
    sets = frozenset(fid for fid, on in analysis.active.items() if on[span].any())
    return Membrane(sets, rate, band_classify(rate, thr), length, True, start)


def detect_membrane(
    net: Network,
    registry: FixedSetRegistry,
    drive: Sequence[Stimulus],
    params: DynParams,
    thr: BandThresholds = BandThresholds(),
    min_sustain: int | None = None,
    horizon: int | None = None,
) -> Membrane | None:
    """The longest stretch where the rate is gamma, the sensorimotor loop is
    closed and a meta fixed set is active, if it lasts ``min_sustain`` steps.

    ``min_sustain`` defaults to 10 times the longest registered loop.
    """
    return membrane_from(analyse(net, registry, drive, params, thr, min_sustain, horizon), thr)


@dataclass(frozen=True)
class ConsciousnessVerdict:
    value: bool
    membrane: Membrane | None
    failed: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.value

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "membrane": None if self.membrane is None else self.membrane.to_dict(),
            "failed": list(self.failed),
        }


def is_minimally_conscious(
    net: Network,
    registry: FixedSetRegistry,
    drive: Sequence[Stimulus],
    params: DynParams,
    thr: BandThresholds = BandThresholds(),
    min_sustain: int | None = None,
    horizon: int | None = None,
) -> ConsciousnessVerdict:
    """True exactly when :func:`detect_membrane` finds a membrane.

    Otherwise ``failed`` names each condition whose own longest run falls short
    of ``min_sustain``: ``a`` gamma band, ``b`` closed loop, ``c`` active meta
    set. If each holds alone but never together long enough, it is ``joint``.
    """
    analysis = analyse(net, registry, drive, params, thr, min_sustain, horizon)
    membrane = membrane_from(analysis, thr)
    if membrane is not None:
        return ConsciousnessVerdict(True, membrane, ())
    need = max(analysis.min_sustain, 1)
    failed = tuple(
        name
        for name, mask in (("a", analysis.gamma), ("b", analysis.closed), ("c", analysis.meta))
        if longest_run(mask)[1] < need
    )
    return ConsciousnessVerdict(False, None, failed or ("joint",))
