"""Physical looped tracks: blueprints, rewrite operators, a 1-D ball simulator
and the stable-looped-system test.

Every circuit is a closed track of arc length ``CIRCUMFERENCE`` split evenly
among its features. Feature profiles, with local coordinate ``x`` in [0, 1]:

* hill ``h * sin(pi x)^2``
* valley ``-d * sin(pi x)^2``
* loop: a valley whose bottom opens onto a flat ring at level ``-d``

Feature boundaries (rims) sit at level 0. Junctions and channels connect rims.
A ball moving forward across a loop's bottom enters the ring. At each
completed lap it leaves only if its kinetic energy is at least the depth ``d``.

Motion is energy-exact: a move from ``s`` to ``s'`` sets
``KE' = KE + U(s) - U(s') - mu |s' - s|``. A move that would make KE negative
is cut at the turning point, found by bisection.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numba
import numpy as np

from .errors import ContractError, SchemaError
from .network import build_network, enumerate_simple_cycles

CIRCUMFERENCE = 4.0
LUBRICATED = 0.002
KINDS = ("hill", "valley", "loop")
HILL, VALLEY, LOOP = 0, 1, 2


@dataclass(frozen=True)
class Feature:
    kind: str
    value: float
    loop_friction: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown feature kind {self.kind!r}")
        if not self.value > 0:
            raise SchemaError("feature heights and depths must be > 0")
        if self.loop_friction < 0:
            raise SchemaError("loop_friction must be >= 0")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "loop_friction": self.loop_friction}


@dataclass(frozen=True)
class Connection:
    """A junction (shared rim) or channel (flat transfer track) between rims.

    ``a`` and ``b`` are (circuit, feature index) pairs naming the rim at the
    start of that feature.
    """

    kind: str
    a: tuple[int, int]
    b: tuple[int, int]
    length: float = 0.0

    def __post_init__(self):
        if self.kind not in ("junction", "channel"):
            raise SchemaError(f"unknown connection kind {self.kind!r}")
        object.__setattr__(self, "a", tuple(self.a))
        object.__setattr__(self, "b", tuple(self.b))
        if self.kind == "channel" and not self.length > 0:
            raise SchemaError("channel length must be > 0")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "a": list(self.a), "b": list(self.b), "length": self.length}


@dataclass(frozen=True)
class TrackBlueprint:
    segments: tuple[Feature, ...]
    base_friction: float = 0.05
    n_balls: int = 4
    extra_circuits: tuple[tuple[Feature, ...], ...] = ()
    connections: tuple[Connection, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "extra_circuits", tuple(tuple(c) for c in self.extra_circuits))
        object.__setattr__(self, "connections", tuple(self.connections))
        if not self.segments or any(not c for c in self.extra_circuits):
            raise SchemaError("every circuit needs at least one feature")
        if self.base_friction < 0:
            raise SchemaError("base_friction must be >= 0")
        if self.n_balls < 0:
            raise SchemaError("n_balls must be >= 0")
        circuits = self.circuits
        for con in self.connections:
            for c, i in (con.a, con.b):
                if not (0 <= c < len(circuits) and 0 <= i < len(circuits[c])):
                    raise SchemaError(f"connection endpoint ({c}, {i}) does not exist")

    @property
    def circuits(self) -> tuple[tuple[Feature, ...], ...]:
        return (self.segments,) + self.extra_circuits

    def to_dict(self) -> dict:
        out = {
            "segments": [f.to_dict() for f in self.segments],
            "base_friction": self.base_friction,
            "n_balls": self.n_balls,
        }
        if self.extra_circuits:
            out["circuits"] = [[f.to_dict() for f in c] for c in self.extra_circuits]
        if self.connections:
            out["connections"] = [c.to_dict() for c in self.connections]
        return out

    @classmethod
    def from_dict(cls, raw: Mapping) -> "TrackBlueprint":
        def feat(f):
            return Feature(f["kind"], float(f.get("value", f.get("height_or_depth", 0))), float(f.get("loop_friction", 0.0)))

        try:
            return cls(
                tuple(feat(f) for f in raw["segments"]),
                float(raw.get("base_friction", 0.05)),
                int(raw.get("n_balls", 4)),
                tuple(tuple(feat(f) for f in c) for c in raw.get("circuits", ())),
                tuple(Connection(c["kind"], c["a"], c["b"], float(c.get("length", 0.0))) for c in raw.get("connections", ())),
            )
        except KeyError as exc:
            raise SchemaError(f"blueprint missing field {exc.args[0]}") from None


def load_blueprint(path) -> TrackBlueprint:
    with open(path, encoding="utf-8") as fh:
        return TrackBlueprint.from_dict(json.load(fh))


# -- rewrite operators -------------------------------------------------------


def add_valleys(bp: TrackBlueprint, k: int, depth: float | None = None) -> TrackBlueprint:
    """Insert ``k`` valleys into the main circuit, spread over the gaps after
    each original feature. ``depth`` defaults to a quarter of the largest
    feature value."""
    if k < 1:
        raise ContractError("k must be >= 1")
    depth = depth if depth is not None else max(f.value for f in bp.segments) / 4
    n = len(bp.segments)
    per_gap = [(k + g) // n for g in range(n)][::-1]  # counts sum to k, larger gaps first
    out, remap = [], {}
    for g, f in enumerate(bp.segments):
        remap[g] = len(out)
        out.append(f)
        out.extend(Feature("valley", depth) for _ in range(per_gap[g]))
    return _with_main(bp, out, remap)


def valley_to_loop(bp: TrackBlueprint, index: int, loop_friction: float = LUBRICATED) -> TrackBlueprint:
    if not 0 <= index < len(bp.segments):
        raise ContractError(f"no feature at index {index}")
    f = bp.segments[index]
    if f.kind != "valley":
        raise ContractError(f"feature {index} is a {f.kind}, not a valley")
    segs = list(bp.segments)
    segs[index] = Feature("loop", f.value, loop_friction)
    return replace(bp, segments=tuple(segs))


def all_valleys_to_loops(bp: TrackBlueprint, loop_friction: float = LUBRICATED) -> TrackBlueprint:
    for i, f in enumerate(bp.segments):
        if f.kind == "valley":
            bp = valley_to_loop(bp, i, loop_friction)
    return bp


def _with_main(bp, segments, remap) -> TrackBlueprint:
    def fix(end):
        c, i = end
        return (c, remap[i]) if c == 0 else end

    cons = tuple(Connection(c.kind, fix(c.a), fix(c.b), c.length) for c in bp.connections)
    return replace(bp, segments=tuple(segments), connections=cons)


def _combine(a: TrackBlueprint, b: TrackBlueprint, new: list[Connection]) -> TrackBlueprint:
    if a is b or a == b:
        raise ContractError("cannot combine a blueprint with itself")
    shift = len(a.circuits)
    moved = tuple(
        Connection(c.kind, (c.a[0] + shift, c.a[1]), (c.b[0] + shift, c.b[1]), c.length) for c in b.connections
    )
    return TrackBlueprint(
        a.segments,
        a.base_friction,
        a.n_balls + b.n_balls,
        a.extra_circuits + b.circuits,
        a.connections + moved + tuple(new),
    )


def _check_index(bp, i, name):
    if not 0 <= i < len(bp.segments):
        raise ContractError(f"{name} index {i} out of range")


def merge_blueprints(a: TrackBlueprint, b: TrackBlueprint, junctions: Sequence[tuple[int, int]]) -> TrackBlueprint:
    """Join main circuits of ``a`` and ``b`` at shared rims ``(index in a, index in b)``."""
    if not junctions:
        raise ContractError("merge needs at least one junction")
    shift = len(a.circuits)
    new = []
    for ia, ib in junctions:
        _check_index(a, ia, "junction")
        _check_index(b, ib, "junction")
        new.append(Connection("junction", (0, ia), (shift, ib)))
    return _combine(a, b, new)


def link_blueprints(a: TrackBlueprint, b: TrackBlueprint, channel: tuple[int, int, float]) -> TrackBlueprint:
    """Connect rim ``ia`` of ``a`` and rim ``ib`` of ``b`` with a pair of flat
    channels, one each way, so both circuits keep a forward flow."""
    ia, ib, length = channel
    _check_index(a, ia, "channel")
    _check_index(b, ib, "channel")
    shift = len(a.circuits)
    return _combine(
        a, b, [Connection("channel", (0, ia), (shift, ib), length), Connection("channel", (shift, ib), (0, ia), length)]
    )


# -- structure ---------------------------------------------------------------


def segment_graph(bp: TrackBlueprint) -> dict:
    """Track as a directed graph: rims and loop bottoms are nodes, track pieces edges.

    Junctions identify rims; channels add an intermediate node.
    """
    parent = {}

    def find(x):
        while parent.get(x, x) != x:
            x = parent[x]
        return x

    for con in bp.connections:
        if con.kind == "junction":
            ra, rb = find(f"c{con.a[0]}r{con.a[1]}"), find(f"c{con.b[0]}r{con.b[1]}")
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    nodes, edges = set(), set()
    for c, feats in enumerate(bp.circuits):
        n = len(feats)
        for i, f in enumerate(feats):
            start, end = find(f"c{c}r{i}"), find(f"c{c}r{(i + 1) % n}")
            nodes |= {start, end}
            if f.kind == "loop":
                mid, ring = f"c{c}m{i}", f"c{c}ring{i}"
                nodes |= {mid, ring}
                edges |= {(start, mid), (mid, end), (mid, ring), (ring, mid)}
            elif start == end:
                mid = f"c{c}m{i}"
                nodes.add(mid)
                edges |= {(start, mid), (mid, end)}
            else:
                edges.add((start, end))
    for k, con in enumerate(bp.connections):
        if con.kind == "channel":
            ch = f"ch{k}"
            src, dst = find(f"c{con.a[0]}r{con.a[1]}"), find(f"c{con.b[0]}r{con.b[1]}")
            nodes |= {ch, src, dst}
            edges |= {(src, ch), (ch, dst)}
    return {"nodes": sorted(nodes), "edges": sorted(edges)}


def cycle_count(bp: TrackBlueprint) -> int:
    g = segment_graph(bp)
    net = build_network({"nodes": g["nodes"], "edges": [{"src": s, "dst": d} for s, d in g["edges"]]})
    return len(enumerate_simple_cycles(net, max_len=max(2, len(g["nodes"]))))


# -- simulation --------------------------------------------------------------


@dataclass(frozen=True)
class TrackSimParams:
    step_dt: float = 0.01
    energy_burst_rate: float = 0.2
    burst_magnitude: float = 0.4
    horizon: float = 300.0
    seed: int = 0
    initial_energy: float = 1.2
    ring_length: float = 0.5
    ball_radius: float = 0.02
    sample_every: int = 100
    initial_positions: tuple | None = None  # main-circuit arc positions, one per ball

    def __post_init__(self):
        if not self.horizon > 0:
            raise ContractError("horizon must be > 0")
        if not self.step_dt > 0:
            raise ContractError("step_dt must be > 0")
        if self.energy_burst_rate < 0 or self.burst_magnitude < 0:
            raise ContractError("burst rate and magnitude must be >= 0")
        if self.initial_positions is not None:
            object.__setattr__(self, "initial_positions", tuple(float(x) for x in self.initial_positions))

    @classmethod
    def from_dict(cls, raw: Mapping | None) -> "TrackSimParams":
        return cls(**dict(raw or {}))


@dataclass(frozen=True)
class TrackTrace:
    passages: np.ndarray  # rows: time, ball, direction (+1/-1) at the marker
    transfers: np.ndarray  # rows: time, ball, from circuit, to circuit
    samples: np.ndarray  # rows: time, ball, circuit, location, position, speed, energy
    audit_error: float  # max |energy balance residual| over all steps
    energy_series: np.ndarray  # rows: time, mechanical energy, friction loss, collision loss, burst input
    horizon: float
    seed: int
    final_ke: np.ndarray
    bursts: int

    def to_csv(self) -> str:
        lines = ["time,ball,position,speed,energy"]
        for t, ball, _c, _loc, pos, speed, energy in self.samples:
            lines.append(f"{t:.9g},{int(ball)},{pos:.9g},{speed:.9g},{energy:.9g}")
        return "\n".join(lines) + "\n"


@numba.njit(cache=True)
def _pot(kind, val, lf, s):
    n = kind.shape[0]
    i = int(s // lf)
    if i >= n:
        i = n - 1
    if i < 0:
        i = 0
    x = (s - i * lf) / lf
    sn = math.sin(math.pi * x)
    if kind[i] == 0:
        return val[i] * sn * sn
    return -val[i] * sn * sn


@numba.njit(cache=True)
def _slope(kind, val, lf, s):
    n = kind.shape[0]
    i = int(s // lf)
    if i >= n:
        i = n - 1
    if i < 0:
        i = 0
    x = (s - i * lf) / lf
    g = val[i] * math.pi * math.sin(2.0 * math.pi * x) / lf
    if kind[i] == 0:
        return g
    return -g


@numba.njit(cache=True)
def _wrap(s, circ):
    s = s % circ
    if s < 0.0:
        s += circ
    if s >= circ:
        s -= circ
    return s


@numba.njit(cache=True, nogil=True)
def _simulate(
    kinds, vals, lfrics, nfeat,
    tr_from_c, tr_from_p, tr_kind, tr_to_c, tr_to_p, tr_len,
    mu, ring_len, radius, init_pos, init_ke,
    dt, n_steps, burst_rate, burst_mag, seed, sample_every, max_events,
):
    np.random.seed(seed)
    circ = 4.0
    n_balls = init_pos.shape[0]
    ntr = tr_from_c.shape[0]
    lf = np.empty(nfeat.shape[0])
    for c in range(nfeat.shape[0]):
        lf[c] = circ / nfeat[c]

    loc = np.zeros(n_balls, np.int64)  # 0 main, 1 ring, 2 channel
    cc = np.zeros(n_balls, np.int64)
    pos = init_pos.copy()
    ke = np.full(n_balls, init_ke)
    dirn = np.ones(n_balls, np.int64)
    idx = np.zeros(n_balls, np.int64)

    passages = np.zeros((max_events, 3))
    n_pass = 0
    transfers = np.zeros((max_events, 4))
    n_trans = 0
    n_samples = (n_steps // sample_every + 1) * n_balls
    samples = np.zeros((n_samples, 7))
    n_samp = 0
    n_series = n_steps // sample_every + 1
    series = np.zeros((n_series, 5))
    n_ser = 0

    fric = 0.0
    coll = 0.0
    burst_in = 0.0
    n_bursts = 0

    e0 = 0.0
    for b in range(n_balls):
        e0 += ke[b] + _pot(kinds[0, : nfeat[0]], vals[0, : nfeat[0]], lf[0], pos[b])
    worst = 0.0

    for step in range(n_steps + 1):
        t = step * dt
        # bookkeeping and sampling at the start of each step
        mech = 0.0
        for b in range(n_balls):
            c = cc[b]
            if loc[b] == 0:
                u = _pot(kinds[c, : nfeat[c]], vals[c, : nfeat[c]], lf[c], pos[b])
            elif loc[b] == 1:
                u = -vals[c, idx[b]]
            else:
                u = 0.0
            mech += ke[b] + u
            if step % sample_every == 0 and n_samp < n_samples:
                samples[n_samp, 0] = t
                samples[n_samp, 1] = b
                samples[n_samp, 2] = c
                samples[n_samp, 3] = loc[b]
                samples[n_samp, 4] = pos[b]
                samples[n_samp, 5] = math.sqrt(2.0 * ke[b])
                samples[n_samp, 6] = ke[b] + u
                n_samp += 1
        resid = abs(mech + fric + coll - burst_in - e0)
        if resid > worst:
            worst = resid
        if step % sample_every == 0 and n_ser < n_series:
            series[n_ser, 0] = t
            series[n_ser, 1] = mech
            series[n_ser, 2] = fric
            series[n_ser, 3] = coll
            series[n_ser, 4] = burst_in
            n_ser += 1
        if step == n_steps:
            break

        # random energy bursts
        if burst_rate > 0.0 and n_balls > 0:
            k = np.random.poisson(burst_rate * dt)
            for _ in range(k):
                b = np.random.randint(0, n_balls)
                if ke[b] <= 0.0 and loc[b] == 0:
                    dirn[b] = 1
                ke[b] += burst_mag
                burst_in += burst_mag
                n_bursts += 1

        for b in range(n_balls):
            c = cc[b]
            kd = kinds[c, : nfeat[c]]
            vl = vals[c, : nfeat[c]]
            L = lf[c]
            if loc[b] == 0:
                s = pos[b]
                sl = _slope(kd, vl, L, s)
                if ke[b] <= 1e-300:
                    ke[b] = 0.0
                    if abs(sl) > mu:
                        dirn[b] = -1 if sl > 0 else 1
                    else:
                        continue
                d = dirn[b]
                v = math.sqrt(2.0 * ke[b])
                a_dir = -d * sl - mu
                dist = v * dt + 0.5 * a_dir * dt * dt
                if dist <= 0.0:
                    dist = v * dt
                if dist <= 0.0:
                    continue
                remaining = dist
                while remaining > 1e-15 and loc[b] == 0:
                    c = cc[b]
                    kd = kinds[c, : nfeat[c]]
                    vl = vals[c, : nfeat[c]]
                    L = lf[c]
                    s = pos[b]
                    d = dirn[b]
                    # nearest event point ahead
                    best = 1e300
                    if c == 0:
                        gap = (-s) % circ if d > 0 else s
                        if gap <= 1e-12:
                            gap = circ
                        if gap < best:
                            best = gap
                    if d > 0:
                        for i in range(nfeat[c]):
                            if kd[i] == 2:
                                gap = ((i + 0.5) * L - s) % circ
                                if gap > 1e-12 and gap < best:
                                    best = gap
                        for q in range(ntr):
                            if tr_from_c[q] == c:
                                gap = (tr_from_p[q] * L - s) % circ
                                if gap > 1e-12 and gap < best:
                                    best = gap
                    step_len = remaining if remaining < best else best
                    hit = step_len == best
                    target = s + d * step_len
                    u0 = _pot(kd, vl, L, s)
                    ke_t = ke[b] + u0 - _pot(kd, vl, L, _wrap(target, circ)) - mu * step_len
                    if ke_t < 0.0:
                        lo, hi = 0.0, step_len
                        for _ in range(80):
                            mid = 0.5 * (lo + hi)
                            if ke[b] + u0 - _pot(kd, vl, L, _wrap(s + d * mid, circ)) - mu * mid >= 0.0:
                                lo = mid
                            else:
                                hi = mid
                        snew = _wrap(s + d * lo, circ)
                        kn = ke[b] + u0 - _pot(kd, vl, L, snew) - mu * lo
                        fric += mu * lo
                        ke[b] = kn if kn > 0.0 else 0.0
                        fric += kn - ke[b]  # absorbs rounding so the balance stays exact
                        pos[b] = snew
                        slp = _slope(kd, vl, L, snew)
                        if abs(slp) > mu:
                            dirn[b] = -1 if slp > 0 else 1
                        break
                    fric += mu * step_len
                    ke[b] = ke_t
                    s = _wrap(target, circ)
                    pos[b] = s
                    remaining -= step_len
                    if not hit:
                        break
                    # marker
                    if c == 0 and (s <= 1e-9 or circ - s <= 1e-9):
                        if n_pass < max_events:
                            passages[n_pass, 0] = t + dt
                            passages[n_pass, 1] = b
                            passages[n_pass, 2] = d
                            n_pass += 1
                    if d < 0:
                        continue
                    # loop bottom
                    entered = False
                    for i in range(nfeat[c]):
                        if kd[i] == 2 and abs(((i + 0.5) * L - s + circ / 2) % circ - circ / 2) <= 1e-9:
                            u_here = _pot(kd, vl, L, s)
                            # the ring sits at level -depth; keep the energy balance exact
                            ke[b] += u_here + vl[i]
                            loc[b] = 1
                            idx[b] = i
                            pos[b] = 0.0
                            entered = True
                            break
                    if entered:
                        remaining = 0.0
                        break
                    # transfers
                    nopt = 0
                    for q in range(ntr):
                        if tr_from_c[q] == c and abs(((tr_from_p[q] * L - s) + circ / 2) % circ - circ / 2) <= 1e-9:
                            nopt += 1
                    if nopt > 0:
                        pick = np.random.randint(0, nopt + 1)
                        if pick > 0:
                            k2 = 0
                            for q in range(ntr):
                                if tr_from_c[q] == c and abs(((tr_from_p[q] * L - s) + circ / 2) % circ - circ / 2) <= 1e-9:
                                    k2 += 1
                                    if k2 == pick:
                                        u_here = _pot(kd, vl, L, s)
                                        if tr_kind[q] == 0:
                                            nc = tr_to_c[q]
                                            ns = tr_to_p[q] * lf[nc]
                                            u_new = _pot(kinds[nc, : nfeat[nc]], vals[nc, : nfeat[nc]], lf[nc], ns)
                                            ke[b] += u_here - u_new
                                            cc[b] = nc
                                            pos[b] = ns
                                            if n_trans < max_events:
                                                transfers[n_trans, 0] = t + dt
                                                transfers[n_trans, 1] = b
                                                transfers[n_trans, 2] = c
                                                transfers[n_trans, 3] = nc
                                                n_trans += 1
                                        else:
                                            ke[b] += u_here
                                            loc[b] = 2
                                            idx[b] = q
                                            pos[b] = 0.0
                                            remaining = 0.0
                                        break
            elif loc[b] == 1:
                i = idx[b]
                ml = lfrics[c, i]
                v = math.sqrt(2.0 * ke[b])
                dist = v * dt - 0.5 * ml * dt * dt
                if dist <= 0.0:
                    dist = v * dt
                while dist > 0.0:
                    to_lap = ring_len - pos[b]
                    stp = dist if dist < to_lap else to_lap
                    if ml * stp > ke[b]:
                        x = ke[b] / ml
                        fric += ke[b]
                        ke[b] = 0.0
                        pos[b] += x
                        break
                    ke[b] -= ml * stp
                    fric += ml * stp
                    pos[b] += stp
                    dist -= stp
                    if pos[b] >= ring_len - 1e-15:
                        if ke[b] >= vl[i]:
                            loc[b] = 0
                            pos[b] = (i + 0.5) * L
                            dirn[b] = 1
                            ke[b] += -vl[i] - _pot(kd, vl, L, pos[b])
                            break
                        pos[b] = 0.0
            else:
                q = idx[b]
                v = math.sqrt(2.0 * ke[b])
                dist = v * dt - 0.5 * mu * dt * dt
                if dist <= 0.0:
                    dist = v * dt
                to_end = tr_len[q] - pos[b]
                stp = dist if dist < to_end else to_end
                if mu * stp > ke[b]:
                    x = ke[b] / mu
                    fric += ke[b]
                    ke[b] = 0.0
                    pos[b] += x
                else:
                    ke[b] -= mu * stp
                    fric += mu * stp
                    pos[b] += stp
                    if pos[b] >= tr_len[q] - 1e-15:
                        nc = tr_to_c[q]
                        ns = tr_to_p[q] * lf[nc]
                        ke[b] -= _pot(kinds[nc, : nfeat[nc]], vals[nc, : nfeat[nc]], lf[nc], ns)
                        loc[b] = 0
                        cc[b] = nc
                        pos[b] = ns
                        dirn[b] = 1
                        if n_trans < max_events:
                            transfers[n_trans, 0] = t + dt
                            transfers[n_trans, 1] = b
                            transfers[n_trans, 2] = tr_from_c[q]
                            transfers[n_trans, 3] = nc
                            n_trans += 1

        # inelastic collisions between balls on the same circuit
        for i in range(n_balls):
            if loc[i] != 0:
                continue
            for j in range(i + 1, n_balls):
                if loc[j] != 0 or cc[j] != cc[i]:
                    continue
                sep = pos[j] - pos[i]
                sep = (sep + circ / 2) % circ - circ / 2
                if abs(sep) >= 2.0 * radius:
                    continue
                vi = dirn[i] * math.sqrt(2.0 * ke[i])
                vj = dirn[j] * math.sqrt(2.0 * ke[j])
                closing = (vi - vj) * (1.0 if sep > 0 else -1.0)
                if closing <= 0.0:
                    continue
                vm = 0.5 * (vi + vj)
                before = ke[i] + ke[j]
                k_new = 0.5 * vm * vm
                ke[i] = k_new
                ke[j] = k_new
                coll += before - 2.0 * k_new
                if vm != 0.0:
                    dirn[i] = 1 if vm > 0 else -1
                    dirn[j] = dirn[i]

    return passages[:n_pass], transfers[:n_trans], samples[:n_samp], worst, series[:n_ser], ke, n_bursts


def _arrays(bp: TrackBlueprint):
    circuits = bp.circuits
    width = max(len(c) for c in circuits)
    kinds = np.zeros((len(circuits), width), np.int64)
    vals = np.zeros((len(circuits), width))
    lfr = np.zeros((len(circuits), width))
    nfeat = np.array([len(c) for c in circuits], np.int64)
    for ci, feats in enumerate(circuits):
        for i, f in enumerate(feats):
            kinds[ci, i] = KINDS.index(f.kind)
            vals[ci, i] = f.value
            lfr[ci, i] = f.loop_friction
    rows = []
    for con in bp.connections:
        if con.kind == "junction":
            rows.append((con.a[0], con.a[1], 0, con.b[0], con.b[1], 0.0))
            rows.append((con.b[0], con.b[1], 0, con.a[0], con.a[1], 0.0))
        else:
            rows.append((con.a[0], con.a[1], 1, con.b[0], con.b[1], con.length))
    tr = np.array(rows, float).reshape(-1, 6)
    return kinds, vals, lfr, nfeat, tr


def default_positions(bp: TrackBlueprint) -> np.ndarray:
    n = bp.n_balls
    return np.array([(k * CIRCUMFERENCE / n + 0.1) % CIRCUMFERENCE for k in range(n)]) if n else np.zeros(0)


def simulate_track(bp: TrackBlueprint, sim: TrackSimParams = TrackSimParams()) -> TrackTrace:
    """Evolve the balls of ``bp``; all balls start on the main circuit moving forward."""
    kinds, vals, lfr, nfeat, tr = _arrays(bp)
    if sim.initial_positions is not None:
        if len(sim.initial_positions) != bp.n_balls:
            raise ContractError("initial_positions needs one entry per ball")
        init = np.array([x % CIRCUMFERENCE for x in sim.initial_positions], float)
    else:
        init = default_positions(bp)
    n_steps = int(round(sim.horizon / sim.step_dt))
    out = _simulate(
        kinds, vals, lfr, nfeat,
        tr[:, 0].astype(np.int64), tr[:, 1].astype(np.int64), tr[:, 2].astype(np.int64),
        tr[:, 3].astype(np.int64), tr[:, 4].astype(np.int64), tr[:, 5].copy(),
        bp.base_friction, sim.ring_length, sim.ball_radius, init, float(sim.initial_energy),
        sim.step_dt, n_steps, sim.energy_burst_rate, sim.burst_magnitude, int(sim.seed),
        max(1, sim.sample_every), 200_000,
    )
    passages, transfers, samples, worst, series, ke, n_bursts = out
    return TrackTrace(passages, transfers, samples, float(worst), series, sim.horizon, sim.seed, ke, int(n_bursts))


# -- verdict -----------------------------------------------------------------


@dataclass(frozen=True)
class SplVerdict:
    is_spl: bool
    period_estimate: float | None
    sustain_time: float
    ratio: float
    looped: bool  # (a)
    parallel: bool  # (b)
    stable: bool  # (c)
    parallel_waived: bool = False
    passages: int = 0

    def to_dict(self) -> dict:
        return {
            "is_spl": self.is_spl,
            "period_estimate": self.period_estimate,
            "sustain_time": self.sustain_time,
            "ratio": self.ratio,
            "conditions": {"a": self.looped, "b": self.parallel, "c": self.stable},
            "b_waived": self.parallel_waived,
            "passages": self.passages,
        }


def passage_period(times: np.ndarray, bin_width: float, span: float) -> float | None:
    """Recurrence period of marker passages from their autocorrelation.

    Passages are binned; the first local maximum of the autocorrelation that
    reaches half of the largest positive value is the period.
    """
    if len(times) < 3 or span <= 0:
        return None
    nbins = max(int(math.ceil(span / bin_width)), 4)
    counts, _ = np.histogram(times, bins=nbins, range=(0.0, nbins * bin_width))
    x = counts - counts.mean()
    denom = float((x * x).sum())
    if denom == 0:
        return None
    ac = np.correlate(x, x, mode="full")[nbins - 1 :] / denom
    lags = ac[1 : nbins // 2 + 1]
    if lags.size < 3:
        return None
    top = lags.max()
    if top <= 0:
        return None
    for k in range(1, lags.size - 1):
        if lags[k] >= lags[k - 1] and lags[k] >= lags[k + 1] and lags[k] >= 0.5 * top:
            return float((k + 1) * bin_width)
    return float((int(np.argmax(lags)) + 1) * bin_width)


def spl_test(trace: TrackTrace, bp: TrackBlueprint, bin_width: float = 0.5, bound: float = 1e6) -> SplVerdict:
    """Looped recurrence (a), parallel interaction (b), boundedness (c) and longevity.

    ``is_spl`` needs (a), (c) and a sustain-to-period ratio of at least 10.
    Single-circuit designs have (b) waived.
    """
    times = trace.passages[:, 0] if len(trace.passages) else np.zeros(0)
    sustain = float(times.max()) if times.size else 0.0
    period = passage_period(times, bin_width, sustain) if times.size >= 3 else None
    looped = period is not None and times.size >= 3
    ratio = sustain / period if period else 0.0
    energies = trace.samples[:, 6] if len(trace.samples) else np.zeros(0)
    stable = bool(np.all(np.isfinite(energies)) and (energies.size == 0 or np.abs(energies).max() < bound))
    waived = cycle_count(bp) < 2 or not bp.connections
    parallel = cycle_count(bp) >= 2 and (waived or len(trace.transfers) > 0)
    is_spl = bool(looped and stable and ratio >= 10)
    return SplVerdict(is_spl, period, sustain, ratio, looped, parallel, stable, waived, int(times.size))
