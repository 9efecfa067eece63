"""Scenario files, experiment dispatch and metrics reports.

A scenario is a JSON object::

    {
      "id": "claim3-default",
      "kind": "claim3",
      "seed": 0,
      "replicates": 100,
      "claim3": {"link_weight": 1.0},
      "expect": [{"metric": "ratio", "op": ">=", "value": 1.2}],
      "output": {"format": "csv"}
    }

Asset references (``network``, ``registry``, ``blueprint``,
``reaction_network``, ``chain``, ``corpus``) are file names resolved against
the scenario's directory first and the shipped fixtures second. A
``blueprint`` may also be an object mapping variant labels to files.
Replicate ``r`` runs with seed ``seed + r``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import operator
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import chemical as chem
from . import physical as phys
from .continuity import build_prediction_graph, is_abstractly_continuous, load_corpus
from .dynamics import (
    DynParams,
    LinkedLoopConfig,
    Stimulus,
    claim3_experiment,
    default_sustain_horizon,
    ordered_map,
    run,
    self_sustain_time,
    triggered_loops,
)
from .errors import (
    DanglingReferenceError,
    ExperimentError,
    MissingBlockError,
    ScenarioParseError,
    SplLabError,
    UnknownKindError,
    ValidationError,
)
from .fixedsets import FixedSetRegistry, StimulusFamily, extract_fixed_set, overlap, promote_meta_fixed_set, triggered_by
from .growth import GrowthParams, associate_lateral, extend_longitudinal
from .library import fixture_dir
from .membrane import BandThresholds, is_minimally_conscious
from .network import load_network

KINDS = ("dynamics", "fixedset", "growth", "membrane", "continuity", "physical", "chemical", "claim3", "persistence", "split")
ASSETS = ("network", "registry", "blueprint", "reaction_network", "chain", "corpus")
BLOCKS = ("dynamics", "stimuli", "family", "growth", "routing", "drive", "membrane", "continuity",
          "physical", "chemical", "claim3", "persistence", "split")
REQUIRED = {
    "dynamics": ("network", "stimuli"),
    "fixedset": ("network", "family"),
    "growth": ("network", "registry", "growth"),
    "membrane": ("network", "registry", "routing", "drive"),
    "continuity": ("corpus", "continuity"),
    "physical": ("blueprint",),
    "chemical": (),
    "claim3": ("claim3",),
    "persistence": ("reaction_network",),
    "split": ("reaction_network",),
}
TOP_LEVEL = {"id", "kind", "seed", "replicates", "expect", "output", "description", *ASSETS, *BLOCKS}
FORMATS = ("csv", "json")
OPS: dict[str, Callable[[Any, Any], bool]] = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
    "!=": operator.ne,
}
LOADERS = {
    "network": load_network,
    "registry": lambda p: FixedSetRegistry.from_dict(json.loads(Path(p).read_text(encoding="utf-8"))),
    "blueprint": phys.load_blueprint,
    "reaction_network": chem.load_reaction_network,
    "chain": chem.load_reaction_network,
    "corpus": load_corpus,
}


@dataclass(frozen=True)
class Expectation:
    metric: str
    op: str
    value: Any  # a literal, or {"metric": name} to compare two summary values

    def to_dict(self) -> dict:
        return {"metric": self.metric, "op": self.op, "value": self.value}


@dataclass(frozen=True)
class Scenario:
    id: str
    kind: str
    seed: int
    replicates: int
    blocks: Mapping[str, Any]
    refs: Mapping[str, Any]  # asset field -> reference as written
    assets: Mapping[str, Any] = field(repr=False)  # asset field -> loaded object (or label -> object)
    expect: tuple[Expectation, ...] = ()
    output: Mapping[str, Any] = field(default_factory=dict)
    source: Path | None = None
    description: str = ""

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"id": self.id, "kind": self.kind, "seed": self.seed, "replicates": self.replicates}
        if self.description:
            out["description"] = self.description
        out.update(self.refs)
        out.update(self.blocks)
        if self.expect:
            out["expect"] = [e.to_dict() for e in self.expect]
        if self.output:
            out["output"] = dict(self.output)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def with_overrides(self, seed: int | None = None, replicates: int | None = None) -> "Scenario":
        s = self
        if seed is not None:
            s = replace(s, seed=int(seed))
        if replicates is not None:
            if replicates < 0:
                raise ValidationError("replicates must be >= 0")
            s = replace(s, replicates=int(replicates))
        return s


# -- loading -----------------------------------------------------------------


def _resolve(ref: str, base: Path | None) -> Path:
    for root in ([base] if base else []) + [fixture_dir()]:
        cand = (root / ref).resolve()
        if cand.is_file():
            return cand
    raise DanglingReferenceError(f"referenced asset {ref!r} not found next to the scenario or among shipped fixtures")


def _load_asset(name: str, ref: str, base: Path | None):
    if not isinstance(ref, str) or not ref:
        raise ValidationError(f"{name} must be a file name")
    path = _resolve(ref, base)
    try:
        return LOADERS[name](path)
    except SplLabError as exc:
        raise ValidationError(f"{name} {ref}: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise ValidationError(f"{name} {ref}: malformed ({exc})") from exc


def _expectations(raw) -> tuple[Expectation, ...]:
    if not isinstance(raw, list):
        raise ValidationError("expect must be a list")
    out = []
    for item in raw:
        if not isinstance(item, Mapping) or set(item) != {"metric", "op", "value"}:
            raise ValidationError("each expectation needs exactly metric, op and value")
        if item["op"] not in OPS:
            raise ValidationError(f"unknown comparison {item['op']!r}")
        out.append(Expectation(str(item["metric"]), item["op"], item["value"]))
    return tuple(out)


def scenario_from_dict(raw: Mapping, base: Path | None = None, source: Path | None = None) -> Scenario:
    if not isinstance(raw, Mapping):
        raise ValidationError("scenario must be a JSON object")
    unknown = sorted(set(raw) - TOP_LEVEL)
    if unknown:
        raise ValidationError(f"unknown scenario fields: {unknown}")
    if "kind" not in raw:
        raise MissingBlockError("scenario is missing the kind field")
    kind = raw["kind"]
    if kind not in KINDS:
        raise UnknownKindError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    for need in REQUIRED[kind]:
        if need not in raw:
            raise MissingBlockError(f"{kind} scenario is missing the required {need!r} block")
    if kind == "chemical" and "reaction_network" not in raw and "blueprint" not in raw:
        raise MissingBlockError("chemical scenario needs a 'reaction_network' or a 'blueprint' block")
    seed, reps = raw.get("seed", 0), raw.get("replicates", 1)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ValidationError("seed must be an integer")
    if not isinstance(reps, int) or isinstance(reps, bool) or reps < 0:
        raise ValidationError("replicates must be a non-negative integer")
    refs, assets = {}, {}
    for name in ASSETS:
        if name not in raw:
            continue
        ref = raw[name]
        refs[name] = ref
        if name == "blueprint" and isinstance(ref, Mapping):
            if not ref:
                raise ValidationError("blueprint variants must not be empty")
            assets[name] = {label: _load_asset(name, r, base) for label, r in ref.items()}
        else:
            assets[name] = _load_asset(name, ref, base)
    output = raw.get("output", {})
    if not isinstance(output, Mapping) or set(output) - {"path", "format"}:
        raise ValidationError("output takes only path and format")
    if output.get("format", "json") not in FORMATS:
        raise ValidationError(f"output format must be one of {FORMATS}")
    blocks = {k: raw[k] for k in BLOCKS if k in raw}
    if "routing" in blocks:
        routing = blocks["routing"]
        if not isinstance(routing, list) or not all(isinstance(p, list) and len(p) == 2 for p in routing):
            raise ValidationError("routing must be a list of [output, input] pairs")
        net = assets.get("network")
        if net is not None:
            for out_node, in_node in routing:
                if out_node not in net.output_surface or in_node not in net.input_surface:
                    raise DanglingReferenceError(f"routing pair {out_node}->{in_node} is not output->input on the network")
    return Scenario(
        str(raw.get("id", source.stem if source else kind)),
        kind,
        seed,
        reps,
        blocks,
        refs,
        assets,
        _expectations(raw.get("expect", [])),
        dict(output),
        source,
        str(raw.get("description", "")),
    )


def load_scenario(path) -> Scenario:
    """Parse, validate and resolve a scenario file.

    Raises :class:`ScenarioParseError` for malformed JSON,
    :class:`UnknownKindError`, :class:`MissingBlockError` and
    :class:`DanglingReferenceError`, all subclasses of ``ValidationError``.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DanglingReferenceError(f"scenario file {path} does not exist") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(path, exc.lineno, exc.colno, exc.msg) from None
    return scenario_from_dict(raw, path.parent.resolve(), path)


# -- reports -----------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    scenario_id: str
    kind: str
    seed: int
    replicates: int
    rows: tuple[Mapping[str, Any], ...]
    summary: Mapping[str, Any]
    checks: tuple[Mapping[str, Any], ...]
    status: str  # "pass", "fail" or "n/a"
    evidence: tuple[Any, ...] = ()

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario_id,
            "kind": self.kind,
            "seed": self.seed,
            "replicates": self.replicates,
            "rows": [dict(r) for r in self.rows],
            "summary": dict(self.summary),
            "expectations": [dict(c) for c in self.checks],
            "status": self.status,
            "evidence": list(self.evidence),
        }


def _numeric(v) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, (bool, np.bool_))


def summarize(rows: Sequence[Mapping[str, Any]], group: str | None = "variant") -> dict:
    """Median, IQR and mean of every numeric or boolean column, split by ``group`` when present."""
    groups: dict[str, list] = {}
    for r in rows:
        key = str(r[group]) if group and group in r else ""
        groups.setdefault(key, []).append(r)
    out = {}
    skip = {"replicate", "seed", "sentence"}
    for key, items in sorted(groups.items()):
        prefix = f"{key}." if key else ""
        cols = sorted({c for r in items for c, v in r.items() if c not in skip and (_numeric(v) or isinstance(v, bool))})
        for c in cols:
            vals = np.array([float(r[c]) for r in items if c in r and r[c] is not None], dtype=float)
            vals = vals[np.isfinite(vals)]
            if vals.size == 0:
                continue
            q1, med, q3 = np.percentile(vals, [25, 50, 75])
            out[f"{prefix}{c}.median"] = float(med)
            out[f"{prefix}{c}.iqr"] = float(q3 - q1)
            out[f"{prefix}{c}.mean"] = float(vals.mean())
        out[f"{prefix}n"] = len(items)
    return out


def check_expectations(expect: Sequence[Expectation], summary: Mapping[str, Any]) -> tuple[list[dict], str]:
    if not expect:
        return [], "n/a"
    checks = []
    for e in expect:
        observed = summary.get(e.metric)
        target = e.value
        if isinstance(target, Mapping):
            target = summary.get(target.get("metric"))
        try:
            ok = observed is not None and target is not None and bool(OPS[e.op](observed, target))
        except TypeError:
            ok = False
        checks.append({**e.to_dict(), "observed": observed, "target": target, "passed": ok})
    return checks, "pass" if all(c["passed"] for c in checks) else "fail"


# -- per-kind runners ----------------------------------------------------------
#
# Each runner gets (scenario, replicate seeds) and returns (rows, extra summary,
# evidence). Rows always carry ``replicate`` and ``seed``.


def _dyn(s: Scenario, seed: int, **extra) -> DynParams:
    raw = dict(s.blocks.get("dynamics", {}))
    raw.update(extra)
    raw["seed"] = seed
    return DynParams.from_dict(raw)


def _stimuli(raw) -> list[Stimulus]:
    return [Stimulus.from_dict(x) for x in raw]


def _loop_label(lp) -> str:
    return "-".join(lp)


def _per_replicate(s: Scenario, seeds: Sequence[int], one: Callable[[int, int], tuple[list, Any]]):
    def task(args):
        rep, seed = args
        try:
            return one(rep, seed)
        except SplLabError as exc:
            raise ExperimentError(rep, exc) from exc
        except (ValueError, ArithmeticError) as exc:
            raise ExperimentError(rep, exc) from exc

    results = ordered_map(task, list(enumerate(seeds)))
    rows, evidence = [], []
    for rep_rows, ev in results:
        rows.extend(rep_rows)
        evidence.append(ev)
    return rows, evidence


def _run_dynamics(s: Scenario, seeds):
    net = s.assets["network"]
    stim = _stimuli(s.blocks["stimuli"])
    cutoff = max((x.offset for x in stim), default=0)

    def one(rep, seed):
        p = _dyn(s, seed)
        sustain = self_sustain_time(net, stim, cutoff, p)
        horizon = cutoff + default_sustain_horizon(net, p)
        trace = run(net, stim, p, max(horizon, 1))
        trig = triggered_loops(trace, net, trace.loops, p)
        row = {"replicate": rep, "seed": seed, "sustain_steps": sustain, "triggered": len(trig),
               "firings": sum(len(f) for f in trace.firings)}
        return [row], {"triggered": sorted(_loop_label(lp) for lp in trig)}

    rows, ev = _per_replicate(s, seeds, one)
    return rows, {}, ev


def _family(raw) -> StimulusFamily:
    if not isinstance(raw, Mapping) or "average" not in raw:
        raise ValidationError("family needs an average stimulus")
    return StimulusFamily.from_dict(raw)


def _run_fixedset(s: Scenario, seeds):
    net = s.assets["network"]
    fam = _family(s.blocks["family"])
    quorum = float(s.blocks.get("fixedset", {}).get("quorum", 1.0)) if isinstance(s.blocks.get("fixedset"), Mapping) else 1.0

    def one(rep, seed):
        fs = extract_fixed_set(net, fam, _dyn(s, seed), quorum=quorum, fs_id=s.id)
        loops = [] if fs is None else [_loop_label(lp) for lp in fs.sorted_loops()]
        row = {"replicate": rep, "seed": seed, "size": len(loops), "loops": " ".join(loops)}
        return [row], None if fs is None else fs.to_dict()

    rows, ev = _per_replicate(s, seeds, one)
    return rows, {}, ev


def _apply_growth(net, reg, steps, params: DynParams):
    for k, step in enumerate(steps):
        op = step.get("op")
        gp = GrowthParams.from_dict(step.get("params"))
        if op == "extend":
            net, reg = extend_longitudinal(net, reg, step["fs"], gp, inputs=tuple(step.get("inputs", ())))
        elif op == "associate":
            net, reg = associate_lateral(net, reg, step["a"], step["b"], gp)
        elif op == "promote":
            fs = promote_meta_fixed_set(reg, step["parents"], net, _family(step["family"]), params, fs_id=step["fs_id"])
            reg = reg.with_entry(fs)
        elif op == "extract":
            fs = extract_fixed_set(net, _family(step["family"]), params, fs_id=step["fs_id"])
            if fs is None:
                raise SplLabError(f"growth step {k}: extraction of {step['fs_id']} found no loops")
            reg = reg.with_entry(fs)
        else:
            raise ValidationError(f"growth step {k}: unknown op {op!r}")
    return net, reg


def _run_growth(s: Scenario, seeds):
    block = s.blocks["growth"]
    if not isinstance(block, Mapping) or not isinstance(block.get("steps"), list):
        raise ValidationError("growth block needs a steps list")
    probe = block.get("probe")

    def one(rep, seed):
        p = _dyn(s, seed)
        net, reg = _apply_growth(s.assets["network"], s.assets["registry"], block["steps"], p)
        row = {"replicate": rep, "seed": seed, "nodes": len(net.nodes), "edges": len(net.edges),
               "fixed_sets": len(reg)}
        if probe:
            trig = triggered_by(net, Stimulus.from_dict(probe["stimulus"]), p)
            row["probe_overlap"] = overlap(reg[probe["fixed_set"]], trig)
        return [row], reg.to_dict()

    rows, ev = _per_replicate(s, seeds, one)
    return rows, {}, ev


def _run_membrane(s: Scenario, seeds):
    block = dict(s.blocks.get("membrane", {}))
    scale = float(block.pop("weight_scale", 1.0))
    thr = BandThresholds.from_dict(block.pop("bands", None))
    min_sustain = block.pop("min_sustain", None)
    horizon = block.pop("horizon", None)
    if block:
        raise ValidationError(f"unknown membrane options: {sorted(block)}")
    net = s.assets["network"].scaled(scale) if scale != 1.0 else s.assets["network"]
    reg = s.assets["registry"]
    drive = _stimuli(s.blocks["drive"])
    routing = tuple(tuple(p) for p in s.blocks["routing"])

    def one(rep, seed):
        p = _dyn(s, seed, routing=routing)
        v = is_minimally_conscious(net, reg, drive, p, thr, min_sustain, horizon)
        m = v.membrane
        row = {
            "replicate": rep,
            "seed": seed,
            "membrane": m is not None,
            "band": m.band if m else "",
            "rate": m.rate if m else 0.0,
            "sustained_for": m.sustained_for if m else 0,
            "active_sets": len(m.active_sets) if m else 0,
            "conscious": v.value,
            "failed": " ".join(v.failed),
        }
        return [row], v.to_dict()

    rows, ev = _per_replicate(s, seeds, one)
    return rows, {}, ev


def _run_continuity(s: Scenario, seeds):
    block = s.blocks["continuity"]
    sentences = block.get("sentences")
    if not isinstance(sentences, list) or not sentences:
        raise ValidationError("continuity block needs a nonempty sentences list")
    graph = build_prediction_graph(s.assets["corpus"], int(block.get("max_order", 3)), block.get("mapping"))
    orders = tuple(block.get("orders", (1, 2, 3)))
    coverage = float(block.get("coverage", 0.9))

    def one(rep, seed):
        rows, ev = [], []
        for k, sentence in enumerate(sentences):
            v = is_abstractly_continuous(graph, sentence.split(), orders, coverage)
            fb = v.first_break
            rows.append({
                "replicate": rep,
                "seed": seed,
                "sentence": k,
                "text": sentence,
                "continuous": v.continuous,
                "coverage": v.coverage,
                "break_pos": fb[0] if fb else -1,
                "break_context": " ".join(fb[1]) if fb else "",
            })
            ev.append(v.to_dict())
        return rows, ev

    rows, ev = _per_replicate(s, seeds, one)
    return rows, {"continuous.count": sum(bool(r["continuous"]) for r in rows)}, ev


def _variants(asset) -> dict:
    return dict(asset) if isinstance(asset, Mapping) else {"main": asset}


def _run_physical(s: Scenario, seeds):
    sim_raw = dict(s.blocks.get("physical", {}))
    variants = _variants(s.assets["blueprint"])

    def one(rep, seed):
        sim = phys.TrackSimParams.from_dict({**sim_raw, "seed": seed})
        rows, ev = [], {}
        for label, bp in variants.items():
            trace = phys.simulate_track(bp, sim)
            v = phys.spl_test(trace, bp)
            rows.append({
                "replicate": rep,
                "seed": seed,
                "variant": label,
                "sustain_time": v.sustain_time,
                "period": v.period_estimate if v.period_estimate is not None else math.nan,
                "ratio": v.ratio,
                "is_spl": v.is_spl,
                "passages": v.passages,
                "transfers": len(trace.transfers),
                "audit_error": trace.audit_error,
                "cycles": phys.cycle_count(bp),
            })
            ev[label] = v.to_dict()
        return rows, ev

    rows, ev = _per_replicate(s, seeds, one)
    extra = {}
    if rows:
        extra["audit_error.max"] = max(r["audit_error"] for r in rows)
    return rows, extra, ev


def _reaction_net(s: Scenario):
    block = s.blocks.get("chemical", {})
    if "reaction_network" in s.assets:
        return s.assets["reaction_network"]
    bp = s.assets["blueprint"]
    if isinstance(bp, Mapping):
        raise ValidationError("chemical scenarios take a single blueprint")
    return chem.map_physical_to_chemical(bp, **dict(block.get("map", {})))


def _chem_sim(block: Mapping, seed: int) -> chem.ChemSimParams:
    return chem.ChemSimParams.from_dict({**dict(block.get("sim", {})), "seed": seed})


def _run_chemical(s: Scenario, seeds):
    rnet = _reaction_net(s)
    block = s.blocks.get("chemical", {})
    counts = chem.chemical_counts(rnet)

    def one(rep, seed):
        trace = chem.simulate_reactions(rnet, _chem_sim(block, seed))
        final = trace.final()
        tracked = rnet.tracked()
        row = {"replicate": rep, "seed": seed, "events": len(trace.times) - 1,
               "survived": all(final[x] > 0 for x in tracked), "uphill_energy": trace.uphill_energy}
        row.update({f"final.{x}": final[x] for x in tracked})
        return [row], None

    rows, _ = _per_replicate(s, seeds, one)
    gens = chem.generator_sets(rnet)
    extra = {
        "species": counts["species"],
        "enzymes": counts["enzymes"],
        "chemicals.naive": counts["naive"],
        "chemicals.shared": counts["shared"],
        "loops": chem.chemical_loop_count(rnet),
        "generator_sets": gens["total_count"],
    }
    return rows, extra, [{"reaction_network": rnet.to_dict(), "generator_sets": gens}]


def _run_claim3(s: Scenario, seeds):
    block = dict(s.blocks["claim3"])
    block.update(seed=s.seed, replicates=len(seeds))
    try:
        report = claim3_experiment(LinkedLoopConfig.from_dict(block))
    except SplLabError as exc:
        raise ExperimentError(0, exc) from exc
    extra = {"median_linked": report.median_linked, "median_isolated": report.median_isolated,
             "ratio": report.median_ratio} if seeds else {}
    return report.rows(), extra, []


def _run_persistence(s: Scenario, seeds):
    loop_net = s.assets["reaction_network"]
    chain = s.assets.get("chain") or chem.chain_of(loop_net)
    block = s.blocks.get("persistence", {})

    def one(rep, seed):
        sim = _chem_sim(block, seed)
        row = {"replicate": rep, "seed": seed, "loop_survived": chem.survives(loop_net, sim),
               "chain_survived": chem.survives(chain, sim)}
        return [row], None

    rows, _ = _per_replicate(s, seeds, one)
    extra = {}
    if rows:
        extra = {"loop_fraction": sum(r["loop_survived"] for r in rows) / len(rows),
                 "chain_fraction": sum(r["chain_survived"] for r in rows) / len(rows)}
    return rows, extra, []


def _run_split(s: Scenario, seeds):
    rnet = s.assets["reaction_network"]
    block = s.blocks.get("split", {})
    counts = block.get("counts")

    def one(rep, seed):
        out = chem.split_regeneration_test(rnet, _chem_sim(block, seed), seed=seed, split=counts)
        row = {"replicate": rep, "seed": seed}
        for part in ("part_a", "part_b"):
            row[f"{part}_regenerates"] = out[f"{part}_regenerates"]
            row[f"{part}_covers"] = out[f"{part}_covers_components"]
        row["as_predicted"] = all(row[f"{p}_regenerates"] == row[f"{p}_covers"] for p in ("part_a", "part_b"))
        return [row], out

    rows, ev = _per_replicate(s, seeds, one)
    return rows, {"generator_sets": chem.generator_sets(rnet)["total_count"]}, ev


RUNNERS = {
    "dynamics": _run_dynamics,
    "fixedset": _run_fixedset,
    "growth": _run_growth,
    "membrane": _run_membrane,
    "continuity": _run_continuity,
    "physical": _run_physical,
    "chemical": _run_chemical,
    "claim3": _run_claim3,
    "persistence": _run_persistence,
    "split": _run_split,
}


def run_experiment(s: Scenario) -> MetricsReport:
    """Run every replicate of ``s`` and score the declared expectations.

    With zero replicates the report is empty and its status is ``n/a``.
    """
    seeds = [s.seed + r for r in range(s.replicates)]
    if not seeds:
        return MetricsReport(s.id, s.kind, s.seed, 0, (), {}, (), "n/a")
    rows, extra, evidence = RUNNERS[s.kind](s, seeds)
    summary = summarize(rows)
    summary.update(extra)
    checks, status = check_expectations(s.expect, summary)
    return MetricsReport(s.id, s.kind, s.seed, s.replicates, tuple(rows), summary, tuple(checks), status, tuple(evidence))


# -- emission ------------------------------------------------------------------


def _clean(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
        return float(f"{v:.9g}")
    if isinstance(v, Mapping):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, set, frozenset)):
        items = sorted(v) if isinstance(v, (set, frozenset)) else v
        return [_clean(x) for x in items]
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    return v


def _cell(v) -> str:
    v = _clean(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def render(report: MetricsReport, fmt: str = "json") -> str:
    """Serialise ``report``; identical reports give identical text."""
    if fmt == "json":
        return json.dumps(_clean(report.to_dict()), sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        cols = sorted({c for r in report.rows for c in r})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in report.rows:
            w.writerow([_cell(r.get(c)) for c in cols])
        return buf.getvalue()
    raise ValidationError(f"unknown format {fmt!r}; expected csv or json")


def emit_metrics(report: MetricsReport, fmt: str, path) -> Path:
    text = render(report, fmt)
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write metrics to {path}: {exc.strerror}") from exc
    return path
