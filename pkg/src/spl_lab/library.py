"""Shipped fixtures: the looped object-recognition networks, their stimulus
families and the grown variants, plus lookup of the data files."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path

from .dynamics import DynParams, Stimulus
from .fixedsets import FixedSetRegistry, StimulusFamily, extract_fixed_set, promote_meta_fixed_set
from .growth import GrowthParams, associate_lateral, extend_longitudinal
from .network import Network, load_network

FIXTURE_PARAMS = DynParams(activation_decay=0.5)
ROUTING = (("O1", "I1"), ("O2", "I5"))
EXTEND = GrowthParams(branch_factor=2, new_loop_len=3, link_weight=0.4, input_weight=0.7)
ASSOCIATE = GrowthParams(link_weight=1.0)


def fixture_dir() -> Path:
    return Path(str(resources.files("spl_lab") / "fixtures"))


def fixture_path(name: str) -> Path:
    return fixture_dir() / name


def list_fixtures() -> list[str]:
    """Shipped data files, relative to the fixtures directory."""
    root = fixture_dir()
    return sorted(
        p.relative_to(root).as_posix()
        for p in root.rglob("*")
        if p.is_file() and not p.name.startswith(("_", ".")) and "__pycache__" not in p.parts
    )


def loop(name: str, size: int = 3) -> tuple[str, ...]:
    """Loop id of a fixture loop such as ``"L3"``."""
    return tuple(f"{name}_{c}" for c in "abcdefgh"[:size])


def family(average, *variations, label="family") -> StimulusFamily:
    return StimulusFamily(Stimulus.pulse(average), tuple(Stimulus.pulse(v) for v in variations), label)


FAMILIES = {
    "shape": family(["I1", "I2", "I3"], ["I2", "I3", "I4"], ["I3", "I4", "I5"], label="shape"),
    "disjoint": family(["I1", "I2"], ["I4", "I5"], label="disjoint"),
    "edge": family(["I1", "I2"], ["I1", "I3"], label="edge"),
    "angle": family(["I4", "I5"], ["I3", "I5"], label="angle"),
    "table": family(["I1", "I2", "I3"], ["I1", "I2", "I4"], ["I1", "I3", "I4"], label="table"),
    "chair": family(["I3", "I4", "I5"], ["I2", "I4", "I5"], ["I2", "I3", "I5"], label="chair"),
}


@lru_cache(maxsize=None)
def fig2() -> Network:
    return load_network(fixture_path("fig2.json"))


@lru_cache(maxsize=None)
def fig2_registry() -> FixedSetRegistry:
    net, p = fig2(), FIXTURE_PARAMS
    reg = FixedSetRegistry()
    for name in ("shape", "edge", "angle"):
        reg = reg.with_entry(extract_fixed_set(net, FAMILIES[name], p, fs_id=f"{name}-fs"))
    return reg


@lru_cache(maxsize=None)
def fig3() -> tuple[Network, FixedSetRegistry]:
    """fig2 grown twice from the shape fixed set; table and chair promoted to meta sets."""
    net, reg = extend_longitudinal(fig2(), fig2_registry(), "shape-fs", EXTEND, inputs=("I1",))
    net, reg = extend_longitudinal(net, reg, "shape-fs", EXTEND, inputs=("I5",))
    for name in ("table", "chair"):
        fs = promote_meta_fixed_set(reg, {"edge-fs", "angle-fs"}, net, FAMILIES[name], FIXTURE_PARAMS, fs_id=f"{name}-fs")
        reg = reg.with_entry(fs)
    return net, reg


@lru_cache(maxsize=None)
def fig4(link_weight: float = 1.0) -> tuple[Network, FixedSetRegistry]:
    net, reg = fig3()
    gp = GrowthParams(link_weight=link_weight)
    return associate_lateral(net, reg, "table-fs", "chair-fs", gp)


def growth_rounds(k: int, link_weight: float = 0.6) -> tuple[Network, FixedSetRegistry]:
    """fig2 after ``k`` rounds of growth.

    Round ``i`` extends the newest fixed set (shape-fs at first) by two loops,
    registers them as ``g<i>`` and, from the second round on, associates
    ``g<i>`` with ``g<i-1>``.
    """
    from .fixedsets import FixedSet

    net, reg = fig2(), fig2_registry()
    gp = GrowthParams(link_weight=link_weight)
    prev = "shape-fs"
    for i in range(1, k + 1):
        before = set(reg.candidates.get(prev, ()))
        net, reg = extend_longitudinal(net, reg, prev, gp)
        new = frozenset(lp for lp in reg.candidates[prev] if lp not in before)
        reg = reg.with_entry(FixedSet(f"g{i}", f"g{i}", new))
        if i > 1:
            net, reg = associate_lateral(net, reg, f"g{i}", f"g{i - 1}", gp)
        prev = f"g{i}"
    return net, reg


def grown_params(**overrides) -> DynParams:
    """Dynamics for the grown fig4 fixture: feedback from outputs to inputs."""
    base = dict(activation_decay=FIXTURE_PARAMS.activation_decay, routing=ROUTING)
    base.update(overrides)
    return DynParams(**base)


# -- track and reaction designs ----------------------------------------------


def a1_designs() -> dict[str, "TrackBlueprint"]:
    """Single valley (b), three extra valleys (c), every valley a lubricated loop (d)."""
    from .physical import Feature, TrackBlueprint, add_valleys, all_valleys_to_loops

    b = TrackBlueprint((Feature("valley", 1.0),), base_friction=0.05, n_balls=4)
    c = add_valleys(b, 3)
    return {"A1b": b, "A1c": c, "A1d": all_valleys_to_loops(c)}


def a4_blueprint():
    from .physical import Feature, TrackBlueprint

    return TrackBlueprint(tuple(Feature("valley", v) for v in (0.5, 1.0, 1.5)))


def a4_reactions():
    from .chemical import map_physical_to_chemical

    return map_physical_to_chemical(a4_blueprint())


def ring_components(sizes, count: int = 5, prefix: str = "S"):
    """Disjoint rings of single-reactant reactions, one per entry of ``sizes``."""
    from .chemical import Reaction, ReactionNetwork, Species

    species, reactions = [], []
    for i, n in enumerate(sizes):
        names = [f"{prefix}{i + 1}_{j + 1}" for j in range(n)]
        species += [Species(x, 0.0, count) for x in names]
        reactions += [Reaction((a,), (b,)) for a, b in zip(names, names[1:] + names[:1])]
    return ReactionNetwork(tuple(species), tuple(reactions))


def _dump(obj) -> str:
    import json

    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def generated_fixtures() -> dict[str, str]:
    """Contents of every fixture file derived from code, keyed by file name."""
    out = {"fig2-registry.json": fig2_registry().to_json() + "\n"}
    for name, (net, reg) in (("fig3", fig3()), ("fig4", fig4())):
        out[f"{name}.json"] = _dump(net.to_spec())
        out[f"{name}-registry.json"] = reg.to_json() + "\n"
    for name, bp in a1_designs().items():
        out[f"{name}.json"] = _dump(bp.to_dict())
    out["A4-loop.json"] = _dump(a4_blueprint().to_dict())
    out["A4-loop-reactions.json"] = _dump(a4_reactions().to_dict())
    out["scc-3x4.json"] = _dump(ring_components((4, 4, 4)).to_dict())
    out["scc-2.json"] = _dump(ring_components((3, 3), count=6).to_dict())
    return out


def write_generated(directory=None) -> list[str]:
    directory = Path(directory) if directory else fixture_dir()
    written = []
    for name, text in sorted(generated_fixtures().items()):
        (directory / name).write_text(text, encoding="utf-8")
        written.append(name)
    return written


if __name__ == "__main__":
    print("\n".join(write_generated()))
