import itertools
import math

import pytest
from hypothesis import given, strategies as st

from oracles import digraphs
from spl_lab.dynamics import (
    ComparisonReport,
    DynParams,
    LinkedLoopConfig,
    Stimulus,
    claim3_experiment,
    loops_of,
    run,
    self_sustain_time,
    traversals,
    triggered_loops,
)
from spl_lab.errors import ContractError
from spl_lab.library import FIXTURE_PARAMS, fig2, loop
from spl_lab.network import build_network

ENERGY = {"energy_capacity": 10.0, "energy_recharge_rate": 0.2, "refractory": 2}


def triangle(**node):
    params = {**ENERGY, **node}
    return build_network(
        {
            "nodes": [{"id": x, **params} for x in "ABC"],
            "edges": [{"src": a, "dst": b, "weight": 1.0} for a, b in ("AB", "BC", "CA")],
            "input_surface": ["A"],
        }
    )


def kick(*nodes):
    return [Stimulus.pulse(nodes)]


def test_triangle_fires_in_order_until_energy_runs_out():
    trace = run(triangle(), kick("A"), DynParams(activation_decay=1.0), 200)
    seq = [next(iter(f)) for f in trace.firings if f]
    assert all(len(f) <= 1 for f in trace.firings)
    assert seq == list("ABC" * (len(seq) // 3)) + list("ABC"[: len(seq) % 3])
    assert 3 < len(seq) < 200
    assert not any(trace.firings[-10:])


def test_fig2_loops_fire_and_trigger():
    net = fig2()
    trace = run(net, kick("I1", "I2", "I3"), FIXTURE_PARAMS, 40)
    for name in ("L1", "L2"):
        assert trace.firing_count(f"{name}_a") >= 3
    assert triggered_loops(trace, net, trace.loops, FIXTURE_PARAMS) == {loop("L1"), loop("L2")}


def test_empty_stimulus_is_quiet():
    assert run(fig2(), [], FIXTURE_PARAMS, 50).is_empty()


def test_stimulus_off_input_surface():
    with pytest.raises(ContractError):
        run(fig2(), kick("L1_a"), FIXTURE_PARAMS, 10)


def test_param_contracts():
    for bad in ({"activation_decay": 1.5}, {"min_traversals": 1}, {"noise_rate": -0.1}):
        with pytest.raises(ContractError):
            DynParams(**bad)
    with pytest.raises(ContractError):
        run(fig2(), [], FIXTURE_PARAMS, 0)


def brute_traversal_count(firings, nodes, window):
    """Anchor firings from which some strictly increasing choice of firing
    times visits the loop in order and returns to the anchor in the window."""
    times = {n: [t for t, f in enumerate(firings) if n in f] for n in nodes}
    count = 0
    for t0 in times[nodes[0]]:
        chain = [[t for t in times[n] if t0 < t <= t0 + window] for n in list(nodes[1:]) + [nodes[0]]]
        if any(all(a < b for a, b in zip((t0,) + combo, combo)) for combo in itertools.product(*chain)):
            count += 1
    return count


def test_missing_node_blocks_loop():
    firings = tuple(frozenset({"A"}) if t % 3 == 0 else frozenset({"C"}) if t % 3 == 2 else frozenset() for t in range(30))
    net = triangle()
    lp = loops_of(net)[0]
    times = {n: [t for t, f in enumerate(firings) if n in f] for n in "ABC"}
    assert traversals(times, lp.nodes, 6) == []
    assert brute_traversal_count(firings, lp.nodes, 6) == 0


@given(st.lists(st.sets(st.sampled_from("ABC")), min_size=1, max_size=14), st.integers(3, 8))
def test_traversals_match_brute_force(firings, window):
    firings = tuple(frozenset(f) for f in firings)
    times = {n: [t for t, f in enumerate(firings) if n in f] for n in "ABC"}
    nodes = ("A", "B", "C")
    assert len(traversals(times, nodes, window)) == brute_traversal_count(firings, nodes, window)


def test_self_sustain_no_edges():
    net = build_network({"nodes": ["A", "B"], "input_surface": ["A"]})
    assert self_sustain_time(net, kick("A"), 1, DynParams()) == 0


def test_self_sustain_matches_energy_budget():
    cap, cost, rech, refr = 10.0, 1.0, 0.2, 2
    period = refr + 1
    drain = cost - period * rech
    firings = int((cap - cost) // drain) + 1  # firings while energy stays >= cost
    expected = period * (firings - 1)  # active from the kick to the last completed traversal
    got = self_sustain_time(triangle(), kick("A"), 1, DynParams(activation_decay=1.0, sustain_horizon=500))
    assert got == expected == 66


def test_cutoff_before_stimulus_end():
    with pytest.raises(ContractError):
        self_sustain_time(triangle(), [Stimulus.pulse(["A"], duration=5)], 2, DynParams())


def test_claim3_default_ordering():
    rep = claim3_experiment(LinkedLoopConfig(replicates=100))
    assert rep.median_linked > rep.median_isolated
    assert len(rep.rows()) == 200
    assert rep.to_csv().splitlines()[0] == "replicate,seed,variant,sustain_steps"


def test_claim3_zero_link_is_no_link():
    rep = claim3_experiment(LinkedLoopConfig(link_weight=0.0, replicates=20))
    assert rep.linked == rep.isolated


def test_claim3_inhibitory_links_against_larger_run():
    small = claim3_experiment(LinkedLoopConfig(link_weight=-1.0, replicates=30))
    large = claim3_experiment(LinkedLoopConfig(link_weight=-1.0, replicates=300))
    assert small.median_linked <= small.median_isolated
    assert large.median_linked <= large.median_isolated
    assert abs(small.median_ratio - large.median_ratio) <= 0.1


def test_claim3_seed_prefix_stable():
    a = claim3_experiment(LinkedLoopConfig(replicates=5))
    b = claim3_experiment(LinkedLoopConfig(replicates=8))
    assert a.rows() == b.rows()[: len(a.rows())]


def test_empty_comparison_report():
    rep = ComparisonReport((), (), ())
    assert rep.rows() == [] and math.isnan(rep.median_ratio)


@st.composite
def random_networks(draw):
    nodes, edges = draw(digraphs(max_nodes=6, min_nodes=2))
    spec_nodes = [
        {
            "id": n,
            "threshold": draw(st.floats(0.5, 2.0)),
            "refractory": draw(st.integers(0, 3)),
            "energy_capacity": draw(st.floats(1.0, 10.0)),
            "energy_recharge_rate": draw(st.floats(0.0, 1.0)),
            "firing_cost": draw(st.floats(0.5, 2.0)),
        }
        for n in nodes
    ]
    spec_edges = [{"src": a, "dst": b, "weight": draw(st.floats(-1.5, 2.0))} for a, b in edges]
    return build_network({"nodes": spec_nodes, "edges": spec_edges, "input_surface": nodes[:2]})


@given(random_networks(), st.integers(0, 10_000), st.floats(0.0, 1.0), st.floats(0.0, 0.2))
def test_energy_bound_and_determinism(net, seed, decay, noise):
    params = DynParams(activation_decay=decay, noise_rate=noise, seed=seed, energy_jitter=0.3)
    stim = [Stimulus.pulse(net.input_surface, duration=2)]
    a = run(net, stim, params, 60)
    assert a == run(net, stim, params, 60)
    for node in net.nodes:
        spent = a.firing_count(node.id) * node.firing_cost
        assert spent <= a.initial_energy[node.id] + node.energy_recharge_rate * 60 + 1e-9


@given(random_networks())
def test_quiescence(net):
    assert run(net, [], DynParams(), 40).is_empty()


@given(random_networks(), st.integers(2, 12))
def test_wider_window_never_drops_loops(net, window):
    params = DynParams(trigger_window=window)
    trace = run(net, [Stimulus.pulse(net.input_surface, duration=3)], params, 60)
    narrow = triggered_loops(trace, net, trace.loops, params)
    wide = triggered_loops(trace, net, trace.loops, DynParams(trigger_window=window + 3))
    assert narrow <= wide
