import statistics

import pytest
from hypothesis import given, strategies as st

from oracles import brute_cofiring
from spl_lab.continuity import build_prediction_graph, tokenize
from spl_lab.dynamics import DynParams, Stimulus, Trace, run, self_sustain_time
from spl_lab.errors import ContractError
from spl_lab.fixedsets import FixedSet, overlap, triggered_by
from spl_lab.growth import (
    GrowthParams,
    associate_lateral,
    attach_node,
    cofiring_counts,
    extend_longitudinal,
    hebbian_update,
    prune,
)
from spl_lab.library import ASSOCIATE, EXTEND, FIXTURE_PARAMS, fig2, fig2_registry, fig3, fig4, growth_rounds
from spl_lab.network import enumerate_simple_cycles

TABLE = Stimulus.pulse(["I1", "I2", "I3"])


def linked(reg, fs):
    return {b if a == fs else a for a, b, _ in reg.links if fs in (a, b)}


def cycle_ids(net):
    return {lp.id for lp in enumerate_simple_cycles(net)}


def test_extend_adds_reachable_candidate_loops():
    net, reg = fig2(), fig2_registry()
    grown, reg2 = extend_longitudinal(net, reg, "shape-fs", EXTEND, inputs=["I1"])
    new = reg2.candidates["shape-fs"]
    assert len(new) == EXTEND.branch_factor
    assert all(len(lp) == EXTEND.new_loop_len for lp in new)
    assert set(new) <= cycle_ids(grown)
    assert cycle_ids(net) <= cycle_ids(grown)
    attaches = {attach_node(lp) for lp in reg["shape-fs"].loop_ids}
    entries = {(e.src, e.dst) for e in grown.edges}
    for lp in new:
        assert all((a, lp[0]) in entries and (lp[0], a) in entries for a in attaches)
    # originals untouched
    assert len(net.nodes) == len(fig2().nodes) and "shape-fs" not in reg.candidates


def test_extend_is_deterministic():
    a = extend_longitudinal(fig2(), fig2_registry(), "shape-fs", EXTEND)
    b = extend_longitudinal(fig2(), fig2_registry(), "shape-fs", EXTEND)
    assert a[0] == b[0] and a[1].candidates == b[1].candidates


def test_growth_param_contracts():
    with pytest.raises(ContractError):
        GrowthParams(branch_factor=0)
    with pytest.raises(ContractError):
        GrowthParams(new_loop_len=1)
    with pytest.raises(ContractError):
        extend_longitudinal(fig2(), fig2_registry(), "shape-fs", EXTEND, inputs=["L1_a"])


def test_association_is_symmetric():
    net, reg = fig3()
    ab = associate_lateral(net, reg, "table-fs", "chair-fs", ASSOCIATE)
    ba = associate_lateral(net, reg, "chair-fs", "table-fs", ASSOCIATE)
    assert set(ab[0].edges) == set(ba[0].edges)
    assert ab[1].links == ba[1].links
    assert linked(ab[1], "table-fs") == {"chair-fs"} and linked(ab[1], "chair-fs") == {"table-fs"}
    with pytest.raises(ContractError):
        associate_lateral(net, reg, "table-fs", "table-fs", ASSOCIATE)


def test_association_lets_table_trigger_chair():
    net3, reg3 = fig3()
    assert overlap(reg3["chair-fs"], triggered_by(net3, TABLE, FIXTURE_PARAMS)) == 0.0
    net4, reg4 = fig4()
    trig = triggered_by(net4, TABLE, FIXTURE_PARAMS)
    assert overlap(reg4["chair-fs"], trig) == 1.0
    assert overlap(reg4["table-fs"], trig) == 1.0


def test_zero_weight_association_changes_nothing():
    net0, reg0 = fig4(link_weight=0.0)
    assert overlap(reg0["chair-fs"], triggered_by(net0, TABLE, FIXTURE_PARAMS)) == 0.0


def test_cofiring_matches_brute_force():
    net = fig4()[0]
    trace = run(net, [TABLE], FIXTURE_PARAMS, 60)
    edges = [(e.src, e.dst) for e in net.edges]
    for window in (1, 2, 4):
        assert cofiring_counts(net, trace, window) == brute_cofiring(edges, trace.firings, window)


@st.composite
def traces(draw):
    net = fig2()
    ids = list(net.node_ids)
    steps = draw(st.lists(st.sets(st.sampled_from(ids), max_size=4), min_size=1, max_size=25))
    return net, Trace(tuple(frozenset(s) for s in steps), (), len(steps), 0)


@given(traces(), st.integers(1, 3))
def test_hebbian_never_weakens(case, window):
    net, trace = case
    gp = GrowthParams(coactivation_window=window, hebb_increment=0.3)
    after = hebbian_update(net, trace, gp).edge_map()
    counts = brute_cofiring([(e.src, e.dst) for e in net.edges], trace.firings, window)
    for e in net.edges:
        w = after[(e.src, e.dst)]
        assert w >= e.weight
        assert w == pytest.approx(max(e.weight, min(e.weight + 0.3 * counts[(e.src, e.dst)], gp.max_weight)))


def test_hebbian_empty_trace_is_identity():
    net = fig2()
    empty = Trace((frozenset(),) * 10, (), 10, 0)
    assert hebbian_update(net, empty, GrowthParams()) == net


def test_hebbian_rejects_foreign_nodes():
    with pytest.raises(ContractError):
        hebbian_update(fig2(), Trace((frozenset({"ghost"}),), (), 1, 0), GrowthParams())


MAPPING = {"eat": "table-fs", "I": "chair-fs"}


def test_prune_removes_spurious_prediction_and_link():
    net, reg = fig4()
    graph = build_prediction_graph([tokenize("I like to eat")], 3, MAPPING).with_pair(("eat",), "I")
    assert "I" in graph.successor(("eat",))
    new_net, new_graph, skipped = prune(net, reg, graph, [tokenize("eat I")])
    assert skipped == []
    assert "I" not in new_graph.successor(("eat",))
    assert new_graph.successor(("to",)) == graph.successor(("to",))
    assert len(new_net.edges) < len(net.edges)
    assert overlap(reg["chair-fs"], triggered_by(new_net, TABLE, FIXTURE_PARAMS)) == 0.0


def test_prune_reports_unknown_tokens():
    net, reg = fig4()
    graph = build_prediction_graph([tokenize("I like to eat")], 3)
    same_net, same_graph, skipped = prune(net, reg, graph, [tokenize("eat pizza")])
    assert same_net is net and same_graph is graph
    assert len(skipped) == 1 and "pizza" in skipped[0]


CORPUS = [tokenize(s) for s in ("I like to eat", "you like to sleep", "I want to eat", "we eat")]


@given(st.lists(st.lists(st.sampled_from(["I", "you", "we", "like", "want", "to", "eat", "sleep"]),
                         min_size=1, max_size=5), max_size=4))
def test_prune_never_touches_training_predictions(counter):
    net, reg = fig4()
    graph = build_prediction_graph(CORPUS, 3)
    _, pruned, _ = prune(net, reg, graph, counter)
    for ctx, tok in graph.training_pairs:
        assert tok in pruned.successor(ctx)


def test_growth_rounds_shape():
    net, reg = growth_rounds(3)
    assert {"g1", "g2", "g3"} <= set(reg.ids())
    assert linked(reg, "g2") == {"g1", "g3"}
    assert reg.all_loops() <= cycle_ids(net)


def test_denser_networks_sustain_longer():
    medians = []
    for k in range(5):
        net = growth_rounds(k)[0].with_node_params(energy_recharge_rate=0.2)
        times = [
            self_sustain_time(net, [TABLE], 1, DynParams(activation_decay=0.5, energy_jitter=0.5,
                                                         sustain_horizon=600, seed=s))
            for s in range(20)
        ]
        medians.append(statistics.median(times))
    assert medians == sorted(medians)
    assert medians[-1] > medians[0]
