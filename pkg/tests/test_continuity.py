import json

import pytest
from hypothesis import assume, given, strategies as st

from oracles import brute_ngrams
from spl_lab.continuity import (
    build_prediction_graph,
    is_abstractly_continuous,
    knows,
    load_corpus,
    mapped_loops,
    membrane_loops,
    predictions,
    subsequences,
    tokenize,
)
from spl_lab.dynamics import Stimulus
from spl_lab.errors import ContractError
from spl_lab.library import fig4, fixture_path, grown_params
from spl_lab.membrane import detect_membrane

CORPUS = load_corpus(fixture_path("pizza.txt"))
MAPPING = json.loads(fixture_path("pizza-mapping.json").read_text())
GRAPH = build_prediction_graph(CORPUS, 3, MAPPING)
SCRAMBLED = tokenize("pizza to like I tonight eat")
WORDS = sorted(GRAPH.vocabulary)


@pytest.fixture(scope="module")
def grown():
    net, reg = fig4()
    m = detect_membrane(net, reg, [Stimulus.pulse(["I1", "I2", "I3"], duration=200)], grown_params())
    assert m is not None
    return m, reg


def test_training_sentence_is_continuous():
    v = is_abstractly_continuous(GRAPH, tokenize("I like to eat pizza tonight"))
    assert v.continuous and v.coverage == 1.0 and v.first_break is None


def test_scrambled_sentence_breaks_early():
    v = is_abstractly_continuous(GRAPH, SCRAMBLED)
    assert not v.continuous
    assert v.first_break == (1, ("pizza", "to"))
    assert v.coverage == pytest.approx(5 / 12)


def test_graph_matches_brute_ngrams():
    for order in (1, 2, 3, 4):
        assert dict(build_prediction_graph(CORPUS, order).successors) == brute_ngrams(CORPUS, order)


@given(st.lists(st.lists(st.sampled_from("abcde"), min_size=1, max_size=6), min_size=1, max_size=6),
       st.integers(1, 3))
def test_graph_matches_brute_ngrams_random(corpus, order):
    assert dict(build_prediction_graph(corpus, order).successors) == brute_ngrams(corpus, order)


@given(st.lists(st.lists(st.sampled_from("abcd"), min_size=1, max_size=6), min_size=1, max_size=5),
       st.lists(st.sampled_from("abcd"), min_size=1, max_size=6),
       st.lists(st.sampled_from("abcd"), max_size=3))
def test_more_training_never_removes_predictions(corpus, extra, prefix):
    small = build_prediction_graph(corpus, 3)
    big = build_prediction_graph(corpus + [extra], 3)
    assert predictions(small, prefix) <= predictions(big, prefix)


@given(st.lists(st.lists(st.sampled_from("abcde"), min_size=1, max_size=7), min_size=1, max_size=5),
       st.data())
def test_training_sentences_fully_covered(corpus, data):
    graph = build_prediction_graph(corpus, 3)
    sent = data.draw(st.sampled_from(corpus))
    v = is_abstractly_continuous(graph, sent, required_coverage=1.0)
    assert v.continuous and v.coverage == 1.0


def test_every_pizza_sentence_is_continuous():
    for sent in CORPUS:
        assert is_abstractly_continuous(GRAPH, sent, required_coverage=1.0).continuous


@given(st.permutations(list(tokenize("I like to eat pizza tonight"))))
def test_permutations_only_continuous_if_seen(perm):
    v = is_abstractly_continuous(GRAPH, perm, required_coverage=1.0)
    if v.continuous:
        # a fully covered order must be readable from the graph step by step
        assert all(perm[i] in predictions(GRAPH, perm[:i]) for i in range(1, len(perm) - 1))


def test_subsequences_skip_final_token():
    assert list(subsequences(3, (1, 2))) == [(0, 0), (1, 1), (0, 1)]
    assert list(subsequences(1, (1, 2, 3))) == [(0, 0)]


def test_contracts():
    with pytest.raises(ContractError):
        build_prediction_graph([], 3)
    with pytest.raises(ContractError):
        build_prediction_graph(CORPUS, 0)
    with pytest.raises(ContractError):
        is_abstractly_continuous(GRAPH, ())
    with pytest.raises(ContractError):
        is_abstractly_continuous(GRAPH, SCRAMBLED, orders=(4,))
    with pytest.raises(ContractError):
        is_abstractly_continuous(GRAPH, SCRAMBLED, required_coverage=0.0)


def test_unknown_tokens():
    many = is_abstractly_continuous(GRAPH, tokenize("I like zorp blat"))
    assert not many.continuous and many.reason == "too many unknown tokens"
    assert many.unknown == ("zorp", "blat")
    few = is_abstractly_continuous(GRAPH, tokenize("I like to eat zorp"))
    assert few.unknown == ("zorp",) and few.continuous


def test_knows_requires_all_three(grown):
    m, reg = grown
    good = knows(m, GRAPH, reg, tokenize("I like to eat pizza tonight"))
    assert good and good.failed == ()
    assert knows(m, GRAPH, reg, SCRAMBLED).failed == ("b",)
    assert knows(None, GRAPH, reg, tokenize("I like to eat pizza tonight")).failed == ("a", "c")
    unmapped = build_prediction_graph(CORPUS, 3)
    assert knows(m, unmapped, reg, tokenize("I like to eat pizza tonight")).failed == ("c",)


def test_knows_rechecks_membrane_after_removing_sets(grown):
    m, reg = grown
    # a membrane that holds only sets the sentence never maps to
    from dataclasses import replace

    partial = replace(m, active_sets=frozenset({"table-fs"}))
    assert not knows(partial, GRAPH, reg, tokenize("I am hungry"))
    assert knows(partial, GRAPH, reg, tokenize("I want to eat pizza"))


def test_training_loops_equal_membrane_loops(grown):
    m, reg = grown
    union = set()
    for sent in CORPUS:
        if is_abstractly_continuous(GRAPH, sent).continuous:
            union |= mapped_loops(GRAPH, reg, sent)
    assert union == membrane_loops(m, reg)


def test_mapping_of_unknown_set_is_ignored(grown):
    _, reg = grown
    g = GRAPH.with_mapping({"pizza": "ghost-fs"})
    assert mapped_loops(g, reg, ["pizza"]) == set()
