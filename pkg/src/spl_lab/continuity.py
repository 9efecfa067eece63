"""Successor-set prediction graphs over token sequences, continuity checks and
the knowing predicate."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ContractError

Context = tuple  # tuple[str, ...], possibly empty for sentence starts

OOV_LIMIT = 0.25


def tokenize(line: str) -> tuple[str, ...]:
    return tuple(line.split())


def load_corpus(path) -> list[tuple[str, ...]]:
    text = Path(path).read_text(encoding="utf-8")
    return [tokenize(line) for line in text.splitlines() if line.strip()]


@dataclass(frozen=True)
class PredictionGraph:
    successors: Mapping[Context, frozenset]
    vocabulary: frozenset
    max_order: int
    token_to_fixedset: Mapping[str, str] = field(default_factory=dict)
    training_pairs: frozenset = frozenset()

    def successor(self, context: Sequence[str]) -> frozenset:
        return self.successors.get(tuple(context), frozenset())

    def with_pair(self, context: Sequence[str], token: str) -> "PredictionGraph":
        """Add a successor entry that no training sentence supports."""
        ctx = tuple(context)
        if len(ctx) > self.max_order:
            raise ContractError(f"context longer than max_order {self.max_order}")
        succ = dict(self.successors)
        succ[ctx] = succ.get(ctx, frozenset()) | {token}
        vocab = self.vocabulary | set(ctx) | {token}
        return PredictionGraph(succ, vocab, self.max_order, self.token_to_fixedset, self.training_pairs)

    def without_pairs(self, pairs: Iterable[tuple[Context, str]]) -> "PredictionGraph":
        succ = {k: set(v) for k, v in self.successors.items()}
        for ctx, tok in pairs:
            if (ctx, tok) in self.training_pairs:
                continue
            succ.get(ctx, set()).discard(tok)
        succ = {k: frozenset(v) for k, v in succ.items() if v}
        return PredictionGraph(succ, self.vocabulary, self.max_order, self.token_to_fixedset, self.training_pairs)

    def with_mapping(self, mapping: Mapping[str, str]) -> "PredictionGraph":
        return PredictionGraph(self.successors, self.vocabulary, self.max_order, dict(mapping), self.training_pairs)


def _pairs_of(seq: Sequence[str], max_order: int):
    if seq:
        yield (), seq[0]
    for i in range(1, len(seq)):
        for n in range(1, min(max_order, i) + 1):
            yield tuple(seq[i - n : i]), seq[i]


def build_prediction_graph(
    corpus: Sequence[Sequence[str]], max_order: int = 3, token_to_fixedset: Mapping[str, str] | None = None
) -> PredictionGraph:
    """Successor sets for every context of length 0..max_order seen in ``corpus``.

    The empty context maps to the sentence-initial tokens.
    """
    if max_order < 1:
        raise ContractError("max_order must be >= 1")
    if not corpus:
        raise ContractError("corpus is empty")
    succ: dict[Context, set] = {}
    vocab: set[str] = set()
    pairs = set()
    for seq in corpus:
        seq = tuple(seq)
        vocab.update(seq)
        for ctx, tok in _pairs_of(seq, max_order):
            succ.setdefault(ctx, set()).add(tok)
            pairs.add((ctx, tok))
    return PredictionGraph(
        {k: frozenset(v) for k, v in succ.items()},
        frozenset(vocab),
        max_order,
        dict(token_to_fixedset or {}),
        frozenset(pairs),
    )


def exercised_pairs(graph: PredictionGraph, seq: Sequence[str]) -> set[tuple[Context, str]]:
    """Successor entries of ``graph`` that reading ``seq`` would rely on."""
    return {(c, t) for c, t in _pairs_of(tuple(seq), graph.max_order) if t in graph.successor(c)}


def predictions(graph: PredictionGraph, prefix: Sequence[str]) -> frozenset:
    """Successors of the prefix's trailing context of length ``min(len, max_order)``.

    There is no backoff to shorter contexts: an unseen context predicts nothing.
    """
    prefix = tuple(prefix)
    if not prefix:
        return graph.successor(())
    return graph.successor(prefix[-graph.max_order :])


@dataclass(frozen=True)
class ContinuityVerdict:
    continuous: bool
    first_break: tuple[int, tuple[str, ...]] | None
    coverage: float
    checked: int = 0
    unknown: tuple[str, ...] = ()
    reason: str = ""

    def to_dict(self) -> dict:
        fb = None if self.first_break is None else {"pos": self.first_break[0], "context": list(self.first_break[1])}
        return {"continuous": self.continuous, "first_break": fb, "coverage": self.coverage}


def subsequences(n_tokens: int, orders: Iterable[int]):
    """(start, end) index pairs, inclusive, ordered by end then length.

    Windows ending on the last token are skipped, since nothing needs to
    follow it. A one-token sequence checks itself and also passes when the
    token can start a sentence.
    """
    orders = sorted(set(orders))
    last = n_tokens - 1 if n_tokens > 1 else n_tokens
    for end in range(last):
        for k in orders:
            start = end - k + 1
            if start >= 0:
                yield start, end


def is_abstractly_continuous(
    graph: PredictionGraph,
    seq: Sequence[str],
    orders: Iterable[int] = (1, 2, 3),
    required_coverage: float = 0.9,
) -> ContinuityVerdict:
    seq = tuple(seq)
    orders = tuple(sorted(set(orders)))
    if not seq:
        raise ContractError("cannot check an empty sequence")
    if not orders or min(orders) < 1 or max(orders) > graph.max_order:
        raise ContractError(f"orders must lie within 1..{graph.max_order}")
    if not 0.0 < required_coverage <= 1.0:
        raise ContractError("required_coverage must lie in (0, 1]")
    unknown = tuple(t for t in seq if t not in graph.vocabulary)
    if len(unknown) > OOV_LIMIT * len(seq):
        return ContinuityVerdict(False, None, 0.0, 0, unknown, "too many unknown tokens")
    checked = hits = 0
    first_break = None
    for start, end in subsequences(len(seq), orders):
        window = seq[start : end + 1]
        if any(t in unknown for t in window):
            continue
        checked += 1
        lone_start = len(seq) == 1 and seq[0] in graph.successor(())
        if lone_start or predictions(graph, window):
            hits += 1
        elif first_break is None:
            first_break = (end, window)
    coverage = hits / checked if checked else 1.0
    ok = coverage >= required_coverage - 1e-12
    return ContinuityVerdict(ok, first_break, coverage, checked, unknown, "" if ok else "coverage below requirement")


@dataclass(frozen=True)
class KnowsResult:
    value: bool
    failed: tuple[str, ...]
    evidence: Mapping

    def __bool__(self) -> bool:
        return self.value


def membrane_loops(membrane, registry) -> set:
    if membrane is None:
        return set()
    out = set()
    for fs_id in membrane.active_sets:
        out |= registry[fs_id].loop_ids
    return out


def mapped_loops(graph: PredictionGraph, registry, seq: Sequence[str]) -> set:
    out = set()
    for tok in seq:
        fs_id = graph.token_to_fixedset.get(tok)
        if fs_id is not None and fs_id in registry:
            out |= registry[fs_id].loop_ids
    return out


def knows(
    membrane,
    graph: PredictionGraph,
    registry,
    seq: Sequence[str],
    orders: Iterable[int] = (1, 2, 3),
    required_coverage: float = 0.9,
) -> KnowsResult:
    """Feeling-of-knowing: a membrane exists, ``seq`` is continuous, and some
    token's fixed set shares loops with the membrane.

    ``failed`` lists every condition that does not hold: ``a`` (no membrane),
    ``b`` (not continuous), ``c`` (no loop overlap).
    """
    verdict = is_abstractly_continuous(graph, seq, orders, required_coverage)
    shared = membrane_loops(membrane, registry) & mapped_loops(graph, registry, seq)
    failed = []
    if membrane is None:
        failed.append("a")
    if not verdict.continuous:
        failed.append("b")
    if not shared:
        failed.append("c")
    evidence = {
        "membrane": None if membrane is None else membrane.to_dict(),
        "continuity": verdict.to_dict(),
        "shared_loops": sorted("-".join(lp) for lp in shared),
    }
    return KnowsResult(not failed, tuple(failed), evidence)
