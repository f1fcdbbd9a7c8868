"""Candidate construction: tail generation and taxonomy propagation.

Two sources feed the deep-candidate pool. A small autoregressive generator
fine-tuned on verified triples proposes new tails by beam search over
``head + relation-phrase`` prefixes. A taxonomy over head terms then spreads
each candidate sideways (terms sharing an ancestor at the same height) and
downward (descendants), holding the relation and tail fixed. Candidates that
survive set-difference against the seed pool are kept only when their depth
rank clears the threshold.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .backends import TrainableBigramBackend
from .depth import DEEP_RANK_THRESHOLD, depth_rank
from .triples import (
    LabeledTriple,
    TripleParseError,
    rendered_char_spans,
    rephrase_relation,
)

logger = logging.getLogger(__name__)

PROVENANCES = ("generated", "horizontal", "vertical")

CANDIDATE_TSV_HEADER = ("head", "relation", "tail", "provenance", "source_head", "distance", "depth_rank")


class SaturationError(RuntimeError):
    """Negative sampling could not find an unused corruption."""


def _normalize_term(term: str) -> str:
    return " ".join(term.lower().split())


@dataclass(frozen=True)
class Attribute:
    """The (relation, tail) pair a propagation step copies between heads."""

    relation: str
    tail: str

    def on_head(self, head: str) -> LabeledTriple:
        return LabeledTriple(head=head, relation=self.relation, tail=self.tail)


@dataclass(frozen=True)
class CandidateTriple:
    """A proposed unlabeled triple with a record of where it came from.

    ``distance`` is the taxonomy hop count for propagated candidates (the
    shared-ancestor height for horizontal moves, the generation gap for
    vertical ones) and None for generated ones.
    """

    triple: LabeledTriple
    provenance: str
    source_head: str
    distance: Optional[int] = None
    depth_rank: Optional[float] = None

    def __post_init__(self):
        if self.triple.label is not None:
            raise ValueError("candidate triples carry no label")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}")
        if (self.distance is None) != (self.provenance == "generated"):
            raise ValueError("distance is required exactly when provenance is propagated")
        if self.distance is not None and self.distance < 1:
            raise ValueError("distance must be >= 1")


class TaxonomyTree:
    """A forest of is-a edges over normalized terms.

    Each term has at most one parent; roots have none. Construction rejects
    cycles. Terms are lowercased with whitespace collapsed so lookups match
    triple head terms.
    """

    def __init__(self, edges: Iterable[tuple[str, str]]):
        self.parent: dict[str, str] = {}
        self.children: dict[str, list[str]] = {}
        nodes: set[str] = set()
        for child, parent in edges:
            child = _normalize_term(child)
            parent = _normalize_term(parent)
            if not child or not parent:
                raise ValueError("taxonomy terms must be non-empty")
            if child == parent:
                raise ValueError(f"self-edge on {child!r}")
            if child in self.parent and self.parent[child] != parent:
                raise ValueError(f"{child!r} has two parents")
            self.parent[child] = parent
            nodes.add(child)
            nodes.add(parent)
        for node in sorted(nodes):
            self.children.setdefault(node, [])
        for child, parent in self.parent.items():
            self.children[parent].append(child)
        for parent in self.children:
            self.children[parent].sort()
        self._check_acyclic()

    def _check_acyclic(self) -> None:
        for start in self.parent:
            seen = {start}
            node = start
            while node in self.parent:
                node = self.parent[node]
                if node in seen:
                    raise ValueError(f"taxonomy cycle through {node!r}")
                seen.add(node)

    def __contains__(self, term: str) -> bool:
        term = _normalize_term(term)
        return term in self.parent or term in self.children

    def terms(self) -> list[str]:
        return sorted(self.children)

    def ancestors(self, term: str) -> list[str]:
        """Chain of ancestors from parent to root."""
        node = _normalize_term(term)
        out = []
        while node in self.parent:
            node = self.parent[node]
            out.append(node)
        return out

    def descendants_within(self, term: str, max_distance: int) -> list[tuple[str, int]]:
        """Descendants up to ``max_distance`` generations, with their gap."""
        root = _normalize_term(term)
        out: list[tuple[str, int]] = []
        frontier = [root]
        for gap in range(1, max_distance + 1):
            nxt: list[str] = []
            for node in frontier:
                nxt.extend(self.children.get(node, []))
            out.extend((node, gap) for node in nxt)
            frontier = nxt
            if not frontier:
                break
        return out

    @classmethod
    def from_edge_file(cls, path) -> "TaxonomyTree":
        edges = []
        for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise TripleParseError(line_no, f"expected 'child<TAB>parent', got {raw!r}")
            edges.append((parts[0], parts[1]))
        return cls(edges)


def relatives_at_height(tree: TaxonomyTree, term: str, max_distance: int) -> list[tuple[str, int]]:
    """Terms sharing an ancestor with ``term`` at the same height.

    Height 1 relatives are siblings, height 2 are cousins, and so on. Each
    relative is reported once at the smallest height that connects it.
    """
    origin = _normalize_term(term)
    chain = tree.ancestors(origin)
    found: set[str] = {origin}
    out: list[tuple[str, int]] = []
    for g in range(1, min(max_distance, len(chain)) + 1):
        ancestor = chain[g - 1]
        level = [(ancestor, 0)]
        for _ in range(g):
            level = [(c, d + 1) for node, d in level for c in tree.children.get(node, [])]
        for node, _ in level:
            if node not in found:
                found.add(node)
                out.append((node, g))
    return out


def horizontal_propagate(
    tree: TaxonomyTree, source: Iterable[CandidateTriple], max_distance: int = 1
) -> list[CandidateTriple]:
    """Copy each source attribute onto same-height relatives of its head.

    Heads absent from the taxonomy contribute nothing. Duplicates (by
    normalized triple identity) keep the first source encountered.
    """
    if max_distance < 1:
        raise ValueError("max_distance must be >= 1")
    out: list[CandidateTriple] = []
    seen: set[tuple[str, str, str]] = set()
    for cand in source:
        head = cand.triple.head
        if head not in tree:
            continue
        attr = Attribute(relation=cand.triple.relation, tail=cand.triple.tail)
        for term, g in relatives_at_height(tree, head, max_distance):
            triple = attr.on_head(term)
            if triple.key() in seen:
                continue
            seen.add(triple.key())
            out.append(CandidateTriple(triple=triple, provenance="horizontal",
                                       source_head=_normalize_term(head), distance=g))
    return out


def vertical_propagate(
    tree: TaxonomyTree, source: Iterable[CandidateTriple], max_distance: int = 1
) -> list[CandidateTriple]:
    """Copy each source attribute onto descendants of its head."""
    if max_distance < 1:
        raise ValueError("max_distance must be >= 1")
    out: list[CandidateTriple] = []
    seen: set[tuple[str, str, str]] = set()
    for cand in source:
        head = cand.triple.head
        if head not in tree:
            continue
        attr = Attribute(relation=cand.triple.relation, tail=cand.triple.tail)
        for term, gap in tree.descendants_within(head, max_distance):
            triple = attr.on_head(term)
            if triple.key() in seen:
                continue
            seen.add(triple.key())
            out.append(CandidateTriple(triple=triple, provenance="vertical",
                                       source_head=_normalize_term(head), distance=gap))
    return out


def train_generator(
    triples: Sequence[LabeledTriple],
    backend: TrainableBigramBackend,
    steps: int,
    lr: float = 0.5,
    seed: int = 0,
    batch_size: Optional[int] = None,
) -> TrainableBigramBackend:
    """Fit the trainable bigram model to continue prefixes with tails.

    Only tail-position transitions contribute to the loss: the step into each
    tail token and the step from the last tail token to <eot>. The update is
    the exact softmax cross-entropy gradient on the affected logit rows. With
    ``batch_size`` unset every step uses the full pair set.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if not triples:
        raise ValueError("no triples to train on")
    vocab = backend.vocab
    # prev is None for the sequence-start row, otherwise a token id
    pairs: list[tuple[Optional[int], int]] = []
    for triple in triples:
        text, _, (tail_start, _) = rendered_char_spans(triple)
        seq = backend.tokenize(text)
        tail_positions = [i for i, (start, _end) in enumerate(seq.offsets) if start >= tail_start]
        if not tail_positions:
            continue
        for pos in tail_positions:
            prev = None if pos == 0 else seq.ids[pos - 1]
            pairs.append((prev, seq.ids[pos]))
        pairs.append((seq.ids[tail_positions[-1]], vocab.eot_id))
    if not pairs:
        raise ValueError("no tail transitions extracted")

    rng = random.Random(seed)
    for step in range(steps):
        batch = pairs if batch_size is None else [pairs[rng.randrange(len(pairs))] for _ in range(batch_size)]
        grads: dict[Optional[int], np.ndarray] = {}
        for prev, nxt in batch:
            row = backend.start_logits if prev is None else backend.logits[prev]
            z = row - row.max()
            g = np.exp(z)
            g /= g.sum()
            g[nxt] -= 1.0
            if prev in grads:
                grads[prev] += g
            else:
                grads[prev] = g
        for prev, g in grads.items():
            update = lr * g / len(batch)
            if prev is None:
                backend.start_logits -= update
            else:
                backend.logits[prev] -= update
        if not (np.isfinite(backend.logits).all() and np.isfinite(backend.start_logits).all()):
            raise RuntimeError(f"non-finite generator logits at step {step}")
    return backend


@dataclass(frozen=True)
class Hypothesis:
    ids: tuple[int, ...]
    score: float
    finished: bool


def beam_search(
    prefix,
    backend,
    width: int,
    max_len: int,
) -> list[Hypothesis]:
    """Length-capped beam search for tail continuations.

    ``prefix`` is a TokenSequence or a bare id sequence. Scores are summed
    token log-probabilities including the terminating <eot>; hypotheses that
    reach ``max_len`` without emitting <eot> are kept as they stand.
    Zero-probability extensions are dropped. Ties sort by the token id
    sequence, so a wide enough beam enumerates the space exactly.
    """
    if width < 1 or max_len < 1:
        raise ValueError("width and max_len must be >= 1")
    prefix_ids = list(prefix.ids) if hasattr(prefix, "ids") else list(prefix)
    eot = backend.vocab.eot_id
    beam = [Hypothesis(ids=(), score=0.0, finished=False)]
    for _ in range(max_len):
        candidates = [h for h in beam if h.finished]
        alive = [h for h in beam if not h.finished]
        if not alive:
            break
        for hyp in alive:
            dist = backend.next_token_logprobs(prefix_ids + list(hyp.ids))
            for token_id, lp in enumerate(dist.logprobs):
                lp = float(lp)
                if lp == float("-inf"):
                    continue
                if token_id == eot:
                    candidates.append(Hypothesis(ids=hyp.ids, score=hyp.score + lp, finished=True))
                else:
                    candidates.append(Hypothesis(ids=hyp.ids + (token_id,), score=hyp.score + lp, finished=False))
        candidates.sort(key=lambda h: (-h.score, h.ids))
        beam = candidates[:width]
    return [h if h.finished else Hypothesis(h.ids, h.score, True) for h in beam]


def generate_candidates(
    head_relation_pairs: Sequence[tuple[str, str]],
    backend,
    width: int,
    max_len: int,
) -> list[CandidateTriple]:
    """Beam-search tails for each (head, relation) prompt.

    Empty continuations are skipped; duplicates (by normalized identity) keep
    their first, highest-scoring occurrence.
    """
    out: list[CandidateTriple] = []
    seen: set[tuple[str, str, str]] = set()
    for head, relation in head_relation_pairs:
        phrase = rephrase_relation(relation).phrase
        prefix = backend.tokenize(f"{head} {phrase}").ids
        for hyp in beam_search(prefix, backend, width, max_len):
            if not hyp.ids:
                continue
            tail = backend.detokenize(hyp.ids)
            triple = LabeledTriple(head=head, relation=relation, tail=tail)
            if triple.key() in seen:
                continue
            seen.add(triple.key())
            out.append(CandidateTriple(triple=triple, provenance="generated",
                                       source_head=_normalize_term(head)))
    return out


def build_deep_candidates(
    s1: Iterable[CandidateTriple],
    s2: Iterable[CandidateTriple],
    backend,
    threshold: float = DEEP_RANK_THRESHOLD,
) -> list[CandidateTriple]:
    """Filter the expanded pool down to new, deep candidates.

    Keeps the set difference s2 minus s1 on normalized (head, relation,
    tail) keys, scores each survivor's depth rank, and retains those
    strictly above ``threshold``. Candidates the backend cannot score are
    dropped with a warning. Output sorts by depth rank, deepest first.
    """
    s1_keys = {c.triple.key() for c in s1}
    survivors: list[CandidateTriple] = []
    seen: set[tuple[str, str, str]] = set()
    for cand in s2:
        key = cand.triple.key()
        if key in s1_keys or key in seen:
            continue
        seen.add(key)
        try:
            rank = depth_rank(cand.triple, backend)
        except (RuntimeError, ValueError) as exc:
            logger.warning("dropping unscorable candidate %s: %s", cand.triple, exc)
            continue
        if rank > threshold:
            survivors.append(CandidateTriple(
                triple=cand.triple, provenance=cand.provenance,
                source_head=cand.source_head, distance=cand.distance, depth_rank=rank,
            ))
    survivors.sort(key=lambda c: (-c.depth_rank, c.triple.key()))
    return survivors


def negative_sample(
    positives: Sequence[LabeledTriple],
    count: int,
    seed: int = 0,
    max_attempts: int = 1000,
) -> list[LabeledTriple]:
    """Corrupt one field per negative, drawing from the observed vocabulary.

    Each negative replaces exactly one of head, relation, or tail (chosen
    uniformly) with a value seen in that field across the positives. Draws
    colliding with a positive retry up to ``max_attempts`` times before
    raising SaturationError. Deterministic given ``seed``.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if not positives:
        raise ValueError("need positives to sample from")
    taken = {t.key() for t in positives}
    pool = sorted(positives, key=lambda t: t.key())
    heads = sorted({t.head for t in pool})
    relations = sorted({t.relation for t in pool})
    tails = sorted({t.tail for t in pool})
    fields = (heads, relations, tails)
    rng = random.Random(seed)
    out: list[LabeledTriple] = []
    for _ in range(count):
        for _attempt in range(max_attempts):
            base = pool[rng.randrange(len(pool))]
            slot = rng.randrange(3)
            value = fields[slot][rng.randrange(len(fields[slot]))]
            parts = [base.head, base.relation, base.tail]
            parts[slot] = value
            negative = LabeledTriple(head=parts[0], relation=parts[1], tail=parts[2], label=0)
            if negative.key() not in taken:
                taken.add(negative.key())
                out.append(negative)
                break
        else:
            raise SaturationError(
                f"no unused corruption found in {max_attempts} attempts "
                f"({len(out)} of {count} sampled)"
            )
    return out


def write_candidate_tsv(path, candidates: Sequence[CandidateTriple], annotation_sheet: bool = False) -> None:
    """Write candidates as TSV; the annotation variant adds an empty label column."""
    header = CANDIDATE_TSV_HEADER + (("label",) if annotation_sheet else ())
    lines = ["\t".join(header)]
    for cand in candidates:
        row = [
            cand.triple.head,
            cand.triple.relation,
            cand.triple.tail,
            cand.provenance,
            cand.source_head,
            "" if cand.distance is None else str(cand.distance),
            "" if cand.depth_rank is None else repr(cand.depth_rank),
        ]
        if annotation_sheet:
            row.append("")
        lines.append("\t".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_candidate_tsv(path) -> list[CandidateTriple]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise TripleParseError(1, "empty candidate file")
    header = tuple(lines[0].split("\t"))
    if header[: len(CANDIDATE_TSV_HEADER)] != CANDIDATE_TSV_HEADER:
        raise TripleParseError(1, f"unexpected candidate header {lines[0]!r}")
    out = []
    for line_no, raw in enumerate(lines[1:], 2):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) < len(CANDIDATE_TSV_HEADER):
            raise TripleParseError(line_no, f"expected {len(CANDIDATE_TSV_HEADER)} fields, got {len(parts)}")
        head, relation, tail, provenance, source_head, distance, rank = parts[:7]
        out.append(CandidateTriple(
            triple=LabeledTriple(head=head, relation=relation, tail=tail),
            provenance=provenance,
            source_head=source_head,
            distance=int(distance) if distance else None,
            depth_rank=float(rank) if rank else None,
        ))
    return out
