"""Depth measurements for knowledge triples.

A triple is rendered to a sentence, scored token-by-token by an
autoregressive backend, and summarized by two metrics: the mean 1-based
prediction rank of its tail tokens (depth rank) and the perplexity of the
whole sentence. Triples whose depth rank exceeds a boundary (2000 by default,
calibrated to a GPT-2-class backend) count as deep.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .backends import ContextOverflowError, NextTokenDistribution, token_rank
from .triples import LabeledTriple, rendered_char_spans

logger = logging.getLogger(__name__)

DEEP_RANK_THRESHOLD = 2000.0

TripleKey = tuple[str, str, str]


class UndefinedCorrelationError(ValueError):
    """Pearson correlation requested for a zero-variance input."""


@dataclass(frozen=True)
class DepthScore:
    triple: LabeledTriple
    depth_rank: float
    perplexity: float
    backend_name: str

    def __post_init__(self):
        if self.depth_rank < 1:
            raise ValueError(f"depth_rank {self.depth_rank} must be >= 1")
        if self.perplexity < 1:
            raise ValueError(f"perplexity {self.perplexity} must be >= 1")


@dataclass(frozen=True)
class BinStat:
    bin_index: int
    metric_range: tuple[float, float]
    member_count: int
    mean_metric: float
    mean_annotated_depth: Optional[float] = None


@dataclass(frozen=True)
class RelationProfile:
    relation: str
    mean_depth_rank: float
    stddev_depth_rank: float
    count: int


def _tail_token_positions(seq, tail_char_start: int) -> list[int]:
    return [i for i, (start, _) in enumerate(seq.offsets) if start >= tail_char_start]


def depth_rank(triple: LabeledTriple, backend) -> float:
    """Mean 1-based rank of the tail tokens under ``backend``.

    Each tail token is ranked in the next-token distribution conditioned on
    every head and relation token plus the preceding tail tokens. Probability
    ties resolve by ascending token id. The backend tokenizer defines what
    counts as a tail token: subword splits inside the tail are ranked one by
    one.
    """
    text, _, (tail_start, _) = rendered_char_spans(triple)
    seq = backend.tokenize(text)
    if len(seq) > backend.context_window:
        raise ContextOverflowError(
            f"rendered sentence has {len(seq)} tokens, window is {backend.context_window}"
        )
    positions = _tail_token_positions(seq, tail_start)
    if not positions:
        raise ValueError(f"no tail tokens found for {triple}")
    ranks = []
    for pos in positions:
        dist = backend.next_token_logprobs(seq.ids[:pos])
        ranks.append(token_rank(dist, seq.ids[pos]))
    return sum(ranks) / len(ranks)


def perplexity(triple: LabeledTriple, backend) -> float:
    """Perplexity of the rendered sentence, sequence-start conditioned.

    A zero-probability token under a degenerate backend yields ``inf`` and is
    logged rather than raising.
    """
    text, _, _ = rendered_char_spans(triple)
    seq = backend.tokenize(text)
    if len(seq) == 0:
        raise ValueError(f"empty rendered sentence for {triple}")
    if len(seq) > backend.context_window:
        raise ContextOverflowError(
            f"rendered sentence has {len(seq)} tokens, window is {backend.context_window}"
        )
    total_nll = 0.0
    for pos, token_id in enumerate(seq.ids):
        dist = backend.next_token_logprobs(seq.ids[:pos])
        lp = float(dist.logprobs[token_id])
        if lp == -math.inf:
            logger.warning("zero-probability token %r in %r; perplexity is inf", token_id, text)
            return math.inf
        total_nll -= lp
    return math.exp(total_nll / len(seq))


def score_triple(triple: LabeledTriple, backend) -> DepthScore:
    return DepthScore(
        triple=triple,
        depth_rank=depth_rank(triple, backend),
        perplexity=perplexity(triple, backend),
        backend_name=backend.descriptor.name,
    )


def score_triples(triples: Sequence[LabeledTriple], backend) -> list[DepthScore]:
    return [score_triple(t, backend) for t in triples]


def is_deep(score: DepthScore, threshold: float = DEEP_RANK_THRESHOLD) -> bool:
    """True iff the depth rank is strictly larger than the boundary."""
    return score.depth_rank > threshold


def _metric_value(score: DepthScore, metric: str) -> float:
    if metric == "depth_rank":
        return score.depth_rank
    if metric == "perplexity":
        return score.perplexity
    raise ValueError(f"unknown metric {metric!r}")


def bin_statistics(
    scores: Sequence[DepthScore],
    annotations: Optional[dict[TripleKey, float]],
    metric: str,
    num_bins: int,
) -> list[BinStat]:
    """Equal-frequency bins over the chosen metric.

    Bin sizes differ by at most one. The per-bin annotated depth is averaged
    over the members present in ``annotations`` and absent when none are.
    """
    if not scores:
        raise ValueError("scores must be non-empty")
    if not 1 <= num_bins <= len(scores):
        raise ValueError(f"num_bins {num_bins} must be in [1, {len(scores)}]")
    ordered = sorted(scores, key=lambda s: _metric_value(s, metric))
    chunks = [c for c in np.array_split(np.arange(len(ordered)), num_bins)]
    stats = []
    for index, chunk in enumerate(chunks):
        members = [ordered[i] for i in chunk]
        values = [_metric_value(s, metric) for s in members]
        low = values[0]
        if index + 1 < len(chunks):
            next_members = chunks[index + 1]
            high = _metric_value(ordered[next_members[0]], metric)
        else:
            high = math.inf
        annotated = []
        if annotations:
            annotated = [annotations[s.triple.key()] for s in members if s.triple.key() in annotations]
        stats.append(
            BinStat(
                bin_index=index,
                metric_range=(low, high),
                member_count=len(members),
                mean_metric=float(np.mean(values)),
                mean_annotated_depth=float(np.mean(annotated)) if annotated else None,
            )
        )
    return stats


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation coefficient."""
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("inputs must have equal length >= 2")
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0:
        raise UndefinedCorrelationError("zero variance input")
    return float(np.clip((xc @ yc) / denom, -1.0, 1.0))


def relation_depth_profile(scores: Sequence[DepthScore]) -> list[RelationProfile]:
    """Per-relation mean and population standard deviation of depth rank."""
    if not scores:
        raise ValueError("scores must be non-empty")
    groups: dict[str, list[float]] = {}
    for s in scores:
        groups.setdefault(s.triple.relation, []).append(s.depth_rank)
    return [
        RelationProfile(
            relation=rel,
            mean_depth_rank=float(np.mean(ranks)),
            stddev_depth_rank=float(np.std(ranks)),
            count=len(ranks),
        )
        for rel, ranks in sorted(groups.items())
    ]


def distribution_ranges(range_edges: Sequence[float]) -> list[tuple[float, float]]:
    """Half-open ranges induced by the edges, with under- and overflow ranges."""
    edges = list(range_edges)
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError(f"range edges must be strictly increasing, got {edges}")
    bounds = [-math.inf] + edges + [math.inf]
    return list(zip(bounds, bounds[1:]))


def depth_distribution(scores: Sequence[DepthScore], range_edges: Sequence[float]) -> list[float]:
    """Proportion of scores per depth-rank range; proportions sum to 1."""
    if not scores:
        raise ValueError("scores must be non-empty")
    ranges = distribution_ranges(range_edges)
    counts = [0] * len(ranges)
    for s in scores:
        for i, (low, high) in enumerate(ranges):
            if low <= s.depth_rank < high:
                counts[i] += 1
                break
    return [c / len(scores) for c in counts]


SCORE_CSV_HEADER = ["head", "relation", "tail", "depth_rank", "perplexity", "backend"]


def write_scores_csv(path, scores: Sequence[DepthScore]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCORE_CSV_HEADER)
        for s in scores:
            writer.writerow(
                [s.triple.head, s.triple.relation, s.triple.tail,
                 repr(s.depth_rank), repr(s.perplexity), s.backend_name]
            )


def read_scores_csv(path) -> list[DepthScore]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SCORE_CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        scores = []
        for row in reader:
            if len(row) != len(SCORE_CSV_HEADER):
                raise ValueError(f"{path}: malformed row {row}")
            scores.append(
                DepthScore(
                    triple=LabeledTriple(head=row[0], relation=row[1], tail=row[2]),
                    depth_rank=float(row[3]),
                    perplexity=float(row[4]),
                    backend_name=row[5],
                )
            )
        return scores


def read_annotation_file(path) -> dict[TripleKey, float]:
    """Read tab-separated ``head<TAB>relation<TAB>tail<TAB>depth`` annotations.

    Depth grades live on the 1-to-4 scale used for human annotation.
    """
    annotations: dict[TripleKey, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split("\t")
            if len(fields) != 4:
                raise ValueError(f"{path}: line {line_no}: expected 4 fields")
            try:
                grade = float(fields[3])
            except ValueError as exc:
                raise ValueError(f"{path}: line {line_no}: bad depth grade {fields[3]!r}") from exc
            if not 1.0 <= grade <= 4.0:
                raise ValueError(f"{path}: line {line_no}: depth grade {grade} outside [1, 4]")
            triple = LabeledTriple(head=fields[0], relation=fields[1], tail=fields[2])
            annotations[triple.key()] = grade
    return annotations
