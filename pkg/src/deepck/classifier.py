"""Evidence-based triple classifier.

Each evidence pair becomes one input sequence
``<cls> head-sentence <sep> relation-phrase <sep> tail-sentence``. The
encoder output rows for the <cls> token, the head-term tokens, the relation
tokens and the tail-term tokens are concatenated, pooled with a multi-head
self-attention block, and classified from the <cls> position through a linear
softmax layer. Training minimizes the per-pair negative log-likelihood
averaged over a triple's evidence; inference ensembles the per-pair
predictions by probability averaging, maximum confidence, or majority vote.

A conventional baseline mode classifies the bare rendered triple from its
<cls> representation with no pooling block.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import torch
from torch import nn

from .backends import CapabilityError, WordVocab
from .encoder import TorchEncoderBackend
from .retrieval import Corpus, EvidencePair, EvidenceSet
from .triples import LabeledTriple, render_template

logger = logging.getLogger(__name__)

PROB_TOLERANCE = 1e-6
PROB_FLOOR = 1e-12

STRATEGIES = ("avg", "max", "vote")


class AssemblyError(RuntimeError):
    """Input could not be assembled without destroying a term span."""


@dataclass
class ClassifierConfig:
    """Model and training hyperparameters.

    The defaults mirror the reference setup: a 24-layer, 16-head, 1024-dim
    encoder with an 8-head pooling block, 3 evidence pairs per triple,
    learning rate 1e-5 and 24k Adam steps. Tests and desk-scale runs override
    them with much smaller values.
    """

    encoder_layers: int = 24
    encoder_heads: int = 16
    hidden_dim: int = 1024
    pool_heads: int = 8
    k: int = 3
    learning_rate: float = 1e-5
    train_steps: int = 24000
    seed: int = 0
    batch_size: int = 8
    max_len: int = 128

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if min(self.encoder_layers, self.train_steps, self.batch_size) < 0:
            raise ValueError("encoder_layers, train_steps and batch_size must be >= 0")
        if min(self.encoder_heads, self.hidden_dim, self.pool_heads, self.max_len) < 1:
            raise ValueError("dimensions must be positive")
        if self.hidden_dim % self.pool_heads != 0:
            raise ValueError("pool_heads must divide hidden_dim")
        if self.hidden_dim % self.encoder_heads != 0:
            raise ValueError("encoder_heads must divide hidden_dim")


@dataclass(frozen=True)
class AssembledInput:
    """Token ids plus the spans pooled by the classification head."""

    ids: tuple[int, ...]
    span_cls: tuple[int, int]
    span_h: tuple[int, int]
    span_r: tuple[int, int]
    span_t: tuple[int, int]

    def __post_init__(self):
        spans = [self.span_cls, self.span_h, self.span_r, self.span_t]
        for start, end in spans:
            if not 0 <= start < end <= len(self.ids):
                raise ValueError(f"span ({start}, {end}) outside sequence of length {len(self.ids)}")
        for (_, prev_end), (start, _) in zip(spans, spans[1:]):
            if start < prev_end:
                raise ValueError("spans must be ordered cls < h < R < t and disjoint")

    def pooled_spans(self) -> tuple[tuple[int, int], ...]:
        return (self.span_cls, self.span_h, self.span_r, self.span_t)


@dataclass(frozen=True)
class PredictionBundle:
    """Per-pair binary distributions plus the ensembled label."""

    per_pair: tuple[tuple[float, float], ...]
    label: int
    strategy: str

    def __post_init__(self):
        _check_probability_pairs(self.per_pair)
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


class PoolingHead(nn.Module):
    """Multi-head self-attention over the selected rows, then a linear softmax
    classifier read at the <cls> position."""

    def __init__(self, hidden_dim: int, num_heads: int):
        super().__init__()
        self.attn = nn.MultiheadAttention(hidden_dim, num_heads, batch_first=True)
        self.out = nn.Linear(hidden_dim, 2, bias=False)

    def forward(self, e_hat: torch.Tensor) -> torch.Tensor:
        x = e_hat.unsqueeze(0)
        h, _ = self.attn(x, x, x, need_weights=False)
        return self.out(h[0, 0])


class LinearHead(nn.Module):
    """Plain linear softmax layer for the triple-concatenation baseline."""

    def __init__(self, hidden_dim: int):
        super().__init__()
        self.out = nn.Linear(hidden_dim, 2, bias=False)

    def forward(self, cls_row: torch.Tensor) -> torch.Tensor:
        return self.out(cls_row)


def _check_probability_pairs(per_pair: Sequence[tuple[float, float]]) -> None:
    if len(per_pair) < 1:
        raise ValueError("need at least one probability pair")
    for p0, p1 in per_pair:
        if p0 < -PROB_TOLERANCE or p1 < -PROB_TOLERANCE or abs(p0 + p1 - 1.0) > PROB_TOLERANCE:
            raise ValueError(f"({p0}, {p1}) is not a binary distribution")


def _find_subsequence(haystack: Sequence[int], needle: Sequence[int]) -> Optional[int]:
    n = len(needle)
    if n == 0 or n > len(haystack):
        return None
    for i in range(len(haystack) - n + 1):
        if tuple(haystack[i : i + n]) == tuple(needle):
            return i
    return None


def _trim_symmetric(regions: list[list[int]], overflow: int) -> None:
    # regions are the four stretches of removable sentence tokens; trim the
    # currently longest one token at a time, from the sentence's outer end
    for _ in range(overflow):
        region = max(regions, key=len)
        if not region:
            raise AssemblyError("sequence exceeds the context window even after trimming")
        region.pop()


def assemble_input(
    triple: LabeledTriple,
    pair: EvidencePair,
    corpus: Corpus,
    backend,
) -> AssembledInput:
    """Build the classifier input sequence for one evidence pair.

    Term spans mark the first occurrence of the head term inside the head
    sentence and of the tail term inside the tail sentence. If the assembled
    sequence exceeds the encoder window, sentence tokens are trimmed from the
    flanks around the term spans, longest flank first; term and relation
    spans are never trimmed.
    """
    vocab = backend.vocab
    head_sent = list(backend.tokenize(pair.resolve_head_text(corpus)).ids)
    tail_sent = list(backend.tokenize(pair.resolve_tail_text(corpus)).ids)
    relation_ids = list(backend.tokenize(pair.relation_phrase.phrase).ids)
    head_term = list(backend.tokenize(triple.head).ids)
    tail_term = list(backend.tokenize(triple.tail).ids)
    h_at = _find_subsequence(head_sent, head_term)
    t_at = _find_subsequence(tail_sent, tail_term)
    if h_at is None or t_at is None or not relation_ids:
        raise AssemblyError(f"term tokens not found in evidence sentences for {triple}")

    h_pre = head_sent[:h_at]
    h_term = head_sent[h_at : h_at + len(head_term)]
    h_post = head_sent[h_at + len(head_term) :]
    t_pre = tail_sent[:t_at]
    t_term = tail_sent[t_at : t_at + len(tail_term)]
    t_post = tail_sent[t_at + len(tail_term) :]

    fixed = 1 + len(h_term) + 1 + len(relation_ids) + 1 + len(t_term)
    window = backend.context_window
    if fixed > window:
        raise AssemblyError(f"term spans alone need {fixed} tokens, window is {window}")
    removable = len(h_pre) + len(h_post) + len(t_pre) + len(t_post)
    overflow = fixed + removable - window
    if overflow > 0:
        # pop() removes the token furthest from the term, so flip prefixes
        h_pre.reverse(); t_pre.reverse()
        _trim_symmetric([h_pre, h_post, t_pre, t_post], overflow)
        h_pre.reverse(); t_pre.reverse()

    ids = [vocab.cls_id] + h_pre + h_term + h_post + [vocab.sep_id] + relation_ids + [vocab.sep_id] + t_pre + t_term + t_post
    h_start = 1 + len(h_pre)
    r_start = 1 + len(h_pre) + len(h_term) + len(h_post) + 1
    t_start = r_start + len(relation_ids) + 1 + len(t_pre)
    return AssembledInput(
        ids=tuple(ids),
        span_cls=(0, 1),
        span_h=(h_start, h_start + len(h_term)),
        span_r=(r_start, r_start + len(relation_ids)),
        span_t=(t_start, t_start + len(t_term)),
    )


def _rows_to_tensor(rows, dtype: torch.dtype) -> torch.Tensor:
    if torch.is_tensor(rows):
        return rows.to(dtype)
    return torch.as_tensor(rows, dtype=dtype)


def _pair_logits(rows: torch.Tensor, assembled: AssembledInput, head: PoolingHead) -> torch.Tensor:
    e_hat = torch.cat([rows[start:end] for start, end in assembled.pooled_spans()], dim=0)
    return head(e_hat)


def forward(assembled: AssembledInput, backend, head: PoolingHead) -> tuple[float, float]:
    """Probability pair for one assembled evidence input."""
    if not backend.descriptor.supports_encoding:
        raise CapabilityError(f"backend {backend.descriptor.name} cannot encode")
    dtype = next(head.parameters()).dtype
    with torch.no_grad():
        rows = _rows_to_tensor(backend.encode_ids(assembled.ids), dtype)
        probs = torch.softmax(_pair_logits(rows, assembled, head), dim=0)
    return (float(probs[0]), float(probs[1]))


def loss(per_pair, gold: int):
    """Negative log-likelihood of the gold label averaged over the pairs.

    Accepts plain floats or torch scalars (the training path), and clamps
    zero gold probabilities at 1e-12 with a logged warning.
    """
    if gold not in (0, 1):
        raise ValueError("gold label must be 0 or 1")
    if len(per_pair) < 1:
        raise ValueError("need at least one probability pair")
    total = None
    for p0, p1 in per_pair:
        p = p1 if gold == 1 else p0
        if torch.is_tensor(p):
            raw = float(p.detach())
            if raw < PROB_FLOOR:
                logger.warning("gold probability %.3g clamped to %.0e", raw, PROB_FLOOR)
            term = -torch.log(torch.clamp(p, min=PROB_FLOOR))
        else:
            if p < PROB_FLOOR:
                logger.warning("gold probability %.3g clamped to %.0e", p, PROB_FLOOR)
                p = PROB_FLOOR
            term = -math.log(p)
        total = term if total is None else total + term
    return total / len(per_pair)


def predict_avg(per_pair: Sequence[tuple[float, float]]) -> int:
    """Label with the larger mean probability; ties resolve to 1."""
    _check_probability_pairs(per_pair)
    mean0 = sum(p0 for p0, _ in per_pair) / len(per_pair)
    mean1 = sum(p1 for _, p1 in per_pair) / len(per_pair)
    return 1 if mean1 >= mean0 else 0


def predict_max(per_pair: Sequence[tuple[float, float]]) -> int:
    """Label whose single most confident pair probability is larger."""
    _check_probability_pairs(per_pair)
    max0 = max(p0 for p0, _ in per_pair)
    max1 = max(p1 for _, p1 in per_pair)
    return 1 if max1 >= max0 else 0


def predict_vote(per_pair: Sequence[tuple[float, float]]) -> int:
    """Majority vote over per-pair argmax labels; ties resolve to 1."""
    _check_probability_pairs(per_pair)
    n1 = sum(1 for p0, p1 in per_pair if p1 >= p0)
    n0 = len(per_pair) - n1
    return 1 if n1 >= n0 else 0


PREDICTORS = {"avg": predict_avg, "max": predict_max, "vote": predict_vote}


def strategy_scores(per_pair: Sequence[tuple[float, float]], strategy: str) -> tuple[float, float]:
    """The aggregate pair each strategy takes its argmax over."""
    _check_probability_pairs(per_pair)
    if strategy == "avg":
        k = len(per_pair)
        return (sum(p for p, _ in per_pair) / k, sum(p for _, p in per_pair) / k)
    if strategy == "max":
        return (max(p for p, _ in per_pair), max(p for _, p in per_pair))
    if strategy == "vote":
        n1 = sum(1 for p0, p1 in per_pair if p1 >= p0)
        k = len(per_pair)
        return ((k - n1) / k, n1 / k)
    raise ValueError(f"unknown strategy {strategy!r}")


def classify_triple(
    evidence: EvidenceSet,
    corpus: Corpus,
    backend,
    head: PoolingHead,
    strategy: str = "avg",
    k: Optional[int] = None,
) -> PredictionBundle:
    """Per-pair probabilities and the ensembled label for one triple."""
    pairs = evidence.pairs if k is None else evidence.pairs[:k]
    per_pair = tuple(
        forward(assemble_input(evidence.triple, pair, corpus, backend), backend, head)
        for pair in pairs
    )
    return PredictionBundle(per_pair=per_pair, label=PREDICTORS[strategy](per_pair), strategy=strategy)


def baseline_triple_classify(triple: LabeledTriple, backend, head: LinearHead) -> tuple[float, float]:
    """Conventional mode: classify the bare rendered triple from <cls>."""
    if not backend.descriptor.supports_encoding:
        raise CapabilityError(f"backend {backend.descriptor.name} cannot encode")
    ids = (backend.vocab.cls_id,) + backend.tokenize(render_template(triple).text).ids
    dtype = next(head.parameters()).dtype
    with torch.no_grad():
        rows = _rows_to_tensor(backend.encode_ids(ids), dtype)
        probs = torch.softmax(head(rows[0]), dim=0)
    return (float(probs[0]), float(probs[1]))


@dataclass
class TrainResult:
    backend: TorchEncoderBackend
    head: nn.Module
    config: ClassifierConfig
    loss_curve: list[tuple[int, float]] = field(default_factory=list)


def _tensor_probs(logits: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    probs = torch.softmax(logits, dim=0)
    return (probs[0], probs[1])


def train(
    dataset: Sequence[tuple[EvidenceSet, int]],
    config: ClassifierConfig,
    backend: TorchEncoderBackend,
    corpus: Corpus,
) -> TrainResult:
    """Adam-train the encoder and pooling head on evidence-labeled triples.

    Runs exactly ``config.train_steps`` minibatch steps; a triple with fewer
    than k evidence pairs is averaged over the pairs it has. Deterministic
    given ``config.seed``. Raises on an empty dataset or a non-finite loss.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    if not backend.descriptor.supports_training:
        raise CapabilityError(f"backend {backend.descriptor.name} is not trainable")
    if backend.hidden_dim != config.hidden_dim:
        raise ValueError("backend hidden_dim does not match config.hidden_dim")

    torch.manual_seed(config.seed)
    head = PoolingHead(config.hidden_dim, config.pool_heads)
    assembled: list[tuple[list[AssembledInput], int]] = []
    for evidence, label in dataset:
        if label not in (0, 1):
            raise ValueError("training labels must be 0 or 1")
        inputs = [
            assemble_input(evidence.triple, pair, corpus, backend)
            for pair in evidence.pairs[: config.k]
        ]
        assembled.append((inputs, label))

    optimizer = torch.optim.Adam(
        list(backend.module.parameters()) + list(head.parameters()),
        lr=config.learning_rate,
    )
    rng = random.Random(config.seed)
    order: list[int] = []
    loss_curve: list[tuple[int, float]] = []
    backend.module.train()
    head.train()
    for step in range(config.train_steps):
        if len(order) < config.batch_size:
            refill = list(range(len(assembled)))
            rng.shuffle(refill)
            order.extend(refill)
        batch = [assembled[i] for i in order[: config.batch_size]]
        del order[: config.batch_size]

        flat_ids = [inp.ids for inputs, _ in batch for inp in inputs]
        rows, _ = backend.encode_batch(flat_ids)
        cursor = 0
        batch_loss = None
        for inputs, label in batch:
            per_pair = []
            for inp in inputs:
                logits = _pair_logits(rows[cursor], inp, head)
                per_pair.append(_tensor_probs(logits))
                cursor += 1
            triple_loss = loss(per_pair, label)
            batch_loss = triple_loss if batch_loss is None else batch_loss + triple_loss
        batch_loss = batch_loss / len(batch)
        # +0.0 folds the -0.0 that -log(1) produces into plain zero
        loss_value = float(batch_loss.detach()) + 0.0
        if not math.isfinite(loss_value):
            raise RuntimeError(f"non-finite loss {loss_value} at step {step}")
        optimizer.zero_grad()
        batch_loss.backward()
        optimizer.step()
        loss_curve.append((step, loss_value))
    backend.module.eval()
    head.eval()
    return TrainResult(backend=backend, head=head, config=config, loss_curve=loss_curve)


def train_baseline(
    triples: Sequence[LabeledTriple],
    config: ClassifierConfig,
    backend: TorchEncoderBackend,
) -> TrainResult:
    """Train the triple-concatenation baseline (no evidence, no pooling)."""
    labeled = [t for t in triples if t.label is not None]
    if not labeled:
        raise ValueError("baseline training needs labeled triples")
    torch.manual_seed(config.seed)
    head = LinearHead(config.hidden_dim)
    encoded = [
        ((backend.vocab.cls_id,) + backend.tokenize(render_template(t).text).ids, t.label)
        for t in labeled
    ]
    optimizer = torch.optim.Adam(
        list(backend.module.parameters()) + list(head.parameters()),
        lr=config.learning_rate,
    )
    rng = random.Random(config.seed)
    order: list[int] = []
    loss_curve: list[tuple[int, float]] = []
    backend.module.train()
    head.train()
    for step in range(config.train_steps):
        if len(order) < config.batch_size:
            refill = list(range(len(encoded)))
            rng.shuffle(refill)
            order.extend(refill)
        batch = [encoded[i] for i in order[: config.batch_size]]
        del order[: config.batch_size]
        rows, _ = backend.encode_batch([ids for ids, _ in batch])
        batch_loss = None
        for row_index, (_, label) in enumerate(batch):
            per_pair = [_tensor_probs(head(rows[row_index, 0]))]
            triple_loss = loss(per_pair, label)
            batch_loss = triple_loss if batch_loss is None else batch_loss + triple_loss
        batch_loss = batch_loss / len(batch)
        # +0.0 folds the -0.0 that -log(1) produces into plain zero
        loss_value = float(batch_loss.detach()) + 0.0
        if not math.isfinite(loss_value):
            raise RuntimeError(f"non-finite loss {loss_value} at step {step}")
        optimizer.zero_grad()
        batch_loss.backward()
        optimizer.step()
        loss_curve.append((step, loss_value))
    backend.module.eval()
    head.eval()
    return TrainResult(backend=backend, head=head, config=config, loss_curve=loss_curve)


MANIFEST_NAME = "manifest.json"
WEIGHTS_NAME = "weights.pt"
VOCAB_NAME = "vocab.txt"


def save_checkpoint(directory, result: TrainResult, model_type: str = "context") -> None:
    """Write an opaque checkpoint directory: manifest, vocabulary, weights."""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": 1,
        "model_type": model_type,
        "seed": result.config.seed,
        "config": asdict(result.config),
        "backend": asdict(result.backend.descriptor),
        "encoder": {
            "hidden_dim": result.backend.hidden_dim,
            "layers": result.backend.layers,
            "heads": result.backend.heads,
            "max_len": result.backend.max_len,
        },
    }
    (path / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    result.backend.vocab.save(path / VOCAB_NAME)
    torch.save(
        {"encoder": result.backend.module.state_dict(), "head": result.head.state_dict()},
        path / WEIGHTS_NAME,
    )


def load_checkpoint(directory) -> tuple[TorchEncoderBackend, nn.Module, ClassifierConfig, str]:
    path = Path(directory)
    manifest = json.loads((path / MANIFEST_NAME).read_text(encoding="utf-8"))
    config = ClassifierConfig(**manifest["config"])
    vocab = WordVocab.from_file(path / VOCAB_NAME)
    enc = manifest["encoder"]
    backend = TorchEncoderBackend(
        vocab,
        hidden_dim=enc["hidden_dim"],
        layers=enc["layers"],
        heads=enc["heads"],
        max_len=enc["max_len"],
        seed=manifest["seed"],
    )
    model_type = manifest.get("model_type", "context")
    head: nn.Module
    if model_type == "baseline":
        head = LinearHead(enc["hidden_dim"])
    else:
        head = PoolingHead(enc["hidden_dim"], config.pool_heads)
    weights = torch.load(path / WEIGHTS_NAME, weights_only=True)
    backend.module.load_state_dict(weights["encoder"])
    head.load_state_dict(weights["head"])
    backend.module.eval()
    head.eval()
    return backend, head, config, model_type
