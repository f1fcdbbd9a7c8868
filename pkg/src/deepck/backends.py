"""Scoring and encoding backends.

Everything here is deterministic and table-driven so that expected values in
tests can be computed by hand. The trainable transformer encoder lives in
:mod:`deepck.encoder`; adapters for downloaded pretrained models live in
:mod:`deepck.pretrained`. Both plug in behind the same interface.

Toy backend table file format: lines ``prev_token next_token probability``,
where the reserved prev token ``*`` defines the unconditional first-token row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .tokenization import word_spans

UNK = "<unk>"
START = "<s>"
CLS = "<cls>"
SEP = "<sep>"
EOT = "<eot>"
RESERVED = (UNK, START, CLS, SEP, EOT)


class ContextOverflowError(RuntimeError):
    """Prefix or sequence longer than the backend context window."""


class CapabilityError(RuntimeError):
    """Operation requested from a backend that does not support it."""


@dataclass(frozen=True)
class BackendDescriptor:
    """Capabilities and special-token layout of a backend.

    Word backends define all five special roles; scoring-only adapters over
    external tokenizers may leave roles they lack as None.
    """

    name: str
    vocab_size: int
    supports_encoding: bool
    supports_training: bool
    start_id: int
    cls_id: Optional[int] = None
    sep_id: Optional[int] = None
    unk_id: Optional[int] = None
    eot_id: Optional[int] = None

    def __post_init__(self):
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be positive")
        specials = [s for s in (self.start_id, self.cls_id, self.sep_id, self.unk_id, self.eot_id)
                    if s is not None]
        if len(set(specials)) != len(specials):
            raise ValueError("special token ids must be distinct")
        if any(not 0 <= s < self.vocab_size for s in specials):
            raise ValueError("special token ids must be < vocab_size")


@dataclass(frozen=True)
class TokenSequence:
    """Token ids plus the character span each token covers in the source text."""

    ids: tuple[int, ...]
    offsets: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.ids) != len(self.offsets):
            raise ValueError("ids and offsets must have equal length")
        prev_start = 0
        for start, end in self.offsets:
            if start < prev_start or end < start:
                raise ValueError("offsets must be non-decreasing and well-formed")
            prev_start = start

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class NextTokenDistribution:
    """Normalized log-probabilities over the full vocabulary."""

    logprobs: np.ndarray

    def __post_init__(self):
        total = float(np.exp(self.logprobs).sum())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"distribution mass {total} not within 1e-6 of 1")


def token_rank(dist: NextTokenDistribution, token_id: int) -> int:
    """1-based rank of ``token_id``; probability ties resolve by ascending id."""
    lp = dist.logprobs
    target = lp[token_id]
    higher = int(np.sum(lp > target))
    tied_before = int(np.sum(lp[:token_id] == target))
    return 1 + higher + tied_before


class WordVocab:
    """Word-to-id table; the reserved tokens are appended after the words."""

    def __init__(self, vocab_words: Sequence[str]):
        cleaned = []
        seen = set()
        for w in vocab_words:
            lw = w.lower()
            if lw in RESERVED:
                raise ValueError(f"{lw!r} is reserved")
            if not lw or any(c.isspace() for c in lw):
                raise ValueError(f"vocabulary word {w!r} must be non-empty without spaces")
            if lw not in seen:
                seen.add(lw)
                cleaned.append(lw)
        self._words = tuple(cleaned) + RESERVED
        self._ids = {w: i for i, w in enumerate(self._words)}

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._ids

    @property
    def unk_id(self) -> int:
        return self._ids[UNK]

    @property
    def start_id(self) -> int:
        return self._ids[START]

    @property
    def cls_id(self) -> int:
        return self._ids[CLS]

    @property
    def sep_id(self) -> int:
        return self._ids[SEP]

    @property
    def eot_id(self) -> int:
        return self._ids[EOT]

    def id(self, word: str) -> int:
        return self._ids.get(word.lower(), self.unk_id)

    def word(self, token_id: int) -> str:
        return self._words[token_id]

    def content_words(self) -> tuple[str, ...]:
        return self._words[: len(self._words) - len(RESERVED)]

    @classmethod
    def from_file(cls, path) -> "WordVocab":
        with open(path, "r", encoding="utf-8") as fh:
            return cls([line.strip() for line in fh if line.strip()])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for w in self.content_words():
                fh.write(w + "\n")


def prefix_ids(prefix) -> list[int]:
    """Accept a TokenSequence or a bare id sequence as scoring context."""
    return list(prefix.ids) if hasattr(prefix, "ids") else list(prefix)


class WordBackend:
    """Shared tokenizer plumbing for every word-level backend."""

    def __init__(self, vocab: WordVocab, context_window: int = 512):
        self.vocab = vocab
        self.context_window = context_window

    def tokenize(self, text: str) -> TokenSequence:
        spans = word_spans(text)
        return TokenSequence(
            ids=tuple(self.vocab.id(w) for w, _, _ in spans),
            offsets=tuple((s, e) for _, s, e in spans),
        )

    def detokenize(self, ids: Iterable[int]) -> str:
        return " ".join(self.vocab.word(i) for i in ids)

    def _check_window(self, length: int) -> None:
        if length > self.context_window:
            raise ContextOverflowError(
                f"sequence length {length} exceeds context window {self.context_window}"
            )


class BigramBackend(WordBackend):
    """Table-driven bigram scorer with a uniform fallback row.

    ``rows[prev_id]`` maps next-token id to probability. Probability mass not
    assigned by a row is spread uniformly over the unlisted ids; a prev token
    with no row at all therefore scores uniformly. The start row (prev token
    ``*`` in table files) conditions the first token of a sequence.
    """

    def __init__(
        self,
        vocab: WordVocab,
        rows: Optional[dict[int, dict[int, float]]] = None,
        start_row: Optional[dict[int, float]] = None,
        context_window: int = 512,
        name: str = "toy-bigram",
    ):
        super().__init__(vocab, context_window)
        self.name = name
        self._rows = {}
        for prev_id, row in (rows or {}).items():
            self._rows[prev_id] = self._build_row(row)
        self._start = self._build_row(start_row) if start_row else self._uniform_row()

    def _uniform_row(self) -> np.ndarray:
        v = len(self.vocab)
        return np.full(v, -np.log(v))

    def _build_row(self, row: dict[int, float]) -> np.ndarray:
        v = len(self.vocab)
        probs = np.zeros(v)
        for tok, p in row.items():
            if not 0 <= tok < v:
                raise ValueError(f"token id {tok} outside vocabulary")
            if p < 0:
                raise ValueError("probabilities must be non-negative")
            probs[tok] = p
        assigned = probs.sum()
        if assigned > 1 + 1e-9:
            raise ValueError(f"row mass {assigned} exceeds 1")
        unlisted = v - len(row)
        if unlisted > 0:
            probs[[i for i in range(v) if i not in row]] = max(0.0, 1 - assigned) / unlisted
        elif abs(assigned - 1) > 1e-9:
            raise ValueError(f"fully-listed row mass {assigned} must equal 1")
        with np.errstate(divide="ignore"):
            return np.log(probs)

    @property
    def descriptor(self) -> BackendDescriptor:
        return BackendDescriptor(
            name=self.name,
            vocab_size=len(self.vocab),
            supports_encoding=False,
            supports_training=False,
            start_id=self.vocab.start_id,
            cls_id=self.vocab.cls_id,
            sep_id=self.vocab.sep_id,
            unk_id=self.vocab.unk_id,
            eot_id=self.vocab.eot_id,
        )

    def next_token_logprobs(self, prefix) -> NextTokenDistribution:
        ids = prefix_ids(prefix)
        self._check_window(len(ids))
        if not ids:
            return NextTokenDistribution(self._start.copy())
        row = self._rows.get(ids[-1])
        if row is None:
            row = self._uniform_row()
        return NextTokenDistribution(row.copy())

    def encode(self, sequence: TokenSequence) -> np.ndarray:
        raise CapabilityError(f"backend {self.name} is scoring-only")

    @classmethod
    def from_table_file(cls, path, vocab: Optional[WordVocab] = None, **kwargs) -> "BigramBackend":
        """Load from a ``prev next prob`` table file.

        When no vocabulary is supplied, one is built from the table's tokens
        in sorted order (reserved tokens are appended after them).
        """
        entries = []
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                parts = stripped.split()
                if len(parts) != 3:
                    raise ValueError(f"{path}: line {line_no}: expected 'prev next prob'")
                try:
                    prob = float(parts[2])
                except ValueError as exc:
                    raise ValueError(f"{path}: line {line_no}: bad probability {parts[2]!r}") from exc
                entries.append((parts[0].lower(), parts[1].lower(), prob))
        if vocab is None:
            seen = set()
            for prev, nxt, _ in entries:
                if prev != "*":
                    seen.add(prev)
                seen.add(nxt)
            vocab = WordVocab(sorted(seen))
        rows: dict[int, dict[int, float]] = {}
        start_row: dict[int, float] = {}
        for prev, nxt, prob in entries:
            target = start_row if prev == "*" else rows.setdefault(vocab.id(prev), {})
            target[vocab.id(nxt)] = prob
        return cls(vocab, rows=rows, start_row=start_row or None, **kwargs)


def uniform_backend(vocab: WordVocab, context_window: int = 512) -> BigramBackend:
    """A backend that scores every token uniformly; perplexity equals |vocab|."""
    return BigramBackend(vocab, context_window=context_window, name="toy-uniform")


def chain_backend(vocab: WordVocab, chains: Iterable[Sequence[str]], context_window: int = 512) -> BigramBackend:
    """Deterministic backend assigning probability 1 along the given word chains.

    With several chains the start mass splits uniformly over their first
    tokens; transitions inside each chain stay at probability 1.
    """
    rows: dict[int, dict[int, float]] = {}
    starts: list[int] = []
    for chain in chains:
        ids = [vocab.id(w) for w in chain]
        if ids[0] not in starts:
            starts.append(ids[0])
        for prev, nxt in zip(ids, ids[1:]):
            rows.setdefault(prev, {})[nxt] = 1.0
    start = {tok: 1.0 / len(starts) for tok in starts}
    return BigramBackend(vocab, rows=rows, start_row=start, name="toy-chain", context_window=context_window)


class TrainableBigramBackend(WordBackend):
    """Bigram scorer parameterized by logits so it can be gradient-trained.

    ``logits[prev]`` are the unnormalized next-token scores; ``start_logits``
    condition the first token. Training code updates these arrays in place
    under exclusive access.
    """

    def __init__(self, vocab: WordVocab, context_window: int = 512, seed: int = 0, init_scale: float = 0.01):
        super().__init__(vocab, context_window)
        self.name = "toy-trainable-bigram"
        rng = np.random.default_rng(seed)
        v = len(vocab)
        self.logits = rng.normal(0.0, init_scale, size=(v, v))
        self.start_logits = rng.normal(0.0, init_scale, size=v)

    @property
    def descriptor(self) -> BackendDescriptor:
        return BackendDescriptor(
            name=self.name,
            vocab_size=len(self.vocab),
            supports_encoding=False,
            supports_training=True,
            start_id=self.vocab.start_id,
            cls_id=self.vocab.cls_id,
            sep_id=self.vocab.sep_id,
            unk_id=self.vocab.unk_id,
            eot_id=self.vocab.eot_id,
        )

    def _log_softmax(self, logits: np.ndarray) -> np.ndarray:
        shifted = logits - logits.max()
        return shifted - np.log(np.exp(shifted).sum())

    def next_token_logprobs(self, prefix) -> NextTokenDistribution:
        ids = prefix_ids(prefix)
        self._check_window(len(ids))
        row = self.start_logits if not ids else self.logits[ids[-1]]
        return NextTokenDistribution(self._log_softmax(row))

    def encode(self, sequence: TokenSequence) -> np.ndarray:
        raise CapabilityError(f"backend {self.name} is scoring-only")


class EmbeddingBackend(WordBackend):
    """Encoding-only toy backend: encode is a bare embedding-table lookup."""

    def __init__(self, vocab: WordVocab, table: np.ndarray, context_window: int = 512):
        super().__init__(vocab, context_window)
        self.name = "toy-embedding"
        if table.shape[0] != len(vocab):
            raise ValueError("embedding table must have one row per vocabulary id")
        self.table = np.asarray(table, dtype=float)

    @property
    def hidden_dim(self) -> int:
        return self.table.shape[1]

    @property
    def descriptor(self) -> BackendDescriptor:
        return BackendDescriptor(
            name=self.name,
            vocab_size=len(self.vocab),
            supports_encoding=True,
            supports_training=False,
            start_id=self.vocab.start_id,
            cls_id=self.vocab.cls_id,
            sep_id=self.vocab.sep_id,
            unk_id=self.vocab.unk_id,
            eot_id=self.vocab.eot_id,
        )

    def next_token_logprobs(self, prefix: Sequence[int]) -> NextTokenDistribution:
        raise CapabilityError(f"backend {self.name} is encoding-only")

    def encode_ids(self, ids: Sequence[int]) -> np.ndarray:
        self._check_window(len(ids))
        return self.table[list(ids)].copy()

    def encode(self, sequence: TokenSequence) -> np.ndarray:
        return self.encode_ids(sequence.ids)
