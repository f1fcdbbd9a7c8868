"""Synthetic evidence-classification data with a known decision rule.

Each triple gets a unique head word and tail word, three head sentences and
three tail sentences. Every sentence carries a marker adverb next to the
term: positive triples use one marker, negative triples another, so the gold
label is exactly "which marker appears in the evidence". All words except
the per-triple terms are shared across the corpus, which keeps the signal in
trained embeddings even for held-out triples. Retrieval stays within a
triple because its term words occur nowhere else.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .backends import WordVocab
from .retrieval import Corpus, EvidenceSet, ingest_corpus, select_evidence
from .tokenization import words
from .triples import LabeledTriple, rephrase_relation, serialize_triples

POSITIVE_MARKER = "undeniably"
NEGATIVE_MARKER = "supposedly"
RELATION = "RelatedTo"

HEAD_TEMPLATES = (
    "people say the {head} looks {marker} {adj} near the {place}",
    "my neighbor finds the {head} rather {marker} {adj} these days",
    "the {head} appeared {marker} {adj} during the {event}",
)
TAIL_TEMPLATES = (
    "being {tail} felt {marker} {flavor} to everyone nearby",
    "a touch of {tail} was {marker} {flavor} all along",
    "that {tail} turned out {marker} {flavor} in the end",
)
ADJECTIVES = ("sturdy", "quiet", "shiny", "plain", "crooked", "smooth")
FLAVORS = ("familiar", "strange", "welcome", "awkward", "gentle", "sharp")
PLACES = ("harbor", "market", "garden", "station")
EVENTS = ("storm", "festival", "meeting", "harvest")


@dataclass
class SyntheticDataset:
    corpus: Corpus
    vocab: WordVocab
    train: list[tuple[EvidenceSet, int]]
    test: list[tuple[EvidenceSet, int]]

    def all_examples(self) -> list[tuple[EvidenceSet, int]]:
        return self.train + self.test


def _sentences_for(triple: LabeledTriple, marker: str, rng: random.Random) -> list[str]:
    out = []
    for template in HEAD_TEMPLATES:
        out.append(template.format(
            head=triple.head, marker=marker,
            adj=rng.choice(ADJECTIVES), place=rng.choice(PLACES), event=rng.choice(EVENTS),
        ))
    for template in TAIL_TEMPLATES:
        out.append(template.format(
            tail=triple.tail, marker=marker, flavor=rng.choice(FLAVORS),
        ))
    return out


def make_dataset(
    n_triples: int = 2000,
    train_count: int = 1500,
    k: int = 3,
    seed: int = 0,
) -> SyntheticDataset:
    """Build the corpus, retrieve evidence, and split train/held-out."""
    if not 0 < train_count < n_triples:
        raise ValueError("need 0 < train_count < n_triples")
    rng = random.Random(seed)
    labels = [1] * (n_triples // 2) + [0] * (n_triples - n_triples // 2)
    rng.shuffle(labels)

    triples = [
        LabeledTriple(head=f"gadget{i}", relation=RELATION, tail=f"trait{i}", label=labels[i])
        for i in range(n_triples)
    ]
    lines: list[str] = []
    for triple in triples:
        marker = POSITIVE_MARKER if triple.label == 1 else NEGATIVE_MARKER
        lines.extend(_sentences_for(triple, marker, rng))

    word_set: set[str] = set()
    for line in lines:
        word_set.update(words(line))
    word_set.update(words(rephrase_relation(RELATION).phrase))
    vocab = WordVocab(sorted(word_set))

    corpus = ingest_corpus("\n".join(lines), line_mode=True)
    examples = [(select_evidence(t, corpus, k), t.label) for t in triples]

    order = list(range(n_triples))
    rng.shuffle(order)
    train = [examples[i] for i in order[:train_count]]
    test = [examples[i] for i in order[train_count:]]
    return SyntheticDataset(corpus=corpus, vocab=vocab, train=train, test=test)


def write_dataset(directory, dataset: SyntheticDataset) -> None:
    """Dump corpus, vocabulary, and split triple files for CLI use."""
    from pathlib import Path

    from .retrieval import save_corpus

    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    save_corpus(path / "corpus.jsonl", dataset.corpus)
    dataset.vocab.save(path / "vocab.txt")
    for name, split in (("train", dataset.train), ("test", dataset.test)):
        lines = serialize_triples(ev.triple for ev, _ in split)
        (path / f"{name}.tsv").write_text("".join(lines), encoding="utf-8")
