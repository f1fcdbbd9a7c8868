"""Sentence corpus ingestion and evidence-pair selection.

Evidence for a triple is a pair of corpus sentences, one containing the head
term and one containing the tail term, ranked by stop-word-filtered word
overlap. A sentence containing both terms may pair with itself.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .tokenization import words
from .triples import LabeledTriple, RelationPhrase, render_template, rephrase_relation

SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")

# ~150 common English function words; callers may substitute their own list
DEFAULT_STOPWORDS = frozenset("""
a about above after again against all also am an and any are aren't as at be
because been before being below between both but by can can't cannot could
couldn't did didn't do does doesn't doing don't down during each few for from
further had hadn't has hasn't have haven't having he he'd he'll he's her here
here's hers herself him himself his how how's i i'd i'll i'm i've if in into
is isn't it it's its itself just let's me more most mustn't my myself no nor
not of off on once only or other ought our ours ourselves out over own same
shan't she she'd she'll she's should shouldn't so some such than that that's
the their theirs them themselves then there there's these they they'd they'll
they're they've this those through to too under until up very was wasn't we
we'd we'll we're we've were weren't what what's when when's where where's
which while who who's whom why why's with won't would wouldn't you you'd
you'll you're you've your yours yourself yourselves
""".split())


@dataclass(frozen=True)
class Sentence:
    sentence_id: int
    text: str
    tokens: tuple[str, ...]


@dataclass
class Corpus:
    """Immutable after ingest; the index maps each token to its sentence ids."""

    sentences: list[Sentence] = field(default_factory=list)
    term_index: dict[str, set[int]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.sentences)

    def text(self, sentence_id: int) -> str:
        return self.sentences[sentence_id].text

    def tokens(self, sentence_id: int) -> tuple[str, ...]:
        return self.sentences[sentence_id].tokens


@dataclass(frozen=True)
class EvidencePair:
    """One (head sentence, relation phrase, tail sentence) evidence record.

    Fallback pairs built from template sentences carry their text inline and
    use sentence id -1 on both sides.
    """

    head_sentence_id: int
    tail_sentence_id: int
    overlap: int
    relation_phrase: RelationPhrase
    head_text: Optional[str] = None
    tail_text: Optional[str] = None

    def resolve_head_text(self, corpus: Corpus) -> str:
        return self.head_text if self.head_text is not None else corpus.text(self.head_sentence_id)

    def resolve_tail_text(self, corpus: Corpus) -> str:
        return self.tail_text if self.tail_text is not None else corpus.text(self.tail_sentence_id)


@dataclass(frozen=True)
class EvidenceSet:
    triple: LabeledTriple
    pairs: tuple[EvidencePair, ...]
    fallback_used: bool = False

    def __post_init__(self):
        keys = [(-p.overlap, p.head_sentence_id, p.tail_sentence_id) for p in self.pairs]
        if keys != sorted(keys):
            raise ValueError("evidence pairs must be sorted by overlap desc, then sentence ids")


def split_sentences(text: str, line_mode: bool = False) -> list[str]:
    """Split raw text into sentences.

    In line mode every non-empty line is one sentence; otherwise sentences end
    at a terminator character (. ! ?) followed by whitespace.
    """
    if line_mode:
        return [line.strip() for line in text.splitlines() if line.strip()]
    pieces = SENTENCE_SPLIT_RE.split(text)
    return [" ".join(p.split()) for p in pieces if p.strip()]


def ingest_corpus(stream, line_mode: bool = False) -> Corpus:
    """Build an indexed corpus from raw text (a string or a text stream)."""
    text = stream if isinstance(stream, str) else stream.read()
    corpus = Corpus()
    for sid, sentence_text in enumerate(split_sentences(text, line_mode=line_mode)):
        tokens = tuple(words(sentence_text))
        corpus.sentences.append(Sentence(sentence_id=sid, text=sentence_text, tokens=tokens))
        for token in set(tokens):
            corpus.term_index.setdefault(token, set()).add(sid)
    return corpus


def _contains_term(tokens: Sequence[str], term_tokens: Sequence[str]) -> bool:
    n = len(term_tokens)
    if n == 0 or n > len(tokens):
        return False
    return any(list(tokens[i : i + n]) == list(term_tokens) for i in range(len(tokens) - n + 1))


def find_sentences(corpus: Corpus, term: str) -> set[int]:
    """Ids of sentences containing ``term`` as a contiguous token subsequence."""
    term_tokens = words(term)
    if not term_tokens:
        raise ValueError(f"term {term!r} has no tokens")
    candidates: Optional[set[int]] = None
    for token in term_tokens:
        ids = corpus.term_index.get(token, set())
        candidates = ids.copy() if candidates is None else candidates & ids
        if not candidates:
            return set()
    if len(term_tokens) == 1:
        return candidates
    return {sid for sid in candidates if _contains_term(corpus.tokens(sid), term_tokens)}


def overlap_score(s1: Sequence[str], s2: Sequence[str], stopwords: frozenset[str] | set[str]) -> int:
    """Number of distinct non-stopword tokens the two sentences share."""
    set1 = {t.lower() for t in s1} - stopwords
    set2 = {t.lower() for t in s2} - stopwords
    return len(set1 & set2)


def _fallback_pair(triple: LabeledTriple, stopwords) -> EvidencePair:
    text = render_template(triple).text
    tokens = words(text)
    return EvidencePair(
        head_sentence_id=-1,
        tail_sentence_id=-1,
        overlap=overlap_score(tokens, tokens, stopwords),
        relation_phrase=rephrase_relation(triple.relation),
        head_text=text,
        tail_text=text,
    )


def select_evidence(
    triple: LabeledTriple,
    corpus: Corpus,
    k: int,
    stopwords: frozenset[str] | set[str] = DEFAULT_STOPWORDS,
    per_term_cap: int = 1000,
) -> EvidenceSet:
    """Top-``k`` evidence pairs for a triple by word overlap.

    Candidates are all pairs from the head-term and tail-term sentence sets
    (capped at ``per_term_cap`` most recent sentences per term), ordered by
    overlap descending with ties broken by ascending sentence ids. When no
    candidate exists the set degrades to a single flagged fallback pair built
    from the template sentence, so downstream classification always has input.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    phrase = rephrase_relation(triple.relation)
    head_ids = sorted(find_sentences(corpus, triple.head), reverse=True)[:per_term_cap]
    tail_ids = sorted(find_sentences(corpus, triple.tail), reverse=True)[:per_term_cap]
    if not head_ids or not tail_ids:
        return EvidenceSet(triple=triple, pairs=(_fallback_pair(triple, stopwords),), fallback_used=True)
    scored = [
        (overlap_score(corpus.tokens(h), corpus.tokens(t), stopwords), h, t)
        for h in head_ids
        for t in tail_ids
    ]
    scored.sort(key=lambda item: (-item[0], item[1], item[2]))
    pairs = tuple(
        EvidencePair(head_sentence_id=h, tail_sentence_id=t, overlap=ov, relation_phrase=phrase)
        for ov, h, t in scored[:k]
    )
    return EvidenceSet(triple=triple, pairs=pairs, fallback_used=False)


def load_stopword_file(path) -> frozenset[str]:
    """One stop word per line; blank lines and ``#`` comments ignored."""
    stops = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word and not word.startswith("#"):
                stops.add(word)
    return frozenset(stops)


def save_corpus(path, corpus: Corpus) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in corpus.sentences:
            fh.write(json.dumps({"id": s.sentence_id, "text": s.text}, ensure_ascii=False) + "\n")


def load_corpus(path) -> Corpus:
    corpus = Corpus()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            sid = record["id"]
            if sid != len(corpus.sentences):
                raise ValueError(f"{path}: line {line_no}: sentence ids must be dense from 0")
            tokens = tuple(words(record["text"]))
            corpus.sentences.append(Sentence(sentence_id=sid, text=record["text"], tokens=tokens))
            for token in set(tokens):
                corpus.term_index.setdefault(token, set()).add(sid)
    return corpus


def write_evidence_records(path, evidence_sets: Iterable[EvidenceSet]) -> None:
    """One JSON record per evidence pair, in rank order."""
    with open(path, "w", encoding="utf-8") as fh:
        for ev in evidence_sets:
            for rank_k, pair in enumerate(ev.pairs, start=1):
                record = {
                    "head": ev.triple.head,
                    "relation": ev.triple.relation,
                    "tail": ev.triple.tail,
                    "rank_k": rank_k,
                    "head_sentence_id": pair.head_sentence_id,
                    "tail_sentence_id": pair.tail_sentence_id,
                    "overlap": pair.overlap,
                    "fallback_used": ev.fallback_used,
                }
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
