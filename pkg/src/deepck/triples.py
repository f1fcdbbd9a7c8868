"""Knowledge triples, relation rephrasing and template rendering.

A triple file is UTF-8, one record per line, tab-separated
``head<TAB>relation<TAB>tail[<TAB>label]`` with ``#`` comment lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, TextIO

from .tokenization import words

CAMEL_SPLIT_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")


class TripleParseError(ValueError):
    """Malformed triple file line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class LabeledTriple:
    """A (head, relation, tail) record with an optional binary validity label."""

    head: str
    relation: str
    tail: str
    label: Optional[int] = None

    def __post_init__(self):
        if not self.head.strip() or not self.tail.strip():
            raise ValueError("head and tail each need at least one token")
        if not self.relation or any(c.isspace() for c in self.relation):
            raise ValueError("relation must be a non-empty identifier without whitespace")
        if self.label is not None and self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")

    def key(self) -> tuple[str, str, str]:
        """Identity used for set membership: lowercased, whitespace-normalized."""
        return (
            " ".join(self.head.lower().split()),
            self.relation.lower(),
            " ".join(self.tail.lower().split()),
        )


@dataclass(frozen=True)
class RelationPhrase:
    """A relation identifier and its natural-language rewording."""

    relation: str
    phrase: str

    def __post_init__(self):
        if not self.phrase.split():
            raise ValueError("phrase must contain at least one word")


@dataclass(frozen=True)
class RenderedSentence:
    """Plain-text rendering of a triple with head/tail token index ranges."""

    text: str
    token_span_head: Optional[tuple[int, int]] = None
    token_span_tail: Optional[tuple[int, int]] = None

    def __post_init__(self):
        n = len(self.text.split())
        for span in (self.token_span_head, self.token_span_tail):
            if span is not None and not (0 <= span[0] < span[1] <= n):
                raise ValueError(f"token span {span} outside bounds (0, {n})")
        if self.token_span_head and self.token_span_tail:
            a, b = sorted([self.token_span_head, self.token_span_tail])
            if b[0] < a[1]:
                raise ValueError("head and tail spans overlap")


def rephrase_relation(relation: str) -> RelationPhrase:
    """Reword a relation identifier: "CapableOf" becomes "capable of".

    Camel-case boundaries split into words and everything is lowercased;
    already-lowercase single words pass through unchanged.
    """
    if not relation or any(c.isspace() for c in relation):
        raise ValueError(f"invalid relation identifier: {relation!r}")
    phrase = " ".join(part.lower() for part in CAMEL_SPLIT_RE.split(relation))
    return RelationPhrase(relation=relation, phrase=phrase)


def render_template(triple: LabeledTriple) -> RenderedSentence:
    """Render a triple as the bare concatenation "head phrase tail"."""
    phrase = rephrase_relation(triple.relation).phrase
    head_tokens = triple.head.split()
    phrase_tokens = phrase.split()
    tail_tokens = triple.tail.split()
    m, n = len(head_tokens), len(phrase_tokens)
    text = " ".join(head_tokens + phrase_tokens + tail_tokens)
    return RenderedSentence(
        text=text,
        token_span_head=(0, m),
        token_span_tail=(m + n, m + n + len(tail_tokens)),
    )


def rendered_char_spans(triple: LabeledTriple) -> tuple[str, tuple[int, int], tuple[int, int]]:
    """Rendered text plus character ranges of the head and tail segments.

    Character ranges survive any downstream tokenizer, so backends with
    subword vocabularies can still locate the tail tokens.
    """
    rendered = render_template(triple)
    head_text = " ".join(triple.head.split())
    tail_text = " ".join(triple.tail.split())
    text = rendered.text
    return text, (0, len(head_text)), (len(text) - len(tail_text), len(text))


def parse_triple_line(line: str, line_no: int) -> LabeledTriple:
    fields = line.rstrip("\n").split("\t")
    if len(fields) not in (3, 4):
        raise TripleParseError(line_no, f"expected 3 or 4 tab-separated fields, got {len(fields)}")
    head, relation, tail = fields[0], fields[1], fields[2]
    label = None
    if len(fields) == 4:
        if fields[3] not in ("0", "1"):
            raise TripleParseError(line_no, f"label must be 0 or 1, got {fields[3]!r}")
        label = int(fields[3])
    try:
        return LabeledTriple(head=head, relation=relation, tail=tail, label=label)
    except ValueError as exc:
        raise TripleParseError(line_no, str(exc)) from exc


def parse_triple_file(stream: Iterable[str]) -> list[LabeledTriple]:
    """Parse a triple file, preserving record order; ``#`` lines are comments."""
    triples = []
    for line_no, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        triples.append(parse_triple_line(line, line_no))
    return triples


def serialize_triples(triples: Iterable[LabeledTriple]) -> Iterator[str]:
    """Yield triple file lines; inverse of :func:`parse_triple_file`."""
    for t in triples:
        fields = [t.head, t.relation, t.tail]
        if t.label is not None:
            fields.append(str(t.label))
        yield "\t".join(fields) + "\n"


def write_triple_file(path, triples: Iterable[LabeledTriple]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(serialize_triples(triples))


def read_triple_file(path) -> list[LabeledTriple]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_triple_file(fh)


def triple_words(triple: LabeledTriple) -> list[str]:
    """All sentence words of a triple in rendered order."""
    return words(render_template(triple).text)
