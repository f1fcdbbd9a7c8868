"""Word-level tokenization shared by the corpus index, the toy backends and
the template renderer.

Words are lowercased alphanumeric runs (internal apostrophes kept), so
"Bathtub," yields "bathtub" and never matches the term "bath". Character
offsets always index the original text.
"""

from __future__ import annotations

import re

WORD_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*")


def _lowered(text: str) -> str:
    # per-char lowering keeps offsets aligned even for the rare code points
    # whose str.lower() expands to multiple characters
    return "".join(c.lower() if len(c.lower()) == 1 else c for c in text)


def word_spans(text: str) -> list[tuple[str, int, int]]:
    """Return (word, start, end) for every word in ``text``."""
    return [(m.group(0), m.start(), m.end()) for m in WORD_RE.finditer(_lowered(text))]


def words(text: str) -> list[str]:
    """Lowercased word list of ``text``."""
    return [w for w, _, _ in word_spans(text)]
