"""Local abbreviation resolution: short form -> long form tables per document.

Pattern-based detection of ``long form (SF)`` definitions. The table feeds
dictionary matching only; character offsets of predictions always stay on
the original short form.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import RawDocument, Sentence, tokenize
from .errors import ParseError

log = logging.getLogger(__name__)

_PAREN_RE = re.compile(r"\(([^()]*)\)")  # innermost parenthetical only
_REGION_BREAK = ".!?;)\n"


@dataclass(frozen=True)
class AbbreviationPair:
    short_form: str
    long_form: str
    definition_offset: int  # document offset of the short form; -1 if loaded externally

    def __post_init__(self):
        assert len(self.short_form) <= len(self.long_form)


def _valid_short_form(sf: str) -> bool:
    if not (2 <= len(sf) <= 10):
        return False
    if len(sf.split()) > 2:
        return False
    if not any(ch.isalpha() for ch in sf):
        return False
    return sf[0].isalnum()


def _chars_match(short_form: str, long_form: str) -> bool:
    """Every alphanumeric char of the short form appears in the long form in
    order, anchored so the first chars coincide."""
    sf = [ch.lower() for ch in short_form if ch.isalnum()]
    lf = long_form.lower()
    first_alnum = next((i for i, ch in enumerate(lf) if ch.isalnum()), None)
    if first_alnum is None or not sf or lf[first_alnum] != sf[0]:
        return False
    pos = first_alnum + 1
    for ch in sf[1:]:
        nxt = lf.find(ch, pos)
        if nxt == -1:
            return False
        pos = nxt + 1
    return True


def extract_abbreviations(doc: RawDocument) -> list[AbbreviationPair]:
    """Detect ``long form (SF)`` definitions across the whole document.

    The long-form candidate is the shortest token-suffix of the window
    preceding the parenthesis (window length min(|SF|+5, |SF|*2)) that
    satisfies the in-order character condition. The first definition of a
    short form wins; conflicting redefinitions are logged.
    """
    text = doc.text
    table: dict[str, AbbreviationPair] = {}
    for m in _PAREN_RE.finditer(text):
        sf = m.group(1).strip()
        if not _valid_short_form(sf):
            continue
        region_start = 0
        for i in range(m.start() - 1, -1, -1):
            if text[i] in _REGION_BREAK:
                region_start = i + 1
                break
        window = text[region_start : m.start()]
        window_tokens = tokenize(window, base_offset=region_start)
        max_tokens = min(len(sf) + 5, 2 * len(sf))
        window_tokens = window_tokens[-max_tokens:] if max_tokens else ()
        long_form = None
        for k in range(1, len(window_tokens) + 1):
            start = window_tokens[-k].char_start
            candidate = text[start : m.start()].strip()
            if len(candidate) < len(sf) or candidate.lower() == sf.lower():
                continue
            if _chars_match(sf, candidate):
                long_form = candidate
                break
        if long_form is None:
            continue
        offset = m.start() + 1 + m.group(1).find(sf[0])
        if sf in table:
            if table[sf].long_form != long_form:
                log.warning(
                    "%s: conflicting definitions for %r (%r kept, %r ignored)",
                    doc.doc_id, sf, table[sf].long_form, long_form,
                )
            continue
        table[sf] = AbbreviationPair(short_form=sf, long_form=long_form, definition_offset=offset)
    return list(table.values())


def expand_mentions(
    sentence: Sentence,
    pairs: Sequence[AbbreviationPair],
    doc_text: str,
) -> dict[tuple[int, int], str]:
    """Map token runs that exactly equal a short form to its long form.

    Keys are (token_start, token_end_exclusive) within the sentence. The
    table is document-global, so a use-site before the definition still
    expands.
    """
    expansions: dict[tuple[int, int], str] = {}
    for pair in pairs:
        width = len(tokenize(pair.short_form))
        if width == 0:
            continue
        for i in range(0, len(sentence.tokens) - width + 1):
            j = i + width
            run = doc_text[sentence.tokens[i].char_start : sentence.tokens[j - 1].char_end]
            if run == pair.short_form:
                expansions.setdefault((i, j), pair.long_form)
    return expansions


def load_abbreviation_tsv(stream: Iterable[str]) -> dict[str, list[AbbreviationPair]]:
    """Side channel: ``doc_id<TAB>short<TAB>long`` rows (e.g. genuine Ab3P
    output) overriding the built-in extractor."""
    table: dict[str, list[AbbreviationPair]] = {}
    for line_no, line in enumerate(stream, 1):
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"bad abbreviation line: {line!r}", line_no)
        doc_id, short, long_form = parts
        if len(short) > len(long_form):
            raise ParseError(f"short form longer than long form: {line!r}", line_no)
        table.setdefault(doc_id, []).append(
            AbbreviationPair(short_form=short, long_form=long_form, definition_offset=-1)
        )
    return table


def expansion_tables(
    docs: Iterable[tuple[RawDocument, object]],
    override: Mapping[str, list[AbbreviationPair]] | None = None,
) -> dict[str, list[AbbreviationPair]]:
    """Abbreviation pairs per doc_id, preferring externally supplied tables."""
    out: dict[str, list[AbbreviationPair]] = {}
    for doc, _ in docs:
        if override is not None and doc.doc_id in override:
            out[doc.doc_id] = list(override[doc.doc_id])
        else:
            out[doc.doc_id] = extract_abbreviations(doc)
    return out
