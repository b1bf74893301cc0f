"""PubTator corpus ingestion: documents, sentences, tokens, gold mentions.

Documents keep the PubTator offset convention (title, one separator
character, abstract), so every stored offset indexes the original text.
Parsing is lossless for disease mention lines: serialize_pubtator
reproduces the input byte-for-byte modulo dropped non-disease lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import AlignmentError, ParseError
from .lexicon import canonical_cui

# NCBID labels mention types as SpecificDisease / DiseaseClass / etc.;
# BC5CDR uses plain "Disease". Everything else (Chemical, Gene, ...) is dropped.
DISEASE_TYPES = frozenset(
    {"Disease", "SpecificDisease", "DiseaseClass", "CompositeMention", "Modifier"}
)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_TERMINATORS = ".!?"
_CLOSERS = "\"')]"

# Dotted tokens that almost never end a sentence inside an abstract.
_ABBREVIATIONS = {
    "e.g", "i.e", "etc", "vs", "cf", "ca", "al", "fig", "figs",
    "dr", "mr", "mrs", "ms", "prof", "inc", "ltd", "st", "approx", "sp", "spp",
}


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    title: str
    abstract_text: str

    def __post_init__(self):
        if not self.doc_id:
            raise ParseError("document with empty id")

    @property
    def text(self) -> str:
        """Title and abstract joined by the single-space offset convention."""
        if self.abstract_text:
            return self.title + " " + self.abstract_text
        return self.title


@dataclass(frozen=True)
class GoldMention:
    """A gold annotation anchored to character offsets of the document text.

    ``surface`` always equals the document substring at the offsets;
    ``text_field``/``cui_field`` keep the original columns so serialization
    round-trips byte-exactly.
    """

    doc_id: str
    char_start: int
    char_end: int
    surface: str
    concept_ids: frozenset[str]
    mention_type: str = "Disease"
    text_field: str = ""
    cui_field: str = ""

    def __post_init__(self):
        if not (0 <= self.char_start < self.char_end):
            raise AlignmentError(
                f"{self.doc_id}: bad mention offsets [{self.char_start}, {self.char_end})"
            )
        if not self.concept_ids:
            raise AlignmentError(f"{self.doc_id}: mention {self.surface!r} has no concept IDs")
        if not self.text_field:
            object.__setattr__(self, "text_field", self.surface)
        if not self.cui_field:
            object.__setattr__(self, "cui_field", "|".join(sorted(self.concept_ids)))


@dataclass(frozen=True)
class Token:
    text: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    sent_index: int
    tokens: tuple[Token, ...]
    char_start: int
    char_end: int

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class AlignedMention:
    """Gold mention converted to (sentence, word-start, word-end) coordinates."""

    sentence_index: int
    token_start: int
    token_end: int  # exclusive
    concept_ids: frozenset[str]
    mention: GoldMention


@dataclass
class AlignmentReport:
    crossed: int = 0  # mentions spanning a sentence boundary, dropped
    snapped: int = 0  # mentions whose edges fell inside a token
    crossed_mentions: list[GoldMention] = field(default_factory=list)


def parse_pubtator(
    stream: Iterable[str], disease_types: frozenset[str] = DISEASE_TYPES
) -> list[tuple[RawDocument, list[GoldMention]]]:
    """Parse PubTator-format text into documents with disease mentions.

    Mention lines whose type is not a disease type are dropped, as are
    relation lines (e.g. BC5CDR "CID" rows). Composite CUIs joined with
    ``|`` or ``+`` are split into a set of canonical CUIs.
    """
    docs: list[tuple[RawDocument, list[GoldMention]]] = []
    title: str | None = None
    abstract: str | None = None
    doc_id: str | None = None
    pending: list[tuple[int, list[str]]] = []

    def flush():
        nonlocal title, abstract, doc_id, pending
        if doc_id is None:
            if pending:
                line_no = pending[0][0]
                raise ParseError("mention line before any document text", line_no)
            return
        doc = RawDocument(doc_id=doc_id, title=title or "", abstract_text=abstract or "")
        mentions = [
            m
            for line_no, fields in pending
            if (m := _build_mention(doc, fields, line_no, disease_types)) is not None
        ]
        docs.append((doc, mentions))
        title = abstract = doc_id = None
        pending = []

    for line_no, line in enumerate(stream, 1):
        line = line.rstrip("\n")
        if not line.strip():
            flush()
            continue
        text_parts = line.split("|", 2)
        if len(text_parts) == 3 and text_parts[1] in ("t", "a"):
            part_id, kind, text = text_parts
            if doc_id is not None and part_id != doc_id:
                flush()
            doc_id = part_id
            if kind == "t":
                title = text
            else:
                abstract = text
            continue
        fields = line.split("\t")
        if len(fields) >= 3 and fields[1] == "CID":
            continue  # BC5CDR relation line
        if len(fields) < 6:
            raise ParseError(f"unrecognized line: {line!r}", line_no)
        if doc_id is None or fields[0] != doc_id:
            raise ParseError(f"mention line for unknown document {fields[0]!r}", line_no)
        pending.append((line_no, fields))
    flush()
    return docs


def _build_mention(
    doc: RawDocument, fields: list[str], line_no: int, disease_types: frozenset[str]
) -> GoldMention | None:
    try:
        start, end = int(fields[1]), int(fields[2])
    except ValueError:
        raise ParseError(f"non-integer mention offsets in {fields[1]!r}/{fields[2]!r}", line_no)
    text_col, type_col, cui_col = fields[3], fields[4], fields[5]
    if type_col not in disease_types:
        return None
    full = doc.text
    if not (0 <= start < end <= len(full)):
        raise AlignmentError(
            f"{doc.doc_id} line {line_no}: offsets [{start}, {end}) outside document"
        )
    surface = full[start:end]
    # Some corpus distributions blank out double quotes in the text column.
    if surface != text_col and surface.replace('"', " ") != text_col:
        raise AlignmentError(
            f"{doc.doc_id} line {line_no}: mention text {text_col!r} != "
            f"document substring {surface!r} at [{start}, {end})"
        )
    cuis = frozenset(
        canonical_cui(c) for c in re.split(r"[|+]", cui_col) if c.strip()
    )
    if not cuis:
        raise ParseError(f"mention {text_col!r} has an empty CUI field", line_no)
    return GoldMention(
        doc_id=doc.doc_id,
        char_start=start,
        char_end=end,
        surface=surface,
        concept_ids=cuis,
        mention_type=type_col,
        text_field=text_col,
        cui_field=cui_col,
    )


def serialize_pubtator(docs: Iterable[tuple[RawDocument, Sequence[GoldMention]]]) -> str:
    """Inverse of parse_pubtator for documents plus their disease mentions."""
    blocks = []
    for doc, mentions in docs:
        lines = [f"{doc.doc_id}|t|{doc.title}", f"{doc.doc_id}|a|{doc.abstract_text}"]
        for m in mentions:
            lines.append(
                f"{m.doc_id}\t{m.char_start}\t{m.char_end}\t{m.text_field}"
                f"\t{m.mention_type}\t{m.cui_field}"
            )
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def tokenize(sentence_text: str, base_offset: int = 0) -> tuple[Token, ...]:
    """Tokens are maximal alphanumeric runs; punctuation is dropped.

    Offsets index the original document text via ``base_offset``.
    """
    return tuple(
        Token(text=m.group(), char_start=base_offset + m.start(), char_end=base_offset + m.end())
        for m in _TOKEN_RE.finditer(sentence_text)
    )


def _sentence_ranges(text: str) -> list[tuple[int, int]]:
    """Rule-based splitting: terminator + capitalized next token, with an
    abbreviation exception list. Returns trimmed [start, end) ranges."""
    boundaries: list[int] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i] in _TERMINATORS:
            j = i + 1
            while j < n and text[j] in _TERMINATORS + _CLOSERS:
                j += 1
            if j >= n:
                break
            if text[j].isspace():
                k = j
                while k < n and text[k].isspace():
                    k += 1
                if k < n and (text[k].isupper() or text[k].isdigit()) and not _is_abbreviation(text, i):
                    boundaries.append(j)
                i = j
                continue
        i += 1
    ranges = []
    prev = 0
    for b in boundaries + [n]:
        seg = text[prev:b]
        lead = len(seg) - len(seg.lstrip())
        start = prev + lead
        end = prev + len(seg.rstrip())
        if end > start:
            ranges.append((start, end))
        prev = b
    return ranges


def _is_abbreviation(text: str, term_pos: int) -> bool:
    """True when the dotted token ending at the terminator is a known
    abbreviation (the capitalized-next-token check is the caller's job)."""
    j = term_pos
    while j > 0 and (text[j - 1].isalpha() or text[j - 1] == "."):
        j -= 1
    token = text[j:term_pos].strip(".").lower()
    if not token:
        return False
    if token in _ABBREVIATIONS:
        return True
    # final dotted component, e.g. the "g" of "e.g"
    return token.rsplit(".", 1)[-1] in _ABBREVIATIONS


def split_sentences(doc: RawDocument) -> list[Sentence]:
    """Split title and abstract into token-bearing sentences.

    The title/abstract boundary is always a sentence boundary. Ranges that
    contain no tokens are merged into their neighbor so that sentence
    ranges still cover all non-whitespace text.
    """
    full = doc.text
    sections = [(0, doc.title)]
    if doc.abstract_text:
        sections.append((len(doc.title) + 1, doc.abstract_text))
    spans: list[tuple[int, int]] = []
    for base, section in sections:
        for s, e in _sentence_ranges(section):
            spans.append((base + s, base + e))
    # merge token-free ranges into the previous (or next) range
    merged: list[tuple[int, int]] = []
    for s, e in spans:
        if tokenize(full[s:e]):
            merged.append((s, e))
        elif merged:
            ps, _ = merged[-1]
            merged[-1] = (ps, e)
        else:
            merged.append((s, e))
    if len(merged) > 1 and not tokenize(full[merged[0][0]:merged[0][1]]):
        s0, e0 = merged.pop(0)
        s1, e1 = merged[0]
        merged[0] = (s0, e1)
    sentences = []
    for idx, (s, e) in enumerate(merged):
        tokens = tokenize(full[s:e], base_offset=s)
        if not tokens:
            continue  # document contained no alphanumeric text at all
        sentences.append(
            Sentence(doc_id=doc.doc_id, sent_index=idx, tokens=tokens, char_start=s, char_end=e)
        )
    return sentences


def align_mentions(
    sentences: Sequence[Sentence], mentions: Iterable[GoldMention]
) -> tuple[list[AlignedMention], AlignmentReport]:
    """Map character-offset gold mentions onto minimal covering token spans.

    Mentions crossing sentence boundaries are dropped and counted; a
    mention overlapping no token at all is a data error.
    """
    aligned: list[AlignedMention] = []
    report = AlignmentReport()
    for m in mentions:
        hits = [
            (si, s)
            for si, s in enumerate(sentences)
            if s.char_start < m.char_end and m.char_start < s.char_end
        ]
        if len(hits) > 1:
            report.crossed += 1
            report.crossed_mentions.append(m)
            continue
        if not hits:
            raise AlignmentError(
                f"{m.doc_id}: mention {m.surface!r} at [{m.char_start}, {m.char_end}) "
                "overlaps no sentence"
            )
        si, sent = hits[0]
        overlap = [
            ti
            for ti, t in enumerate(sent.tokens)
            if t.char_start < m.char_end and m.char_start < t.char_end
        ]
        if not overlap:
            raise AlignmentError(
                f"{m.doc_id}: mention {m.surface!r} at [{m.char_start}, {m.char_end}) "
                "overlaps no token"
            )
        ts, te = overlap[0], overlap[-1] + 1
        if sent.tokens[ts].char_start != m.char_start or sent.tokens[te - 1].char_end != m.char_end:
            report.snapped += 1
        aligned.append(
            AlignedMention(
                sentence_index=si,
                token_start=ts,
                token_end=te,
                concept_ids=m.concept_ids,
                mention=m,
            )
        )
    return aligned, report


def load_split_manifest(stream: Iterable[str]) -> dict[str, str]:
    """Manifest lines are ``doc_id<TAB>split`` with split in train/dev/test."""
    out: dict[str, str] = {}
    for line_no, line in enumerate(stream, 1):
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or parts[1] not in ("train", "dev", "test"):
            raise ParseError(f"bad manifest line: {line!r}", line_no)
        out[parts[0]] = parts[1]
    return out


def format_split_manifest(assignments: dict[str, str]) -> str:
    return "".join(f"{doc_id}\t{split}\n" for doc_id, split in assignments.items())
