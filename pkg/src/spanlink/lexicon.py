"""Disease concept inventory: MEDIC vocabulary parsing and training-set merging.

The inventory is the label set of the whole system. Concepts get dense
indices 0..N-1; the Null (non-disease) label is index N and is not a
Concept. All lookups go through canonical CUI strings (``MESH:D010488``,
``OMIM:168600``).
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

from .errors import DataError

if TYPE_CHECKING:
    from .corpus import GoldMention

log = logging.getLogger(__name__)

_NONWORD_RE = re.compile(r"[\W_]+", re.UNICODE)
_BARE_MESH_RE = re.compile(r"[CD]\d+")

MEDIC_COLUMNS = 8  # DiseaseName, DiseaseID, AltIDs, Def, ParentIDs, Trees, ParentTrees, Synonyms


def normalize_name(s: str) -> str:
    """Lowercase, turn punctuation into spaces, collapse whitespace.

    This is the single normalization used for every dictionary string:
    MEDIC synonyms, merged training surfaces and query spans all pass
    through here, so dictionary scores stay consistent.
    """
    return " ".join(_NONWORD_RE.sub(" ", s.lower()).split())


def canonical_cui(raw: str) -> str:
    """Normalize a CUI to prefixed form: bare D/C numbers become MESH:*."""
    raw = raw.strip()
    if ":" in raw:
        prefix, _, rest = raw.partition(":")
        return f"{prefix.strip().upper()}:{rest.strip()}"
    if _BARE_MESH_RE.fullmatch(raw):
        return f"MESH:{raw}"
    return raw


@dataclass(frozen=True)
class Concept:
    """One disease concept: canonical CUI plus all of its names."""

    cui: str
    preferred_name: str
    synonyms: tuple[str, ...]  # preferred name first
    alt_cuis: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.synonyms:
            raise DataError(f"concept {self.cui} has no synonyms")
        if self.cui in self.alt_cuis:
            raise DataError(f"concept {self.cui} lists itself as an alt CUI")
        for s in self.synonyms:
            if not normalize_name(s):
                raise DataError(f"concept {self.cui}: synonym {s!r} is empty after normalization")


class ConceptInventory:
    """The label set L: indexed concepts plus the trailing Null label.

    Immutable after construction; safe to share read-only.
    """

    def __init__(self, concepts: Sequence[Concept]):
        self.concepts: tuple[Concept, ...] = tuple(concepts)
        self.null_index: int = len(self.concepts)
        self.cui_index: dict[str, int] = {}
        for idx, c in enumerate(self.concepts):
            if c.cui in self.cui_index:
                raise DataError(f"duplicate DiseaseID {c.cui}")
            self.cui_index[c.cui] = idx
        # Alt IDs never shadow a primary ID; on alt/alt collision the first row wins.
        for idx, c in enumerate(self.concepts):
            for alt in sorted(c.alt_cuis):
                self.cui_index.setdefault(alt, idx)

    def __len__(self) -> int:
        return len(self.concepts)

    def __eq__(self, other) -> bool:
        return isinstance(other, ConceptInventory) and self.concepts == other.concepts

    @property
    def n_labels(self) -> int:
        """Number of classifier columns: |concepts| + 1 for Null."""
        return len(self.concepts) + 1

    def resolve(self, raw: str) -> int | None:
        """Map a raw CUI string to a concept index, or None if unresolved.

        None is the explicit unresolved marker; it is never the Null index.
        """
        return self.cui_index.get(canonical_cui(raw))

    def fingerprint(self) -> str:
        """Stable hash of the full concept listing, for artifact validation."""
        h = hashlib.sha256()
        for c in self.concepts:
            h.update(c.cui.encode())
            h.update(b"\x00")
            for s in c.synonyms:
                h.update(s.encode())
                h.update(b"\x01")
            h.update(b"\x02")
        return h.hexdigest()


def resolve_cui(raw: str, inv: ConceptInventory) -> int | None:
    return inv.resolve(raw)


def parse_medic(stream: Iterable[str]) -> ConceptInventory:
    """Parse the MEDIC TSV into a ConceptInventory.

    ``#`` lines are comments. Rows with an empty DiseaseName are skipped
    with a warning; a duplicate DiseaseID raises.
    """
    concepts: list[Concept] = []
    seen: set[str] = set()
    for line_no, line in enumerate(stream, 1):
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) < MEDIC_COLUMNS:
            cols = cols + [""] * (MEDIC_COLUMNS - len(cols))
        name, disease_id, alt_ids, _definition = cols[0], cols[1], cols[2], cols[3]
        raw_synonyms = cols[7]
        if not name.strip() or not normalize_name(name):
            log.warning("MEDIC line %d: empty DiseaseName, row skipped", line_no)
            continue
        cui = canonical_cui(disease_id)
        if cui in seen:
            raise DataError(f"MEDIC line {line_no}: duplicate DiseaseID {cui}")
        seen.add(cui)
        synonyms = _dedupe_names([name] + (raw_synonyms.split("|") if raw_synonyms else []))
        alts = frozenset(
            a for a in (canonical_cui(x) for x in alt_ids.split("|") if x.strip()) if a != cui
        )
        concepts.append(Concept(cui=cui, preferred_name=name, synonyms=synonyms, alt_cuis=alts))
    return ConceptInventory(concepts)


def _dedupe_names(names: Iterable[str]) -> tuple[str, ...]:
    """Case-insensitive order-preserving dedup; drops names that normalize away."""
    out: list[str] = []
    seen: set[str] = set()
    for n in names:
        n = n.strip()
        if not n or not normalize_name(n):
            continue
        key = n.lower()
        if key not in seen:
            seen.add(key)
            out.append(n)
    return tuple(out)


@dataclass(frozen=True)
class AugmentResult:
    inventory: ConceptInventory
    unmapped: tuple[tuple[str, str, str], ...]  # (doc_id, surface, cui)


def augment_with_training(inv: ConceptInventory, gold: Iterable["GoldMention"]) -> AugmentResult:
    """Merge training mention surfaces into the vocabulary as extra synonyms.

    Surfaces of mentions whose CUI resolves are appended to that concept's
    synonym list (case-insensitive dedup); concept order and indices are
    unchanged. Mentions with unresolvable CUIs go into the unmapped report.
    Idempotent: augmenting twice equals augmenting once.
    """
    additions: dict[int, list[str]] = {}
    unmapped: list[tuple[str, str, str]] = []
    for m in gold:
        surface = m.surface.strip()
        if not normalize_name(surface):
            continue
        for cui in sorted(m.concept_ids):
            idx = inv.resolve(cui)
            if idx is None:
                unmapped.append((m.doc_id, surface, cui))
            else:
                additions.setdefault(idx, []).append(surface)
    if not additions:
        return AugmentResult(inv, tuple(unmapped))
    new_concepts: list[Concept] = []
    for idx, c in enumerate(inv.concepts):
        extra = additions.get(idx)
        if not extra:
            new_concepts.append(c)
            continue
        merged = _dedupe_names(list(c.synonyms) + extra)
        new_concepts.append(
            Concept(cui=c.cui, preferred_name=c.preferred_name, synonyms=merged, alt_cuis=c.alt_cuis)
        )
    return AugmentResult(ConceptInventory(new_concepts), tuple(unmapped))


def format_unmapped_report(unmapped: Iterable[tuple[str, str, str]]) -> str:
    """Line-oriented report of training CUIs absent from the vocabulary."""
    return "".join(f"{doc_id}\t{surface}\t{cui}\n" for doc_id, surface, cui in unmapped)
