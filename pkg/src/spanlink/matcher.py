"""Dictionary matching: character n-gram TF-IDF cosine over concept synonyms.

Two independent query routes exist on purpose: dict_score computes direct
sparse cosines against one concept's synonym vectors, while top_k and
score_all_concepts run the inverted index. Tests hold them to identical
results.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .lexicon import ConceptInventory, normalize_name

DEFAULT_NGRAM_SIZES = (2, 3)
PAD = "#"

_INDEX_MAGIC = b"SLNKIDX\x01"
_INDEX_VERSION = 1


def char_ngrams(name: str, sizes: Sequence[int] = DEFAULT_NGRAM_SIZES, pad: str = PAD) -> list[str]:
    """N-grams of the normalized name with one boundary pad on each side;
    internal whitespace collapses to a single pad character."""
    norm = normalize_name(name)
    if not norm:
        return []
    padded = pad + norm.replace(" ", pad) + pad
    grams: list[str] = []
    for n in sizes:
        grams.extend(padded[i : i + n] for i in range(len(padded) - n + 1))
    return grams


@dataclass(frozen=True)
class NgramVocabulary:
    """Fitted n-gram feature space: gram -> dense index, smoothed IDF weights."""

    gram_index: dict[str, int]
    idf: np.ndarray  # (n_features,), all >= 1
    sizes: tuple[int, ...]
    n_docs: int
    pad: str = PAD
    binary_tf: bool = False

    @property
    def n_features(self) -> int:
        return len(self.gram_index)

    def grams_in_order(self) -> list[str]:
        out = [""] * len(self.gram_index)
        for g, i in self.gram_index.items():
            out[i] = g
        return out


def fit_idf(
    names: Iterable[str],
    sizes: Sequence[int] = DEFAULT_NGRAM_SIZES,
    pad: str = PAD,
    binary_tf: bool = False,
) -> NgramVocabulary:
    """Fit document frequencies treating each distinct normalized name as one
    document. idf(g) = ln((1 + N) / (1 + df(g))) + 1."""
    seen_names: set[str] = set()
    df: dict[str, int] = {}
    for name in names:
        norm = normalize_name(name)
        if not norm or norm in seen_names:
            continue
        seen_names.add(norm)
        for g in set(char_ngrams(norm, sizes, pad)):
            df[g] = df.get(g, 0) + 1
    if not seen_names:
        raise DataError("cannot fit n-gram vocabulary from an empty name list")
    grams = sorted(df)
    n = len(seen_names)
    idf = np.array([np.log((1.0 + n) / (1.0 + df[g])) + 1.0 for g in grams], dtype=np.float64)
    return NgramVocabulary(
        gram_index={g: i for i, g in enumerate(grams)},
        idf=idf,
        sizes=tuple(sizes),
        n_docs=n,
        pad=pad,
        binary_tf=binary_tf,
    )


@dataclass(frozen=True)
class SparseVector:
    """Unit-normalized sparse vector: strictly increasing indices."""

    indices: np.ndarray  # int64
    values: np.ndarray  # float64

    @property
    def is_zero(self) -> bool:
        return self.indices.size == 0

    def dot(self, other: "SparseVector") -> float:
        common, ia, ib = np.intersect1d(
            self.indices, other.indices, assume_unique=True, return_indices=True
        )
        if common.size == 0:
            return 0.0
        return float(np.dot(self.values[ia], other.values[ib]))


def vectorize(s: str, vocab: NgramVocabulary) -> SparseVector:
    """TF-IDF vector of a string, L2-normalized; unseen grams are dropped.

    A string with no known grams yields the zero vector (is_zero flag).
    """
    counts: dict[int, float] = {}
    for g in char_ngrams(s, vocab.sizes, vocab.pad):
        fi = vocab.gram_index.get(g)
        if fi is None:
            continue
        if vocab.binary_tf:
            counts[fi] = 1.0
        else:
            counts[fi] = counts.get(fi, 0.0) + 1.0
    if not counts:
        return SparseVector(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64))
    idx = np.array(sorted(counts), dtype=np.int64)
    vals = np.array([counts[i] for i in idx], dtype=np.float64) * vocab.idf[idx]
    vals /= np.linalg.norm(vals)
    return SparseVector(idx, vals)


def cosine(a: SparseVector, b: SparseVector) -> float:
    """Cosine of two unit vectors; zero vectors score 0."""
    if a.is_zero or b.is_zero:
        return 0.0
    return a.dot(b)


class SynonymIndex:
    """Inverted index over every synonym of every concept.

    Synonyms are stored grouped by concept (ids ascending by concept);
    posting lists map feature index -> (synonym ids, weights), sorted by
    synonym id.
    """

    def __init__(
        self,
        vocab: NgramVocabulary,
        n_concepts: int,
        syn_concept: np.ndarray,
        syn_norms: list[str],
        syn_indptr: np.ndarray,
        syn_feat: np.ndarray,
        syn_weight: np.ndarray,
        inventory_fingerprint: str = "",
    ):
        self.vocab = vocab
        self.n_concepts = n_concepts
        self.syn_concept = syn_concept.astype(np.int64)
        self.syn_norms = syn_norms
        self.syn_indptr = syn_indptr.astype(np.int64)
        self.syn_feat = syn_feat.astype(np.int64)
        self.syn_weight = syn_weight.astype(np.float64)
        self.inventory_fingerprint = inventory_fingerprint
        if np.any(np.diff(self.syn_concept) < 0):
            raise DataError("synonym ids must be grouped by ascending concept index")
        self._build_postings()

    @property
    def n_synonyms(self) -> int:
        return len(self.syn_norms)

    @property
    def null_index(self) -> int:
        return self.n_concepts

    def _build_postings(self):
        nnz = self.syn_feat.size
        order = np.argsort(self.syn_feat, kind="stable")  # stable keeps syn ids ascending
        feat_sorted = self.syn_feat[order]
        self.post_indptr = np.zeros(self.vocab.n_features + 1, dtype=np.int64)
        np.add.at(self.post_indptr, feat_sorted + 1, 1)
        np.cumsum(self.post_indptr, out=self.post_indptr)
        syn_ids = np.repeat(np.arange(self.n_synonyms, dtype=np.int64), np.diff(self.syn_indptr))
        self.post_syn = syn_ids[order]
        self.post_weight = self.syn_weight[order]
        assert self.post_syn.size == nnz

    def synonym_vector(self, syn_id: int) -> SparseVector:
        s = slice(self.syn_indptr[syn_id], self.syn_indptr[syn_id + 1])
        return SparseVector(self.syn_feat[s], self.syn_weight[s])

    def concept_synonym_ids(self, concept_index: int) -> np.ndarray:
        return np.flatnonzero(self.syn_concept == concept_index)

    def _synonym_scores(self, qv: SparseVector) -> np.ndarray:
        scores = np.zeros(self.n_synonyms, dtype=np.float64)
        for fi, w in zip(qv.indices, qv.values):
            s = slice(self.post_indptr[fi], self.post_indptr[fi + 1])
            scores[self.post_syn[s]] += w * self.post_weight[s]
        return scores

    def score_all_concepts(self, span_text: str) -> np.ndarray:
        """Best-synonym cosine per concept via the inverted index.

        Returns a vector of length n_concepts + 1; the trailing Null slot
        is 0 by definition, as are concepts with no shared grams.
        """
        out = np.zeros(self.n_concepts + 1, dtype=np.float64)
        qv = vectorize(span_text, self.vocab)
        if qv.is_zero:
            return out
        syn_scores = self._synonym_scores(qv)
        np.maximum.at(out, self.syn_concept, syn_scores)
        return out

    def dict_score(self, span_text: str, concept_index: int) -> float:
        """Max cosine over one concept's synonyms, computed directly
        (independent of the posting lists). Null scores 0."""
        if concept_index == self.null_index:
            return 0.0
        if not (0 <= concept_index < self.n_concepts):
            raise DataError(f"concept index {concept_index} out of range")
        qv = vectorize(span_text, self.vocab)
        if qv.is_zero:
            return 0.0
        best = 0.0
        for syn_id in self.concept_synonym_ids(concept_index):
            best = max(best, qv.dot(self.synonym_vector(int(syn_id))))
        return best

    def top_k(self, span_text: str, k: int) -> list[tuple[int, float]]:
        """Top-k concepts by best-synonym cosine; ties break toward the
        lower concept index; zero-scoring concepts are never returned."""
        if k < 1:
            raise DataError(f"top_k needs k >= 1, got {k}")
        scores = self.score_all_concepts(span_text)[: self.n_concepts]
        nonzero = np.flatnonzero(scores > 0.0)
        if nonzero.size == 0:
            return []
        order = nonzero[np.lexsort((nonzero, -scores[nonzero]))]
        return [(int(ci), float(scores[ci])) for ci in order[:k]]


def build_index(inv: ConceptInventory, vocab: NgramVocabulary) -> SynonymIndex:
    """Vectorize every synonym of every concept (deduplicated per concept by
    normalized form) and assemble the index."""
    syn_concept: list[int] = []
    syn_norms: list[str] = []
    indptr = [0]
    feats: list[np.ndarray] = []
    weights: list[np.ndarray] = []
    for ci, concept in enumerate(inv.concepts):
        seen: set[str] = set()
        for raw in concept.synonyms:
            norm = normalize_name(raw)
            if not norm or norm in seen:
                continue
            seen.add(norm)
            vec = vectorize(norm, vocab)
            if vec.is_zero:
                continue
            syn_concept.append(ci)
            syn_norms.append(norm)
            feats.append(vec.indices)
            weights.append(vec.values)
            indptr.append(indptr[-1] + vec.indices.size)
    if not syn_norms:
        return SynonymIndex(
            vocab,
            len(inv),
            np.empty(0, dtype=np.int64),
            [],
            np.zeros(1, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.float64),
            inv.fingerprint(),
        )
    return SynonymIndex(
        vocab,
        len(inv),
        np.array(syn_concept, dtype=np.int64),
        syn_norms,
        np.array(indptr, dtype=np.int64),
        np.concatenate(feats),
        np.concatenate(weights),
        inv.fingerprint(),
    )


def _write_array(buf, arr: np.ndarray):
    data = np.ascontiguousarray(arr).astype(arr.dtype, copy=False)
    raw = data.tobytes()
    buf.write(struct.pack("<BQ", {"int64": 0, "float64": 1}[str(arr.dtype)], len(raw)))
    buf.write(raw)


def _read_array(buf) -> np.ndarray:
    code, nbytes = struct.unpack("<BQ", buf.read(9))
    dtype = {0: np.int64, 1: np.float64}[code]
    return np.frombuffer(buf.read(nbytes), dtype=dtype).copy()


def _write_strings(buf, strings: list[str]):
    blob = "\n".join(strings).encode("utf-8")
    buf.write(struct.pack("<Q", len(blob)))
    buf.write(blob)


def _read_strings(buf) -> list[str]:
    (nbytes,) = struct.unpack("<Q", buf.read(8))
    blob = buf.read(nbytes).decode("utf-8")
    return blob.split("\n") if blob else []


def save_index(path, index: SynonymIndex, config_hash: str = ""):
    """Versioned little-endian binary: magic, version, header, vocab, postings."""
    header = {
        "sizes": list(index.vocab.sizes),
        "pad": index.vocab.pad,
        "binary_tf": index.vocab.binary_tf,
        "n_docs": index.vocab.n_docs,
        "n_concepts": index.n_concepts,
        "inventory_fingerprint": index.inventory_fingerprint,
        "config_hash": config_hash,
    }
    hjson = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_INDEX_MAGIC)
        f.write(struct.pack("<IQ", _INDEX_VERSION, len(hjson)))
        f.write(hjson)
        _write_strings(f, index.vocab.grams_in_order())
        _write_array(f, index.vocab.idf)
        _write_array(f, index.syn_concept)
        _write_strings(f, index.syn_norms)
        _write_array(f, index.syn_indptr)
        _write_array(f, index.syn_feat)
        _write_array(f, index.syn_weight)


def load_index(path) -> SynonymIndex:
    with open(path, "rb") as f:
        magic = f.read(len(_INDEX_MAGIC))
        if magic != _INDEX_MAGIC:
            raise DataError(f"{path}: not a synonym index file")
        version, hlen = struct.unpack("<IQ", f.read(12))
        if version != _INDEX_VERSION:
            raise DataError(f"{path}: unsupported index version {version}")
        header = json.loads(f.read(hlen).decode("utf-8"))
        grams = _read_strings(f)
        idf = _read_array(f)
        vocab = NgramVocabulary(
            gram_index={g: i for i, g in enumerate(grams)},
            idf=idf,
            sizes=tuple(header["sizes"]),
            n_docs=header["n_docs"],
            pad=header["pad"],
            binary_tf=header["binary_tf"],
        )
        syn_concept = _read_array(f)
        syn_norms = _read_strings(f)
        syn_indptr = _read_array(f)
        syn_feat = _read_array(f)
        syn_weight = _read_array(f)
    return SynonymIndex(
        vocab,
        header["n_concepts"],
        syn_concept,
        syn_norms,
        syn_indptr,
        syn_feat,
        syn_weight,
        header["inventory_fingerprint"],
    )
