"""Tri-gram vocabulary, bag-of-words counts and TF-IDF weighting."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import TokenizedDoc
from .errors import EmptyVocabularyError, FormatError, VersionMismatchError

VOCAB_MAGIC = "#crimeseries-vocab"
MATRIX_MAGIC = "%crimeseries-sparse"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Vocabulary:
    term_to_id: Mapping[str, int]
    doc_freq: Mapping[str, int]
    n_docs: int

    def __len__(self) -> int:
        return len(self.term_to_id)

    @property
    def terms(self) -> list[str]:
        """Terms ordered by id."""
        out = [""] * len(self.term_to_id)
        for term, idx in self.term_to_id.items():
            out[idx] = term
        return out

    def save(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{VOCAB_MAGIC}\tv{FORMAT_VERSION}\tn_docs={self.n_docs}\tn_terms={len(self)}\n")
            for term in self.terms:
                fh.write(f"{term}\t{self.term_to_id[term]}\t{self.doc_freq[term]}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        with Path(path).open("r", encoding="utf-8") as fh:
            lines = fh.read().split("\n")
        header = lines[0].split("\t")
        if header[0] != VOCAB_MAGIC:
            raise FormatError(f"{path}: not a vocabulary file")
        if len(header) != 4 or header[1] != f"v{FORMAT_VERSION}":
            raise VersionMismatchError(f"{path}: unsupported vocabulary version {header[1:2]}")
        try:
            n_docs = int(header[2].removeprefix("n_docs="))
            n_terms = int(header[3].removeprefix("n_terms="))
        except ValueError:
            raise FormatError(f"{path}: malformed header") from None
        body = [ln for ln in lines[1:] if ln]
        if len(body) != n_terms:
            raise FormatError(f"{path}: expected {n_terms} terms, found {len(body)}")
        term_to_id, doc_freq = {}, {}
        for lineno, ln in enumerate(body, start=2):
            parts = ln.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected term<TAB>id<TAB>df")
            term, idx, df = parts[0], int(parts[1]), int(parts[2])
            term_to_id[term] = idx
            doc_freq[term] = df
        if sorted(term_to_id.values()) != list(range(n_terms)):
            raise FormatError(f"{path}: term ids are not contiguous")
        return cls(term_to_id, doc_freq, n_docs)


@dataclass(frozen=True)
class TermDocMatrix:
    """Sparse documents x terms matrix with one record id per row."""

    matrix: sp.csr_matrix
    row_ids: tuple[str, ...]
    normalized: bool = field(default=False)

    def __post_init__(self):
        if self.matrix.shape[0] != len(self.row_ids):
            raise ValueError("row_ids length does not match matrix rows")

    @property
    def n_docs(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_terms(self) -> int:
        return self.matrix.shape[1]

    def triples(self) -> list[tuple[int, int, float]]:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [(int(coo.row[i]), int(coo.col[i]), float(coo.data[i])) for i in order]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def save(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{MATRIX_MAGIC} v{FORMAT_VERSION}\n")
            trip = self.triples()
            fh.write(f"{self.n_docs} {self.n_terms} {len(trip)} {int(self.normalized)}\n")
            fh.write(json.dumps(list(self.row_ids), ensure_ascii=False) + "\n")
            for r, c, v in trip:
                fh.write(f"{r} {c} {v!r}\n")

    @classmethod
    def load(cls, path: str | Path) -> "TermDocMatrix":
        with Path(path).open("r", encoding="utf-8") as fh:
            lines = fh.read().split("\n")
        magic = lines[0].split(" ")
        if magic[0] != MATRIX_MAGIC:
            raise FormatError(f"{path}: not a sparse matrix file")
        if magic[1:] != [f"v{FORMAT_VERSION}"]:
            raise VersionMismatchError(f"{path}: unsupported matrix version {magic[1:]}")
        try:
            n_docs, n_terms, nnz, normalized = (int(x) for x in lines[1].split(" "))
            row_ids = json.loads(lines[2])
        except (ValueError, IndexError):
            raise FormatError(f"{path}: malformed header") from None
        body = lines[3:3 + nnz]
        if len(body) != nnz or any(not ln for ln in body):
            raise FormatError(f"{path}: truncated, expected {nnz} entries")
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        for i, ln in enumerate(body):
            r, c, v = ln.split(" ")
            rows[i], cols[i], vals[i] = int(r), int(c), float(v)
        if nnz and (rows.max() >= n_docs or cols.max() >= n_terms):
            raise FormatError(f"{path}: entry outside declared dimensions")
        mat = sp.csr_matrix((vals, (rows, cols)), shape=(n_docs, n_terms))
        return cls(mat, tuple(row_ids), bool(normalized))


TfIdfMatrix = TermDocMatrix


def build_vocabulary(docs: Sequence[TokenizedDoc], min_df: int = 3,
                     max_df_fraction: float = 0.5) -> Vocabulary:
    """Keep terms whose document frequency lies in ``[min_df, max_df_fraction * n_docs]``.

    Ids follow lexicographic term order.
    """
    if not docs:
        raise ValueError("cannot build a vocabulary from zero documents")
    if not 0.0 < max_df_fraction <= 1.0:
        raise ValueError("max_df_fraction must lie in (0, 1]")
    n_docs = len(docs)
    df: Counter[str] = Counter()
    for doc in docs:
        df.update(set(doc.terms))
    upper = max_df_fraction * n_docs
    kept = sorted(t for t, f in df.items() if min_df <= f <= upper)
    if not kept:
        raise EmptyVocabularyError(
            f"no term has document frequency in [{min_df}, {upper:g}] over {n_docs} documents")
    return Vocabulary({t: i for i, t in enumerate(kept)}, {t: df[t] for t in kept}, n_docs)


def term_document_counts(docs: Sequence[TokenizedDoc], vocab: Vocabulary) -> TermDocMatrix:
    rows, cols, vals = [], [], []
    lookup = vocab.term_to_id
    for d, doc in enumerate(docs):
        counts = Counter(lookup[t] for t in doc.terms if t in lookup)
        for col in sorted(counts):
            rows.append(d)
            cols.append(col)
            vals.append(counts[col])
    mat = sp.csr_matrix((np.asarray(vals, dtype=np.float64), (rows, cols)),
                        shape=(len(docs), len(vocab)))
    return TermDocMatrix(mat, tuple(doc.record_id for doc in docs))


def idf(doc_freq: np.ndarray, n_docs: int) -> np.ndarray:
    """Smoothed inverse document frequency ``ln((1 + N) / (1 + df)) + 1``."""
    return np.log((1.0 + n_docs) / (1.0 + np.asarray(doc_freq, dtype=np.float64))) + 1.0


def tfidf(counts: TermDocMatrix, normalize: bool = True) -> TermDocMatrix:
    """Raw counts times smoothed idf, then optional per-row L2 normalization.

    Document frequencies come from ``counts`` itself.
    """
    if counts.n_docs < 1:
        raise ValueError("tfidf needs at least one document")
    mat = sp.csr_matrix(counts.matrix, dtype=np.float64, copy=True)
    mat.sum_duplicates()
    mat.eliminate_zeros()
    df = np.bincount(mat.indices, minlength=mat.shape[1])
    mat.data *= idf(df, mat.shape[0])[mat.indices]
    if normalize:
        norms = np.sqrt(np.asarray(mat.multiply(mat).sum(axis=1)).ravel())
        scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        mat = sp.csr_matrix(sp.diags(scale) @ mat)
    return TermDocMatrix(mat, counts.row_ids, normalize)

