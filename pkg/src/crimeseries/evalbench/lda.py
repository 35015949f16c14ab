"""Latent Dirichlet allocation by collapsed Gibbs sampling (baseline embedding)."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp

from ..errors import InvalidConfigError


@dataclass(frozen=True)
class LdaResult:
    doc_topic: np.ndarray
    topic_word: np.ndarray
    assignments: np.ndarray
    token_docs: np.ndarray
    token_words: np.ndarray


@numba.njit(cache=True)
def _sweep(docs, words, z, ndk, nkw, nk, alpha, beta, vbeta, uniforms):
    n_topics = nk.shape[0]
    p = np.empty(n_topics)
    for i in range(docs.shape[0]):
        d = docs[i]
        w = words[i]
        k = z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        total = 0.0
        for t in range(n_topics):
            total += (ndk[d, t] + alpha) * (nkw[t, w] + beta) / (nk[t] + vbeta)
            p[t] = total
        u = uniforms[i] * total
        k = 0
        while k < n_topics - 1 and p[k] <= u:
            k += 1
        z[i] = k
        ndk[d, k] += 1
        nkw[k, w] += 1
        nk[k] += 1


def _tokens(counts) -> tuple[np.ndarray, np.ndarray, int, int]:
    mat = getattr(counts, "matrix", counts)
    mat = sp.csr_matrix(mat)
    n_docs, n_words = mat.shape
    data = np.rint(mat.data).astype(np.int64)
    if np.any(data < 0) or not np.allclose(data, mat.data):
        raise InvalidConfigError("LDA needs nonnegative integer counts")
    rows = np.repeat(np.arange(n_docs), np.diff(mat.indptr))
    docs = np.repeat(rows, data)
    words = np.repeat(mat.indices.astype(np.int64), data)
    return docs, words, n_docs, n_words


def lda_fit(counts, n_topics: int = 50, iterations: int = 200, alpha: float | None = None,
            beta: float = 0.01, seed: int = 0) -> LdaResult:
    """Fit LDA to a document x term count matrix.

    ``alpha`` defaults to ``50 / n_topics``. Returns smoothed document-topic
    proportions ``(n_dk + alpha) / (n_d + K alpha)`` after the final sweep.
    """
    if n_topics < 2:
        raise InvalidConfigError("n_topics must be >= 2")
    if iterations < 1:
        raise InvalidConfigError("iterations must be >= 1")
    if alpha is None:
        alpha = 50.0 / n_topics
    if alpha <= 0 or beta <= 0:
        raise InvalidConfigError("alpha and beta must be positive")
    docs, words, n_docs, n_words = _tokens(counts)
    if n_docs == 0:
        raise InvalidConfigError("empty count matrix")

    rng = np.random.default_rng(seed)
    z = rng.integers(n_topics, size=docs.shape[0]).astype(np.int64)
    ndk = np.zeros((n_docs, n_topics), dtype=np.int64)
    nkw = np.zeros((n_topics, n_words), dtype=np.int64)
    np.add.at(ndk, (docs, z), 1)
    np.add.at(nkw, (z, words), 1)
    nk = nkw.sum(axis=1)

    for _ in range(iterations):
        _sweep(docs, words, z, ndk, nkw, nk, float(alpha), float(beta), float(n_words * beta),
               rng.random(docs.shape[0]))

    doc_topic = (ndk + alpha) / (ndk.sum(axis=1, keepdims=True) + n_topics * alpha)
    topic_word = (nkw + beta) / (nk[:, None] + n_words * beta)
    return LdaResult(doc_topic, topic_word, z, docs, words)
