"""Exact O(N^2) t-SNE for 2-D visualization of embeddings."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

EPSILON = 1e-12
MAX_BISECTION_STEPS = 200
# internal stopping tolerance, well inside the 1e-3 contract
PERPLEXITY_TOL = 1e-5


class PerplexityTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class AffinityMatrix:
    P: np.ndarray
    target_perplexity: float
    # perplexity actually reached by each conditional row
    row_perplexity: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass(frozen=True)
class Projection:
    points: np.ndarray
    kl_trace: np.ndarray
    row_ids: tuple[str, ...] = ()

    def save_csv(self, path: str | Path, labels: Sequence[str | None] | None = None) -> None:
        ids = self.row_ids or tuple(str(i) for i in range(len(self.points)))
        labels = labels if labels is not None else [None] * len(ids)
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["record_id", "x", "y", "label"])
            for rid, (x, y), lab in zip(ids, self.points, labels):
                w.writerow([rid, repr(float(x)), repr(float(y)), "" if lab is None else lab])

    def save_kl_csv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "kl"])
            for i, kl in enumerate(self.kl_trace, start=1):
                w.writerow([i, repr(float(kl))])


def squared_distances(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def _row_entropy(dist: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    """Entropy in nats of the Gaussian conditional with precision ``beta``; ``dist`` is shifted so min is 0."""
    w = np.exp(-beta * dist)
    total = w.sum()
    p = w / total
    H = np.log(total) + beta * float(p @ dist)
    return H, p


def conditional_row(dist: np.ndarray, perplexity: float) -> tuple[np.ndarray, float]:
    """Bisect the precision of one row until ``exp(H)`` is within tolerance of ``perplexity``."""
    dist = dist - dist.min()
    target = np.log(perplexity)
    beta, lo, hi = 1.0, 0.0, np.inf
    H, p = _row_entropy(dist, beta)
    for _ in range(MAX_BISECTION_STEPS):
        if abs(np.exp(H) - perplexity) < PERPLEXITY_TOL:
            break
        if H > target:
            lo = beta
            beta = beta * 2.0 if hi == np.inf else 0.5 * (beta + hi)
        else:
            hi = beta
            beta = 0.5 * (beta + lo)
        H, p = _row_entropy(dist, beta)
    return p, float(np.exp(H))


def conditional_affinities(X, perplexity: float = 30.0) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic ``P_{j|i}`` (zero diagonal) and the perplexity reached by each row."""
    X = np.asarray(X, dtype=np.float64)
    N = X.shape[0]
    if N < 4:
        raise ValueError(f"t-SNE needs at least 4 points, got {N}")
    if not 0 < perplexity < (N - 1) / 3.0:
        raise PerplexityTooLargeError(
            f"perplexity {perplexity} must lie in (0, {(N - 1) / 3.0:g}) for {N} points")
    D = squared_distances(X)
    cond = np.zeros((N, N))
    reached = np.empty(N)
    others = ~np.eye(N, dtype=bool)
    for i in range(N):
        row, reached[i] = conditional_row(D[i, others[i]], perplexity)
        row = np.maximum(row, EPSILON)
        cond[i, others[i]] = row / row.sum()
    return cond, reached


def pairwise_affinities(X, perplexity: float = 30.0) -> AffinityMatrix:
    cond, reached = conditional_affinities(X, perplexity)
    P = (cond + cond.T) / (2.0 * cond.shape[0])
    return AffinityMatrix(P, float(perplexity), reached)


def kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / np.maximum(Q[mask], EPSILON))))


def _student_t(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    num = 1.0 / (1.0 + squared_distances(Y))
    np.fill_diagonal(num, 0.0)
    return num, num / num.sum()


def project(affinities: AffinityMatrix | np.ndarray, iters: int = 1000, seed: int = 0,
            learning_rate: float = 200.0, exaggeration: float = 12.0,
            exaggeration_iters: int = 250, momentum: float = 0.5,
            final_momentum: float = 0.8, momentum_switch: int = 250,
            init_std: float = 1e-2, row_ids: Sequence[str] = ()) -> Projection:
    """Gradient descent on KL(P || Q) with Student-t low-dimensional affinities.

    Uses per-coordinate adaptive gains. ``kl_trace`` is measured against the
    un-exaggerated P after every update.
    """
    P = affinities.P if isinstance(affinities, AffinityMatrix) else np.asarray(affinities)
    N = P.shape[0]
    rng = np.random.default_rng(seed)
    Y = rng.normal(0.0, init_std, size=(N, 2))
    Y -= Y.mean(axis=0)
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    trace = np.empty(iters)
    for t in range(iters):
        exag = exaggeration if t < exaggeration_iters else 1.0
        mom = momentum if t < momentum_switch else final_momentum
        num, Q = _student_t(Y)
        W = (exag * P - Q) * num
        grad = 4.0 * (np.diag(W.sum(axis=1)) - W) @ Y
        same_sign = np.sign(grad) == np.sign(update)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        update = mom * update - learning_rate * gains * grad
        Y = Y + update
        Y -= Y.mean(axis=0)
        trace[t] = kl_divergence(P, _student_t(Y)[1])
    return Projection(Y, trace, tuple(row_ids))


def initial_kl(affinities: AffinityMatrix, seed: int = 0, init_std: float = 1e-2) -> float:
    """KL divergence of the random initial layout that :func:`project` starts from."""
    N = affinities.P.shape[0]
    Y = np.random.default_rng(seed).normal(0.0, init_std, size=(N, 2))
    return kl_divergence(affinities.P, _student_t(Y)[1])
