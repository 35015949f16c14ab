"""Cluster-quality metrics for labeled points in an embedding space.

Unlabeled (random) cases carry the label ``None``. They take part as
neighbors and, for the silhouette, as one shared background cluster, but
scores are averaged over series points only.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

BACKGROUND = "__background__"


@dataclass(frozen=True)
class MetricReport:
    knn_purity: float
    silhouette: float
    per_series_purity: dict[str, float] = field(default_factory=dict)
    k: int = 5
    method: str = ""

    def __post_init__(self):
        if not 0.0 <= self.knn_purity <= 1.0:
            raise ValueError(f"knn_purity {self.knn_purity} outside [0, 1]")
        if not -1.0 <= self.silhouette <= 1.0:
            raise ValueError(f"silhouette {self.silhouette} outside [-1, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "MetricReport":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def _distances(E: np.ndarray) -> np.ndarray:
    # explicit differences, so duplicated points sit at exactly zero distance
    E = np.asarray(E, dtype=np.float64)
    return cdist(E, E)


def _values(E) -> np.ndarray:
    return np.asarray(getattr(E, "values", E), dtype=np.float64)


def knn_hits(E, labels: Sequence[str | None], k: int = 5,
             ids: Sequence[str] | None = None) -> dict[int, bool]:
    """For each series point, whether its k nearest neighbors hold at least ceil(k/2) of its label.

    Self is excluded; equal distances are ordered by record id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    X = _values(E)
    labels = list(labels)
    if ids is None:
        ids = getattr(E, "row_ids", None) or [f"{i:09d}" for i in range(len(labels))]
    id_rank = np.argsort(np.argsort(np.asarray(ids, dtype=str), kind="stable"), kind="stable")
    D = _distances(X)
    need = math.ceil(k / 2)
    hits = {}
    for i, lab in enumerate(labels):
        if lab is None:
            continue
        order = np.lexsort((id_rank, D[i]))
        order = order[order != i][:k]
        hits[i] = sum(labels[j] == lab for j in order) >= need
    return hits


def knn_purity(E, labels: Sequence[str | None], k: int = 5,
               ids: Sequence[str] | None = None) -> float:
    hits = knn_hits(E, labels, k, ids)
    return float(np.mean(list(hits.values()))) if hits else 0.0


def silhouette_samples(E, labels: Sequence) -> np.ndarray:
    """Standard silhouette per point; singleton clusters score 0, as do points with a = b = 0."""
    X = _values(E)
    lab = np.array([BACKGROUND if l is None else l for l in labels], dtype=object)
    uniq = sorted(set(lab))
    if len(uniq) < 2:
        raise ValueError("silhouette needs at least two labels")
    D = _distances(X)
    masks = {u: lab == u for u in uniq}
    s = np.zeros(len(lab))
    for i in range(len(lab)):
        own = masks[lab[i]]
        n_own = own.sum()
        if n_own == 1:
            continue
        a = D[i, own].sum() / (n_own - 1)
        b = min(D[i, masks[u]].mean() for u in uniq if u != lab[i])
        denom = max(a, b)
        s[i] = 0.0 if denom == 0 else (b - a) / denom
    return s


def silhouette(E, labels: Sequence[str | None]) -> float:
    """Mean silhouette over series points; falls back to all points when nothing is unlabeled."""
    s = silhouette_samples(E, labels)
    series = np.array([l is not None for l in labels])
    return float(s[series].mean()) if series.any() else float(s.mean())


def evaluate_embedding(E, labels: Sequence[str | None], k: int = 5,
                       ids: Sequence[str] | None = None, method: str = "") -> MetricReport:
    hits = knn_hits(E, labels, k, ids)
    per_series: dict[str, list[bool]] = {}
    for i, ok in hits.items():
        per_series.setdefault(labels[i], []).append(ok)
    purity = float(np.mean(list(hits.values()))) if hits else 0.0
    return MetricReport(
        knn_purity=purity,
        silhouette=silhouette(E, labels),
        per_series_purity={s: float(np.mean(v)) for s, v in sorted(per_series.items())},
        k=k,
        method=method,
    )
