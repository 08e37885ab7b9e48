"""Duplicate grouping and nearest-neighbor memorization scan in embedding space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass
class NearestNeighborHit:
    query_id: str
    train_id: str
    similarity: float
    rank: int


def find_duplicates(
    embeddings: np.ndarray, ids: list[str], threshold: float = 0.999
) -> list[list[str]]:
    """Group items whose pairwise cosine similarity reaches the threshold.

    Embeddings must be unit-norm; returns only groups of size >= 2.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2 or e.shape[0] != len(ids):
        raise DataError("embeddings and ids must align")
    norms = np.linalg.norm(e, axis=1)
    if not np.allclose(norms, 1.0, atol=1e-3):
        raise DataError("find_duplicates expects unit-norm embeddings")

    n = e.shape[0]
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    sims = e @ e.T
    for i in range(n):
        for j in range(i + 1, n):
            if sims[i, j] >= threshold:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri

    groups: dict[int, list[str]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(ids[i])
    return sorted([g for g in groups.values() if len(g) >= 2], key=lambda g: g[0])


def memorization_scan(
    gen_embeddings: np.ndarray,
    gen_ids: list[str],
    train_embeddings: np.ndarray,
    train_ids: list[str],
    k: int = 50,
) -> list[NearestNeighborHit]:
    """Nearest training item per generation; global top-k by similarity.

    The returned list is ranked 1..k for human audit of potential copies.
    """
    g = np.asarray(gen_embeddings, dtype=np.float64)
    t = np.asarray(train_embeddings, dtype=np.float64)
    if t.shape[0] == 0:
        raise DataError("memorization scan needs a non-empty training index")
    if g.shape[0] != len(gen_ids) or t.shape[0] != len(train_ids):
        raise DataError("embeddings and ids must align")
    if k > g.shape[0]:
        raise DataError(f"k={k} exceeds the number of generations ({g.shape[0]})")

    sims = g @ t.T
    nearest = sims.argmax(axis=1)
    best = sims[np.arange(g.shape[0]), nearest]
    order = np.argsort(-best)[:k]
    return [
        NearestNeighborHit(
            query_id=gen_ids[int(i)],
            train_id=train_ids[int(nearest[int(i)])],
            similarity=float(best[int(i)]),
            rank=rank + 1,
        )
        for rank, i in enumerate(order)
    ]
