"""Naive region initialization and region adjacency.

Farthest-point-sampling clustering turns a shape into k Voronoi-style
regions; the adjacency graph connects regions whose minimum point-to-point
distance falls under a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RegionDecomposition, Shape

DEFAULT_ADJACENCY_THRESHOLD = 0.025

_ASSIGN_CHUNK = 8192


@dataclass(frozen=True)
class AdjacencyGraph:
    """Unordered region pairs within `threshold` of each other (a < b, no self-pairs)."""

    pairs: frozenset[tuple[int, int]]
    threshold: float

    def neighbors_of(self, region_id: int) -> list[int]:
        out = []
        for a, b in self.pairs:
            if a == region_id:
                out.append(b)
            elif b == region_id:
                out.append(a)
        return sorted(out)


def fps_select(positions: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Pick min(k, N) centroid indices by iterative farthest-point selection.

    The first centroid is the point landing at position 0 of a seeded
    shuffle; every later one maximizes distance to the chosen set, ties
    resolved toward the lower point index.
    """
    n = len(positions)
    k = min(k, n)
    rng = np.random.default_rng(seed)
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = int(rng.permutation(n)[0])
    d2 = ((positions - positions[chosen[0]]) ** 2).sum(axis=1)
    d2[chosen[0]] = -np.inf  # never re-pick a chosen point, even among duplicates
    for i in range(1, k):
        nxt = int(np.argmax(d2))
        chosen[i] = nxt
        cand = ((positions - positions[nxt]) ** 2).sum(axis=1)
        np.minimum(d2, cand, out=d2)
        d2[nxt] = -np.inf
    return chosen


def fps_cluster(shape: Shape, k: int, seed: int) -> RegionDecomposition:
    """Decompose a shape into min(k, N) non-empty nearest-centroid regions."""
    if k < 1:
        raise ValueError("k must be >= 1")
    centroids = fps_select(shape.positions, k, seed)
    centers = shape.positions[centroids]
    labels = np.empty(shape.n, dtype=np.int64)
    for start in range(0, shape.n, _ASSIGN_CHUNK):
        block = shape.positions[start : start + _ASSIGN_CHUNK]
        d2 = ((block[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        # argmin takes the first minimum: ties go to the lower centroid index
        labels[start : start + _ASSIGN_CHUNK] = np.argmin(d2, axis=1)
    # coincident centroids could otherwise leave a region empty
    labels[centroids] = np.arange(len(centroids))
    return RegionDecomposition(shape_id=shape.id, labels=labels, next_id=len(centroids))


def region_pairs_from_point_pairs(
    labels: np.ndarray, point_pairs: np.ndarray
) -> set[tuple[int, int]]:
    """Region pairs induced by cross-region point pairs (each pair stored a < b)."""
    if len(point_pairs) == 0:
        return set()
    la = labels[point_pairs[:, 0]]
    lb = labels[point_pairs[:, 1]]
    mask = la != lb
    if not np.any(mask):
        return set()
    lo = np.minimum(la[mask], lb[mask])
    hi = np.maximum(la[mask], lb[mask])
    base = int(labels.max()) + 1
    codes = np.unique(lo * base + hi)
    return {(int(c) // base, int(c) % base) for c in codes}


def adjacency(shape: Shape, decomp: RegionDecomposition, threshold: float) -> AdjacencyGraph:
    """All region pairs whose minimum point distance is <= threshold."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    point_pairs = shape.tree().query_pairs(threshold, output_type="ndarray")
    pairs = region_pairs_from_point_pairs(decomp.labels, point_pairs)
    return AdjacencyGraph(pairs=frozenset(pairs), threshold=threshold)
