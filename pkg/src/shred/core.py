"""Shape and region-decomposition data model plus the geometric primitives under it.

A Shape is an immutable high-resolution point cloud (positions, unit normals,
optional ground-truth instance labels). A RegionDecomposition assigns every
point of a shape to exactly one region; it is the artifact the pipeline
stages transform. Shapes travel as SHRD1 text files.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

NORMAL_TOL = 1e-4
_DEGENERATE_SCALE = 1e-12


class ShapeFormatError(ValueError):
    """Raised when SHRD1 input cannot be parsed."""


@dataclass
class Shape:
    """Point cloud with per-point normals and optional instance labels.

    Normals are re-normalized to unit length at construction, gt labels are
    re-indexed to a dense 0..G-1 range, and all arrays are frozen so a shape
    can be shared across workers.
    """

    id: str
    positions: np.ndarray
    normals: np.ndarray
    gt_labels: np.ndarray | None = None
    gt_semantic: np.ndarray | None = None
    _tree: cKDTree | None = field(default=None, repr=False, compare=False)
    _sqnorms: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        self.normals = np.ascontiguousarray(self.normals, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("positions must be an (N, 3) array")
        if self.normals.shape != self.positions.shape:
            raise ValueError("normals must match positions in shape")
        if len(self.positions) < 1:
            raise ValueError("shape must contain at least one point")
        norms = np.linalg.norm(self.normals, axis=1)
        if np.any(norms < _DEGENERATE_SCALE):
            bad = int(np.argmax(norms < _DEGENERATE_SCALE))
            raise ValueError(f"zero-length normal at point {bad}")
        self.normals = self.normals / norms[:, None]
        if self.gt_labels is not None:
            raw = np.asarray(self.gt_labels)
            if raw.shape != (len(self.positions),):
                raise ValueError("gt_labels must have one entry per point")
            if np.any(raw < 0):
                raise ValueError("gt_labels must be non-negative")
            # dense re-index 0..G-1, ordered by ascending original id
            _, dense = np.unique(raw, return_inverse=True)
            self.gt_labels = np.ascontiguousarray(dense, dtype=np.int64)
            self.gt_labels.flags.writeable = False
        if self.gt_semantic is not None:
            sem = np.ascontiguousarray(self.gt_semantic, dtype=np.int64)
            if sem.shape != (len(self.positions),):
                raise ValueError("gt_semantic must have one entry per point")
            self.gt_semantic = sem
            self.gt_semantic.flags.writeable = False
        self.positions.flags.writeable = False
        self.normals.flags.writeable = False

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def n_gt_parts(self) -> int:
        if self.gt_labels is None:
            raise ValueError(f"shape {self.id!r} has no ground-truth labels")
        return int(self.gt_labels.max()) + 1

    def tree(self) -> cKDTree:
        """kd-tree over positions, built lazily and cached."""
        if self._tree is None:
            self._tree = cKDTree(self.positions)
        return self._tree

    def position_sqnorms(self) -> np.ndarray:
        """Cached per-point squared norms (speeds up repeated radius scans)."""
        if self._sqnorms is None:
            self._sqnorms = (self.positions**2).sum(axis=1)
            self._sqnorms.flags.writeable = False
        return self._sqnorms

    def gt_decomposition(self) -> "RegionDecomposition":
        """Ground-truth decomposition built from the instance labels."""
        if self.gt_labels is None:
            raise ValueError(f"shape {self.id!r} has no ground-truth labels")
        return RegionDecomposition.from_labels(self.id, self.gt_labels)


@dataclass
class RegionDecomposition:
    """Partition of a shape's points into integer-labeled regions."""

    shape_id: str
    labels: np.ndarray
    next_id: int

    def __post_init__(self) -> None:
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1 or len(self.labels) < 1:
            raise ValueError("labels must be a non-empty 1-d array")
        if np.any(self.labels < 0):
            raise ValueError("region ids must be non-negative")
        if self.next_id <= int(self.labels.max()):
            raise ValueError("next_id must exceed every region id in use")

    @classmethod
    def from_labels(cls, shape_id: str, labels: np.ndarray) -> "RegionDecomposition":
        labels = np.asarray(labels, dtype=np.int64)
        return cls(shape_id=shape_id, labels=labels.copy(), next_id=int(labels.max()) + 1)

    @property
    def n(self) -> int:
        return len(self.labels)

    def region_ids(self) -> np.ndarray:
        return np.unique(self.labels)

    @property
    def region_count(self) -> int:
        return len(np.unique(self.labels))

    def points_of(self, region_id: int) -> np.ndarray:
        idx = np.flatnonzero(self.labels == region_id)
        if len(idx) == 0:
            raise ValueError(f"unknown region id {region_id}")
        return idx

    def has_region(self, region_id: int) -> bool:
        return bool(np.any(self.labels == region_id))

    def copy(self) -> "RegionDecomposition":
        return RegionDecomposition(self.shape_id, self.labels.copy(), self.next_id)

    def allocate_id(self) -> int:
        rid = self.next_id
        self.next_id += 1
        return rid

    def check_partition(self, shape: Shape | None = None) -> None:
        """Assert the partition invariants; cheap enough for debug use."""
        if shape is not None and len(self.labels) != shape.n:
            raise AssertionError("label list length does not match shape")
        if np.any(self.labels < 0):
            raise AssertionError("negative region id")
        if self.next_id <= int(self.labels.max()):
            raise AssertionError("next_id does not exceed max region id")


@dataclass
class NormalizedRegion:
    """A region's points re-expressed in its own unit-sphere frame."""

    point_indices: np.ndarray
    positions: np.ndarray
    normals: np.ndarray
    transform: tuple[np.ndarray, float]

    @classmethod
    def from_shape(cls, shape: Shape, point_indices: np.ndarray) -> "NormalizedRegion":
        point_indices = np.asarray(point_indices, dtype=np.int64)
        pos, transform = normalize_unit_sphere(shape.positions[point_indices])
        return cls(
            point_indices=point_indices,
            positions=pos,
            normals=shape.normals[point_indices].copy(),
            transform=transform,
        )

    def to_original(self) -> np.ndarray:
        center, scale = self.transform
        return self.positions * scale + center


def normalize_unit_sphere(points: np.ndarray) -> tuple[np.ndarray, tuple[np.ndarray, float]]:
    """Center points at their centroid and scale the farthest one onto the unit sphere.

    All-coincident inputs keep scale 1 so the transform stays invertible.
    Returns (normalized points, (center, scale)).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError("points must be an (N, 3) array")
    if len(points) == 0:
        raise ValueError("empty point set")
    center = points.mean(axis=0)
    centered = points - center
    radius = float(np.sqrt((centered * centered).sum(axis=1).max()))
    scale = radius if radius > _DEGENERATE_SCALE else 1.0
    return centered / scale, (center, scale)


def subsample_points(
    indices: np.ndarray, target: int, rng: np.random.Generator
) -> np.ndarray:
    """Sample exactly `target` entries from `indices`.

    Samples without replacement when enough indices exist; otherwise keeps
    every index and tops up with replacement, so small regions keep full
    coverage.
    """
    indices = np.asarray(indices, dtype=np.int64)
    if len(indices) == 0:
        raise ValueError("empty point set")
    if target < 1:
        raise ValueError("target must be >= 1")
    if len(indices) >= target:
        # shuffle=False keeps Floyd-style O(target) selection; the subset is
        # still uniform, only its internal order is not randomized
        sel = rng.choice(len(indices), size=target, replace=False, shuffle=False)
        return indices[sel]
    extra = rng.choice(len(indices), size=target - len(indices), replace=True)
    return np.concatenate([indices, indices[extra]])


def min_region_distance(
    shape: Shape, decomp: RegionDecomposition, region_a: int, region_b: int
) -> float:
    """Minimum Euclidean distance between any point of region_a and any of region_b."""
    idx_a = decomp.points_of(region_a)
    idx_b = decomp.points_of(region_b)
    if region_a == region_b:
        return 0.0
    # query from the larger set into a tree over the smaller one
    if len(idx_a) < len(idx_b):
        idx_a, idx_b = idx_b, idx_a
    tree = cKDTree(shape.positions[idx_b])
    dists, _ = tree.query(shape.positions[idx_a], k=1)
    return float(np.min(dists))


# ---------------------------------------------------------------------------
# SHRD1 text format


def dumps_shrd(shape: Shape) -> str:
    has_gt = shape.gt_labels is not None
    out = io.StringIO()
    out.write(f"SHRD1 {shape.n} {1 if has_gt else 0}\n")
    for i in range(shape.n):
        x, y, z = shape.positions[i]
        nx, ny, nz = shape.normals[i]
        row = f"{x:.9g} {y:.9g} {z:.9g} {nx:.9g} {ny:.9g} {nz:.9g}"
        if has_gt:
            row += f" {int(shape.gt_labels[i])}"
            if shape.gt_semantic is not None:
                row += f" {int(shape.gt_semantic[i])}"
        out.write(row + "\n")
    return out.getvalue()


def loads_shrd(text: str, shape_id: str) -> Shape:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ShapeFormatError("empty SHRD1 input")
    header = lines[0].split()
    if len(header) != 3 or header[0] != "SHRD1":
        raise ShapeFormatError(f"bad SHRD1 header: {lines[0]!r}")
    try:
        n = int(header[1])
        has_gt = int(header[2])
    except ValueError as exc:
        raise ShapeFormatError(f"bad SHRD1 header: {lines[0]!r}") from exc
    if has_gt not in (0, 1):
        raise ShapeFormatError("has_gt flag must be 0 or 1")
    body = lines[1:]
    if len(body) != n:
        raise ShapeFormatError(f"expected {n} data lines, found {len(body)}")
    positions = np.empty((n, 3), dtype=np.float64)
    normals = np.empty((n, 3), dtype=np.float64)
    gt = np.empty(n, dtype=np.int64) if has_gt else None
    sem: np.ndarray | None = None
    for i, ln in enumerate(body):
        parts = ln.split()
        want = 6 if not has_gt else 7
        if has_gt and len(parts) == 8:
            if sem is None:
                sem = np.zeros(n, dtype=np.int64)
        elif len(parts) != want:
            raise ShapeFormatError(f"line {i + 2}: expected {want} fields, found {len(parts)}")
        try:
            vals = [float(v) for v in parts[:6]]
        except ValueError as exc:
            raise ShapeFormatError(f"line {i + 2}: non-numeric value") from exc
        positions[i] = vals[:3]
        normals[i] = vals[3:6]
        if has_gt:
            gt[i] = int(float(parts[6]))
            if sem is not None:
                sem[i] = int(float(parts[7])) if len(parts) == 8 else 0
    return Shape(id=shape_id, positions=positions, normals=normals, gt_labels=gt, gt_semantic=sem)


def read_shrd(path: str | Path) -> Shape:
    path = Path(path)
    return loads_shrd(path.read_text(), shape_id=path.stem)


def write_shrd(shape: Shape, path: str | Path) -> None:
    Path(path).write_text(dumps_shrd(shape))
