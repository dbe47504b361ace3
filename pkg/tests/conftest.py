from __future__ import annotations

import numpy as np
import pytest

from shred.core import Shape
from shred.shapegen import small_shape


def make_shape(positions, gt=None, shape_id="test", normals=None) -> Shape:
    positions = np.asarray(positions, dtype=np.float64)
    if normals is None:
        normals = np.tile([0.0, 0.0, 1.0], (len(positions), 1))
    return Shape(
        id=shape_id,
        positions=positions,
        normals=np.asarray(normals, dtype=np.float64),
        gt_labels=None if gt is None else np.asarray(gt, dtype=np.int64),
    )


def grid_patch(origin, nx, ny, spacing=0.01, z=0.0):
    """Flat rectangular grid in the z-plane, connected at any threshold > spacing."""
    xs = origin[0] + spacing * np.arange(nx)
    ys = origin[1] + spacing * np.arange(ny)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel(), np.full(nx * ny, z)], axis=1)
    return pts


def two_part_shape(gap=0.0, nx=12, ny=8, spacing=0.01, shape_id="twopart") -> Shape:
    """Two coplanar grid patches, part 1 offset in +x by patch width + gap."""
    a = grid_patch((0.0, 0.0), nx, ny, spacing)
    b = grid_patch((nx * spacing + gap, 0.0), nx, ny, spacing)
    pts = np.concatenate([a, b])
    gt = np.concatenate([np.zeros(len(a), dtype=int), np.ones(len(b), dtype=int)])
    return make_shape(pts, gt=gt, shape_id=shape_id)


@pytest.fixture(scope="session")
def labeled_shape() -> Shape:
    return small_shape(42)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(7)
