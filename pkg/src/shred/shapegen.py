"""Procedural labeled shapes: grid-sampled primitive assemblies.

Each part is a box or cylinder shell sampled on a regular grid whose spacing
is far below the default adjacency threshold, so every ground-truth part is
adjacency-connected by construction. Parts attach to previously placed ones,
keeping assemblies inside the unit ball.
"""

from __future__ import annotations

import math

import numpy as np

from .core import Shape

SPACING_MIN = 0.006
SPACING_MAX = 0.0105
_JITTER_SIGMA = 0.1  # fraction of grid spacing


def _box_shell(center: np.ndarray, half: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    pts, nrm = [], []
    for axis in range(3):
        u_axis, v_axis = [a for a in range(3) if a != axis]
        nu = max(2, int(math.ceil(2 * half[u_axis] / h)) + 1)
        nv = max(2, int(math.ceil(2 * half[v_axis] / h)) + 1)
        us = np.linspace(-half[u_axis], half[u_axis], nu)
        vs = np.linspace(-half[v_axis], half[v_axis], nv)
        uu, vv = np.meshgrid(us, vs, indexing="ij")
        for sign in (-1.0, 1.0):
            face = np.zeros((nu * nv, 3))
            face[:, u_axis] = uu.ravel()
            face[:, v_axis] = vv.ravel()
            face[:, axis] = sign * half[axis]
            normal = np.zeros(3)
            normal[axis] = sign
            pts.append(center + face)
            nrm.append(np.tile(normal, (len(face), 1)))
    return np.concatenate(pts), np.concatenate(nrm)


def _circle_points(radius: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    """(cos, sin) samples around a circle with arc spacing <= h."""
    n = max(3, int(math.ceil(2 * math.pi * radius / h)))
    ang = 2 * math.pi * np.arange(n) / n
    return np.cos(ang), np.sin(ang)


def _cylinder_shell(
    center: np.ndarray, axis: int, radius: float, half_h: float, h: float
) -> tuple[np.ndarray, np.ndarray]:
    u_axis, v_axis = [a for a in range(3) if a != axis]
    pts, nrm = [], []
    nz = max(2, int(math.ceil(2 * half_h / h)) + 1)
    zs = np.linspace(-half_h, half_h, nz)
    cos, sin = _circle_points(radius, h)
    for z in zs:
        ring = np.zeros((len(cos), 3))
        ring[:, u_axis] = radius * cos
        ring[:, v_axis] = radius * sin
        ring[:, axis] = z
        normal = np.zeros((len(cos), 3))
        normal[:, u_axis] = cos
        normal[:, v_axis] = sin
        pts.append(center + ring)
        nrm.append(normal)
    for sign in (-1.0, 1.0):  # caps as concentric rings
        r = radius - h
        cap_pts = [np.array([[0.0, 0.0, 0.0]])]
        while r > h / 2:
            c, s = _circle_points(r, h)
            ring = np.zeros((len(c), 3))
            ring[:, u_axis] = r * c
            ring[:, v_axis] = r * s
            cap_pts.append(ring)
            r -= h
        cap = np.concatenate(cap_pts)
        cap[:, axis] = sign * half_h
        normal = np.zeros(3)
        normal[axis] = sign
        pts.append(center + cap)
        nrm.append(np.tile(normal, (len(cap), 1)))
    return np.concatenate(pts), np.concatenate(nrm)


def _box_area(half: np.ndarray) -> float:
    a, b, c = half
    return float(8 * (a * b + b * c + c * a))


def _cylinder_area(radius: float, half_h: float) -> float:
    return float(2 * math.pi * radius * 2 * half_h + 2 * math.pi * radius**2)


def synthetic_shape(
    seed: int,
    n_parts_range: tuple[int, int] = (4, 12),
    total_area_range: tuple[float, float] = (0.30, 0.55),
    target_points_range: tuple[int, int] = (6000, 16000),
    shape_id: str | None = None,
) -> Shape:
    """Deterministic labeled assembly of 4..12 primitives within the unit ball."""
    rng = np.random.default_rng(seed)
    n_parts = int(rng.integers(n_parts_range[0], n_parts_range[1] + 1))
    total_area = float(rng.uniform(*total_area_range))
    area_budget = total_area / n_parts
    target_points = int(rng.integers(target_points_range[0], target_points_range[1] + 1))

    # geometry first, then one spacing for the whole shape
    specs = []
    centers = [np.zeros(3)]
    for part in range(n_parts):
        kind = "box" if rng.random() < 0.6 else "cylinder"
        if kind == "box":
            half = rng.uniform(0.04, 0.14, size=3)
            scale = math.sqrt(area_budget / _box_area(half))
            half = half * scale
            extent = float(half.max())
            spec = ("box", half)
        else:
            radius = float(rng.uniform(0.03, 0.09))
            half_h = float(rng.uniform(0.05, 0.2))
            scale = math.sqrt(area_budget / _cylinder_area(radius, half_h))
            radius, half_h = radius * scale, half_h * scale
            extent = max(radius, half_h)
            spec = ("cylinder", int(rng.integers(3)), radius, half_h)
        if part == 0:
            center = np.zeros(3)
        else:
            anchor = centers[int(rng.integers(len(centers)))]
            direction = np.zeros(3)
            direction[int(rng.integers(3))] = rng.choice([-1.0, 1.0])
            center = anchor + direction * extent * rng.uniform(0.6, 1.4)
            center = np.clip(center, -0.7, 0.7)
        centers.append(center)
        specs.append((center, spec))

    h = math.sqrt(total_area / target_points)
    h = min(max(h, SPACING_MIN), SPACING_MAX)

    all_pts, all_nrm, all_gt = [], [], []
    for label, (center, spec) in enumerate(specs):
        if spec[0] == "box":
            pts, nrm = _box_shell(center, spec[1], h)
        else:
            pts, nrm = _cylinder_shell(center, spec[1], spec[2], spec[3], h)
        all_pts.append(pts)
        all_nrm.append(nrm)
        all_gt.append(np.full(len(pts), label, dtype=np.int64))

    positions = np.concatenate(all_pts)
    normals = np.concatenate(all_nrm)
    gt = np.concatenate(all_gt)
    positions = positions + rng.normal(0.0, _JITTER_SIGMA * h, size=positions.shape)
    max_norm = float(np.linalg.norm(positions, axis=1).max())
    if max_norm > 1.0:  # only ever shrink, so grid spacing never widens
        positions = positions / max_norm
    return Shape(
        id=shape_id or f"synth{seed:04d}",
        positions=positions,
        normals=normals,
        gt_labels=gt,
    )


def shape_suite(count: int, base_seed: int = 0, **kwargs) -> list[Shape]:
    return [synthetic_shape(base_seed + i, **kwargs) for i in range(count)]


def small_shape(seed: int, shape_id: str | None = None) -> Shape:
    """Lighter fixture preset for operator-level and degradation tests."""
    return synthetic_shape(
        seed,
        n_parts_range=(4, 8),
        total_area_range=(0.12, 0.22),
        target_points_range=(2600, 4500),
        shape_id=shape_id,
    )


def tiny_shape(seed: int, shape_id: str | None = None) -> Shape:
    """Smallest useful fixtures, sized for desk-scale training loops."""
    return synthetic_shape(
        seed,
        n_parts_range=(3, 4),
        total_area_range=(0.09, 0.13),
        target_points_range=(900, 1300),
        shape_id=shape_id,
    )
