"""Synthetic training examples for the split, fix, and merge operators.

Split examples pair FPS regions with ground-truth slot targets; fix examples
corrupt a ground-truth part and ask for its restoration; merge examples walk
randomized decompositions sampling neighbor pairs with should-merge labels.
Examples serialize to length-prefixed binary shards with a JSON manifest.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import matching
from .core import RegionDecomposition, Shape, normalize_unit_sphere, subsample_points
from .decomp import (
    DEFAULT_ADJACENCY_THRESHOLD,
    fps_cluster,
    region_pairs_from_point_pairs,
)
from .operators import (
    FIX_SIDE_POINTS,
    KIND_FIX,
    KIND_MERGE,
    KIND_SPLIT,
    MERGE_POINTS,
    SPLIT_POINTS,
    best_match_gt,
    build_merge_request,
    build_split_request,
    outside_candidates,
    split_slots_for_region,
)

SHARD_SIZE = 10_000
SHARD_FORMAT_VERSION = 1

MERGE_EXEC_PROB_TRUE = 0.75
MERGE_EXEC_PROB_FALSE = 0.25
RETENTION_GATE = 0.40
FPS_REGION_CHOICES = (16, 32, 64, 128)
MAX_SUBPARTS = 10

FEATURE_SHAPES = {
    KIND_SPLIT: ((SPLIT_POINTS, 6), (SPLIT_POINTS,)),
    KIND_FIX: ((2 * FIX_SIDE_POINTS, 7), (2 * FIX_SIDE_POINTS,)),
    KIND_MERGE: ((MERGE_POINTS, 8), ()),
}


@dataclass
class SplitExample:
    features: np.ndarray  # (512, 6) float32
    targets: np.ndarray  # (512,) uint8 slot ids, dense from 0
    shape_id: str
    region_id: int


@dataclass
class FixExample:
    features: np.ndarray  # (4096, 7) float32; first 2048 rows sampled as inside
    targets: np.ndarray  # (4096,) uint8
    shape_id: str
    gt_part: int


@dataclass
class MergeExample:
    features: np.ndarray  # (2048, 8) float32
    target: int  # 1 = should merge
    shape_id: str
    regions: tuple[int, int]
    gt_matches: tuple[int, int]


def draw_subpart_count(rng: np.random.Generator) -> int:
    """K in 1..10 with probability proportional to 0.5**K."""
    weights = 0.5 ** np.arange(1, MAX_SUBPARTS + 1)
    return int(rng.choice(np.arange(1, MAX_SUBPARTS + 1), p=weights / weights.sum()))


def should_execute_merge(label: bool, rng: np.random.Generator) -> bool:
    """Execute true merges with 75% probability, false ones with 25%."""
    p = MERGE_EXEC_PROB_TRUE if label else MERGE_EXEC_PROB_FALSE
    return bool(rng.random() < p)


def retention_gates(flags: np.ndarray, targets: np.ndarray) -> tuple[float, float]:
    """(inside-flag precision, inside-target recall) of flags against targets."""
    flags = np.asarray(flags) > 0.5
    targets = np.asarray(targets) > 0.5
    both = int((flags & targets).sum())
    n_flag = int(flags.sum())
    n_target = int(targets.sum())
    gate1 = both / n_flag if n_flag else 0.0
    gate2 = both / n_target if n_target else 0.0
    return gate1, gate2


# ---------------------------------------------------------------------------
# Split examples


def gen_split_examples(shape: Shape, fps_k: int, seed: int) -> list[SplitExample]:
    """One example per FPS region; targets follow the largest-10 slot rule."""
    if shape.gt_labels is None:
        raise ValueError("split example generation requires ground truth")
    decomp = fps_cluster(shape, fps_k, seed)
    examples = []
    for rid in decomp.region_ids():
        idx = decomp.points_of(int(rid))
        rng = np.random.default_rng([seed, 1, int(rid)])
        request = build_split_request(shape, idx, int(rid), rng)
        slots, _ = split_slots_for_region(shape, idx)
        lookup = np.full(shape.n, -1, dtype=np.int64)
        lookup[idx] = slots
        raw = lookup[request.point_indices]
        _, dense = np.unique(raw, return_inverse=True)  # dense from 0 within the example
        examples.append(
            SplitExample(
                features=request.features(),
                targets=dense.astype(np.uint8),
                shape_id=shape.id,
                region_id=int(rid),
            )
        )
    return examples


def split_targets(
    target_matrix: np.ndarray, logits: np.ndarray, overseg: bool
) -> np.ndarray:
    """Per-point slot labels for split training, with or without the
    over-segmentation rewrite of the target matrix."""
    if overseg:
        result = matching.overseg_match(logits, target_matrix)
        return np.argmax(result.modified_target, axis=1)
    return np.argmax(target_matrix, axis=1)


# ---------------------------------------------------------------------------
# Fix examples


def _closest_mask(
    positions: np.ndarray, candidates: np.ndarray, anchor: np.ndarray, count: int
) -> np.ndarray:
    d = np.linalg.norm(positions[candidates] - anchor, axis=1)
    order = np.argsort(d, kind="stable")
    return candidates[order[:count]]


def gen_fix_example(
    shape: Shape,
    rng: np.random.Generator,
    grow_prob: float = 0.75,
    remove_prob: float = 0.75,
    max_flag_flip: float = 0.3,
    surplus_flip_prob: float = 0.1,
    fix_radius: float = 0.1,
) -> FixExample | None:
    """Corrupt a random ground-truth part and emit a restoration example.

    Returns None when either retention gate drops below 40%; rejection is a
    normal outcome.
    """
    if shape.gt_labels is None:
        raise ValueError("fix example generation requires ground truth")
    gt = shape.gt_labels
    part = int(rng.choice(np.unique(gt)))
    member = gt == part

    def ball() -> tuple[np.ndarray, float]:
        pts = shape.positions[member]
        center = pts.mean(axis=0)
        return center, float(np.linalg.norm(pts - center, axis=1).max())

    if rng.random() < grow_prob:
        center, radius = ball()
        grow_pct = rng.uniform(5.0, 25.0)
        n_add = int(round(member.sum() * grow_pct / 100.0))
        outside_idx = np.flatnonzero(~member)
        if n_add > 0 and len(outside_idx) > 0:
            anchor = center + rng.normal(0.0, max(radius, 1e-6) / 2.0, size=3)
            member[_closest_mask(shape.positions, outside_idx, anchor, n_add)] = True

    if rng.random() < remove_prob:
        center, radius = ball()
        remove_pct = rng.uniform(10.0, 50.0)
        n_rm = min(int(round(member.sum() * remove_pct / 100.0)), int(member.sum()) - 1)
        if n_rm > 0:
            anchor = center + rng.normal(0.0, max(radius, 1e-6) / 2.0, size=3)
            inside_idx = np.flatnonzero(member)
            member[_closest_mask(shape.positions, inside_idx, anchor, n_rm)] = False

    inside_idx = np.flatnonzero(member)
    center, radius = ball()
    candidates = outside_candidates(shape, inside_idx, center, radius + fix_radius)

    if len(inside_idx) >= FIX_SIDE_POINTS:
        sel = rng.choice(len(inside_idx), size=FIX_SIDE_POINTS, replace=False)
        inside_sample = inside_idx[sel]
        surplus = np.setdiff1d(inside_idx, inside_sample)
        # down-sampled surplus may re-enter flagged outside
        flipped = surplus[rng.random(len(surplus)) < surplus_flip_prob]
        candidates = np.concatenate([candidates, flipped])
    else:
        inside_sample = subsample_points(inside_idx, FIX_SIDE_POINTS, rng)

    if len(candidates) == 0:
        # no outside point in range: fall back to the part's own boundary
        d = np.linalg.norm(shape.positions[inside_idx] - center, axis=1)
        order = np.argsort(-d, kind="stable")
        candidates = inside_idx[order[: min(len(order), FIX_SIDE_POINTS)]]
    outside_sample = subsample_points(candidates, FIX_SIDE_POINTS, rng)

    sample = np.concatenate([inside_sample, outside_sample])
    flags = np.concatenate([np.ones(FIX_SIDE_POINTS), np.zeros(FIX_SIDE_POINTS)])
    z = rng.uniform(0.0, max_flag_flip)
    flips = rng.random(len(flags)) < z
    flags = np.where(flips, 1.0 - flags, flags)

    target_part = best_match_gt(shape, inside_idx)
    targets = (gt[sample] == target_part).astype(np.uint8)
    gate1, gate2 = retention_gates(flags, targets)
    if gate1 < RETENTION_GATE or gate2 < RETENTION_GATE:
        return None

    pos, _ = normalize_unit_sphere(shape.positions[sample])
    features = np.concatenate(
        [pos, shape.normals[sample], flags[:, None]], axis=1
    ).astype(np.float32)
    return FixExample(features=features, targets=targets, shape_id=shape.id, gt_part=part)


# ---------------------------------------------------------------------------
# Merge examples


def _synthetic_merge_decomposition(
    shape: Shape, rng: np.random.Generator
) -> RegionDecomposition:
    """FPS regions, each gt instance inside split into Voronoi sub-parts and
    regrouped at random (default group / region-wide group / per-instance group)."""
    gt = shape.gt_labels
    m = int(rng.choice(FPS_REGION_CHOICES))
    base = fps_cluster(shape, m, int(rng.integers(2**31)))
    labels = np.full(shape.n, -1, dtype=np.int64)
    group_ids: dict[tuple, int] = {}

    def gid(key: tuple) -> int:
        return group_ids.setdefault(key, len(group_ids))

    for rid in base.region_ids():
        ridx = base.points_of(int(rid))
        for g in np.unique(gt[ridx]):
            pts = ridx[gt[ridx] == g]
            k = min(draw_subpart_count(rng), len(pts))
            seed_sel = rng.choice(len(pts), size=k, replace=False)
            d2 = (
                (shape.positions[pts][:, None, :] - shape.positions[pts[seed_sel]][None, :, :])
                ** 2
            ).sum(axis=2)
            sub = np.argmin(d2, axis=1)
            sub[seed_sel] = np.arange(k)  # coincident seeds keep their own sub-part
            for s in range(k):
                u = int(rng.integers(3))
                if u == 0:
                    key: tuple = ("default", int(rid))
                elif u == 1:
                    key = ("region", int(rid), int(rng.integers(k)))
                else:
                    key = ("instance", int(rid), int(g), int(rng.integers(k)))
                labels[pts[sub == s]] = gid(key)
    return RegionDecomposition(shape_id=shape.id, labels=labels, next_id=len(group_ids))


def gen_merge_examples(
    shape: Shape,
    rng: np.random.Generator,
    adjacency_threshold: float = DEFAULT_ADJACENCY_THRESHOLD,
    outside_radius: float = 0.1,
    capture: list | None = None,
) -> list[MergeExample]:
    """Sample unvisited neighbor pairs of a randomized decomposition until
    none remain, labeling each by best-match agreement and executing merges
    at the 75%/25% rates.

    `capture`, when given, receives one (members_a, members_b) snapshot per
    emitted example so labels can be recounted independently.
    """
    if shape.gt_labels is None:
        raise ValueError("merge example generation requires ground truth")
    decomp = _synthetic_merge_decomposition(shape, rng)
    point_pairs = shape.tree().query_pairs(adjacency_threshold, output_type="ndarray")
    visited: set[tuple[int, int]] = set()
    examples: list[MergeExample] = []
    while True:
        pairs = sorted(region_pairs_from_point_pairs(decomp.labels, point_pairs) - visited)
        if not pairs:
            break
        a, b = pairs[int(rng.integers(len(pairs)))]
        visited.add((a, b))
        idx_a = decomp.points_of(a)
        idx_b = decomp.points_of(b)
        ga = best_match_gt(shape, idx_a)
        gb = best_match_gt(shape, idx_b)
        label = ga == gb
        request = build_merge_request(shape, idx_a, idx_b, a, b, outside_radius, rng)
        examples.append(
            MergeExample(
                features=request.features(),
                target=int(label),
                shape_id=shape.id,
                regions=(a, b),
                gt_matches=(ga, gb),
            )
        )
        if capture is not None:
            capture.append((idx_a.copy(), idx_b.copy()))
        if should_execute_merge(label, rng):
            decomp.labels[(decomp.labels == a) | (decomp.labels == b)] = decomp.allocate_id()
    return examples


# ---------------------------------------------------------------------------
# Shard serialization: length-prefixed binary records + JSON manifest


def encode_example(features: np.ndarray, labels: np.ndarray | int) -> bytes:
    payload = np.ascontiguousarray(features, dtype="<f4").tobytes()
    payload += np.ascontiguousarray(np.atleast_1d(labels), dtype=np.uint8).tobytes()
    return struct.pack("<I", len(payload)) + payload


def decode_example(kind: str, payload: bytes) -> tuple[np.ndarray, np.ndarray]:
    feat_shape, label_shape = FEATURE_SHAPES[kind]
    n_feat = int(np.prod(feat_shape)) * 4
    n_label = int(np.prod(label_shape)) if label_shape else 1
    if len(payload) != n_feat + n_label:
        raise ValueError(f"bad {kind} record: {len(payload)} bytes")
    features = np.frombuffer(payload[:n_feat], dtype="<f4").reshape(feat_shape)
    labels = np.frombuffer(payload[n_feat:], dtype=np.uint8)
    return features, labels.reshape(label_shape) if label_shape else labels


def iter_record_payloads(blob: bytes):
    offset = 0
    while offset < len(blob):
        (length,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        yield blob[offset : offset + length]
        offset += length


def example_to_record(kind: str, example) -> bytes:
    if kind == KIND_MERGE:
        return encode_example(example.features, example.target)
    return encode_example(example.features, example.targets)


def write_shards(
    records: list[bytes],
    out_dir: str | Path,
    kind: str,
    seeds: list[int],
    config: dict | None = None,
    shard_size: int = SHARD_SIZE,
) -> dict:
    """Write length-prefixed records into numbered shard files plus a manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    shards = []
    for i in range(0, max(len(records), 1), shard_size):
        chunk = records[i : i + shard_size]
        name = f"{kind}-{i // shard_size:05d}.bin"
        with open(out_dir / name, "wb") as fh:
            for rec in chunk:
                fh.write(rec)
        shards.append({"file": name, "count": len(chunk)})
    manifest = {
        "version": SHARD_FORMAT_VERSION,
        "kind": kind,
        "total": len(records),
        "shards": shards,
        "seeds": seeds,
        "config": config or {},
        "feature_shape": list(FEATURE_SHAPES[kind][0]),
        "label_shape": list(FEATURE_SHAPES[kind][1]),
    }
    with open(out_dir / f"{kind}-manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def read_shard(path: str | Path, kind: str) -> list[tuple[np.ndarray, np.ndarray]]:
    blob = Path(path).read_bytes()
    return [decode_example(kind, payload) for payload in iter_record_payloads(blob)]
