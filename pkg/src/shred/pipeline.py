"""Pipeline orchestration: FPS initialization, then split, fix, and merge stages.

Each stage consumes a RegionDecomposition and an operator and produces a new
decomposition; the partition property is re-checked after every stage. Stage
randomness derives from (config.seed, stage, region id) so runs are
reproducible and replay streams stay aligned.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import metrics
from .core import RegionDecomposition, Shape
from .decomp import (
    DEFAULT_ADJACENCY_THRESHOLD,
    fps_cluster,
    region_pairs_from_point_pairs,
)
from .operators import (
    OperatorSuite,
    build_fix_request,
    build_merge_request,
    build_split_request,
)

DECOMP_FORMAT_VERSION = 1

_SPLIT_STREAM = 1
_FIX_STREAM = 2
_MERGE_STREAM = 3


@dataclass
class PipelineConfig:
    fps_k: int = 64
    fix_radius: float = 0.1
    merge_outside_radius: float = 0.1
    merge_threshold: float = 0.5
    adjacency_threshold: float = DEFAULT_ADJACENCY_THRESHOLD
    seed: int = 0
    enable_split: bool = True
    enable_fix: bool = True
    enable_merge: bool = True

    def __post_init__(self) -> None:
        if not (0.0 <= self.merge_threshold <= 1.0):
            raise ValueError("merge_threshold must lie in [0, 1]")
        if self.fps_k < 1:
            raise ValueError("fps_k must be >= 1")
        if self.adjacency_threshold < 0 or self.fix_radius < 0 or self.merge_outside_radius < 0:
            raise ValueError("radii must be >= 0")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class StageRecord:
    stage: str
    regions: int
    purity: float | None = None

    def to_json(self) -> dict:
        rec: dict = {"stage": self.stage, "regions": self.regions}
        if self.purity is not None:
            rec["purity"] = self.purity
        return rec


class StageError(RuntimeError):
    """Operator failure, annotated with the stage and region context."""


def _stage_rng(seed: int, stream: int, *ids: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, *ids])


def run_split_stage(
    shape: Shape, decomp: RegionDecomposition, split_operator, config: PipelineConfig
) -> RegionDecomposition:
    """Split every region independently into one fresh region per predicted slot.

    Slot labels from the 512-point sample propagate to the rest of the
    region through the nearest labeled sample point.
    """
    from scipy.spatial import cKDTree

    new_labels = np.empty(shape.n, dtype=np.int64)
    next_id = 0
    for rid in decomp.region_ids():
        idx = decomp.points_of(int(rid))
        rng = _stage_rng(config.seed, _SPLIT_STREAM, int(rid))
        request = build_split_request(shape, idx, int(rid), rng)
        try:
            response = split_operator(request)
        except Exception as exc:
            raise StageError(f"split operator failed on region {int(rid)}: {exc}") from exc
        sample_tree = cKDTree(shape.positions[request.point_indices])
        _, nearest = sample_tree.query(shape.positions[idx], k=1)
        slots = response.labels[nearest]
        present = np.unique(slots)
        remap = {int(s): next_id + i for i, s in enumerate(present)}
        new_labels[idx] = [remap[int(s)] for s in slots]
        next_id += len(present)
    out = RegionDecomposition(shape_id=shape.id, labels=new_labels, next_id=next_id)
    out.check_partition(shape)
    return out


def run_fix_stage(
    shape: Shape, decomp: RegionDecomposition, fix_operator, config: PipelineConfig
) -> RegionDecomposition:
    """Re-assign points by the argmax of accumulated per-region inside scores.

    Every region queries its own points plus outside points within its
    extended radius; each point keeps the max probability any request gave
    it per region and moves to the argmax region. Ties keep the prior region
    when it participates, otherwise the lowest region id wins; points no
    request scored stay put.
    """
    ids = decomp.region_ids()
    col_of = {int(r): c for c, r in enumerate(ids)}
    scores = np.full((shape.n, len(ids)), -1.0, dtype=np.float64)
    for rid in ids:
        idx = decomp.points_of(int(rid))
        rng = _stage_rng(config.seed, _FIX_STREAM, int(rid))
        request = build_fix_request(shape, idx, int(rid), config.fix_radius, rng)
        try:
            response = fix_operator(request)
        except Exception as exc:
            raise StageError(f"fix operator failed on region {int(rid)}: {exc}") from exc
        np.maximum.at(scores[:, col_of[int(rid)]], request.point_indices, response.probs)

    prior_col = np.searchsorted(ids, decomp.labels)
    best = scores.max(axis=1)
    rows = np.arange(shape.n)
    keep = (best < 0.0) | (scores[rows, prior_col] == best)
    first_best = np.argmax(scores == best[:, None], axis=1)  # lowest region id among ties
    new_labels = np.where(keep, decomp.labels, ids[first_best])
    out = RegionDecomposition(shape_id=shape.id, labels=new_labels, next_id=decomp.next_id)
    out.check_partition(shape)
    return out


def run_merge_stage(
    shape: Shape, decomp: RegionDecomposition, merge_operator, config: PipelineConfig
) -> RegionDecomposition:
    """Iteratively merge neighboring regions the operator scores above threshold.

    Per round: find neighbor pairs, score the ones not already declined for
    this exact pair of ids, then sweep in descending-probability order
    (ties lexicographic), merging a pair only when neither endpoint merged
    this round. Merged regions take fresh ids; rounds repeat until one ends
    with no merges.
    """
    labels = decomp.labels.copy()
    next_id = decomp.next_id
    point_pairs = shape.tree().query_pairs(config.adjacency_threshold, output_type="ndarray")
    declined: dict[tuple[int, int], float] = {}
    idx_cache: dict[int, np.ndarray] = {}  # region membership is immutable per id

    def members(rid: int) -> np.ndarray:
        idx = idx_cache.get(rid)
        if idx is None:
            idx = np.flatnonzero(labels == rid)
            idx_cache[rid] = idx
        return idx

    while True:
        pairs = sorted(region_pairs_from_point_pairs(labels, point_pairs))
        scores: dict[tuple[int, int], float] = {}
        for a, b in pairs:  # ascending order keeps replay streams aligned
            if (a, b) in declined:
                scores[(a, b)] = declined[(a, b)]
                continue
            rng = _stage_rng(config.seed, _MERGE_STREAM, a, b)
            request = build_merge_request(
                shape,
                members(a),
                members(b),
                a,
                b,
                config.merge_outside_radius,
                rng,
            )
            try:
                scores[(a, b)] = merge_operator(request).prob
            except Exception as exc:
                raise StageError(f"merge operator failed on pair ({a}, {b}): {exc}") from exc

        order = sorted(pairs, key=lambda p: (-scores[p], p))
        merged_this_round: set[int] = set()
        merges = 0
        for a, b in order:
            prob = scores[(a, b)]
            if prob <= config.merge_threshold:
                declined[(a, b)] = prob
                continue
            if a in merged_this_round or b in merged_this_round:
                continue
            union = np.concatenate([members(a), members(b)])
            union.sort()
            labels[union] = next_id
            idx_cache[next_id] = union
            next_id += 1
            merged_this_round.update((a, b))
            merges += 1
        if merges == 0:
            break

    out = RegionDecomposition(shape_id=shape.id, labels=labels, next_id=next_id)
    out.check_partition(shape)
    return out


def _trace_entry(shape: Shape, decomp: RegionDecomposition, stage: str) -> StageRecord:
    purity = None
    if shape.gt_labels is not None:
        purity = metrics.region_purity(decomp.labels, shape.gt_labels)
    return StageRecord(stage=stage, regions=decomp.region_count, purity=purity)


def run_pre_merge(
    shape: Shape, operators: OperatorSuite, config: PipelineConfig
) -> RegionDecomposition:
    """FPS plus the enabled split and fix stages (shared by pipeline and sweep)."""
    decomp = fps_cluster(shape, config.fps_k, config.seed)
    if config.enable_split:
        if operators.split is None:
            raise ValueError("split stage enabled but no split operator provided")
        decomp = run_split_stage(shape, decomp, operators.split, config)
    if config.enable_fix:
        if operators.fix is None:
            raise ValueError("fix stage enabled but no fix operator provided")
        decomp = run_fix_stage(shape, decomp, operators.fix, config)
    return decomp


def run_pipeline(
    shape: Shape, operators: OperatorSuite, config: PipelineConfig
) -> tuple[RegionDecomposition, list[StageRecord]]:
    """FPS then the enabled stages in split, fix, merge order, with a stage trace."""
    trace: list[StageRecord] = []
    decomp = fps_cluster(shape, config.fps_k, config.seed)
    trace.append(_trace_entry(shape, decomp, "fps"))
    if config.enable_split:
        if operators.split is None:
            raise ValueError("split stage enabled but no split operator provided")
        decomp = run_split_stage(shape, decomp, operators.split, config)
        trace.append(_trace_entry(shape, decomp, "split"))
    if config.enable_fix:
        if operators.fix is None:
            raise ValueError("fix stage enabled but no fix operator provided")
        decomp = run_fix_stage(shape, decomp, operators.fix, config)
        trace.append(_trace_entry(shape, decomp, "fix"))
    if config.enable_merge:
        if operators.merge is None:
            raise ValueError("merge stage enabled but no merge operator provided")
        decomp = run_merge_stage(shape, decomp, operators.merge, config)
        trace.append(_trace_entry(shape, decomp, "merge"))
    return decomp, trace


def decomposition_json(
    shape: Shape,
    decomp: RegionDecomposition,
    trace: list[StageRecord],
    config: PipelineConfig,
) -> dict:
    return {
        "version": DECOMP_FORMAT_VERSION,
        "shape": shape.id,
        "n": shape.n,
        "labels": [int(v) for v in decomp.labels],
        "trace": [rec.to_json() for rec in trace],
        "config": config.to_json(),
    }
