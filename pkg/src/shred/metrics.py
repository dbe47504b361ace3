"""Region purity, AIoU, evaluation reports, and the threshold sweep harness."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import RegionDecomposition, Shape


@dataclass
class EvalReport:
    shape_id: str
    region_count: int
    purity: float
    aiou: float
    per_gt_part: list[tuple[int, float, float]]  # (gt_id, best_iou, purity_fraction)

    def to_json(self) -> dict:
        return {
            "shape": self.shape_id,
            "regions": self.region_count,
            "purity": self.purity,
            "aiou": self.aiou,
            "per_gt_part": [
                {"gt": g, "best_iou": i, "purity_fraction": f} for g, i, f in self.per_gt_part
            ],
        }


def _contingency(pred_labels: np.ndarray, gt_labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Counts[r, g] of points in predicted region r and gt part g; returns (counts, region ids)."""
    pred_labels = np.asarray(pred_labels, dtype=np.int64)
    gt_labels = np.asarray(gt_labels, dtype=np.int64)
    if pred_labels.shape != gt_labels.shape:
        raise ValueError("decompositions must partition the same point set")
    region_ids, pred_dense = np.unique(pred_labels, return_inverse=True)
    n_gt = int(gt_labels.max()) + 1
    counts = np.zeros((len(region_ids), n_gt), dtype=np.int64)
    np.add.at(counts, (pred_dense, gt_labels), 1)
    return counts, region_ids

def _iou_matrix(counts: np.ndarray) -> np.ndarray:
    region_sizes = counts.sum(axis=1, keepdims=True)
    gt_sizes = counts.sum(axis=0, keepdims=True)
    union = region_sizes + gt_sizes - counts
    return counts / union


def _purity_fractions(counts: np.ndarray, iou: np.ndarray) -> np.ndarray:
    """Per-gt-part fraction retained after relabeling each region to its best-IoU part."""
    best_gt = np.argmax(iou, axis=1)  # first max: lower gt id wins ties
    picked = counts[np.arange(counts.shape[0]), best_gt]
    relabeled = np.zeros(counts.shape[1], dtype=np.int64)
    np.add.at(relabeled, best_gt, picked)
    return relabeled / counts.sum(axis=0)


def region_purity(pred_labels: np.ndarray, gt_labels: np.ndarray) -> float:
    """Mean, over gt parts, of the fraction of their points relabeled back to them.

    Each predicted region is relabeled to its max-IoU gt part (ties toward
    the lower gt id); the score is granularity-independent, so pure
    over-segmentations still reach 1.0.
    """
    counts, _ = _contingency(pred_labels, gt_labels)
    return float(np.mean(_purity_fractions(counts, _iou_matrix(counts))))


def aiou(pred_labels: np.ndarray, gt_labels: np.ndarray) -> float:
    """Mean over gt parts of the best IoU any predicted region achieves on them."""
    counts, _ = _contingency(pred_labels, gt_labels)
    return float(np.mean(_iou_matrix(counts).max(axis=0)))


def evaluate(shape: Shape, decomp: RegionDecomposition) -> EvalReport:
    if shape.gt_labels is None:
        raise ValueError(f"shape {shape.id!r} has no ground-truth labels")
    counts, _ = _contingency(decomp.labels, shape.gt_labels)
    iou = _iou_matrix(counts)
    fractions = _purity_fractions(counts, iou)
    best_iou = iou.max(axis=0)
    per_part = [(g, float(best_iou[g]), float(fractions[g])) for g in range(counts.shape[1])]
    return EvalReport(
        shape_id=shape.id,
        region_count=counts.shape[0],
        purity=float(np.mean(fractions)),
        aiou=float(np.mean(best_iou)),
        per_gt_part=per_part,
    )


@dataclass
class SweepRow:
    threshold: float
    regions: int
    purity: float


def sweep_thresholds(shape, operators, config, thresholds) -> list[SweepRow]:
    """Run the pre-merge stages once, then the merge stage per threshold.

    Thresholds only gate the merge stage, so the fix-stage output is shared.
    Requires ground truth (rows carry purity) and stateless merge operators
    (a replay cursor cannot be shared across the per-threshold runs).
    """
    from . import pipeline as pl
    from .operators import RecordingOperator, ReplayOperator

    if shape.gt_labels is None:
        raise ValueError(f"shape {shape.id!r} has no ground-truth labels")
    if isinstance(operators.merge, (ReplayOperator, RecordingOperator)):
        raise ValueError("sweep requires a stateless merge operator")
    base = pl.run_pre_merge(shape, operators, config)
    rows = []
    for t in thresholds:
        cfg = replace(config, merge_threshold=float(t))
        merged = (
            pl.run_merge_stage(shape, base, operators.merge, cfg)
            if config.enable_merge
            else base
        )
        rows.append(
            SweepRow(
                threshold=float(t),
                regions=merged.region_count,
                purity=region_purity(merged.labels, shape.gt_labels),
            )
        )
    return rows


def default_sweep_grid() -> list[float]:
    """0.01 through 0.99 in steps of 0.01."""
    return [round(0.01 * i, 2) for i in range(1, 100)]
