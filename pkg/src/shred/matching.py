"""Slot assignment between predicted and target instance matrices.

The base step is a minimal-cross-entropy one-to-one assignment between
prediction columns (logits) and target columns (one-hot). On top of it,
`overseg_match` greedily rewrites the target to credit confident predictions
that split a single target part in two, so downstream training prefers
over-segmentation to under-segmentation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

MAX_SLOTS = 10
MIN_PART_INDICES = 10  # both halves must exceed this to accept a rewrite
MODE_FRACTION = 0.5  # the mode part must own more than this share of the argmax indices


@dataclass
class MatchResult:
    assignment: dict[int, int]  # prediction slot -> target slot, non-empty targets only
    modified_target: np.ndarray  # (N, K) one-hot, possibly rewritten
    accepted_oversegs: list[tuple[int, int, int, int]]  # (P_A, U_P, A, U_T)


def _validate(pred: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.ndim != 2 or target.ndim != 2:
        raise ValueError("prediction and target must be 2-d matrices")
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: prediction {pred.shape} vs target {target.shape}")
    if pred.shape[1] > MAX_SLOTS:
        raise ValueError(f"at most {MAX_SLOTS} slots supported")
    if not np.all(np.isin(target, (0.0, 1.0))):
        raise ValueError("target entries must be 0 or 1")
    if not np.all(target.sum(axis=1) == 1.0):
        raise ValueError("every target row must be one-hot")
    return pred, target


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy_cost(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """cost[i, j]: cross-entropy of prediction slot i against target slot j."""
    return -(_log_softmax(pred).T @ target)  # (K, K) with rows=pred, cols=target


def hungarian_assign(pred: np.ndarray, target: np.ndarray) -> dict[int, int]:
    """One-to-one slot map minimizing total cross-entropy, empty targets dropped."""
    pred, target = _validate(pred, target)
    cost = cross_entropy_cost(pred, target)
    rows, cols = linear_sum_assignment(cost)
    used = target.sum(axis=0) > 0
    return {int(p): int(t) for p, t in zip(rows, cols) if used[t]}


def overseg_match(pred: np.ndarray, target: np.ndarray) -> MatchResult:
    """Hungarian assignment plus greedy target rewrites that reward over-segmentation.

    For each unused prediction slot (paired with the lowest unused target
    slot still free), the target part its argmax points mostly land on is
    split between its assigned prediction and the unused one; the rewrite is
    kept only when both halves exceed MIN_PART_INDICES points and the mode
    part covers more than half of the unused slot's argmax indices.
    """
    pred, target = _validate(pred, target)
    k = pred.shape[1]
    assignment = hungarian_assign(pred, target)
    modified = target.copy()
    accepted: list[tuple[int, int, int, int]] = []

    argmax_pred = np.argmax(pred, axis=1)
    for u_p in range(k):
        if u_p in assignment:
            continue
        unused_targets = [t for t in range(k) if t not in assignment.values()]
        if not unused_targets:
            break
        u_t = unused_targets[0]
        idx = np.flatnonzero(argmax_pred == u_p)
        if len(idx) == 0:
            continue  # nothing points at this slot: no rewrite opportunity
        hot = np.argmax(modified[idx], axis=1)
        slots, counts = np.unique(hot, return_counts=True)
        a = int(slots[np.argmax(counts)])  # mode ties -> lower target slot
        mode_count = int(counts.max())
        p_a = next((p for p, t in assignment.items() if t == a), None)
        if p_a is None:
            continue
        t_a = np.flatnonzero(modified[:, a] == 1.0)
        goes_up = pred[t_a, u_p] > pred[t_a, p_a]  # argmax between the two slots
        t_up = t_a[goes_up]
        t_pa = t_a[~goes_up]
        if len(t_pa) <= MIN_PART_INDICES or len(t_up) <= MIN_PART_INDICES:
            continue
        if mode_count <= MODE_FRACTION * len(idx):
            continue
        modified[t_up, a] = 0.0
        modified[t_up, u_t] = 1.0
        assignment[u_p] = u_t
        accepted.append((int(p_a), int(u_p), a, int(u_t)))

    return MatchResult(assignment=assignment, modified_target=modified, accepted_oversegs=accepted)
