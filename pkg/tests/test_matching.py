from __future__ import annotations

import itertools

import numpy as np
import pytest

from shred.matching import cross_entropy_cost, hungarian_assign, overseg_match


def log_softmax_reference(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def brute_force_min_cost(pred, target) -> float:
    """Exhaustive permutation oracle for the assignment cost."""
    k = pred.shape[1]
    ls = log_softmax_reference(pred)
    best = np.inf
    for perm in itertools.permutations(range(k)):
        cost = 0.0
        for t, p in enumerate(perm):
            cost += -(target[:, t] * ls[:, p]).sum()
        best = min(best, cost)
    return best


def assignment_cost(pred, target, assignment) -> float:
    ls = log_softmax_reference(pred)
    cost = 0.0
    for p in range(pred.shape[1]):
        t = assignment.get(p)
        if t is not None:
            cost += -(target[:, t] * ls[:, p]).sum()
    return cost


def one_hot(labels, k):
    out = np.zeros((len(labels), k))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def random_instance(rng, n, k):
    pred = rng.normal(size=(n, k)) * 2.0
    target = one_hot(rng.integers(0, k, size=n), k)
    return pred, target


class TestHungarianAssign:
    def test_k1_identity(self):
        pred = np.array([[0.3], [0.9]])
        target = one_hot([0, 0], 1)
        assert hungarian_assign(pred, target) == {0: 0}

    def test_matches_permutation_minimum(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            k = int(rng.integers(2, 7))
            pred, target = random_instance(rng, int(rng.integers(4, 30)), k)
            assignment = hungarian_assign(pred, target)
            # complete the partial assignment over empty targets for cost parity
            full_cost_possible = brute_force_min_cost(pred, target)
            got = assignment_cost(pred, target, assignment)
            assert got == pytest.approx(full_cost_possible, abs=1e-9)

    def test_argmax_consistent_prediction_is_identity(self):
        labels = [0, 1, 2, 0, 1, 2]
        target = one_hot(labels, 3)
        pred = 10.0 * target  # confident, aligned logits
        assert hungarian_assign(pred, target) == {0: 0, 1: 1, 2: 2}

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            hungarian_assign(np.zeros((4, 3)), one_hot([0, 1, 0], 2))

    def test_too_many_slots(self):
        with pytest.raises(ValueError, match="at most 10"):
            hungarian_assign(np.zeros((4, 11)), one_hot([0] * 4, 11))

    def test_non_one_hot_target(self):
        bad = np.zeros((3, 2))
        with pytest.raises(ValueError, match="one-hot"):
            hungarian_assign(np.zeros((3, 2)), bad)

    def test_empty_targets_excluded_from_assignment(self):
        target = one_hot([0, 0, 1, 1], 4)  # slots 2 and 3 empty
        pred = np.zeros((4, 4))
        assignment = hungarian_assign(pred, target)
        assert set(assignment.values()) == {0, 1}


def overseg_fixture(part_sizes, split_at, k=4, margin=6.0):
    """Target holds one part (slot 0) of `sum(part_sizes)` points plus filler
    parts; the prediction confidently splits part 0 at `split_at` between its
    assigned slot and an unused slot."""
    n0 = sum(part_sizes)
    labels = [0] * n0 + [1] * 12
    target = one_hot(labels, k)
    pred = np.full((len(labels), k), -margin)
    # slot 0 stays argmax for the first chunk, unused slot 2 for the rest
    for i in range(len(labels)):
        if i < split_at:
            pred[i, 0] = margin
        elif i < n0:
            pred[i, 2] = margin
        else:
            pred[i, 1] = margin
    return pred, target


class TestOversegMatch:
    def test_no_unused_slots_equals_hungarian(self):
        rng = np.random.default_rng(1)
        pred, target = random_instance(rng, 40, 3)
        # make every slot used
        target = one_hot([0, 1, 2] * 13 + [0], 3)
        result = overseg_match(pred, target)
        assert result.assignment == hungarian_assign(pred, target)
        np.testing.assert_array_equal(result.modified_target, target)
        assert result.accepted_oversegs == []

    def test_confident_split_accepted(self):
        pred, target = overseg_fixture([22, 18], split_at=22)
        result = overseg_match(pred, target)
        assert len(result.accepted_oversegs) == 1
        p_a, u_p, a, u_t = result.accepted_oversegs[0]
        assert (a, u_p) == (0, 2)
        # modified target now holds parts of 22 and 18
        sizes = result.modified_target.sum(axis=0)
        assert sizes[a] == 22
        assert sizes[u_t] == 18
        assert result.assignment[u_p] == u_t

    def test_small_split_rejected_at_boundary(self):
        # 9/31: the nine-point half is <= 10 indices, rejected
        pred, target = overseg_fixture([9, 31], split_at=9)
        result = overseg_match(pred, target)
        assert result.accepted_oversegs == []
        np.testing.assert_array_equal(result.modified_target, target)

    def test_eleven_is_strictly_more_than_ten(self):
        pred, target = overseg_fixture([11, 11], split_at=11)
        result = overseg_match(pred, target)
        assert len(result.accepted_oversegs) == 1

    def test_exactly_ten_rejected(self):
        pred, target = overseg_fixture([10, 12], split_at=10)
        result = overseg_match(pred, target)
        assert result.accepted_oversegs == []

    def test_mode_fraction_gate(self):
        # unused slot argmax indices: 20 points, exactly half from part 0
        # and half from part 1 -> mode covers 50%, not more -> rejected
        k = 4
        labels = [0] * 30 + [1] * 30
        target = one_hot(labels, k)
        pred = np.full((60, k), -6.0)
        for i in range(18):
            pred[i, 0] = 6.0  # part 0 kept on slot 0
        for i in range(18, 30):
            pred[i, 2] = 6.0  # 12 part-0 points argmax unused slot 2
        for i in range(30, 42):
            pred[i, 2] = 6.0  # 12 part-1 points argmax unused slot 2 (tie)
        for i in range(42, 60):
            pred[i, 1] = 6.0
        result = overseg_match(pred, target)
        assert result.accepted_oversegs == []

    def test_mode_fraction_just_above_half_accepts(self):
        k = 4
        labels = [0] * 40 + [1] * 40
        target = one_hot(labels, k)
        pred = np.full((80, k), -6.0)
        for i in range(20):
            pred[i, 0] = 6.0
        for i in range(20, 40):
            pred[i, 2] = 6.0  # 20 part-0 points to unused slot
        for i in range(40, 59):
            pred[i, 2] = 6.0  # 19 part-1 points to unused slot: 20/39 > 50%
        for i in range(59, 80):
            pred[i, 1] = 6.0
        result = overseg_match(pred, target)
        assert len(result.accepted_oversegs) == 1
        # both halves exceed ten: splits 20/20 on part 0
        sizes = result.modified_target.sum(axis=0)
        assert sizes[0] == 20

    def test_modified_parts_subsets_of_originals(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            pred, target = random_instance(rng, 60, 5)
            result = overseg_match(pred, target)
            original_of = np.argmax(target, axis=1)
            modified_of = np.argmax(result.modified_target, axis=1)
            # points in the same modified part came from the same original part
            for slot in range(5):
                members = np.flatnonzero(modified_of == slot)
                if len(members):
                    assert len(set(original_of[members].tolist())) == 1

    def test_accepted_rewrites_increase_part_count(self):
        pred, target = overseg_fixture([22, 18], split_at=22)
        result = overseg_match(pred, target)
        before = (target.sum(axis=0) > 0).sum()
        after = (result.modified_target.sum(axis=0) > 0).sum()
        assert after == before + len(result.accepted_oversegs)

    def test_rows_stay_one_hot(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            pred, target = random_instance(rng, 50, 6)
            result = overseg_match(pred, target)
            assert np.all(result.modified_target.sum(axis=1) == 1.0)

    def test_unused_pred_without_argmax_indices_skipped(self):
        target = one_hot([0] * 30, 3)
        pred = np.full((30, 3), -5.0)
        pred[:, 0] = 5.0  # slots 1, 2 never argmax
        result = overseg_match(pred, target)
        assert result.accepted_oversegs == []
        np.testing.assert_array_equal(result.modified_target, target)


class TestCrossEntropyCost:
    def test_against_direct_loops(self):
        rng = np.random.default_rng(7)
        pred, target = random_instance(rng, 15, 4)
        cost = cross_entropy_cost(pred, target)
        ls = log_softmax_reference(pred)
        for i in range(4):
            for j in range(4):
                want = -(target[:, j] * ls[:, i]).sum()
                assert cost[i, j] == pytest.approx(want, abs=1e-12)
