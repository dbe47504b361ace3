from __future__ import annotations

import numpy as np
import pytest

from shred.decomp import fps_cluster
from shred.synthgen import (
    FEATURE_SHAPES,
    decode_example,
    draw_subpart_count,
    encode_example,
    example_to_record,
    gen_fix_example,
    gen_merge_examples,
    gen_split_examples,
    iter_record_payloads,
    read_shard,
    retention_gates,
    should_execute_merge,
    split_targets,
    write_shards,
)

from conftest import make_shape, two_part_shape


def example_bytes(example) -> bytes:
    return example.features.tobytes() + np.atleast_1d(example.targets).tobytes()


class TestDrawSubpartCount:
    def test_range(self, rng):
        draws = [draw_subpart_count(rng) for _ in range(500)]
        assert min(draws) >= 1 and max(draws) <= 10

    def test_halving_trend(self, rng):
        draws = np.array([draw_subpart_count(rng) for _ in range(4000)])
        c1 = (draws == 1).sum()
        c2 = (draws == 2).sum()
        c3 = (draws == 3).sum()
        assert c1 > c2 > c3  # geometric decay


class TestShouldExecuteMerge:
    def test_rates(self):
        rng = np.random.default_rng(0)
        true_rate = np.mean([should_execute_merge(True, rng) for _ in range(4000)])
        false_rate = np.mean([should_execute_merge(False, rng) for _ in range(4000)])
        assert abs(true_rate - 0.75) < 0.03
        assert abs(false_rate - 0.25) < 0.03


class TestGenSplitExamples:
    def test_one_example_per_region(self, labeled_shape):
        examples = gen_split_examples(labeled_shape, fps_k=16, seed=0)
        assert len(examples) == fps_cluster(labeled_shape, 16, 0).region_count

    def test_single_part_all_zero_targets(self):
        shape = two_part_shape(gap=0.0)
        # restrict to a one-part shape
        part0 = np.flatnonzero(shape.gt_labels == 0)
        solo = make_shape(shape.positions[part0], gt=np.zeros(len(part0), dtype=int))
        for ex in gen_split_examples(solo, fps_k=4, seed=1):
            assert set(ex.targets.tolist()) == {0}

    def test_fps_k1_single_example(self, labeled_shape):
        examples = gen_split_examples(labeled_shape, fps_k=1, seed=2)
        assert len(examples) == 1

    def test_targets_dense_from_zero(self, labeled_shape):
        for ex in gen_split_examples(labeled_shape, fps_k=8, seed=3):
            slots = np.unique(ex.targets)
            np.testing.assert_array_equal(slots, np.arange(len(slots)))

    def test_slot_multiset_matches_gt_restriction(self, labeled_shape):
        # every example's slot histogram equals the gt histogram of its sample
        decomp = fps_cluster(labeled_shape, 8, seed=4)
        from shred.operators import build_split_request

        for ex in gen_split_examples(labeled_shape, fps_k=8, seed=4):
            idx = decomp.points_of(ex.region_id)
            rng = np.random.default_rng([4, 1, ex.region_id])
            request = build_split_request(labeled_shape, idx, ex.region_id, rng)
            gt = labeled_shape.gt_labels[request.point_indices]
            _, gt_counts = np.unique(gt, return_counts=True)
            _, slot_counts = np.unique(ex.targets, return_counts=True)
            np.testing.assert_array_equal(np.sort(gt_counts), np.sort(slot_counts))

    def test_feature_shape(self, labeled_shape):
        ex = gen_split_examples(labeled_shape, fps_k=4, seed=5)[0]
        assert ex.features.shape == (512, 6)
        assert ex.features.dtype == np.float32


class TestRetentionGates:
    def test_exact_counts(self):
        flags = np.array([1] * 100 + [0] * 100)
        targets = np.array([1] * 39 + [0] * 61 + [1] * 10 + [0] * 90)
        g1, g2 = retention_gates(flags, targets)
        assert g1 == pytest.approx(0.39)
        assert g2 == pytest.approx(39 / 49)

    def test_boundary_is_strictly_below(self):
        # 40% exactly passes; the generator rejects only below 40%
        flags = np.array([1] * 10 + [0] * 10)
        targets = np.array([1] * 4 + [0] * 6 + [1] * 0 + [0] * 10)
        g1, _ = retention_gates(flags, targets)
        assert g1 == pytest.approx(0.40)

    def test_degenerate_zero_counts(self):
        g1, g2 = retention_gates(np.zeros(10), np.zeros(10))
        assert g1 == 0.0 and g2 == 0.0


class TestGenFixExample:
    def test_uncorrupted_targets_equal_flags(self, labeled_shape):
        rng = np.random.default_rng(0)
        ex = gen_fix_example(
            labeled_shape, rng, grow_prob=0.0, remove_prob=0.0, max_flag_flip=0.0,
            surplus_flip_prob=0.0,
        )
        assert ex is not None
        flags = ex.features[:, 6]
        np.testing.assert_array_equal(flags.astype(np.uint8), ex.targets)

    def test_deterministic_bytes(self, labeled_shape):
        a = gen_fix_example(labeled_shape, np.random.default_rng(11))
        b = gen_fix_example(labeled_shape, np.random.default_rng(11))
        assert (a is None) == (b is None)
        if a is not None:
            assert example_bytes(a) == example_bytes(b)

    def test_sampled_halves(self, labeled_shape):
        ex = gen_fix_example(
            labeled_shape, np.random.default_rng(2), max_flag_flip=0.0
        )
        assert ex is not None
        assert ex.features.shape == (4096, 7)
        # without flips the flag feature marks the sampled halves exactly
        assert ex.features[:2048, 6].sum() == 2048
        assert ex.features[2048:, 6].sum() == 0

    def test_accepted_examples_pass_gates(self, labeled_shape):
        rng = np.random.default_rng(3)
        accepted = 0
        for _ in range(24):
            ex = gen_fix_example(labeled_shape, rng)
            if ex is None:
                continue
            accepted += 1
            g1, g2 = retention_gates(ex.features[:, 6], ex.targets)
            assert g1 >= 0.40 and g2 >= 0.40
        assert accepted > 0


class TestGenMergeExamples:
    def test_single_part_all_labels_true(self):
        shape = two_part_shape(gap=0.0)
        part0 = np.flatnonzero(shape.gt_labels == 0)
        solo = make_shape(
            shape.positions[part0], gt=np.zeros(len(part0), dtype=int), shape_id="solo"
        )
        examples = gen_merge_examples(solo, np.random.default_rng(0), adjacency_threshold=0.02)
        assert len(examples) > 0
        assert all(ex.target == 1 for ex in examples)

    def test_separated_parts_only_intra_neighbors(self):
        shape = two_part_shape(gap=0.5, shape_id="farpair")
        examples = gen_merge_examples(shape, np.random.default_rng(1), adjacency_threshold=0.02)
        assert len(examples) > 0
        assert all(ex.target == 1 for ex in examples)

    def test_labels_match_recount_oracle(self, labeled_shape):
        capture: list = []
        examples = gen_merge_examples(
            labeled_shape, np.random.default_rng(2), capture=capture
        )
        assert len(examples) == len(capture)
        gt = labeled_shape.gt_labels
        n_parts = labeled_shape.n_gt_parts
        for ex, (idx_a, idx_b) in zip(examples, capture):
            counts_a = [0] * n_parts
            for i in idx_a:
                counts_a[gt[i]] += 1
            counts_b = [0] * n_parts
            for i in idx_b:
                counts_b[gt[i]] += 1
            best_a = counts_a.index(max(counts_a))
            best_b = counts_b.index(max(counts_b))
            assert ex.target == int(best_a == best_b)
            assert ex.gt_matches == (best_a, best_b)

    def test_deterministic(self, labeled_shape):
        a = gen_merge_examples(labeled_shape, np.random.default_rng(5))
        b = gen_merge_examples(labeled_shape, np.random.default_rng(5))
        assert len(a) == len(b)
        for ea, eb in zip(a, b):
            assert ea.target == eb.target
            assert ea.features.tobytes() == eb.features.tobytes()

    def test_feature_shape(self, labeled_shape):
        ex = gen_merge_examples(labeled_shape, np.random.default_rng(6))[0]
        assert ex.features.shape == (2048, 8)


class TestSplitTargets:
    def _fixture(self):
        n0, n1 = 40, 12
        labels = [0] * n0 + [1] * n1
        k = 4
        target = np.zeros((n0 + n1, k))
        target[np.arange(n0 + n1), labels] = 1.0
        pred = np.full((n0 + n1, k), -6.0)
        pred[:22, 0] = 6.0
        pred[22:n0, 2] = 6.0  # confident unused-slot split of part 0
        pred[n0:, 1] = 6.0
        return pred, target

    def test_overseg_adds_slots(self):
        pred, target = self._fixture()
        with_os = split_targets(target, pred, overseg=True)
        without = split_targets(target, pred, overseg=False)
        assert len(np.unique(with_os)) > len(np.unique(without))

    def test_without_overseg_is_argmax(self):
        pred, target = self._fixture()
        np.testing.assert_array_equal(
            split_targets(target, pred, overseg=False), np.argmax(target, axis=1)
        )


class TestShardIO:
    def test_encode_decode_round_trip(self, labeled_shape):
        ex = gen_split_examples(labeled_shape, fps_k=4, seed=7)[0]
        record = example_to_record("split", ex)
        payloads = list(iter_record_payloads(record))
        assert len(payloads) == 1
        features, labels = decode_example("split", payloads[0])
        np.testing.assert_array_equal(features, ex.features)
        np.testing.assert_array_equal(labels, ex.targets)

    def test_merge_record_scalar_label(self, labeled_shape):
        ex = gen_merge_examples(labeled_shape, np.random.default_rng(8))[0]
        record = example_to_record("merge", ex)
        features, labels = decode_example("merge", next(iter_record_payloads(record)))
        assert labels[0] == ex.target

    def test_write_shards_manifest(self, tmp_path, labeled_shape):
        examples = gen_split_examples(labeled_shape, fps_k=8, seed=9)
        records = [example_to_record("split", ex) for ex in examples]
        manifest = write_shards(records, tmp_path, "split", seeds=[9], shard_size=3)
        assert manifest["total"] == len(records)
        assert sum(s["count"] for s in manifest["shards"]) == len(records)
        assert manifest["feature_shape"] == list(FEATURE_SHAPES["split"][0])
        loaded = []
        for shard in manifest["shards"]:
            loaded.extend(read_shard(tmp_path / shard["file"], "split"))
        assert len(loaded) == len(records)
        np.testing.assert_array_equal(loaded[0][0], examples[0].features)

    def test_bad_record_length(self):
        with pytest.raises(ValueError, match="bad split record"):
            decode_example("split", b"\x00" * 10)
