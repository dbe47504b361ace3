"""Trainer acceptance: B1 smoke and B2 distillation, one pass/fail line each.

Run with `pytest -v -s tests/test_acceptance.py`. B2 trains three networks
to convergence on recorded oracle responses and replays them through the
decomposition pipeline, so it takes a few minutes on one CPU.
"""

from __future__ import annotations

import json

import numpy as np
import pytest
import torch

from shred_trainer.data import (
    load_shards,
    read_request_log,
    read_score_file,
)
from shred_trainer.export import export_scores, score_requests
from shred_trainer.loop import replay_to_fixpoint
from shred_trainer.nets import build_net, default_spec
from shred_trainer.train import DEFAULTS, distill, train_split

from conftest import run_shred


def report(name: str, ok: bool, detail: str) -> None:
    print(f"\n[{name}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"{name}: {detail}"


def final_purities(run_dir) -> dict[str, float]:
    out = {}
    for path in sorted(run_dir.glob("*.json")):
        doc = json.loads(path.read_text())
        out[doc["shape"]] = doc["trace"][-1]["purity"]
    return out


class TestB1TrainerSmoke:
    def test_b1(self, workspace, tmp_path, service_url):
        # one-batch overfit: >90% split point accuracy within 200 steps
        features, labels = load_shards(workspace.shards, "split")
        batch_x, batch_y = features[:16], labels[:16]
        result = train_split(
            batch_x, batch_y, epochs=200, batch_size=16, seed=0,
            max_steps=200, target_accuracy=0.905,
        )
        accuracy = result.history[-1]["accuracy"]
        overfit_ok = accuracy > 0.9 and result.steps <= 200

        # optimizer defaults carry the reference learning rates and batch sizes
        lr_ok = (
            DEFAULTS["split"]["lr"] == 1e-3
            and DEFAULTS["fix"]["lr"] == 1e-4
            and DEFAULTS["merge"]["lr"] == 1e-4
            and [DEFAULTS[k]["batch_size"] for k in ("split", "fix", "merge")]
            == [64, 64, 128]
        )

        # exported score files validate against their request logs
        exports = {}
        validate_ok = True
        for kind in ("split", "fix", "merge"):
            entries = read_request_log(workspace.request_logs[kind])
            torch.manual_seed(0)
            spec = default_spec(kind)
            model = build_net(spec)
            path = tmp_path / f"{kind}-untrained.jsonl"
            count = export_scores(model, spec, entries, path)
            back = read_score_file(path)
            validate_ok = validate_ok and count == len(entries)
            validate_ok = validate_ok and [r.digest for r in back] == [
                e.digest for e in entries
            ]
            exports[kind] = (model, spec, path, back)

        # split and fix streams replay in strict sequence without underrun
        replay_ok = True
        for kind in ("split", "fix"):
            out = tmp_path / f"replay-{kind}"
            proc = run_shred(
                "decompose", str(workspace.shapes), *workspace.pipeline_flags(),
                "--replay", f"{kind}:{exports[kind][2]}", "--out", str(out),
            )
            replay_ok = replay_ok and proc.returncode == 0

        # the merge stream shapes its own request sequence, so it replays
        # through keyed lookup, iterating until no request lacks a score
        model, spec, _, back = exports["merge"]
        merge_ok = True
        for shape_path in workspace.shape_files():
            doc, _ = replay_to_fixpoint(
                service_url, shape_path.stem, shape_path.read_text(),
                workspace.config, "merge", model, spec, back,
            )
            merge_ok = merge_ok and not doc["missing"]

        ok = overfit_ok and lr_ok and validate_ok and replay_ok and merge_ok
        report(
            "B1",
            ok,
            f"one-batch overfit acc {accuracy:.3f} in {result.steps} steps<=200={overfit_ok}; "
            f"reference lr/batch defaults={lr_ok}; exports validate={validate_ok}; "
            f"split/fix strict replay={replay_ok}; merge keyed replay completes={merge_ok}",
        )


class TestB2Distillation:
    def test_b2(self, workspace, tmp_path, service_url):
        oracle_purity = final_purities(workspace.oracle_runs)
        assert len(oracle_purity) == 5

        logs = {k: read_request_log(workspace.request_logs[k]) for k in ("split", "fix", "merge")}
        scores = {k: read_score_file(workspace.scores[k]) for k in ("split", "fix", "merge")}

        split_net = distill(
            "split", logs["split"], scores["split"], max_epochs=200, lr=1e-3,
            batch_size=16, seed=0, target_accuracy=0.95, eval_every=5,
        )
        fix_net = distill(
            "fix", logs["fix"], scores["fix"], max_epochs=120, lr=2e-3,
            batch_size=16, seed=0, target_accuracy=0.92, eval_every=5,
        )
        merge_net = distill(
            "merge", logs["merge"], scores["merge"], max_epochs=200, lr=1e-3,
            batch_size=16, seed=0, target_accuracy=1.0, eval_every=2,
        )
        train_accs = {
            "split": split_net.history[-1]["accuracy"],
            "fix": fix_net.history[-1]["accuracy"],
            "merge": merge_net.history[-1]["accuracy"],
        }

        purities = {}
        # split and fix request streams do not depend on their own responses:
        # strict sequence replay, remaining stages oracle
        for kind, result in (("split", split_net), ("fix", fix_net)):
            path = tmp_path / f"{kind}-distilled.jsonl"
            export_scores(result.model, result.spec, logs[kind], path)
            out = tmp_path / f"b2-{kind}"
            proc = run_shred(
                "decompose", str(workspace.shapes), *workspace.pipeline_flags(),
                "--replay", f"{kind}:{path}", "--out", str(out),
            )
            assert proc.returncode == 0, proc.stderr
            purities[kind] = final_purities(out)

        # merge decisions shape later requests: keyed replay to a fixpoint
        initial = score_requests(merge_net.model, merge_net.spec, logs["merge"])
        purities["merge"] = {}
        for shape_path in workspace.shape_files():
            doc, _ = replay_to_fixpoint(
                service_url, shape_path.stem, shape_path.read_text(),
                workspace.config, "merge", merge_net.model, merge_net.spec, initial,
            )
            purities["merge"][doc["shape"]] = doc["trace"][-1]["purity"]

        worst = 0.0
        for kind in ("split", "fix", "merge"):
            for shape_id, oracle in oracle_purity.items():
                worst = max(worst, abs(purities[kind][shape_id] - oracle))
        ok = worst <= 0.05
        means = {k: float(np.mean(list(v.values()))) for k, v in purities.items()}
        report(
            "B2",
            ok,
            f"replayed purity within 0.05 of the oracle run on all shapes and stages "
            f"(worst gap {worst:.4f}); per-stage means {means}; "
            f"train accuracies {train_accs}",
        )
