"""Training loops for the three scorers.

Default optimizer settings: Adam with learning rates 1e-3 / 1e-4 / 1e-4 and
batch sizes 64 / 64 / 128 for split, fix, merge. The merge loop drops the
learning rate by 0.25 whenever train loss fails to reach a new minimum
within a 10-epoch patience. Distillation memorizes recorded (request, score)
pairs until the responses are reproduced, so exported streams replay against
the pipeline that recorded them.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .data import LogEntry, ScoreEntry, pair_log_with_scores
from .nets import NetSpec, build_net, default_spec

DEFAULTS = {
    "split": {"lr": 1e-3, "batch_size": 64},
    "fix": {"lr": 1e-4, "batch_size": 64},
    "merge": {"lr": 1e-4, "batch_size": 128},
}

MERGE_PLATEAU_FACTOR = 0.25
MERGE_PLATEAU_PATIENCE = 10


@dataclass
class TrainResult:
    model: nn.Module
    spec: NetSpec
    history: list[dict]  # per epoch: loss, accuracy, lr
    steps: int


def split_point_accuracy(logits: torch.Tensor, targets: torch.Tensor) -> float:
    return float((logits.argmax(dim=-1) == targets).float().mean())


def binary_accuracy(logits: torch.Tensor, targets: torch.Tensor) -> float:
    return float(((torch.sigmoid(logits) > 0.5) == (targets > 0.5)).float().mean())


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _matched_targets(logits: torch.Tensor, targets: torch.Tensor, match_url: str) -> torch.Tensor:
    """Realign slot targets through the decomposition service's matcher."""
    import httpx

    out = targets.clone()
    k = logits.shape[-1]
    with httpx.Client(timeout=60.0) as client:
        for i in range(logits.shape[0]):
            one_hot = torch.zeros(targets.shape[1], k)
            one_hot[torch.arange(targets.shape[1]), targets[i]] = 1.0
            resp = client.post(
                f"{match_url.rstrip('/')}/match",
                json={
                    "prediction": logits[i].detach().tolist(),
                    "target": one_hot.tolist(),
                    "overseg": True,
                },
            )
            resp.raise_for_status()
            modified = torch.tensor(resp.json()["modified_target"])
            out[i] = modified.argmax(dim=-1)
    return out


def _full_set_accuracy(model, x, y, kind: str, chunk: int = 32) -> float:
    model.eval()
    correct = 0
    total = 0
    with torch.no_grad():
        for start in range(0, len(x), chunk):
            logits = model(x[start : start + chunk])
            if kind == "split":
                correct += int((logits.argmax(dim=-1) == y[start : start + chunk]).sum())
                total += int(y[start : start + chunk].numel())
            else:
                pred = torch.sigmoid(logits.squeeze(-1)) > 0.5
                correct += int((pred == (y[start : start + chunk] > 0.5)).sum())
                total += int(y[start : start + chunk].numel())
    return correct / total


def train_split(
    features: np.ndarray,
    targets: np.ndarray,
    spec: NetSpec | None = None,
    epochs: int = 8,
    lr: float | None = None,
    batch_size: int | None = None,
    seed: int = 0,
    match_url: str | None = None,
    target_accuracy: float | None = None,
    max_steps: int | None = None,
    eval_every: int = 1,
) -> TrainResult:
    """Cross-entropy slot training; `match_url` routes targets through the
    service's over-segmentation matcher each step."""
    spec = spec or default_spec("split")
    lr = DEFAULTS["split"]["lr"] if lr is None else lr
    batch_size = DEFAULTS["split"]["batch_size"] if batch_size is None else batch_size
    torch.manual_seed(seed)
    model = build_net(spec)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    x = torch.as_tensor(features, dtype=torch.float32)
    y = torch.as_tensor(targets, dtype=torch.long)
    rng = np.random.default_rng(seed)
    history = []
    steps = 0
    for epoch in range(epochs):
        model.train()
        losses = []
        for batch in _batches(len(x), batch_size, rng):
            xb, yb = x[batch], y[batch]
            logits = model(xb)
            if match_url is not None:
                yb = _matched_targets(logits, yb, match_url)
            loss = loss_fn(logits.reshape(-1, spec.out_dim), yb.reshape(-1))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
            steps += 1
            if max_steps is not None and steps >= max_steps:
                break
        evaluate = (
            epoch % eval_every == 0
            or epoch == epochs - 1
            or (max_steps is not None and steps >= max_steps)
        )
        acc = _full_set_accuracy(model, x, y, "split") if evaluate else float("nan")
        history.append({"epoch": epoch, "loss": float(np.mean(losses)), "accuracy": acc,
                        "lr": optimizer.param_groups[0]["lr"]})
        if target_accuracy is not None and evaluate and acc >= target_accuracy:
            break
        if max_steps is not None and steps >= max_steps:
            break
    return TrainResult(model=model, spec=spec, history=history, steps=steps)


def train_binary(
    kind: str,
    features: np.ndarray,
    targets: np.ndarray,
    spec: NetSpec | None = None,
    epochs: int = 8,
    lr: float | None = None,
    batch_size: int | None = None,
    seed: int = 0,
    target_accuracy: float | None = None,
    eval_every: int = 1,
    pos_weight: float | None = None,
) -> TrainResult:
    """BCE training for the fix (per point) and merge (per pair) scorers.

    `pos_weight` below 1 biases uncertain inputs toward the negative class;
    for merge scorers that trades over-segmentation (harmless to purity)
    against false merges (fatal to it).
    """
    if kind not in ("fix", "merge"):
        raise ValueError("binary training covers fix and merge")
    spec = spec or default_spec(kind)
    lr = DEFAULTS[kind]["lr"] if lr is None else lr
    batch_size = DEFAULTS[kind]["batch_size"] if batch_size is None else batch_size
    torch.manual_seed(seed)
    model = build_net(spec)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    scheduler = None
    if kind == "merge":
        scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
            optimizer, factor=MERGE_PLATEAU_FACTOR, patience=MERGE_PLATEAU_PATIENCE
        )
    weight = None if pos_weight is None else torch.tensor(float(pos_weight))
    loss_fn = nn.BCEWithLogitsLoss(pos_weight=weight)
    x = torch.as_tensor(features, dtype=torch.float32)
    y = torch.as_tensor(targets, dtype=torch.float32)
    rng = np.random.default_rng(seed)
    history = []
    steps = 0
    for epoch in range(epochs):
        model.train()
        losses = []
        for batch in _batches(len(x), batch_size, rng):
            logits = model(x[batch]).squeeze(-1)
            loss = loss_fn(logits, y[batch])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
            steps += 1
        epoch_loss = float(np.mean(losses))
        if scheduler is not None:
            scheduler.step(epoch_loss)
        evaluate = epoch % eval_every == 0 or epoch == epochs - 1
        acc = _full_set_accuracy(model, x, y, kind) if evaluate else float("nan")
        history.append({"epoch": epoch, "loss": epoch_loss, "accuracy": acc,
                        "lr": optimizer.param_groups[0]["lr"]})
        if target_accuracy is not None and evaluate and acc >= target_accuracy:
            break
    return TrainResult(model=model, spec=spec, history=history, steps=steps)


def distill(
    kind: str,
    log: list[LogEntry],
    scores: list[ScoreEntry],
    max_epochs: int = 400,
    lr: float = 1e-3,
    batch_size: int = 16,
    seed: int = 0,
    target_accuracy: float = 1.0,
    shrink: int = 4,
    eval_every: int = 5,
    pos_weight: float | None = None,
) -> TrainResult:
    """Memorize recorded responses for the recorded requests."""
    pairs = pair_log_with_scores(log, scores, kind)
    if not pairs:
        raise ValueError(f"no {kind} pairs to distill from")
    features = np.stack([f for f, _ in pairs])
    if kind == "split":
        targets = np.stack([np.asarray(t, dtype=np.int64) for _, t in pairs])
        return train_split(
            features, targets, spec=default_spec("split", shrink=shrink),
            epochs=max_epochs, lr=lr, batch_size=batch_size, seed=seed,
            target_accuracy=target_accuracy, eval_every=eval_every,
        )
    if kind == "fix":
        targets = np.stack([np.asarray(t, dtype=np.float32) for _, t in pairs])
    else:
        targets = np.asarray([float(t) for _, t in pairs], dtype=np.float32)
    return train_binary(
        kind, features, targets, spec=default_spec(kind, shrink=shrink),
        epochs=max_epochs, lr=lr, batch_size=batch_size, seed=seed,
        target_accuracy=target_accuracy, eval_every=eval_every,
        pos_weight=pos_weight,
    )


def save_checkpoint(result: TrainResult, path: str | Path) -> None:
    torch.save(
        {"kind": result.spec.kind, "spec": asdict(result.spec),
         "state_dict": result.model.state_dict(), "history": result.history},
        path,
    )


def load_checkpoint(path: str | Path) -> tuple[nn.Module, NetSpec]:
    payload = torch.load(path, weights_only=False)
    spec = NetSpec(**payload["spec"])
    model = build_net(spec)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, spec


def write_curve_csv(history: list[dict], path: str | Path) -> None:
    lines = ["epoch,loss,accuracy,lr"]
    for row in history:
        lines.append(f"{row['epoch']},{row['loss']},{row['accuracy']},{row['lr']}")
    Path(path).write_text("\n".join(lines) + "\n")
