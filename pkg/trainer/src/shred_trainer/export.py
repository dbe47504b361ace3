"""Turn a checkpoint plus a request log into a replayable score file.

Records keep the log's order and digests; counts match one-to-one, which is
what replay needs to stay aligned.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .data import LogEntry, ScoreEntry, write_score_file
from .nets import NetSpec


def score_requests(
    model: torch.nn.Module, spec: NetSpec, entries: list[LogEntry], batch_size: int = 8
) -> list[ScoreEntry]:
    entries = [e for e in entries if e.kind == spec.kind]
    model.eval()
    out: list[ScoreEntry] = []
    for start in range(0, len(entries), batch_size):
        chunk = entries[start : start + batch_size]
        x = torch.as_tensor(np.stack([e.features for e in chunk]), dtype=torch.float32)
        with torch.no_grad():
            logits = model(x)
        for i, entry in enumerate(chunk):
            if spec.kind == "split":
                payload: np.ndarray | float = logits[i].argmax(dim=-1).numpy()
            elif spec.kind == "fix":
                payload = torch.sigmoid(logits[i].squeeze(-1)).numpy()
            else:
                payload = float(torch.sigmoid(logits[i].squeeze(-1)))
            out.append(
                ScoreEntry(
                    kind=entry.kind, shape=entry.shape, seq=entry.seq,
                    digest=entry.digest, payload=payload,
                )
            )
    return out


def export_scores(
    model: torch.nn.Module,
    spec: NetSpec,
    entries: list[LogEntry],
    out_path: str | Path,
    batch_size: int = 8,
) -> int:
    """Write one score record per logged request; returns the record count."""
    scored = score_requests(model, spec, entries, batch_size=batch_size)
    expected = sum(1 for e in entries if e.kind == spec.kind)
    if len(scored) != expected:
        raise RuntimeError(
            f"score/record count mismatch: {len(scored)} scored vs {expected} logged"
        )
    write_score_file(out_path, scored)
    return len(scored)
