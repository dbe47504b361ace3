"""Readers and writers for the wire formats shared with the decomposition service.

Shards are length-prefixed binary records (float32 features then uint8
labels); request logs and score files are JSON lines. Lines whose kind is
not split/fix/merge (e.g. meta headers) are ignored on read.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

KINDS = ("split", "fix", "merge")

# (points, channels) per request kind, and label length (0 = scalar)
FEATURE_SHAPES = {
    "split": ((512, 6), 512),
    "fix": ((4096, 7), 4096),
    "merge": ((2048, 8), 0),
}


@dataclass
class LogEntry:
    kind: str
    shape: str
    seq: int
    digest: str
    features: np.ndarray  # (points, channels) float32


@dataclass
class ScoreEntry:
    kind: str
    shape: str
    seq: int
    digest: str
    payload: np.ndarray | float


def read_request_log(path: str | Path) -> list[LogEntry]:
    entries = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        if obj.get("kind") not in KINDS:
            continue
        raw = base64.b64decode(obj["features_b64"])
        features = np.frombuffer(raw, dtype="<f4").reshape(obj["points"], obj["channels"])
        entries.append(
            LogEntry(
                kind=obj["kind"],
                shape=obj["shape"],
                seq=int(obj["seq"]),
                digest=obj["digest"],
                features=features,
            )
        )
    return entries


def read_score_file(path: str | Path) -> list[ScoreEntry]:
    entries = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        kind = obj.get("kind")
        if kind not in KINDS:
            continue
        if kind == "split":
            payload: np.ndarray | float = np.asarray(obj["labels"], dtype=np.int64)
        elif kind == "fix":
            payload = np.asarray(obj["probs"], dtype=np.float32)
        else:
            payload = float(obj["score"])
        entries.append(
            ScoreEntry(
                kind=kind, shape=obj["shape"], seq=int(obj["seq"]),
                digest=obj["digest"], payload=payload,
            )
        )
    return entries


def write_score_file(path: str | Path, entries: list[ScoreEntry]) -> None:
    with open(path, "w") as fh:
        for e in entries:
            rec: dict = {"kind": e.kind, "shape": e.shape, "seq": e.seq, "digest": e.digest}
            if e.kind == "split":
                rec["labels"] = [int(v) for v in np.asarray(e.payload)]
            elif e.kind == "fix":
                rec["probs"] = [float(np.float32(v)) for v in np.asarray(e.payload)]
            else:
                rec["score"] = float(np.float32(e.payload))
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def pair_log_with_scores(
    log: list[LogEntry], scores: list[ScoreEntry], kind: str
) -> list[tuple[np.ndarray, np.ndarray | float]]:
    """Match request features with recorded responses by (shape, seq)."""
    by_key = {(s.shape, s.seq): s for s in scores if s.kind == kind}
    pairs = []
    for entry in log:
        if entry.kind != kind:
            continue
        score = by_key.get((entry.shape, entry.seq))
        if score is None:
            raise ValueError(f"no score for {kind} request {entry.shape}#{entry.seq}")
        if score.digest != entry.digest:
            raise ValueError(f"digest mismatch for {kind} request {entry.shape}#{entry.seq}")
        pairs.append((entry.features, score.payload))
    return pairs


# ---------------------------------------------------------------------------
# Shards


def _iter_records(blob: bytes):
    offset = 0
    while offset < len(blob):
        (length,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        yield blob[offset : offset + length]
        offset += length


def load_shards(directory: str | Path, kind: str) -> tuple[np.ndarray, np.ndarray]:
    """All examples of one kind: (features (E, N, C), labels (E, N) or (E,))."""
    directory = Path(directory)
    manifest = json.loads((directory / f"{kind}-manifest.json").read_text())
    feat_shape, label_len = FEATURE_SHAPES[kind]
    feat_bytes = int(np.prod(feat_shape)) * 4
    features, labels = [], []
    for shard in manifest["shards"]:
        blob = (directory / shard["file"]).read_bytes()
        for payload in _iter_records(blob):
            features.append(
                np.frombuffer(payload[:feat_bytes], dtype="<f4").reshape(feat_shape)
            )
            raw = np.frombuffer(payload[feat_bytes:], dtype=np.uint8)
            labels.append(raw if label_len else raw[0])
    if not features:
        raise ValueError(f"no {kind} examples under {directory}")
    return np.stack(features), np.asarray(labels)
