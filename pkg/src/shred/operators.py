"""Operator requests, responses, and the interchangeable score sources.

Split, fix, and merge behavior is supplied by callables that map a request
to a response. Implementations here: ground-truth oracles, deterministic
geometric heuristics, constant scorers, a label-flip wrapper, and
record/replay against JSON-lines score files, all sharing one currency so
the pipeline never knows which is plugged in.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .core import Shape, normalize_unit_sphere, subsample_points

log = logging.getLogger(__name__)

KIND_SPLIT = "split"
KIND_FIX = "fix"
KIND_MERGE = "merge"
KINDS = (KIND_SPLIT, KIND_FIX, KIND_MERGE)

SPLIT_POINTS = 512
SPLIT_SLOTS = 10
FIX_SIDE_POINTS = 2048
MERGE_REGION_POINTS = 512
MERGE_OUTSIDE_POINTS = 1024
MERGE_POINTS = 2 * MERGE_REGION_POINTS + MERGE_OUTSIDE_POINTS


class OracleError(ValueError):
    """Oracle operator used on a shape without ground truth."""


class ReplayError(RuntimeError):
    """Score-file stream does not line up with the live request stream."""


class OperatorError(RuntimeError):
    """An operator produced a response violating its contract."""


# ---------------------------------------------------------------------------
# Requests and responses


class _Request:
    """Shared lazy plumbing: geometry and digests are computed on first use,
    so score sources that only consult indices never pay for them."""

    shape_id: str
    point_indices: np.ndarray

    def __init__(self, shape: Shape, point_indices: np.ndarray):
        self._shape = shape
        self.shape_id = shape.id
        self.point_indices = point_indices
        self._frame: tuple[np.ndarray, tuple[np.ndarray, float]] | None = None
        self._digest: str | None = None

    def _geometry(self) -> tuple[np.ndarray, tuple[np.ndarray, float]]:
        if self._frame is None:
            self._frame = normalize_unit_sphere(self._shape.positions[self.point_indices])
        return self._frame

    @property
    def positions(self) -> np.ndarray:
        """Sampled positions, unit-sphere normalized."""
        return self._geometry()[0]

    @property
    def transform(self) -> tuple[np.ndarray, float]:
        """(center, scale) mapping normalized positions back to shape coordinates."""
        return self._geometry()[1]

    @property
    def normals(self) -> np.ndarray:
        return self._shape.normals[self.point_indices]

    @property
    def digest(self) -> str:
        if self._digest is None:
            self._digest = request_digest(self.point_indices)
        return self._digest


class SplitRequest(_Request):
    kind = KIND_SPLIT

    def __init__(
        self,
        shape: Shape,
        region_id: int,
        point_indices: np.ndarray,  # (512,) sampled original indices
        region_point_indices: np.ndarray,  # full region membership at request time
    ):
        super().__init__(shape, point_indices)
        self.region_id = region_id
        self.region_point_indices = region_point_indices

    def features(self) -> np.ndarray:
        return np.concatenate([self.positions, self.normals], axis=1).astype(np.float32)


@dataclass
class SplitResponse:
    labels: np.ndarray  # (512,) slot ids in [0, 10)

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (SPLIT_POINTS,):
            raise OperatorError(f"split response must hold {SPLIT_POINTS} labels")
        if self.labels.min() < 0 or self.labels.max() >= SPLIT_SLOTS:
            raise OperatorError(f"split slots must lie in [0, {SPLIT_SLOTS})")


class FixRequest(_Request):
    kind = KIND_FIX

    def __init__(
        self,
        shape: Shape,
        region_id: int,
        point_indices: np.ndarray,  # (4096,) inside block then outside block
        flags: np.ndarray,  # (4096,) 1.0 inside / 0.0 outside
        region_point_indices: np.ndarray,
    ):
        super().__init__(shape, point_indices)
        self.region_id = region_id
        self.flags = flags
        self.region_point_indices = region_point_indices

    def features(self) -> np.ndarray:
        return np.concatenate(
            [self.positions, self.normals, self.flags[:, None]], axis=1
        ).astype(np.float32)


@dataclass
class FixResponse:
    probs: np.ndarray  # (4096,) inside-probabilities

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.shape != (2 * FIX_SIDE_POINTS,):
            raise OperatorError(f"fix response must hold {2 * FIX_SIDE_POINTS} probabilities")
        if self.probs.min() < 0.0 or self.probs.max() > 1.0:
            raise OperatorError("fix probabilities must lie in [0, 1]")


class MergeRequest(_Request):
    kind = KIND_MERGE

    def __init__(
        self,
        shape: Shape,
        region_a: int,
        region_b: int,
        point_indices: np.ndarray,  # (2048,) a-block, b-block, outside block
        region_a_indices: np.ndarray,
        region_b_indices: np.ndarray,
    ):
        super().__init__(shape, point_indices)
        self.region_a = region_a
        self.region_b = region_b
        self.region_a_indices = region_a_indices
        self.region_b_indices = region_b_indices

    @property
    def flags_a(self) -> np.ndarray:
        flags = np.zeros(MERGE_POINTS)
        flags[:MERGE_REGION_POINTS] = 1.0
        return flags

    @property
    def flags_b(self) -> np.ndarray:
        flags = np.zeros(MERGE_POINTS)
        flags[MERGE_REGION_POINTS : 2 * MERGE_REGION_POINTS] = 1.0
        return flags

    def features(self) -> np.ndarray:
        return np.concatenate(
            [self.positions, self.normals, self.flags_a[:, None], self.flags_b[:, None]],
            axis=1,
        ).astype(np.float32)


@dataclass
class MergeResponse:
    prob: float

    def __post_init__(self) -> None:
        self.prob = float(self.prob)
        if not (0.0 <= self.prob <= 1.0):
            raise OperatorError("merge probability must lie in [0, 1]")


def request_digest(point_indices: np.ndarray) -> str:
    """64-bit FNV-1a over the sorted point indices as little-endian uint32."""
    data = np.sort(np.asarray(point_indices, dtype="<u4")).tobytes()
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


# ---------------------------------------------------------------------------
# Request builders


def build_split_request(
    shape: Shape, region_indices: np.ndarray, region_id: int, rng: np.random.Generator
) -> SplitRequest:
    sample = subsample_points(region_indices, SPLIT_POINTS, rng)
    return SplitRequest(
        shape,
        region_id=region_id,
        point_indices=sample,
        region_point_indices=np.asarray(region_indices, dtype=np.int64),
    )


def region_ball(shape: Shape, region_indices: np.ndarray) -> tuple[np.ndarray, float]:
    """Centroid and enclosing radius of a region's points."""
    pts = shape.positions[region_indices]
    center = pts.mean(axis=0)
    delta = pts - center
    radius = float(np.sqrt((delta * delta).sum(axis=1).max()))
    return center, radius


def outside_candidates(
    shape: Shape, member_indices: np.ndarray, center: np.ndarray, radius: float
) -> np.ndarray:
    """Non-member point indices within `radius` of `center`, ascending.

    A full vectorized scan: the extended balls routinely cover most of the
    shape, where a tree query just adds list-conversion overhead.
    """
    d2 = shape.position_sqnorms() - 2.0 * (shape.positions @ center)
    mask = d2 <= radius * radius - center @ center
    mask[member_indices] = False
    return np.flatnonzero(mask)


def _fill_outside(
    shape: Shape,
    member_indices: np.ndarray,
    candidates: np.ndarray,
    quota: int,
    rng: np.random.Generator,
    context: str,
) -> np.ndarray:
    if len(candidates) > 0:
        return subsample_points(candidates, quota, rng)
    # no outside point in range: fall back to the region's own boundary,
    # flagged outside, so the request keeps its fixed size
    log.warning("%s: no outside points in range, filling from region boundary", context)
    center, _ = region_ball(shape, member_indices)
    dists = np.linalg.norm(shape.positions[member_indices] - center, axis=1)
    order = np.argsort(-dists, kind="stable")
    pool = np.asarray(member_indices)[order[: min(len(order), quota)]]
    return subsample_points(pool, quota, rng)


def build_fix_request(
    shape: Shape,
    region_indices: np.ndarray,
    region_id: int,
    fix_radius: float,
    rng: np.random.Generator,
) -> FixRequest:
    region_indices = np.asarray(region_indices, dtype=np.int64)
    center, radius = region_ball(shape, region_indices)
    candidates = outside_candidates(shape, region_indices, center, radius + fix_radius)
    inside = subsample_points(region_indices, FIX_SIDE_POINTS, rng)
    outside = _fill_outside(
        shape, region_indices, candidates, FIX_SIDE_POINTS, rng,
        context=f"fix request shape={shape.id} region={region_id}",
    )
    sample = np.concatenate([inside, outside])
    flags = np.concatenate([np.ones(FIX_SIDE_POINTS), np.zeros(FIX_SIDE_POINTS)])
    return FixRequest(
        shape,
        region_id=region_id,
        point_indices=sample,
        flags=flags,
        region_point_indices=region_indices,
    )


def build_merge_request(
    shape: Shape,
    indices_a: np.ndarray,
    indices_b: np.ndarray,
    region_a: int,
    region_b: int,
    outside_radius: float,
    rng: np.random.Generator,
) -> MergeRequest:
    indices_a = np.asarray(indices_a, dtype=np.int64)
    indices_b = np.asarray(indices_b, dtype=np.int64)
    combined = np.concatenate([indices_a, indices_b])
    center, radius = region_ball(shape, combined)
    candidates = outside_candidates(shape, combined, center, radius + outside_radius)
    part_a = subsample_points(indices_a, MERGE_REGION_POINTS, rng)
    part_b = subsample_points(indices_b, MERGE_REGION_POINTS, rng)
    outside = _fill_outside(
        shape, combined, candidates, MERGE_OUTSIDE_POINTS, rng,
        context=f"merge request shape={shape.id} pair=({region_a},{region_b})",
    )
    sample = np.concatenate([part_a, part_b, outside])
    return MergeRequest(
        shape,
        region_a=region_a,
        region_b=region_b,
        point_indices=sample,
        region_a_indices=indices_a,
        region_b_indices=indices_b,
    )


# ---------------------------------------------------------------------------
# Ground-truth oracles


def _require_gt(shape: Shape) -> np.ndarray:
    if shape.gt_labels is None:
        raise OracleError("oracle requires ground truth")
    return shape.gt_labels


def best_match_gt(shape: Shape, member_indices: np.ndarray) -> int:
    """Ground-truth instance with maximum overlap; ties go to the lower id."""
    gt = _require_gt(shape)
    counts = np.bincount(gt[member_indices], minlength=shape.n_gt_parts)
    return int(np.argmax(counts))


def split_slots_for_region(shape: Shape, region_indices: np.ndarray) -> tuple[np.ndarray, dict[int, int]]:
    """Per-point slot labels for a whole region under the largest-10 rule.

    Slots are the dense re-index (ascending gt id) of the instances kept in
    the region; when more than 10 instances touch the region, only the 10
    largest by in-region point count keep slots and every other point adopts
    the slot of its nearest kept-instance point.
    """
    gt = _require_gt(shape)
    region_indices = np.asarray(region_indices, dtype=np.int64)
    region_gt = gt[region_indices]
    ids, counts = np.unique(region_gt, return_counts=True)
    if len(ids) <= SPLIT_SLOTS:
        kept = ids
    else:
        order = np.lexsort((ids, -counts))
        kept = np.sort(ids[order[:SPLIT_SLOTS]])
    slot_of = {int(g): s for s, g in enumerate(kept)}
    slots = np.empty(len(region_indices), dtype=np.int64)
    kept_mask = np.isin(region_gt, kept)
    slots[kept_mask] = [slot_of[int(g)] for g in region_gt[kept_mask]]
    if not np.all(kept_mask):
        kept_points = region_indices[kept_mask]
        tree = cKDTree(shape.positions[kept_points])
        _, nearest = tree.query(shape.positions[region_indices[~kept_mask]], k=1)
        adopted = gt[kept_points[nearest]]
        slots[~kept_mask] = [slot_of[int(g)] for g in adopted]
    return slots, slot_of


class OracleSplit:
    """Slot per point = dense re-index of its ground-truth instance in the region."""

    def __init__(self, shape: Shape):
        self.shape = shape
        _require_gt(shape)

    def __call__(self, request: SplitRequest) -> SplitResponse:
        region = request.region_point_indices
        slots, slot_of = split_slots_for_region(self.shape, region)
        lookup = np.full(self.shape.n, -1, dtype=np.int64)
        lookup[region] = slots
        labels = lookup[request.point_indices]
        if np.any(labels < 0):
            raise OperatorError("split request points outside their region")
        return SplitResponse(labels=labels)


class OracleFix:
    """1.0 where a point belongs to the region's best-matching ground-truth part."""

    def __init__(self, shape: Shape):
        self.shape = shape
        _require_gt(shape)

    def __call__(self, request: FixRequest) -> FixResponse:
        g = best_match_gt(self.shape, request.region_point_indices)
        probs = (self.shape.gt_labels[request.point_indices] == g).astype(np.float64)
        return FixResponse(probs=probs)


class OracleMerge:
    """1.0 when both regions best-match the same ground-truth part."""

    def __init__(self, shape: Shape):
        self.shape = shape
        _require_gt(shape)

    def __call__(self, request: MergeRequest) -> MergeResponse:
        ga = best_match_gt(self.shape, request.region_a_indices)
        gb = best_match_gt(self.shape, request.region_b_indices)
        return MergeResponse(prob=1.0 if ga == gb else 0.0)


# ---------------------------------------------------------------------------
# Deterministic heuristics


class HeuristicSplit:
    """Region growing over a k-NN graph in the normalized frame.

    Edges are cut where the normal angle exceeds `theta_deg` or the edge is
    longer than `delta_factor` times the median k-NN edge length; surviving
    components become slots by descending size, overflow points adopt the
    slot of the nearest kept point.
    """

    def __init__(self, k: int = 8, theta_deg: float = 30.0, delta_factor: float = 3.0):
        self.k = k
        self.cos_theta = math.cos(math.radians(theta_deg))
        self.delta_factor = delta_factor

    def __call__(self, request: SplitRequest) -> SplitResponse:
        pos = request.positions
        nrm = request.normals
        n = len(pos)
        k = min(self.k + 1, n)
        tree = cKDTree(pos)
        dists, nbrs = tree.query(pos, k=k)
        src = np.repeat(np.arange(n), k - 1)
        dst = nbrs[:, 1:].reshape(-1)
        length = dists[:, 1:].reshape(-1)
        median = float(np.median(length)) if len(length) else 0.0
        cos = np.abs((nrm[src] * nrm[dst]).sum(axis=1))
        keep = (cos >= self.cos_theta - 1e-12) & (length <= self.delta_factor * median + 1e-12)
        graph = coo_matrix(
            (np.ones(keep.sum()), (src[keep], dst[keep])), shape=(n, n)
        )
        _, comp = connected_components(graph, directed=False)
        ids, counts = np.unique(comp, return_counts=True)
        order = np.lexsort((ids, -counts))
        kept = ids[order[:SPLIT_SLOTS]]
        slot_of = {int(c): s for s, c in enumerate(kept)}
        labels = np.full(n, -1, dtype=np.int64)
        kept_mask = np.isin(comp, kept)
        labels[kept_mask] = [slot_of[int(c)] for c in comp[kept_mask]]
        if not np.all(kept_mask):
            kept_idx = np.flatnonzero(kept_mask)
            ktree = cKDTree(pos[kept_idx])
            _, nearest = ktree.query(pos[~kept_mask], k=1)
            labels[~kept_mask] = labels[kept_idx[nearest]]
        return SplitResponse(labels=labels)


class HeuristicFix:
    """Boundary-preserving stand-in: echo the inside/outside flags."""

    def __call__(self, request: FixRequest) -> FixResponse:
        return FixResponse(probs=request.flags.astype(np.float64))


class HeuristicMerge:
    """Normal agreement across the closest cross-region point pairs."""

    def __init__(self, pairs: int = 32):
        self.pairs = pairs

    def __call__(self, request: MergeRequest) -> MergeResponse:
        a = request.flags_a > 0.5
        b = request.flags_b > 0.5
        tree = cKDTree(request.positions[b])
        dists, nearest = tree.query(request.positions[a], k=1)
        order = np.argsort(dists, kind="stable")[: self.pairs]
        na = request.normals[a][order]
        nb = request.normals[b][nearest[order]]
        cos = (na * nb).sum(axis=1)
        return MergeResponse(prob=float(np.clip(np.mean(cos), 0.0, 1.0)))


class ConstantMerge:
    """Fixed merge probability, mainly for threshold-endpoint checks."""

    def __init__(self, prob: float):
        self.prob = float(prob)

    def __call__(self, request: MergeRequest) -> MergeResponse:
        return MergeResponse(prob=self.prob)


class LabelFlipMerge:
    """Wrap a merge scorer, flipping its score to 1-p on a per-request coin.

    The coin is seeded from the request digest so the operator stays a pure
    function of its request and the noisy run can be recorded and replayed.
    """

    def __init__(self, base, flip_prob: float, seed: int):
        self.base = base
        self.flip_prob = float(flip_prob)
        self.seed = int(seed)

    def __call__(self, request: MergeRequest) -> MergeResponse:
        resp = self.base(request)
        coin = np.random.default_rng([self.seed, int(request.digest, 16)]).random()
        if coin < self.flip_prob:
            return MergeResponse(prob=1.0 - resp.prob)
        return resp


# ---------------------------------------------------------------------------
# Score files, recording, and replay


@dataclass
class ScoreRecord:
    kind: str
    shape_id: str
    seq: int
    digest: str
    payload: np.ndarray | float

    def to_json(self) -> dict:
        rec = {"kind": self.kind, "shape": self.shape_id, "seq": self.seq, "digest": self.digest}
        if self.kind == KIND_SPLIT:
            rec["labels"] = [int(v) for v in np.asarray(self.payload)]
        elif self.kind == KIND_FIX:
            # probabilities travel as 32-bit floats
            rec["probs"] = [float(np.float32(v)) for v in np.asarray(self.payload)]
        else:
            rec["score"] = float(np.float32(self.payload))
        return rec

    @classmethod
    def from_json(cls, obj: dict) -> "ScoreRecord":
        kind = obj["kind"]
        if kind == KIND_SPLIT:
            payload: np.ndarray | float = np.asarray(obj["labels"], dtype=np.int64)
        elif kind == KIND_FIX:
            payload = np.asarray(obj["probs"], dtype=np.float64)
        elif kind == KIND_MERGE:
            payload = float(obj["score"])
        else:
            raise ValueError(f"unknown score record kind {kind!r}")
        return cls(kind=kind, shape_id=obj["shape"], seq=int(obj["seq"]), digest=obj["digest"], payload=payload)


def write_score_file(path: str | Path, records: list[ScoreRecord], meta: dict | None = None) -> None:
    with open(path, "w") as fh:
        if meta is not None:
            fh.write(json.dumps({"kind": "meta", **meta}, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")


def read_score_file(path: str | Path) -> list[ScoreRecord]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("kind") not in KINDS:
                continue  # meta or foreign lines
            records.append(ScoreRecord.from_json(obj))
    return records


@dataclass
class RequestLogEntry:
    kind: str
    shape_id: str
    seq: int
    digest: str
    features: np.ndarray  # float32 (points, channels)


class ScoreLog:
    """Accumulates responses (and optionally request features) during a run."""

    def __init__(self, log_requests: bool = False):
        self.records: list[ScoreRecord] = []
        self.requests: list[RequestLogEntry] = []
        self.log_requests = log_requests
        self._counters: dict[tuple[str, str], int] = {}

    def add(self, request, response) -> ScoreRecord:
        key = (request.shape_id, request.kind)
        seq = self._counters.get(key, 0)
        self._counters[key] = seq + 1
        if request.kind == KIND_SPLIT:
            payload: np.ndarray | float = response.labels
        elif request.kind == KIND_FIX:
            payload = response.probs
        else:
            payload = response.prob
        rec = ScoreRecord(
            kind=request.kind, shape_id=request.shape_id, seq=seq,
            digest=request.digest, payload=payload,
        )
        self.records.append(rec)
        if self.log_requests:
            self.requests.append(
                RequestLogEntry(
                    kind=request.kind, shape_id=request.shape_id, seq=seq,
                    digest=request.digest, features=request.features(),
                )
            )
        return rec


class RecordingOperator:
    """Pass-through wrapper that logs every (request, response) pair."""

    def __init__(self, base, score_log: ScoreLog):
        self.base = base
        self.score_log = score_log

    def __call__(self, request):
        response = self.base(request)
        self.score_log.add(request, response)
        return response


class ReplayOperator:
    """Answer the n-th request of a kind with the n-th recorded response.

    Records are consumed per shape in sequence order; a digest mismatch means
    the stream was produced against different requests.
    """

    def __init__(self, kind: str, records: list[ScoreRecord]):
        self.kind = kind
        self._queues: dict[str, list[ScoreRecord]] = {}
        for rec in records:
            if rec.kind != kind:
                continue
            self._queues.setdefault(rec.shape_id, []).append(rec)
        for q in self._queues.values():
            q.sort(key=lambda r: r.seq)
        self._cursors: dict[str, int] = {}

    @classmethod
    def from_file(cls, kind: str, path: str | Path) -> "ReplayOperator":
        return cls(kind, read_score_file(path))

    def _next(self, request) -> ScoreRecord:
        queue = self._queues.get(request.shape_id, [])
        cursor = self._cursors.get(request.shape_id, 0)
        if cursor >= len(queue):
            raise ReplayError(
                f"score file underrun: no {self.kind} record #{cursor} for shape {request.shape_id!r}"
            )
        rec = queue[cursor]
        self._cursors[request.shape_id] = cursor + 1
        if rec.digest != request.digest:
            raise ReplayError(
                f"stale score file: {self.kind} record #{cursor} for shape "
                f"{request.shape_id!r} digests {rec.digest}, request digests {request.digest}"
            )
        return rec

    def __call__(self, request):
        rec = self._next(request)
        if self.kind == KIND_SPLIT:
            return SplitResponse(labels=np.asarray(rec.payload))
        if self.kind == KIND_FIX:
            return FixResponse(probs=np.asarray(rec.payload))
        return MergeResponse(prob=float(rec.payload))


class KeyedReplayOperator:
    """Replay by request digest instead of sequence position.

    Requests whose digest has no record are answered with a provisional
    response (split: all zeros, fix: echoed flags, merge: decline) and
    collected in `missing`, so an external scorer can fill the gaps and the
    run can be repeated to a fixpoint. Sequence replay stays the strict
    default; this mode exists for score sources that cannot anticipate the
    request stream their own decisions produce.
    """

    def __init__(self, kind: str, records: list[ScoreRecord]):
        self.kind = kind
        self._by_digest = {rec.digest: rec for rec in records if rec.kind == kind}
        self.missing: list[RequestLogEntry] = []
        self._missing_digests: set[str] = set()

    def __call__(self, request):
        rec = self._by_digest.get(request.digest)
        if rec is None:
            if request.digest not in self._missing_digests:
                self._missing_digests.add(request.digest)
                self.missing.append(
                    RequestLogEntry(
                        kind=request.kind, shape_id=request.shape_id,
                        seq=len(self.missing), digest=request.digest,
                        features=request.features(),
                    )
                )
            if self.kind == KIND_SPLIT:
                return SplitResponse(labels=np.zeros(SPLIT_POINTS, dtype=np.int64))
            if self.kind == KIND_FIX:
                return FixResponse(probs=request.flags.astype(np.float64))
            return MergeResponse(prob=0.0)
        if self.kind == KIND_SPLIT:
            return SplitResponse(labels=np.asarray(rec.payload))
        if self.kind == KIND_FIX:
            return FixResponse(probs=np.asarray(rec.payload))
        return MergeResponse(prob=float(rec.payload))


@dataclass
class OperatorSuite:
    """One operator per stage; any stage left None must be disabled in config."""

    split: object | None = None
    fix: object | None = None
    merge: object | None = None

    @classmethod
    def oracle(cls, shape: Shape) -> "OperatorSuite":
        return cls(split=OracleSplit(shape), fix=OracleFix(shape), merge=OracleMerge(shape))

    @classmethod
    def heuristic(cls) -> "OperatorSuite":
        return cls(split=HeuristicSplit(), fix=HeuristicFix(), merge=HeuristicMerge())
