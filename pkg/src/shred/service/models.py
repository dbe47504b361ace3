"""Wire models for the decomposition service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..decomp import DEFAULT_ADJACENCY_THRESHOLD


class ConfigModel(BaseModel):
    fps_k: int = 64
    fix_radius: float = 0.1
    merge_outside_radius: float = 0.1
    merge_threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    adjacency_threshold: float = DEFAULT_ADJACENCY_THRESHOLD
    seed: int = 0
    enable_split: bool = True
    enable_fix: bool = True
    enable_merge: bool = True


class ScoreRecordModel(BaseModel):
    kind: Literal["split", "fix", "merge"]
    shape: str
    seq: int
    digest: str
    score: Optional[float] = None  # merge
    labels: Optional[list[int]] = None  # split
    probs: Optional[list[float]] = None  # fix


class RequestLogModel(BaseModel):
    kind: Literal["split", "fix", "merge"]
    shape: str
    seq: int
    digest: str
    points: int
    channels: int
    features_b64: str  # float32 little-endian, row-major


class OperatorSpec(BaseModel):
    """How one stage gets its scores.

    `record` wraps `base` and returns the recorded stream in the response;
    `replay` consumes `records`; `constant` uses `value` (merge only).
    """

    mode: Literal["oracle", "heuristic", "constant", "replay", "record"] = "oracle"
    value: Optional[float] = None
    base: Literal["oracle", "heuristic", "constant"] = "oracle"
    records: Optional[list[ScoreRecordModel]] = None
    log_requests: bool = False
    keyed: bool = False  # replay by digest; unmatched requests reported back


class OperatorsSpec(BaseModel):
    split: OperatorSpec = OperatorSpec()
    fix: OperatorSpec = OperatorSpec()
    merge: OperatorSpec = OperatorSpec()


class DecomposeRequest(BaseModel):
    shape_id: str
    shrd: str  # SHRD1 text
    config: ConfigModel = ConfigModel()
    operators: OperatorsSpec = OperatorsSpec()


class TraceEntryModel(BaseModel):
    stage: str
    regions: int
    purity: Optional[float] = None


class DecomposeResponse(BaseModel):
    version: int
    shape: str
    n: int
    labels: list[int]
    trace: list[TraceEntryModel]
    config: ConfigModel
    recorded: dict[str, list[ScoreRecordModel]] = {}
    request_log: list[RequestLogModel] = []
    missing: list[RequestLogModel] = []  # keyed-replay requests without a score


class SweepRequest(BaseModel):
    shape_id: str
    shrd: str
    config: ConfigModel = ConfigModel()
    operators: OperatorsSpec = OperatorsSpec()
    thresholds: list[float]


class SweepRowModel(BaseModel):
    threshold: float
    regions: int
    purity: float


class SweepResponse(BaseModel):
    shape: str
    rows: list[SweepRowModel]
    config: ConfigModel


class EvalRequest(BaseModel):
    shape_id: str
    shrd: str
    labels: list[int]  # predicted region id per point


class GtPartReportModel(BaseModel):
    gt: int
    best_iou: float
    purity_fraction: float


class EvalResponse(BaseModel):
    shape: str
    regions: int
    purity: float
    aiou: float
    per_gt_part: list[GtPartReportModel]


class GendataRequest(BaseModel):
    kind: Literal["split", "fix", "merge"]
    shape_id: str
    shrd: str
    seed: int = 0
    fps_k: int = 64  # split examples
    attempts: int = 16  # fix examples per shape
    adjacency_threshold: float = DEFAULT_ADJACENCY_THRESHOLD  # merge neighbor rule


class GendataResponse(BaseModel):
    kind: str
    shape: str
    count: int
    rejected: int = 0  # fix retention-gate rejections
    records_b64: str  # length-prefixed example records


class MatchRequest(BaseModel):
    prediction: list[list[float]]  # (N, K) logits
    target: list[list[float]]  # (N, K) one-hot
    overseg: bool = True


class MatchResponse(BaseModel):
    assignment: dict[int, int]
    modified_target: list[list[float]]
    accepted_oversegs: list[list[int]]  # (P_A, U_P, A, U_T) rows


class GenShapesRequest(BaseModel):
    seed: int = 0
    count: int = 1
    preset: Literal["default", "small", "tiny"] = "default"


class GeneratedShape(BaseModel):
    id: str
    n: int
    parts: int
    shrd: str


class GenShapesResponse(BaseModel):
    shapes: list[GeneratedShape]


class HealthResponse(BaseModel):
    status: str
    version: str
