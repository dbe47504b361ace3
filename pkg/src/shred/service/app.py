"""FastAPI service wrapping the decomposition pipeline.

Shapes travel as SHRD1 text; score streams for record/replay are inlined in
the payloads so the service itself stays stateless.
"""

from __future__ import annotations

import base64

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.requests import Request
from fastapi.responses import JSONResponse

from .. import __version__, metrics, operators as ops, pipeline as pl
from ..core import Shape, ShapeFormatError, dumps_shrd, loads_shrd
from ..matching import overseg_match, hungarian_assign
from ..shapegen import small_shape, synthetic_shape, tiny_shape
from ..synthgen import (
    example_to_record,
    gen_fix_example,
    gen_merge_examples,
    gen_split_examples,
)
from . import models as m

app = FastAPI(title="shred", version=__version__)


@app.exception_handler(ValueError)
async def _value_error(request: Request, exc: ValueError) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(ops.ReplayError)
async def _replay_error(request: Request, exc: ops.ReplayError) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(pl.StageError)
async def _stage_error(request: Request, exc: pl.StageError) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": str(exc)})


def _parse_shape(shape_id: str, shrd: str) -> Shape:
    try:
        return loads_shrd(shrd, shape_id=shape_id)
    except ShapeFormatError as exc:
        raise HTTPException(status_code=400, detail=f"bad SHRD1 payload: {exc}") from exc


def _config(model: m.ConfigModel) -> pl.PipelineConfig:
    return pl.PipelineConfig(**model.model_dump())


def _record_to_model(rec: ops.ScoreRecord) -> m.ScoreRecordModel:
    return m.ScoreRecordModel(**rec.to_json())


def _record_from_model(model: m.ScoreRecordModel) -> ops.ScoreRecord:
    return ops.ScoreRecord.from_json(model.model_dump(exclude_none=True))


def _base_operator(kind: str, spec: m.OperatorSpec, shape: Shape, mode: str):
    if mode == "oracle":
        return {
            ops.KIND_SPLIT: ops.OracleSplit,
            ops.KIND_FIX: ops.OracleFix,
            ops.KIND_MERGE: ops.OracleMerge,
        }[kind](shape)
    if mode == "heuristic":
        return {
            ops.KIND_SPLIT: ops.HeuristicSplit,
            ops.KIND_FIX: ops.HeuristicFix,
            ops.KIND_MERGE: ops.HeuristicMerge,
        }[kind]()
    if mode == "constant":
        if kind != ops.KIND_MERGE:
            raise HTTPException(status_code=400, detail="constant scores exist for merge only")
        if spec.value is None:
            raise HTTPException(status_code=400, detail="constant operator needs a value")
        return ops.ConstantMerge(spec.value)
    raise HTTPException(status_code=400, detail=f"unsupported base operator {mode!r}")


def build_operator(kind: str, spec: m.OperatorSpec, shape: Shape, score_log: ops.ScoreLog):
    if spec.mode == "replay":
        records = [_record_from_model(r) for r in spec.records or []]
        if spec.keyed:
            return ops.KeyedReplayOperator(kind, records)
        return ops.ReplayOperator(kind, records)
    if spec.mode == "record":
        return ops.RecordingOperator(_base_operator(kind, spec, shape, spec.base), score_log)
    return _base_operator(kind, spec, shape, spec.mode)


def build_suite(
    shape: Shape, specs: m.OperatorsSpec
) -> tuple[ops.OperatorSuite, ops.ScoreLog]:
    log_requests = any(
        s.mode == "record" and s.log_requests for s in (specs.split, specs.fix, specs.merge)
    )
    score_log = ops.ScoreLog(log_requests=log_requests)
    suite = ops.OperatorSuite(
        split=build_operator(ops.KIND_SPLIT, specs.split, shape, score_log),
        fix=build_operator(ops.KIND_FIX, specs.fix, shape, score_log),
        merge=build_operator(ops.KIND_MERGE, specs.merge, shape, score_log),
    )
    return suite, score_log


def _recorded_payload(score_log: ops.ScoreLog) -> dict[str, list[m.ScoreRecordModel]]:
    out: dict[str, list[m.ScoreRecordModel]] = {}
    for rec in score_log.records:
        out.setdefault(rec.kind, []).append(_record_to_model(rec))
    return out


def _log_entries_payload(entries: list[ops.RequestLogEntry]) -> list[m.RequestLogModel]:
    out = []
    for entry in entries:
        feats = np.ascontiguousarray(entry.features, dtype="<f4")
        out.append(
            m.RequestLogModel(
                kind=entry.kind,
                shape=entry.shape_id,
                seq=entry.seq,
                digest=entry.digest,
                points=feats.shape[0],
                channels=feats.shape[1],
                features_b64=base64.b64encode(feats.tobytes()).decode("ascii"),
            )
        )
    return out


@app.get("/healthz", response_model=m.HealthResponse)
def healthz() -> m.HealthResponse:
    return m.HealthResponse(status="ok", version=__version__)


@app.post("/decompose", response_model=m.DecomposeResponse, response_model_exclude_none=True)
def decompose(req: m.DecomposeRequest) -> m.DecomposeResponse:
    shape = _parse_shape(req.shape_id, req.shrd)
    config = _config(req.config)
    suite, score_log = build_suite(shape, req.operators)
    decomp, trace = pl.run_pipeline(shape, suite, config)
    missing: list[ops.RequestLogEntry] = []
    for operator in (suite.split, suite.fix, suite.merge):
        if isinstance(operator, ops.KeyedReplayOperator):
            missing.extend(operator.missing)
    return m.DecomposeResponse(
        version=pl.DECOMP_FORMAT_VERSION,
        shape=shape.id,
        n=shape.n,
        labels=[int(v) for v in decomp.labels],
        trace=[m.TraceEntryModel(**rec.to_json()) for rec in trace],
        config=req.config,
        recorded=_recorded_payload(score_log),
        request_log=_log_entries_payload(score_log.requests),
        missing=_log_entries_payload(missing),
    )


@app.post("/sweep", response_model=m.SweepResponse)
def sweep(req: m.SweepRequest) -> m.SweepResponse:
    shape = _parse_shape(req.shape_id, req.shrd)
    config = _config(req.config)
    suite, _ = build_suite(shape, req.operators)
    rows = metrics.sweep_thresholds(shape, suite, config, req.thresholds)
    return m.SweepResponse(
        shape=shape.id,
        rows=[
            m.SweepRowModel(threshold=r.threshold, regions=r.regions, purity=r.purity)
            for r in rows
        ],
        config=req.config,
    )


@app.post("/eval", response_model=m.EvalResponse)
def eval_decomposition(req: m.EvalRequest) -> m.EvalResponse:
    shape = _parse_shape(req.shape_id, req.shrd)
    if len(req.labels) != shape.n:
        raise HTTPException(
            status_code=400,
            detail=f"labels length {len(req.labels)} does not match shape size {shape.n}",
        )
    from ..core import RegionDecomposition

    decomp = RegionDecomposition.from_labels(shape.id, np.asarray(req.labels))
    report = metrics.evaluate(shape, decomp)
    return m.EvalResponse(
        shape=report.shape_id,
        regions=report.region_count,
        purity=report.purity,
        aiou=report.aiou,
        per_gt_part=[
            m.GtPartReportModel(gt=g, best_iou=i, purity_fraction=f)
            for g, i, f in report.per_gt_part
        ],
    )


@app.post("/gendata", response_model=m.GendataResponse)
def gendata(req: m.GendataRequest) -> m.GendataResponse:
    shape = _parse_shape(req.shape_id, req.shrd)
    rejected = 0
    if req.kind == "split":
        examples = gen_split_examples(shape, req.fps_k, req.seed)
        records = [example_to_record("split", ex) for ex in examples]
    elif req.kind == "fix":
        rng = np.random.default_rng(req.seed)
        records = []
        for _ in range(req.attempts):
            ex = gen_fix_example(shape, rng)
            if ex is None:
                rejected += 1
            else:
                records.append(example_to_record("fix", ex))
    else:
        rng = np.random.default_rng(req.seed)
        examples = gen_merge_examples(shape, rng, adjacency_threshold=req.adjacency_threshold)
        records = [example_to_record("merge", ex) for ex in examples]
    blob = b"".join(records)
    return m.GendataResponse(
        kind=req.kind,
        shape=shape.id,
        count=len(records),
        rejected=rejected,
        records_b64=base64.b64encode(blob).decode("ascii"),
    )


@app.post("/match", response_model=m.MatchResponse)
def match(req: m.MatchRequest) -> m.MatchResponse:
    pred = np.asarray(req.prediction, dtype=np.float64)
    target = np.asarray(req.target, dtype=np.float64)
    if req.overseg:
        result = overseg_match(pred, target)
        return m.MatchResponse(
            assignment=result.assignment,
            modified_target=result.modified_target.tolist(),
            accepted_oversegs=[list(t) for t in result.accepted_oversegs],
        )
    assignment = hungarian_assign(pred, target)
    return m.MatchResponse(
        assignment=assignment, modified_target=target.tolist(), accepted_oversegs=[]
    )


@app.post("/genshapes", response_model=m.GenShapesResponse)
def genshapes(req: m.GenShapesRequest) -> m.GenShapesResponse:
    makers = {"default": synthetic_shape, "small": small_shape, "tiny": tiny_shape}
    out = []
    for i in range(req.count):
        seed = req.seed + i
        shape = makers[req.preset](seed)
        out.append(
            m.GeneratedShape(
                id=shape.id, n=shape.n, parts=shape.n_gt_parts, shrd=dumps_shrd(shape)
            )
        )
    return m.GenShapesResponse(shapes=out)
