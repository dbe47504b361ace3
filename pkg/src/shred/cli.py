"""Batch command-line client for the decomposition service.

Every subcommand drives the HTTP API; by default an in-process app instance
is used, `--server URL` targets a running `shred serve`. Worker count for
multi-shape batches comes from the SHRED_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import base64
import json
import os
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__

EXIT_OK = 0
EXIT_PARTIAL = 2
EXIT_CONFIG = 3

STAGES = ("split", "fix", "merge")

FILE_FORMAT_VERSION = 1


class ConfigError(Exception):
    """Bad flags or missing inputs; maps to exit code 3."""


class ShapeFailure(Exception):
    """Per-shape processing failure; maps to exit code 2."""


class ServiceClient:
    """Thin HTTP wrapper: remote server or the in-process app."""

    def __init__(self, server: str | None):
        self.server = server
        self._local = threading.local()

    def _client(self):
        client = getattr(self._local, "client", None)
        if client is None:
            if self.server:
                import httpx

                client = httpx.Client(base_url=self.server, timeout=600.0)
            else:
                from fastapi.testclient import TestClient

                from .service import app

                client = TestClient(app)
            self._local.client = client
        return client

    def post(self, path: str, payload: dict) -> dict:
        resp = self._client().post(path, json=payload)
        if resp.status_code != 200:
            try:
                detail = resp.json().get("detail", resp.text)
            except Exception:
                detail = resp.text
            raise ShapeFailure(f"{path} -> {resp.status_code}: {detail}")
        return resp.json()


# ---------------------------------------------------------------------------
# Shared option handling


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SHRED_THREADS", "1")))
    except ValueError:
        raise ConfigError("SHRED_THREADS must be an integer")


def _collect_shapes(paths: list[str]) -> list[Path]:
    out: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            out.extend(sorted(p.glob("*.shrd")))
        elif p.exists():
            out.append(p)
        else:
            raise ConfigError(f"input path does not exist: {raw}")
    if not out:
        raise ConfigError("no input shapes")
    return out


def _parse_stage_path(value: str, flag: str) -> tuple[str, Path]:
    if ":" not in value:
        raise ConfigError(f"{flag} expects <stage>:<path>, got {value!r}")
    stage, path = value.split(":", 1)
    if stage not in STAGES:
        raise ConfigError(f"{flag} stage must be one of {STAGES}, got {stage!r}")
    return stage, Path(path)


def _operator_specs(args) -> dict[str, dict]:
    """Resolve --op/--record/--replay flags into per-stage operator specs."""
    specs: dict[str, dict] = {s: {"mode": "oracle"} for s in STAGES}

    def apply(stage: str, value: str) -> None:
        if value in ("oracle", "heuristic"):
            specs[stage] = {"mode": value}
        elif value.startswith("constant:"):
            if stage != "merge":
                raise ConfigError("constant scores exist for the merge stage only")
            specs[stage] = {"mode": "constant", "value": float(value.split(":", 1)[1])}
        elif value.startswith("replay:"):
            specs[stage] = {"mode": "replay", "_path": Path(value.split(":", 1)[1])}
        elif value.startswith("record:"):
            specs[stage] = {"mode": "record", "base": "oracle", "_path": Path(value.split(":", 1)[1])}
        else:
            raise ConfigError(f"unknown operator spec {value!r}")

    for entry in args.op or []:
        if "=" in entry:
            stage, value = entry.split("=", 1)
            if stage not in STAGES:
                raise ConfigError(f"--op stage must be one of {STAGES}, got {stage!r}")
            apply(stage, value)
        else:
            for stage in STAGES:
                apply(stage, entry)

    for entry in args.replay or []:
        stage, path = _parse_stage_path(entry, "--replay")
        specs[stage] = {"mode": "replay", "_path": path}
    for entry in args.record or []:
        stage, path = _parse_stage_path(entry, "--record")
        prior = specs[stage]
        if prior["mode"] in ("replay", "record"):
            base = "oracle"
            value = None
        else:
            base = prior["mode"]
            value = prior.get("value")
        specs[stage] = {"mode": "record", "base": base, "value": value, "_path": path}
    for entry in getattr(args, "request_log", None) or []:
        stage, path = _parse_stage_path(entry, "--request-log")
        if specs[stage]["mode"] != "record":
            raise ConfigError("--request-log needs --record (or --op <stage>=record:...) for the same stage")
        specs[stage]["log_requests"] = True
        specs[stage]["_reqlog_path"] = path

    for stage, spec in specs.items():
        if spec["mode"] == "replay":
            path = spec["_path"]
            if not path.exists():
                raise ConfigError(f"replay file does not exist: {path}")
    return specs


def _load_replay_records(path: Path) -> list[dict]:
    records = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        if obj.get("kind") in STAGES:
            records.append(obj)
    return records


def _wire_operators(specs: dict[str, dict], shape_id: str, replay_cache: dict) -> dict:
    """Per-shape operator payload; replay records are filtered per shape."""
    out = {}
    for stage, spec in specs.items():
        wire = {k: v for k, v in spec.items() if not k.startswith("_")}
        if spec["mode"] == "replay":
            path = spec["_path"]
            if path not in replay_cache:
                replay_cache[path] = _load_replay_records(path)
            wire["records"] = [
                r
                for r in replay_cache[path]
                if r["kind"] == stage and r["shape"] == shape_id
            ]
        if wire.get("value") is None:
            wire.pop("value", None)
        out[stage] = wire
    return out


def _config_payload(args) -> dict:
    cfg = {
        "fps_k": args.fps_k,
        "merge_threshold": args.threshold,
        "adjacency_threshold": args.adjacency_eps,
        "seed": args.seed,
    }
    for stage in args.stage_off or []:
        if stage not in STAGES:
            raise ConfigError(f"--stage-off must name one of {STAGES}, got {stage!r}")
        cfg[f"enable_{stage}"] = False
    return cfg


def _canonical_json(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_batch(items: list, fn, workers: int) -> tuple[list, list[tuple[str, str]]]:
    """Run fn(item) for every item, preserving order; returns (results, failures)."""
    results: list = [None] * len(items)
    failures: list[tuple[str, str]] = []
    if workers == 1:
        iterator = ((i, item) for i, item in enumerate(items))
        for i, item in iterator:
            try:
                results[i] = fn(item)
            except ShapeFailure as exc:
                failures.append((str(item), str(exc)))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(fn, item): i for i, item in enumerate(items)}
            for fut, i in futures.items():
                try:
                    results[i] = fut.result()
                except ShapeFailure as exc:
                    failures.append((str(items[i]), str(exc)))
    return results, failures


def _write_score_files(specs: dict[str, dict], responses: list[dict], config: dict) -> None:
    """Group recorded streams/request logs by flag target, in input shape order."""
    for stage, spec in specs.items():
        if spec["mode"] != "record":
            continue
        path = spec["_path"]
        lines = [
            json.dumps(
                {"kind": "meta", "version": FILE_FORMAT_VERSION, "config": config},
                sort_keys=True,
            )
        ]
        for resp in responses:
            if resp is None:
                continue
            for rec in resp.get("recorded", {}).get(stage, []):
                lines.append(json.dumps(rec, sort_keys=True))
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
        reqlog = spec.get("_reqlog_path")
        if reqlog is not None:
            entries = [
                json.dumps(
                    {"kind": "meta", "version": FILE_FORMAT_VERSION, "config": config},
                    sort_keys=True,
                )
            ]
            for resp in responses:
                if resp is None:
                    continue
                for rec in resp.get("request_log", []):
                    if rec["kind"] == stage:
                        entries.append(json.dumps(rec, sort_keys=True))
            reqlog.parent.mkdir(parents=True, exist_ok=True)
            reqlog.write_text("\n".join(entries) + "\n")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_decompose(args) -> int:
    shapes = _collect_shapes(args.shapes)
    specs = _operator_specs(args)
    config = _config_payload(args)
    client = ServiceClient(args.server)
    out = _out_dir(args)
    replay_cache: dict = {}

    def work(path: Path) -> dict:
        payload = {
            "shape_id": path.stem,
            "shrd": path.read_text(),
            "config": config,
            "operators": _wire_operators(specs, path.stem, replay_cache),
        }
        return client.post("/decompose", payload)

    responses, failures = _run_batch(shapes, work, _worker_count())
    for resp, path in zip(responses, shapes):
        if resp is None:
            continue
        doc = {k: resp[k] for k in ("version", "shape", "n", "labels", "trace", "config")}
        (out / f"{path.stem}.json").write_text(_canonical_json(doc))
    _write_score_files(specs, responses, config)
    for name, err in failures:
        print(f"error: {name}: {err}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def _parse_grid(spec: str) -> list[float]:
    try:
        lo, hi, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise ConfigError(f"--grid expects lo:hi:step, got {spec!r}")
    if step <= 0 or hi < lo:
        raise ConfigError("--grid needs step > 0 and hi >= lo")
    grid = []
    t = lo
    while t <= hi + 1e-9:
        grid.append(round(t, 6))
        t += step
    return grid


def cmd_sweep(args) -> int:
    shapes = _collect_shapes(args.shapes)
    specs = _operator_specs(args)
    for stage, spec in specs.items():
        if stage == "merge" and spec["mode"] in ("replay", "record"):
            raise ConfigError("sweep needs a stateless merge operator (no record/replay)")
    config = _config_payload(args)
    thresholds = _parse_grid(args.grid)
    client = ServiceClient(args.server)
    out = _out_dir(args)
    replay_cache: dict = {}

    def work(path: Path) -> dict:
        payload = {
            "shape_id": path.stem,
            "shrd": path.read_text(),
            "config": config,
            "operators": _wire_operators(specs, path.stem, replay_cache),
            "thresholds": thresholds,
        }
        return client.post("/sweep", payload)

    responses, failures = _run_batch(shapes, work, _worker_count())
    meta = json.dumps({"version": FILE_FORMAT_VERSION, "config": config}, sort_keys=True)
    for resp, path in zip(responses, shapes):
        if resp is None:
            continue
        lines = [f"# shred-sweep {meta}", "threshold,regions,purity"]
        for row in resp["rows"]:
            lines.append(f"{row['threshold']},{row['regions']},{row['purity']}")
        (out / f"{path.stem}-sweep.csv").write_text("\n".join(lines) + "\n")
    for name, err in failures:
        print(f"error: {name}: {err}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_eval(args) -> int:
    preds = []
    for raw in args.pred:
        p = Path(raw)
        if p.is_dir():
            preds.extend(sorted(p.glob("*.json")))
        elif p.exists():
            preds.append(p)
        else:
            raise ConfigError(f"prediction path does not exist: {raw}")
    if not preds:
        raise ConfigError("no prediction files")
    shapes = {p.stem: p for p in _collect_shapes(args.shapes)}
    client = ServiceClient(args.server)
    out = _out_dir(args)

    def work(pred_path: Path) -> dict:
        doc = json.loads(pred_path.read_text())
        shape_id = doc["shape"]
        if shape_id not in shapes:
            raise ShapeFailure(f"no shape file for prediction {shape_id!r}")
        payload = {
            "shape_id": shape_id,
            "shrd": shapes[shape_id].read_text(),
            "labels": doc["labels"],
        }
        return client.post("/eval", payload)

    responses, failures = _run_batch(preds, work, _worker_count())
    rows = []
    for resp in responses:
        if resp is None:
            continue
        doc = dict(resp)
        doc["version"] = FILE_FORMAT_VERSION
        (out / f"{resp['shape']}-eval.json").write_text(_canonical_json(doc))
        rows.append((resp["shape"], resp["regions"], resp["purity"], resp["aiou"]))

    header = f"{'shape':<24}{'regions':>8}{'purity':>10}{'aiou':>10}"
    print(header)
    print("-" * len(header))
    for shape_id, regions, purity, aiou_v in rows:
        print(f"{shape_id:<24}{regions:>8}{purity:>10.4f}{aiou_v:>10.4f}")
    csv_lines = [
        f"# shred-eval {json.dumps({'version': FILE_FORMAT_VERSION}, sort_keys=True)}",
        "shape,regions,purity,aiou",
    ]
    for shape_id, regions, purity, aiou_v in rows:
        csv_lines.append(f"{shape_id},{regions},{purity},{aiou_v}")
    if rows:
        mean_regions = sum(r[1] for r in rows) / len(rows)
        mean_purity = sum(r[2] for r in rows) / len(rows)
        mean_aiou = sum(r[3] for r in rows) / len(rows)
        print("-" * len(header))
        print(f"{'mean':<24}{mean_regions:>8.1f}{mean_purity:>10.4f}{mean_aiou:>10.4f}")
        csv_lines.append(f"mean,{mean_regions},{mean_purity},{mean_aiou}")
    (out / "aggregate.csv").write_text("\n".join(csv_lines) + "\n")
    for name, err in failures:
        print(f"error: {name}: {err}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_gendata(args) -> int:
    from .synthgen import write_shards

    shapes = _collect_shapes(args.shapes)
    client = ServiceClient(args.server)
    out = _out_dir(args)

    def work(path: Path) -> dict:
        payload = {
            "kind": args.kind,
            "shape_id": path.stem,
            "shrd": path.read_text(),
            "seed": args.seed,
            "fps_k": args.fps_k,
            "attempts": args.attempts,
            "adjacency_threshold": args.adjacency_eps,
        }
        return client.post("/gendata", payload)

    responses, failures = _run_batch(shapes, work, _worker_count())
    records: list[bytes] = []
    rejected = 0
    from .synthgen import iter_record_payloads
    import struct

    for resp in responses:
        if resp is None:
            continue
        blob = base64.b64decode(resp["records_b64"])
        for payload in iter_record_payloads(blob):
            records.append(struct.pack("<I", len(payload)) + payload)
        rejected += resp.get("rejected", 0)

    manifest = write_shards(
        records,
        out,
        args.kind,
        seeds=[args.seed],
        config={"fps_k": args.fps_k, "attempts": args.attempts, "kind": args.kind},
    )
    print(f"{args.kind}: {manifest['total']} examples in {len(manifest['shards'])} shard(s)")
    if args.kind == "fix":
        total = manifest["total"] + rejected
        rate = rejected / total if total else 0.0
        print(f"fix rejection rate: {rejected}/{total} ({rate:.1%})")
    for name, err in failures:
        print(f"error: {name}: {err}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_gen_shapes(args) -> int:
    client = ServiceClient(args.server)
    out = _out_dir(args)
    resp = client.post(
        "/genshapes", {"seed": args.seed, "count": args.count, "preset": args.preset}
    )
    for shape in resp["shapes"]:
        (out / f"{shape['id']}.shrd").write_text(shape["shrd"])
        print(f"{shape['id']}: {shape['n']} points, {shape['parts']} parts")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, shapes: bool = True) -> None:
    if shapes:
        p.add_argument("shapes", nargs="+", help="SHRD1 files or directories")
    p.add_argument("--server", default=None, help="remote service URL (default: in-process)")
    p.add_argument("--out", default="out", help="output directory")


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--op", action="append", metavar="[STAGE=]SPEC",
                   help="oracle|heuristic|constant:V|replay:PATH|record:PATH, per stage or global")
    p.add_argument("--record", action="append", metavar="STAGE:PATH",
                   help="record the stage's scores to a JSONL file")
    p.add_argument("--replay", action="append", metavar="STAGE:PATH",
                   help="replay the stage's scores from a JSONL file")
    p.add_argument("--request-log", action="append", metavar="STAGE:PATH",
                   help="also log request features while recording")
    p.add_argument("--threshold", type=float, default=0.5, help="merge threshold")
    p.add_argument("--fps-k", type=int, default=64, help="FPS centroid count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--adjacency-eps", type=float, default=0.025,
                   help="neighbor distance threshold")
    p.add_argument("--stage-off", action="append", metavar="STAGE",
                   help="disable a stage (split, fix, or merge)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shred", description=__doc__)
    parser.add_argument("--version", action="version", version=f"shred {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="run the pipeline over shapes")
    _add_common(p)
    _add_pipeline_flags(p)
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("sweep", help="merge-threshold sweep per shape")
    _add_common(p)
    _add_pipeline_flags(p)
    p.add_argument("--grid", default="0.01:0.99:0.01", help="lo:hi:step threshold grid")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("eval", help="score decomposition JSONs against ground truth")
    p.add_argument("pred", nargs="+", help="decomposition JSON files or directories")
    p.add_argument("--shapes", nargs="+", required=True, help="SHRD1 files or directories")
    p.add_argument("--server", default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gendata", help="generate training example shards")
    _add_common(p)
    p.add_argument("--kind", choices=STAGES, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fps-k", type=int, default=64)
    p.add_argument("--attempts", type=int, default=16, help="fix examples attempted per shape")
    p.add_argument("--adjacency-eps", type=float, default=0.025)
    p.set_defaults(fn=cmd_gendata)

    p = sub.add_parser("gen-shapes", help="write procedural labeled SHRD1 fixtures")
    _add_common(p, shapes=False)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", choices=("default", "small", "tiny"), default="default")
    p.set_defaults(fn=cmd_gen_shapes)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8040)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
