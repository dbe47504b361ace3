from __future__ import annotations

import socket
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import pytest


def run_shred(*args: str) -> subprocess.CompletedProcess:
    """Drive the decomposition service's CLI in a subprocess."""
    return subprocess.run(
        [sys.executable, "-m", "shred.cli", *args],
        capture_output=True,
        text=True,
    )


@dataclass
class Workspace:
    root: Path
    shapes: Path
    shards: Path
    oracle_runs: Path
    scores: dict[str, Path]  # recorded oracle responses per stage
    request_logs: dict[str, Path]
    fps_k: int = 4
    adjacency: float = 0.02
    seed: int = 3

    @property
    def config(self) -> dict:
        return {
            "seed": self.seed,
            "fps_k": self.fps_k,
            "adjacency_threshold": self.adjacency,
        }

    def pipeline_flags(self) -> list[str]:
        return [
            "--seed", str(self.seed),
            "--fps-k", str(self.fps_k),
            "--adjacency-eps", str(self.adjacency),
        ]

    def shape_files(self) -> list[Path]:
        return sorted(self.shapes.glob("*.shrd"))


@pytest.fixture(scope="session")
def workspace(tmp_path_factory) -> Workspace:
    """Five tiny labeled fixtures, split shards, and a fully recorded oracle run.

    The pipeline runs at fps_k=4 to keep the merge-request space small enough
    for desk-scale memorization.
    """
    root = tmp_path_factory.mktemp("trainer-ws")
    shapes = root / "shapes"
    proc = run_shred(
        "gen-shapes", "--count", "5", "--seed", "600", "--preset", "tiny",
        "--out", str(shapes),
    )
    assert proc.returncode == 0, proc.stderr

    shards = root / "shards"
    proc = run_shred(
        "gendata", str(shapes), "--kind", "split", "--seed", "0", "--fps-k", "8",
        "--out", str(shards),
    )
    assert proc.returncode == 0, proc.stderr

    ws = Workspace(
        root=root, shapes=shapes, shards=shards, oracle_runs=root / "oracle-runs",
        scores={}, request_logs={},
    )
    record_flags = []
    for stage in ("split", "fix", "merge"):
        ws.scores[stage] = root / f"{stage}-scores.jsonl"
        ws.request_logs[stage] = root / f"{stage}-requests.jsonl"
        record_flags += [
            "--record", f"{stage}:{ws.scores[stage]}",
            "--request-log", f"{stage}:{ws.request_logs[stage]}",
        ]
    proc = run_shred(
        "decompose", str(shapes), *ws.pipeline_flags(),
        "--out", str(ws.oracle_runs), *record_flags,
    )
    assert proc.returncode == 0, proc.stderr
    return ws


@pytest.fixture(scope="session")
def service_url() -> str:
    """A live decomposition service for keyed-replay loops."""
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    server = subprocess.Popen(
        [sys.executable, "-m", "shred.cli", "serve", "--port", str(port)],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    url = f"http://127.0.0.1:{port}"
    deadline = time.time() + 30
    while time.time() < deadline:
        try:
            with socket.create_connection(("127.0.0.1", port), timeout=1.0):
                break
        except OSError:
            time.sleep(0.2)
    else:
        server.terminate()
        raise RuntimeError("service did not come up")
    yield url
    server.terminate()
    server.wait(timeout=10)
