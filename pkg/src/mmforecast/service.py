"""Read-only HTTP/JSON facade over a trained checkpoint.

Endpoints list the corpus samples, serve predicted heatmaps with their
extracted modes, decode the forecast at any chosen grid cell (reporting the
populated cell actually used after fallback), and serve the per-cell action
label histograms. All handlers are pure functions of (state, request) over
immutable loaded models, so concurrent identical requests return
byte-identical bodies. JSON is rendered with sorted keys and no whitespace.
"""

from __future__ import annotations

import json
import mimetypes
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Sequence
from urllib.parse import parse_qs, urlparse

import numpy as np

from mmforecast.mining import Sample
from mmforecast.motionmap import CodebookMissError, extract_maxima
from mmforecast.pipeline import TrainedModels, forecast_at_cell


@dataclass(frozen=True)
class SessionState:
    models: TrainedModels
    samples: tuple[Sample, ...]
    checkpoint_hash: str
    static_dir: str | None = None  # explorer UI assets served at /

    def sample(self, sample_id: int) -> Sample | None:
        for s in self.samples:
            if s.id == sample_id:
                return s
        return None


def build_session(
    models: TrainedModels, samples: Sequence[Sample], static_dir: str | None = None
) -> SessionState:
    models.require_complete()
    ordered = tuple(sorted(samples, key=lambda s: s.id))
    return SessionState(
        models=models,
        samples=ordered,
        checkpoint_hash=models.digest(),
        static_dir=static_dir,
    )


def resolve_static(static_dir: str | None, path: str) -> Path | None:
    """File to serve for a URL path, or None to fall through to the API 404.

    '/' maps to index.html; lookups never escape the asset directory.
    """
    if static_dir is None:
        return None
    root = Path(static_dir).resolve()
    relative = path.lstrip("/") or "index.html"
    try:
        target = (root / relative).resolve()
    except OSError:
        return None
    if root not in target.parents and target != root:
        return None
    if target.is_dir():
        target = target / "index.html"
    return target if target.is_file() else None


def json_bytes(payload) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _error(status: int, message: str) -> tuple[int, dict]:
    return status, {"code": status, "message": message}


def pose_grid(frames: np.ndarray) -> list[list[float]]:
    """Frames (T, J, 3) as row-major flat [J*3] lists, one per frame."""
    return [frame.ravel().tolist() for frame in frames]


def handle_samples(state: SessionState) -> tuple[int, list]:
    return 200, [
        {
            "id": s.id,
            "action_label": s.action_label,
            "observed_frames": s.x.frame_count,
            "future_frames": s.y.frame_count,
        }
        for s in state.samples
    ]


def handle_motionmap(state: SessionState, sample_id: int) -> tuple[int, dict]:
    sample = state.sample(sample_id)
    if sample is None:
        return _error(404, f"unknown sample {sample_id}")
    cfg = state.models.map_config
    heatmap = state.models.heatmap.predict(sample.x)
    modes = extract_maxima(heatmap, cfg.maxima_threshold, cfg.nms_radius)
    return 200, {
        "m": cfg.grid_size,
        "values": heatmap.ravel().tolist(),
        "modes": [
            {"row": mode.cell[0], "col": mode.cell[1], "confidence": mode.confidence}
            for mode in modes
        ],
    }


def handle_forecast(
    state: SessionState, sample_id: int, row: int, col: int
) -> tuple[int, dict]:
    sample = state.sample(sample_id)
    if sample is None:
        return _error(404, f"unknown sample {sample_id}")
    m = state.models.map_config.grid_size
    if not (0 <= row < m and 0 <= col < m):
        return _error(400, f"cell ({row}, {col}) outside the {m}x{m} grid")
    try:
        result = forecast_at_cell(state.models, sample.x, (row, col))
    except CodebookMissError as err:
        return _error(422, str(err))
    t, j = result.uncertainty.shape
    return 200, {
        "frames": pose_grid(result.forecast.frames),
        "reconstruction": pose_grid(result.reconstruction.frames),
        "uncertainty": {"rows": t, "cols": j, "values": result.uncertainty.ravel().tolist()},
        "used_cell": [result.used_cell[0], result.used_cell[1]],
    }


def handle_actionmap(state: SessionState, sample_id: int) -> tuple[int, dict]:
    sample = state.sample(sample_id)
    if sample is None:
        return _error(404, f"unknown sample {sample_id}")
    histograms = state.models.action_histograms or {}
    return 200, {
        "cells": [
            {"row": cell[0], "col": cell[1], "label_histogram": histograms[cell]}
            for cell in sorted(histograms)
        ]
    }


def handle_healthz(state: SessionState) -> tuple[int, dict]:
    return 200, {"status": "ok", "checkpoint_hash": state.checkpoint_hash}


def _int_param(params: dict, name: str) -> int:
    values = params.get(name)
    if not values or len(values) != 1:
        raise ValueError(f"missing query parameter {name!r}")
    return int(values[0])


def route_request(state: SessionState, target: str) -> tuple[int, object]:
    """Dispatch a request target like '/api/forecast?sample=3&row=1&col=2'."""
    parsed = urlparse(target)
    params = parse_qs(parsed.query)
    try:
        if parsed.path == "/api/samples":
            return handle_samples(state)
        if parsed.path == "/api/motionmap":
            return handle_motionmap(state, _int_param(params, "sample"))
        if parsed.path == "/api/forecast":
            return handle_forecast(
                state,
                _int_param(params, "sample"),
                _int_param(params, "row"),
                _int_param(params, "col"),
            )
        if parsed.path == "/api/actionmap":
            return handle_actionmap(state, _int_param(params, "sample"))
        if parsed.path == "/healthz":
            return handle_healthz(state)
    except ValueError as err:
        return _error(400, str(err))
    return _error(404, f"unknown path {parsed.path!r}")


class _ExplorerHandler(BaseHTTPRequestHandler):
    def do_GET(self):  # noqa: N802 (http.server API)
        path = urlparse(self.path).path
        if not path.startswith("/api/") and path != "/healthz":
            asset = resolve_static(self.server.state.static_dir, path)
            if asset is not None:
                body = asset.read_bytes()
                content_type = mimetypes.guess_type(asset.name)[0] or "application/octet-stream"
                self._reply(200, content_type, body)
                return
        status, payload = route_request(self.server.state, self.path)
        self._reply(status, "application/json", json_bytes(payload))

    def _reply(self, status: int, content_type: str, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt, *args):
        pass  # keep stdout clean; the CLI reports the bound address once


class ExplorerServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, state: SessionState, port: int, host: str = "127.0.0.1"):
        super().__init__((host, port), _ExplorerHandler)
        self.state = state


def make_server(state: SessionState, port: int, host: str = "127.0.0.1") -> ExplorerServer:
    return ExplorerServer(state, port, host)
