"""Prediction service: fold-in inference, export formats, and the HTTP API.

The service holds one immutable trained model (plus an optional technique
name catalog) and answers stateless prediction requests, so concurrent
requests share everything read-only.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Mapping

import numpy as np

from .dataset import TECHNIQUE_ID_RE
from .errors import (
    EmptyInputError,
    EmptyObservationError,
    InvalidRequestError,
    InvalidTechniqueIdError,
    TechInferError,
)
from .evaluation import rank_items
from .model import SIMILARITIES, FactorModel
from .wmf import fold_in

logger = logging.getLogger(__name__)

NAVIGATOR_LAYER_VERSION = "4.5"

# Fold-in weights when serving a model file (which does not carry training
# hyperparameters); defaults follow the tuned WMF configuration.
DEFAULT_FOLD_NEGATIVE_WEIGHT = 0.001
DEFAULT_FOLD_REGULARIZATION = 1e-5


@dataclass(frozen=True)
class PredictRequest:
    observed: tuple[str, ...]
    k: int = 20
    similarity: str | None = None  # None defers to the model's default


@dataclass(frozen=True)
class Prediction:
    technique_id: str
    score: float
    rank: int
    technique_name: str | None = None


@dataclass(frozen=True)
class PredictResponse:
    predictions: tuple[Prediction, ...]
    unknown_ids: tuple[str, ...]


def parse_predict_request(payload: object) -> PredictRequest:
    """Validate a JSON request body into a :class:`PredictRequest`."""
    if not isinstance(payload, dict):
        raise InvalidRequestError("request body must be a JSON object")
    observed = payload.get("observed")
    if not isinstance(observed, list) or not observed:
        raise EmptyObservationError("observed must be a nonempty list of technique ids")
    for tid in observed:
        if not isinstance(tid, str) or not TECHNIQUE_ID_RE.match(tid):
            raise InvalidTechniqueIdError(f"invalid technique id {tid!r}")
    k = payload.get("k", 20)
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise InvalidRequestError("k must be a positive integer")
    similarity = payload.get("similarity")
    if similarity is not None and similarity not in SIMILARITIES:
        raise InvalidRequestError(f"similarity must be one of {SIMILARITIES}")
    return PredictRequest(observed=tuple(observed), k=k, similarity=similarity)


def predict(
    model: FactorModel,
    req: PredictRequest,
    names: Mapping[str, str] | None = None,
    fold_negative_weight: float = DEFAULT_FOLD_NEGATIVE_WEIGHT,
    fold_regularization: float = DEFAULT_FOLD_REGULARIZATION,
) -> PredictResponse:
    """Fold the observed techniques into the item space and rank the rest.

    Ids absent from the model catalog are collected in ``unknown_ids``;
    only when every id is unknown does the request fail.  The observed
    techniques never appear among the predictions.
    """
    if req.k < 1:
        raise InvalidRequestError("k must be >= 1")
    index = {tid: j for j, tid in enumerate(model.item_catalog)}
    known: list[int] = []
    unknown: list[str] = []
    for tid in req.observed:
        j = index.get(tid)
        if j is None:
            unknown.append(tid)
        else:
            known.append(j)
    if not known:
        raise EmptyObservationError("no observed technique id is in the model catalog")
    embedding = fold_in(model.V, known, fold_negative_weight, fold_regularization)
    similarity = req.similarity or model.similarity
    ranked = rank_items(model, embedding, exclude=known, similarity=similarity)
    predictions = tuple(
        Prediction(
            technique_id=model.item_catalog[item],
            technique_name=(names or {}).get(model.item_catalog[item]),
            score=score,
            rank=rank,
        )
        for item, score, rank in ranked
    )[: req.k]
    return PredictResponse(predictions=predictions, unknown_ids=tuple(unknown))


def response_to_json(resp: PredictResponse) -> dict:
    predictions = []
    for p in resp.predictions:
        entry: dict = {"technique_id": p.technique_id}
        if p.technique_name is not None:
            entry["technique_name"] = p.technique_name
        entry["score"] = p.score
        entry["rank"] = p.rank
        predictions.append(entry)
    return {"predictions": predictions, "unknown_ids": list(resp.unknown_ids)}


def export_navigator_layer(resp: PredictResponse, name: str) -> bytes:
    """Technique-matrix annotation layer with scores min-max scaled to [0, 100].

    A constant score set maps to 100 everywhere.  Key order is fixed so the
    export is byte-stable for a given response.
    """
    if not resp.predictions:
        raise EmptyInputError("nothing to export: empty prediction list")
    scores = np.array([p.score for p in resp.predictions], dtype=np.float64)
    lo, hi = float(scores.min()), float(scores.max())
    if hi > lo:
        scaled = (scores - lo) / (hi - lo) * 100.0
    else:
        scaled = np.full_like(scores, 100.0)
    doc = {
        "name": name,
        "versions": {"layer": NAVIGATOR_LAYER_VERSION},
        "domain": "enterprise-attack",
        "techniques": [
            {"techniqueID": p.technique_id, "score": float(s)}
            for p, s in zip(resp.predictions, scaled)
        ],
    }
    return json.dumps(doc, indent=2).encode("utf-8")


def export_csv(resp: PredictResponse) -> bytes:
    lines = ["rank,technique_id,score"]
    for p in resp.predictions:
        lines.append(f"{p.rank},{p.technique_id},{float(p.score)!r}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_names(path: str | Path) -> dict[str, str]:
    """Optional local technique-name catalog: JSON object id -> display name."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise InvalidRequestError("names catalog must be a JSON object")
    return {str(k): str(v) for k, v in doc.items()}


@dataclass
class ServiceState:
    """Everything a request handler reads; immutable after startup."""

    model: FactorModel
    names: Mapping[str, str] = field(default_factory=dict)
    fold_negative_weight: float = DEFAULT_FOLD_NEGATIVE_WEIGHT
    fold_regularization: float = DEFAULT_FOLD_REGULARIZATION
    static_dir: Path | None = None


_ERROR_STATUS = {
    "empty-observation": 422,
    "invalid-technique-id": 422,
    "invalid-request": 422,
    "empty-input": 422,
}

class _BadJson(Exception):
    pass


_STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
    ".png": "image/png",
    ".map": "application/json",
}


def _make_handler(state: ServiceState) -> type[BaseHTTPRequestHandler]:
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt: str, *args) -> None:
            logger.debug("%s " + fmt, self.address_string(), *args)

        def _send(self, status: int, body: bytes, content_type: str) -> None:
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _send_json(self, status: int, payload: object) -> None:
            self._send(status, json.dumps(payload).encode("utf-8"), "application/json")

        def _send_error(self, status: int, code: str, message: str) -> None:
            self._send_json(status, {"error": {"code": code, "message": message}})

        def _read_json(self) -> object:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length)
            try:
                return json.loads(raw.decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise _BadJson(str(exc)) from exc

        def do_OPTIONS(self) -> None:  # CORS preflight for the browser UI
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self) -> None:
            path = self.path.split("?", 1)[0]
            if path == "/api/health":
                self._send_json(200, {"status": "ok"})
            elif path == "/api/model":
                m = state.model
                self._send_json(
                    200,
                    {
                        "trained_by": m.trained_by,
                        "d": m.d,
                        "m": m.m,
                        "n": m.n,
                        "similarity": m.similarity,
                    },
                )
            elif path == "/api/techniques":
                payload = [
                    {"id": tid, "name": state.names.get(tid)}
                    for tid in state.model.item_catalog
                ]
                self._send_json(200, payload)
            elif state.static_dir is not None and not path.startswith("/api/"):
                self._serve_static(path)
            else:
                self._send_error(404, "not-found", f"no route for {path}")

        def _serve_static(self, path: str) -> None:
            rel = path.lstrip("/") or "index.html"
            target = (state.static_dir / rel).resolve()
            root = state.static_dir.resolve()
            if root not in target.parents and target != root:
                self._send_error(404, "not-found", "outside static root")
                return
            if target.is_dir():
                target = target / "index.html"
            if not target.is_file():
                # SPA fallback keeps client-side routes working.
                target = root / "index.html"
                if not target.is_file():
                    self._send_error(404, "not-found", f"no file for {path}")
                    return
            ctype = _STATIC_TYPES.get(target.suffix, "application/octet-stream")
            self._send(200, target.read_bytes(), ctype)

        def do_POST(self) -> None:
            path = self.path.split("?", 1)[0]
            if path not in ("/api/predict", "/api/export/csv", "/api/export/navigator"):
                self._send_error(404, "not-found", f"no route for {path}")
                return
            try:
                payload = self._read_json()
                req = parse_predict_request(payload)
                resp = predict(
                    state.model,
                    req,
                    names=state.names,
                    fold_negative_weight=state.fold_negative_weight,
                    fold_regularization=state.fold_regularization,
                )
                if path == "/api/predict":
                    self._send_json(200, response_to_json(resp))
                elif path == "/api/export/csv":
                    self._send(200, export_csv(resp), "text/csv; charset=utf-8")
                else:
                    name = "inferred-techniques"
                    if isinstance(payload, dict) and isinstance(payload.get("name"), str):
                        name = payload["name"]
                    body = export_navigator_layer(resp, name)
                    self._send(200, body, "application/json")
            except _BadJson as exc:
                self._send_error(400, "invalid-json", f"request body is not valid JSON: {exc}")
            except TechInferError as exc:
                status = _ERROR_STATUS.get(exc.code, 400)
                self._send_error(status, exc.code, str(exc))
            except Exception:
                logger.exception("unhandled error serving %s", path)
                self._send_error(500, "internal", "internal server error")

    return Handler


def make_server(state: ServiceState, bind_address: str = "127.0.0.1:8000") -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; callers own its lifecycle."""
    state.model.validate()
    host, _, port = bind_address.partition(":")
    server = ThreadingHTTPServer((host or "127.0.0.1", int(port or 8000)), _make_handler(state))
    return server


def serve_http(state: ServiceState, bind_address: str = "127.0.0.1:8000") -> None:
    """Run the service until interrupted."""
    server = make_server(state, bind_address)
    host, port = server.server_address[:2]
    logger.info("serving on http://%s:%s", host, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def start_background_server(
    state: ServiceState, bind_address: str = "127.0.0.1:0"
) -> tuple[ThreadingHTTPServer, threading.Thread]:
    """Start the service on a daemon thread; useful for tests and embedding."""
    server = make_server(state, bind_address)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread
