"""Stateless HTTP preview service.

Endpoints (all under /v1):
  * GET  /v1/health       liveness probe
  * POST /v1/validate     annotation JSON -> validation report
  * POST /v1/reconstruct  annotation JSON (+ config overrides) ->
                          multipart/form-data with a JSON run report part
                          ("report") and a binary glTF part ("model")

The service holds no state between requests; reconstructions run on a
bounded worker pool and time out with a 504 rather than queueing forever.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from anno3d import __version__
from anno3d.config import ReconstructionConfig
from anno3d.document import ParseError, parse
from anno3d.io_formats import encode_glb
from anno3d.pipeline import ReconstructionError, reconstruct_document
from anno3d.validation import validate

MAX_REQUEST_BYTES = 10 * 1024 * 1024
MULTIPART_BOUNDARY = "anno3d-preview-boundary"


def _multipart_response(report: dict, glb: bytes) -> Response:
    b = MULTIPART_BOUNDARY.encode("ascii")
    body = b"--" + b + b"\r\n"
    body += b'Content-Disposition: form-data; name="report"\r\n'
    body += b"Content-Type: application/json\r\n\r\n"
    body += json.dumps(report, sort_keys=True).encode("utf-8") + b"\r\n"
    body += b"--" + b + b"\r\n"
    body += b'Content-Disposition: form-data; name="model"; filename="preview.glb"\r\n'
    body += b"Content-Type: model/gltf-binary\r\n\r\n"
    body += glb + b"\r\n"
    body += b"--" + b + b"--\r\n"
    return Response(
        content=body,
        media_type=f"multipart/form-data; boundary={MULTIPART_BOUNDARY}",
    )


def create_app(
    base_config: ReconstructionConfig | None = None,
    request_timeout_s: float = 30.0,
    max_workers: int | None = None,
) -> FastAPI:
    app = FastAPI(title="anno3d preview service", version=__version__)
    app.state.base_config = base_config or ReconstructionConfig()
    app.state.timeout_s = request_timeout_s
    app.state.pool = ThreadPoolExecutor(max_workers=max_workers or os.cpu_count() or 2)

    async def _read_body(request: Request) -> bytes | JSONResponse:
        body = await request.body()
        if len(body) > MAX_REQUEST_BYTES:
            return JSONResponse({"error": "request_too_large", "limit_bytes": MAX_REQUEST_BYTES}, status_code=413)
        return body

    @app.get("/v1/health")
    async def health():
        return {"status": "ok", "version": __version__}

    @app.post("/v1/validate")
    async def validate_endpoint(request: Request):
        body = await _read_body(request)
        if isinstance(body, JSONResponse):
            return body
        try:
            doc = parse(body)
        except ParseError as exc:
            return JSONResponse({"error": exc.code, "path": exc.path}, status_code=400)
        return validate(doc).to_dict()

    @app.post("/v1/reconstruct")
    async def reconstruct_endpoint(request: Request):
        body = await _read_body(request)
        if isinstance(body, JSONResponse):
            return body
        try:
            payload = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return JSONResponse({"error": "bad_json", "detail": str(exc)}, status_code=400)

        if isinstance(payload, dict) and "document" in payload:
            doc_raw = payload["document"]
            overrides = payload.get("config") or {}
        else:
            doc_raw = payload
            overrides = {}
        try:
            doc = parse(json.dumps(doc_raw))
        except ParseError as exc:
            return JSONResponse({"error": exc.code, "path": exc.path}, status_code=400)
        try:
            config = app.state.base_config.with_overrides(**overrides)
        except (TypeError, ValueError) as exc:
            return JSONResponse({"error": "bad_config", "detail": str(exc)}, status_code=400)

        report = validate(doc)
        if not report.ok:
            return JSONResponse(report.to_dict(), status_code=400)

        future = app.state.pool.submit(reconstruct_document, doc, config, False)
        try:
            rec = future.result(timeout=app.state.timeout_s)
        except FutureTimeout:
            return JSONResponse(
                {
                    "error": "timeout",
                    "timeout_s": app.state.timeout_s,
                    "partial": {"image_id": doc.image_id, "stage": "reconstruction"},
                },
                status_code=504,
            )
        except ReconstructionError as exc:
            return JSONResponse({"error": exc.code, "detail": exc.detail}, status_code=422)

        glb = encode_glb(rec.mesh.vertices, rec.mesh.faces)
        return _multipart_response(rec.run_report(), glb)

    return app


def serve(port: int, host: str = "127.0.0.1", timeout_s: float = 30.0, config=None) -> None:
    import uvicorn

    uvicorn.run(create_app(config, request_timeout_s=timeout_s), host=host, port=port, log_level="info")
