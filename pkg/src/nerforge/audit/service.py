"""HTTP API over the audit store, plus static serving for the auditor UI.

Endpoints (JSON bodies, UTF-8):

    GET  /api/queue?status=pending        item summaries
    GET  /api/item/{id}                   full item
    POST /api/item/{id}/decision          {"auditor_id", "tags", "version"?}
    GET  /api/progress                    iteration report history
    POST /api/iterate                     trigger the next loop iteration

Tags travel as label strings in TagSet order.  Errors come back as
{"error": {"code", "message"}} with a 4xx status; the store state is
untouched when a request is rejected.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .loop import AuditLoop
from .store import (
    AlreadyResolvedError,
    AuditError,
    AuditStore,
    DuplicateAuditorError,
    InvalidTagsError,
    UnknownItemError,
    VersionConflictError,
)

log = logging.getLogger(__name__)

_STATUS_BY_ERROR = {
    InvalidTagsError: 400,
    UnknownItemError: 404,
    DuplicateAuditorError: 409,
    AlreadyResolvedError: 409,
    VersionConflictError: 409,
}


class AuditApiServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, store: AuditStore, loop: AuditLoop | None, ui_dir: Path | None):
        super().__init__(address, _Handler)
        self.store = store
        self.loop = loop
        self.ui_dir = ui_dir
        self.iterate_lock = threading.Lock()


class _Handler(BaseHTTPRequestHandler):
    server: AuditApiServer

    def log_message(self, fmt, *args):  # quiet by default
        log.debug("%s - %s", self.address_string(), fmt % args)

    # -- plumbing --------------------------------------------------------
    def _send_json(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self._cors()
        self.end_headers()
        self.wfile.write(body)

    def _send_error(self, code: int, error_code: str, message: str) -> None:
        self._send_json(code, {"error": {"code": error_code, "message": message}})

    def _cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            parsed = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise InvalidTagsError(f"malformed JSON body: {exc}") from exc
        if not isinstance(parsed, dict):
            raise InvalidTagsError("body must be a JSON object")
        return parsed

    # -- methods ----------------------------------------------------------
    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.end_headers()

    def do_GET(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts[:2] == ["api", "queue"]:
                query = parse_qs(url.query)
                status = query.get("status", [None])[0]
                items = self.server.store.items(status=status)
                self._send_json(200, {"items": [i.summary() for i in items]})
            elif parts[:2] == ["api", "item"] and len(parts) == 3:
                item = self.server.store.get(parts[2])
                self._send_json(200, item.to_record())
            elif parts[:2] == ["api", "progress"]:
                self._send_json(200, {"reports": self.server.store.reports})
            elif parts[:1] != ["api"]:
                self._serve_static(url.path)
            else:
                self._send_error(404, "NotFound", f"no route {url.path}")
        except AuditError as exc:
            self._send_error(_STATUS_BY_ERROR.get(type(exc), 400), exc.code, str(exc))
        except ValueError as exc:
            self._send_error(400, "BadRequest", str(exc))

    def do_POST(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts[:2] == ["api", "item"] and len(parts) == 4 and parts[3] == "decision":
                body = self._read_body()
                if "auditor_id" not in body or "tags" not in body:
                    raise InvalidTagsError("body needs auditor_id and tags")
                item = self.server.store.record_decision(
                    parts[2],
                    body["auditor_id"],
                    body["tags"],
                    expected_version=body.get("version"),
                )
                self._send_json(200, item.to_record())
            elif parts[:2] == ["api", "iterate"]:
                self._handle_iterate()
            else:
                self._send_error(404, "NotFound", f"no route {url.path}")
        except AuditError as exc:
            self._send_error(_STATUS_BY_ERROR.get(type(exc), 400), exc.code, str(exc))
        except ValueError as exc:
            self._send_error(400, "BadRequest", str(exc))

    def _handle_iterate(self):
        loop = self.server.loop
        if loop is None:
            self._send_error(409, "NoLoop", "this server has no training loop configured")
            return
        if not self.server.iterate_lock.acquire(blocking=False):
            self._send_error(409, "Busy", "an iteration is already running")
            return
        try:
            report = loop.iterate()
            self._send_json(200, report.to_record())
        except Exception as exc:  # surfaced, never half-applied: store appends are atomic
            log.exception("iteration failed")
            self._send_error(500, "IterationFailed", str(exc))
        finally:
            self.server.iterate_lock.release()

    def _serve_static(self, path: str) -> None:
        ui_dir = self.server.ui_dir
        if ui_dir is None:
            self._send_error(404, "NotFound", "no UI bundle configured")
            return
        rel = path.lstrip("/") or "index.html"
        target = (ui_dir / rel).resolve()
        if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
            self._send_error(404, "NotFound", f"no asset {path}")
            return
        body = target.read_bytes()
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self._cors()
        self.end_headers()
        self.wfile.write(body)


def serve_audit_api(
    store: AuditStore,
    host: str = "127.0.0.1",
    port: int = 8321,
    loop: AuditLoop | None = None,
    ui_dir: str | Path | None = None,
) -> AuditApiServer:
    """Bind and return the server; callers run serve_forever() or a thread."""
    server = AuditApiServer((host, port), store, loop, Path(ui_dir) if ui_dir else None)
    return server


def run_in_thread(server: AuditApiServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
