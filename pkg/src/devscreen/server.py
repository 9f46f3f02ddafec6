"""HTTP service for triage sessions.

Serves the JSON API consumed by the review UI plus the static UI bundle
itself. One server owns one session; mutations all funnel through
``record_decision`` under a lock, reads are lock-free snapshots.
"""
from __future__ import annotations

import json
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import urlparse

from .triage import TriageError, TriageSession, combined_metrics, export_labels, record_decision

API_PREFIX = "/api/"


class ServerError(Exception):
    """Raised when the service cannot start."""


def _parse_bind(bind: str | tuple[str, int]) -> tuple[str, int]:
    if isinstance(bind, tuple):
        return bind
    host, sep, port = bind.rpartition(":")
    if not sep:
        raise ServerError(f"bind address {bind!r} must look like host:port")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError as exc:
        raise ServerError(f"bind address {bind!r}: port not an integer") from exc


class _TriageRequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    # set by serve_triage on the handler subclass:
    session: TriageSession
    write_lock: threading.Lock
    ui_dir: Path | None
    quiet: bool = True

    def log_message(self, fmt: str, *args) -> None:  # noqa: A003
        if not self.quiet:
            super().log_message(fmt, *args)

    # -- plumbing ----------------------------------------------------------

    def _send_json(self, payload: dict, status: int = 200) -> None:
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_text(self, text: str, content_type: str, status: int = 200) -> None:
        body = text.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, status: int, message: str) -> None:
        self._send_json({"error": message}, status=status)

    # -- API ----------------------------------------------------------------

    def do_GET(self) -> None:  # noqa: N802
        path = urlparse(self.path).path
        if path.startswith(API_PREFIX):
            self._api_get(path[len(API_PREFIX):])
        else:
            self._static(path)

    def do_POST(self) -> None:  # noqa: N802
        path = urlparse(self.path).path
        if path != API_PREFIX + "label":
            self._send_error_json(404, f"unknown endpoint {path}")
            return
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            body = json.loads(raw.decode("utf-8") or "{}")
        except json.JSONDecodeError as exc:
            self._send_error_json(400, f"invalid JSON body: {exc.msg}")
            return
        project_id = str(body.get("project_id", ""))
        decision = str(body.get("decision", "")).upper()
        note = str(body.get("note", "") or "")
        session = self.session
        with self.write_lock:
            try:
                record_decision(session, project_id, decision, note)
            except TriageError as exc:
                known = any(i.project_id == project_id for i in session.queue)
                self._send_error_json(404 if not known else 400, str(exc))
                return
            pending = session.counts()["pending"]
        self._send_json({"ok": True, "pending": pending})

    def _api_get(self, endpoint: str) -> None:
        session = self.session
        if endpoint == "session":
            payload = dict(session.counts())
            payload["session_id"] = session.session_id
            payload["effort"] = session.effort
            self._send_json(payload)
        elif endpoint == "next":
            pending = session.pending()
            if pending:
                self._send_json(pending[0].as_api_dict(session.criteria_text))
            else:
                self._send_json({"empty": True, "pending": 0})
        elif endpoint.startswith("item/"):
            project_id = endpoint[len("item/"):]
            try:
                item = session.item(project_id)
            except TriageError as exc:
                self._send_error_json(404, str(exc))
                return
            self._send_json(item.as_api_dict(session.criteria_text))
        elif endpoint == "metrics":
            self._send_json(combined_metrics(session).as_dict())
        elif endpoint == "export":
            self._send_text(export_labels(session), "application/x-ndjson; charset=utf-8")
        else:
            self._send_error_json(404, f"unknown endpoint /api/{endpoint}")

    # -- static UI ------------------------------------------------------------

    def _static(self, path: str) -> None:
        if self.ui_dir is None:
            self._send_text("triage API only; no UI bundle configured\n",
                            "text/plain; charset=utf-8", status=404)
            return
        name = path.lstrip("/") or "index.html"
        target = (self.ui_dir / name).resolve()
        root = self.ui_dir.resolve()
        if root not in target.parents and target != root:
            self._send_text("not found\n", "text/plain; charset=utf-8", status=404)
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            self._send_text("not found\n", "text/plain; charset=utf-8", status=404)
            return
        content_type = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class TriageHandle:
    """A running service; ``shutdown()`` stops it and joins the thread."""

    def __init__(self, server: ThreadingHTTPServer, thread: threading.Thread | None):
        self._server = server
        self._thread = thread

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return str(host), int(port)

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def wait(self) -> None:
        """Block until the server thread exits (joining in short slices
        so KeyboardInterrupt still lands)."""
        while self._thread is not None and self._thread.is_alive():
            self._thread.join(timeout=0.5)

    def shutdown(self) -> None:
        self._server.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=10)
        self._server.server_close()


def serve_triage(session: TriageSession, bind: str | tuple[str, int] = ("127.0.0.1", 0),
                 ui_dir: str | Path | None = None, block: bool = False,
                 quiet: bool = True) -> TriageHandle:
    """Start the service. With ``block=False`` (default) it runs on a
    daemon thread and the returned handle controls shutdown."""
    host, port = _parse_bind(bind)
    handler = type("BoundTriageHandler", (_TriageRequestHandler,), {
        "session": session,
        "write_lock": threading.Lock(),
        "ui_dir": Path(ui_dir) if ui_dir is not None else None,
        "quiet": quiet,
    })
    try:
        server = ThreadingHTTPServer((host, port), handler)
    except OSError as exc:
        raise ServerError(f"cannot bind {host}:{port}: {exc}") from exc
    server.daemon_threads = True
    if block:
        handle = TriageHandle(server, None)
        try:
            handle.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()
        return handle
    thread = threading.Thread(target=server.serve_forever, name="triage-http", daemon=True)
    thread.start()
    return TriageHandle(server, thread)
