"""Newline-delimited JSON over TCP.

Requests::

    {"op": "enroll", "user": "u01", "windows": [[[t_a, x_a, ...8 values], ...], ...]}
    {"op": "enroll", "user": "u01", "window": [[...], ...], "replace": false}
    {"op": "verify", "user": "u01", "window": [[...], ...]}
    {"op": "reset",  "user": "u01"}
    {"op": "status", "user": "u01"}

An enroll ``window`` longer than the policy sample size is chunked into
windows. Responses are single lines: ``{"ok": true, ...}`` or
``{"ok": false, "error": <code>, "message": ...}``. The channel is plain
text; it is meant for a trusted link.
"""
from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading

import numpy as np

from ..decision import Policy
from ..errors import (AlreadyEnrolled, BindFailure, InsufficientWindows, SessionSuspended, UnknownUser,
                      WristTypeError)
from ..ingest import Recording, Window, chunk
from .core import AuthService
from .store import ProfileStore

log = logging.getLogger(__name__)

MAX_LINE = 64 * 1024 * 1024
ERROR_CODES = {
    UnknownUser: "unknown_user",
    SessionSuspended: "suspended",
    AlreadyEnrolled: "already_enrolled",
    InsufficientWindows: "insufficient_windows",
}


class BadRequest(Exception):
    pass


def _rows(obj, what):
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise BadRequest(f"{what} must be an array of 8-value rows") from None
    if arr.ndim != 2 or arr.shape[1] != 8 or arr.shape[0] < 2:
        raise BadRequest(f"{what} must be an array of at least 2 rows of 8 values")
    if not np.all(np.isfinite(arr)):
        raise BadRequest(f"{what} contains non-finite values")
    return arr


def _user(req):
    user = req.get("user")
    if not isinstance(user, str) or not user:
        raise BadRequest("missing 'user'")
    return user


def handle_request(service: AuthService, req) -> dict:
    """Answer one decoded request; never raises for client errors."""
    try:
        if not isinstance(req, dict):
            raise BadRequest("request must be a JSON object")
        op = req.get("op")
        if op == "enroll":
            user = _user(req)
            if "windows" in req:
                if not isinstance(req["windows"], list):
                    raise BadRequest("'windows' must be a list")
                windows = [Window.from_rows(user, _rows(w, "window")) for w in req["windows"]]
            elif "window" in req:
                rec = Recording(user, 100.0, _rows(req["window"], "window"))
                windows = chunk(rec, service.policy.sample_size)
            else:
                raise BadRequest("enroll needs 'windows' or 'window'")
            profile = service.enroll(user, windows, bool(req.get("replace", False)))
            return {"ok": True, "templates": profile.n_templates}
        if op == "verify":
            user = _user(req)
            res = service.verify(user, Window.from_rows(user, _rows(req.get("window"), "window")))
            return {"ok": True, "decision": res.decision.value, "score": res.score,
                    "status": res.status.value, "updated": res.updated}
        if op == "reset":
            session = service.reset(_user(req))
            return {"ok": True, "status": session.status.value}
        if op == "status":
            return {"ok": True, **service.status(_user(req))}
        raise BadRequest(f"unknown op {op!r}")
    except BadRequest as exc:
        return {"ok": False, "error": "bad_request", "message": str(exc)}
    except WristTypeError as exc:
        code = next((c for t, c in ERROR_CODES.items() if isinstance(exc, t)), "bad_request")
        return {"ok": False, "error": code, "message": str(exc)}
    except ValueError as exc:
        return {"ok": False, "error": "bad_request", "message": str(exc)}


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            try:
                line = self.rfile.readline(MAX_LINE)
            except (ConnectionError, OSError):
                return
            if not line:
                return
            if not line.strip():
                continue
            try:
                req = json.loads(line)
            except (UnicodeDecodeError, ValueError):
                resp = {"ok": False, "error": "bad_request", "message": "malformed JSON"}
            else:
                try:
                    resp = handle_request(self.server.service, req)
                except Exception:  # keep the connection alive on internal faults
                    log.exception("internal error")
                    resp = {"ok": False, "error": "internal", "message": "internal error"}
            try:
                self.wfile.write((json.dumps(resp) + "\n").encode("utf-8"))
                self.wfile.flush()
            except (ConnectionError, OSError):
                return


class AuthServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, addr, service: AuthService):
        self.service = service
        try:
            super().__init__(addr, _Handler)
        except OSError as exc:
            raise BindFailure(f"cannot listen on {addr[0]}:{addr[1]}: {exc}") from exc

    @property
    def address(self) -> tuple:
        return self.server_address[:2]


def parse_listen(text: str) -> tuple:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"listen address must be host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def start_server(store_dir, policy: Policy = Policy(), host="127.0.0.1", port=0):
    """Serve in a background thread; returns (server, thread)."""
    server = AuthServer((host, port), AuthService(ProfileStore(store_dir), policy))
    thread = threading.Thread(target=server.serve_forever, name="auth-server", daemon=True)
    thread.start()
    log.info("listening on %s:%d", *server.address)
    return server, thread


def stop_server(server: AuthServer, thread=None):
    # the store writes through on every mutation, so nothing is left to flush
    server.shutdown()
    server.server_close()
    if thread is not None:
        thread.join()


class Client:
    """Blocking line-oriented client."""

    def __init__(self, host, port, timeout=30.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.rfile = self.sock.makefile("rb")

    def send_raw(self, line: bytes) -> dict:
        self.sock.sendall(line if line.endswith(b"\n") else line + b"\n")
        reply = self.rfile.readline()
        if not reply:
            raise ConnectionError("server closed the connection")
        return json.loads(reply)

    def call(self, **req) -> dict:
        return self.send_raw(json.dumps(req).encode("utf-8"))

    def enroll(self, user, windows, replace=False):
        return self.call(op="enroll", user=user, windows=[np.asarray(w).tolist() for w in windows],
                         replace=replace)

    def verify(self, user, window):
        return self.call(op="verify", user=user, window=np.asarray(window).tolist())

    def reset(self, user):
        return self.call(op="reset", user=user)

    def status(self, user):
        return self.call(op="status", user=user)

    def close(self):
        self.rfile.close()
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
