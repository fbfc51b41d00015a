"""In-process HTTP test double for the remote segmentation protocol.

Serves canned detect/select answers and replays scripted masks for sessions.
Failure modes (malformed JSON, HTTP 500, out-of-bounds boxes, wrong track
keys) can be switched on per route to exercise client-side validation.
"""

from __future__ import annotations

import base64
import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..core import BinaryMask
from ..episode_io import encode_mask_png

FAILURE_MODES = ("malformed_json", "http_500", "bad_box", "wrong_keys")


def _encode_mask(mask: BinaryMask) -> str:
    return base64.b64encode(encode_mask_png(mask)).decode("ascii")


@dataclass
class MockRemoteState:
    """Mutable behavior shared between a test and the running server."""

    # prompt -> [x0, y0, x1, y1]; prompts not listed answer not_found
    detect_boxes: dict[str, list[int]] = field(default_factory=dict)
    # region ids returned by /select
    select_ids: list[int] = field(default_factory=list)
    # masks for /segment/init, keyed by server track key (box_<i> or keypoint label)
    init_masks: dict[str, BinaryMask] = field(default_factory=dict)
    # scripted masks per propagate call; when exhausted the last entry repeats,
    # and when empty the init masks repeat
    propagate_masks: list[dict[str, BinaryMask]] = field(default_factory=list)
    # route -> failure mode
    failures: dict[str, str] = field(default_factory=dict)
    # counters a test can observe
    session_counter: int = 0
    propagate_calls: dict[str, int] = field(default_factory=dict)

    def fail_next(self, route: str, mode: str) -> None:
        if mode not in FAILURE_MODES:
            raise ValueError(f"unknown failure mode {mode!r}")
        self.failures[route] = mode

    def clear_failures(self) -> None:
        self.failures.clear()


class _Handler(BaseHTTPRequestHandler):
    state: MockRemoteState  # assigned by MockRemoteServer

    def log_message(self, fmt, *args):  # silence request logging in tests
        pass

    def _send_json(self, payload: dict, status: int = 200) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_raw(self, body: bytes, status: int = 200) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self) -> None:  # noqa: N802 (http.server API)
        state = self.state
        length = int(self.headers.get("Content-Length", "0"))
        try:
            request = json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            self._send_json({"error": "bad request"}, status=400)
            return

        failure = state.failures.pop(self.path, None)
        if failure == "http_500":
            self._send_json({"error": "boom"}, status=500)
            return
        if failure == "malformed_json":
            self._send_raw(b"{not json at all", status=200)
            return

        if self.path == "/detect":
            box = state.detect_boxes.get(request.get("prompt", ""))
            if failure == "bad_box":
                self._send_json({"box": [50, 50, 10, 10]})
            elif box is None:
                self._send_json({"not_found": True})
            else:
                self._send_json({"box": list(box)})
            return

        if self.path == "/select":
            self._send_json({"ids": list(state.select_ids)})
            return

        if self.path == "/segment/init":
            state.session_counter += 1
            session_id = f"session-{state.session_counter}"
            state.propagate_calls[session_id] = 0
            masks = {k: _encode_mask(m) for k, m in state.init_masks.items()}
            if failure == "wrong_keys":
                masks = {f"bogus_{k}": v for k, v in masks.items()}
            self._send_json({"session_id": session_id, "masks": masks})
            return

        if self.path == "/segment/propagate":
            session_id = request.get("session_id", "")
            if session_id not in state.propagate_calls:
                self._send_json({"error": "unknown session"}, status=404)
                return
            call_index = state.propagate_calls[session_id]
            state.propagate_calls[session_id] = call_index + 1
            if state.propagate_masks:
                step = state.propagate_masks[min(call_index, len(state.propagate_masks) - 1)]
            else:
                step = state.init_masks
            masks = {k: _encode_mask(m) for k, m in step.items()}
            if failure == "wrong_keys":
                masks = {f"bogus_{k}": v for k, v in masks.items()}
            self._send_json({"masks": masks})
            return

        self._send_json({"error": "no such route"}, status=404)


class MockRemoteServer:
    """Threaded HTTP server bound to an ephemeral localhost port."""

    def __init__(self, state: MockRemoteState | None = None):
        self.state = state or MockRemoteState()
        handler = type("BoundHandler", (_Handler,), {"state": self.state})
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockRemoteServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "MockRemoteServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
