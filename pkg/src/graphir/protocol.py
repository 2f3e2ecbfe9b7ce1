"""Newline-delimited JSON over a child process's standard streams.

One JSON object per line in each direction, one request in flight per
connection, responses in request order. Embedding providers answer

    {"op": "embed", "id": int, "texts": [...]}  ->  {"id": int, "vectors": [[...], ...]}
    {"op": "info"}                              ->  {"dim": int, "name": str}

and answer models use the same framing:

    {"op": "answer", "id": int, "prompt": str}  ->  {"id": int, "text": str}

A server signals a bad request with {"id": ..., "error": str} on the same
stream and keeps serving.
"""

from __future__ import annotations

import json
import os
import select
import shlex
import subprocess
import threading
from typing import Sequence

from .errors import TransportError


class StreamProcessClient:
    """Spawn a protocol server and exchange NDJSON messages with it."""

    def __init__(self, cmd: str | Sequence[str], timeout: float = 60.0):
        argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as exc:
            raise TransportError(f"cannot start {argv[0]!r}: {exc}")
        self._timeout = timeout
        self._buf = b""
        self._lock = threading.Lock()
        self._next_id = 0

    def _read_line(self, request_index: int | None) -> bytes:
        fd = self._proc.stdout.fileno()
        while b"\n" not in self._buf:
            ready, _, _ = select.select([fd], [], [], self._timeout)
            if not ready:
                raise TransportError("timed out waiting for response", request_index)
            chunk = os.read(fd, 65536)
            if not chunk:
                raise TransportError("server closed its output stream", request_index)
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def request(self, payload: dict, request_index: int | None = None) -> dict:
        """Send one object, block for one response line."""
        with self._lock:
            data = (json.dumps(payload) + "\n").encode("utf-8")
            try:
                self._proc.stdin.write(data)
                self._proc.stdin.flush()
            except (BrokenPipeError, ValueError) as exc:
                raise TransportError(f"cannot write to server: {exc}", request_index)
            line = self._read_line(request_index)
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TransportError(f"response is not valid JSON: {exc.msg}", request_index)
        if not isinstance(response, dict):
            raise TransportError("response is not a JSON object", request_index)
        if "error" in response:
            raise TransportError(f"server error: {response['error']}", request_index)
        return response

    def next_id(self) -> int:
        with self._lock:
            self._next_id += 1
            return self._next_id

    def close(self) -> None:
        proc = self._proc
        if proc.stdin and not proc.stdin.closed:
            try:
                proc.stdin.close()
            except OSError:
                pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
