"""Presentation state machine and the command/status socket protocol.

Commands and status broadcasts are newline-delimited JSON. All mutations
funnel through a single dispatcher thread, so concurrent clients observe
one total order of state versions; every state change produces exactly one
broadcast carrying the new version.
"""

from __future__ import annotations

import json
import logging
import socket
import threading

log = logging.getLogger(__name__)

MODES = ("round_robin", "full_display")
COMMANDS = ("set_mode", "pause_layer", "resume_layer", "select_layers", "set_window_n", "get_state")


class CommandError(ValueError):
    """Invalid command; the reply carries the message, state is unchanged."""


class EngineState:
    """Mode, per-layer pause flags, and the full-display monitoring set.

    Owned by the engine; every mutation bumps `version`. `window_n` mirrors
    the scaler sizes so a replayed command log reproduces the final state.
    """

    def __init__(self, layer_ids: list[str], window_n: dict[str, int]):
        self.layer_ids = list(layer_ids)
        self.mode = "round_robin"
        self.paused: set[str] = set()
        self.selected: set[str] = set(layer_ids)  # full-display default: monitor everything
        self.window_n = dict(window_n)
        self.version = 0

    def audible_in_full_display(self, layer_id: str) -> bool:
        return layer_id in self.selected and layer_id not in self.paused


def parse_command(raw: bytes | str | dict) -> dict:
    """Validate one command message; raises CommandError on anything off."""
    if isinstance(raw, (bytes, str)):
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError as e:
            raise CommandError(f"invalid JSON: {e}") from e
    else:
        msg = raw
    if not isinstance(msg, dict):
        raise CommandError("command must be an object")
    cmd = msg.get("cmd")
    if cmd not in COMMANDS:
        raise CommandError(f"unknown command {cmd!r}")
    if cmd == "set_mode" and msg.get("mode") not in MODES:
        raise CommandError(f"unknown mode {msg.get('mode')!r}")
    if cmd in ("pause_layer", "resume_layer") and not isinstance(msg.get("layer"), str):
        raise CommandError("layer must be a string")
    if cmd == "select_layers":
        layers = msg.get("layers")
        if not isinstance(layers, list) or not all(isinstance(x, str) for x in layers):
            raise CommandError("layers must be a list of strings")
    if cmd == "set_window_n":
        if msg.get("metric") not in ("procs", "ibtx"):
            raise CommandError(f"unknown metric {msg.get('metric')!r}")
        n = msg.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise CommandError("n must be an integer >= 1")
    return msg


class ControlServer:
    """TCP command/status server.

    Per-client reader threads push commands onto one queue; a single
    dispatcher applies them against the engine and replies on the issuing
    connection. Status broadcasts (from the engine, on every batch and on
    every state change) go to all connected clients.
    """

    def __init__(self, engine, addr: str = "127.0.0.1", port: int = 48821):
        self.engine = engine
        self.addr = addr
        self.port = port
        self._sock: socket.socket | None = None
        self._clients: list[tuple[socket.socket, threading.Lock]] = []
        self._clients_lock = threading.Lock()
        self._queue: "queue.Queue" = None  # created in start()
        self._threads: list[threading.Thread] = []
        self._running = False

    def start(self) -> None:
        import queue

        self._queue = queue.Queue()
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((self.addr, self.port))
        self.port = self._sock.getsockname()[1]
        self._sock.listen(8)
        self._running = True
        self.engine.add_listener(self.broadcast)
        accept = threading.Thread(target=self._accept_loop, name="control-accept", daemon=True)
        dispatch = threading.Thread(target=self._dispatch_loop, name="control-dispatch", daemon=True)
        self._threads = [accept, dispatch]
        accept.start()
        dispatch.start()
        log.info("control server on %s:%d", self.addr, self.port)

    def stop(self) -> None:
        self._running = False
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        if self._queue is not None:
            self._queue.put(None)
        with self._clients_lock:
            for conn, _ in self._clients:
                try:
                    conn.close()
                except OSError:
                    pass
            self._clients.clear()

    def _accept_loop(self) -> None:
        while self._running:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            entry = (conn, threading.Lock())
            with self._clients_lock:
                self._clients.append(entry)
            t = threading.Thread(target=self._client_loop, args=(entry,), daemon=True)
            t.start()

    def _client_loop(self, entry) -> None:
        conn, _ = entry
        try:
            f = conn.makefile("rb")
            for line in f:
                line = line.strip()
                if not line:
                    continue
                self._queue.put((entry, line))
        except OSError:
            pass
        finally:
            with self._clients_lock:
                if entry in self._clients:
                    self._clients.remove(entry)
            try:
                conn.close()
            except OSError:
                pass

    def _dispatch_loop(self) -> None:
        while True:
            item = self._queue.get()
            if item is None:
                return
            entry, line = item
            reply = self.engine.handle_command(line)
            self._send(entry, reply)

    def _send(self, entry, message: dict) -> None:
        conn, wlock = entry
        data = (json.dumps(message, separators=(",", ":")) + "\n").encode("utf-8")
        try:
            with wlock:
                conn.sendall(data)
        except OSError:
            with self._clients_lock:
                if entry in self._clients:
                    self._clients.remove(entry)

    def broadcast(self, snapshot: dict) -> None:
        with self._clients_lock:
            clients = list(self._clients)
        for entry in clients:
            self._send(entry, snapshot)
