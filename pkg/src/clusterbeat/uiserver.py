"""Static asset server + WebSocket bridge for the browser control panel.

Browsers cannot open raw TCP sockets, so /ws relays the control protocol
verbatim: one newline-delimited JSON message per WebSocket text frame, one
backing TCP connection per browser client. Requires the [ui] extra
(fastapi + uvicorn).

No `from __future__ import annotations` here: the fastapi imports are
lazy, and deferred annotations would leave the websocket handler's
parameter type unresolvable for dependency injection (the handshake then
fails with a 403)."""

import asyncio
import logging
import threading
from pathlib import Path

log = logging.getLogger(__name__)


class UiServer:
    def __init__(self, server, thread):
        self._server = server
        self._thread = thread

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=3.0)


def start_ui_server(port: int, ui_dir: str | None, control_host: str, control_port: int) -> UiServer:
    try:
        import uvicorn
        from fastapi import FastAPI, WebSocket, WebSocketDisconnect
        from fastapi.staticfiles import StaticFiles
    except ImportError as e:
        raise RuntimeError("--serve-ui requires the ui extra: pip install clusterbeat[ui]") from e

    static_dir = Path(ui_dir) if ui_dir else Path("frontend") / "dist"
    if not static_dir.is_dir():
        raise RuntimeError(f"UI asset directory not found: {static_dir}")

    app = FastAPI()

    @app.websocket("/ws")
    async def ws_bridge(ws: WebSocket):
        await ws.accept()
        try:
            reader, writer = await asyncio.open_connection(control_host, control_port)
        except OSError as e:
            await ws.close(code=1011, reason=f"control socket unreachable: {e}")
            return

        async def tcp_to_ws():
            while True:
                line = await reader.readline()
                if not line:
                    break
                await ws.send_text(line.decode("utf-8").rstrip("\n"))

        pump = asyncio.create_task(tcp_to_ws())
        try:
            while True:
                text = await ws.receive_text()
                writer.write((text.strip() + "\n").encode("utf-8"))
                await writer.drain()
        except (WebSocketDisconnect, OSError):
            pass
        finally:
            pump.cancel()
            writer.close()

    app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, name="ui-server", daemon=True)
    thread.start()
    log.info("UI served on http://127.0.0.1:%d (bridge -> %s:%d)", port, control_host, control_port)
    return UiServer(server, thread)
