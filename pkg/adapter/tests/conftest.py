import socket
import threading
import time

import pytest
import requests
import uvicorn

from scoreadapter.service import AdapterConfig, create_app


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class LiveAdapter:
    """Real uvicorn server in a background thread."""

    def __init__(self, anchors_path=None):
        self.port = free_port()
        self.endpoint = f"http://127.0.0.1:{self.port}"
        app = create_app(AdapterConfig(anchors_path=anchors_path, port=self.port))
        self._server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=self.port, log_level="warning")
        )
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def start(self):
        self._thread.start()
        deadline = time.monotonic() + 10
        while time.monotonic() < deadline:
            try:
                if requests.get(f"{self.endpoint}/health", timeout=0.5).json()["status"] == "ok":
                    return self
            except requests.RequestException:
                pass
            time.sleep(0.05)
        raise RuntimeError("adapter did not become healthy in time")

    def stop(self):
        self._server.should_exit = True
        self._thread.join(timeout=5)


@pytest.fixture()
def live_adapter_factory():
    servers = []

    def start(anchors_path=None):
        server = LiveAdapter(anchors_path=anchors_path).start()
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.stop()
