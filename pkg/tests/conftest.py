import http.server
import socketserver
import threading
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pytest

from horizonbench.market_data import OhlcvBar, TimeSeriesTable, parse_ohlcv_csv

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def sample_csv_path() -> Path:
    return DATA_DIR / "sample_ohlcv.csv"


@pytest.fixture(scope="session")
def sample_csv_text(sample_csv_path) -> str:
    return sample_csv_path.read_text()


@pytest.fixture(scope="session")
def sample_table(sample_csv_text) -> TimeSeriesTable:
    return parse_ohlcv_csv(sample_csv_text, symbol="sample_table")


def make_price_table(values, symbol: str = "synthetic") -> TimeSeriesTable:
    """Synthetic table where every OHLC field equals the given close value."""
    bars = []
    day = date(2019, 1, 1)
    for v in values:
        v = float(v)
        bars.append(
            OhlcvBar(date=day, open=v, high=v, low=v, close=v, adj_close=v, volume=1000)
        )
        day += timedelta(days=1)
    return TimeSeriesTable(bars=tuple(bars), symbol=symbol)


def sine_values(n: int, period: float = 63.0, level: float = 10.0, amp: float = 5.0):
    idx = np.arange(n)
    return level + amp * np.sin(2.0 * np.pi * idx / period)


@pytest.fixture
def price_table_factory():
    return make_price_table


class _ScriptedHandler(http.server.BaseHTTPRequestHandler):
    script: list  # (status, body) pairs; the last entry repeats
    hits: list

    def do_GET(self):
        self.hits.append(self.path)
        status, body = self.script[min(len(self.hits) - 1, len(self.script) - 1)]
        data = body.encode()
        self.send_response(status)
        self.send_header("Content-Type", "text/csv")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def csv_server():
    """Start a scripted local HTTP endpoint; returns (base_url, hits list)."""
    servers = []

    def start(script):
        handler = type(
            "Handler", (_ScriptedHandler,), {"script": list(script), "hits": []}
        )
        server = socketserver.TCPServer(("127.0.0.1", 0), handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append(server)
        return f"http://127.0.0.1:{server.server_address[1]}", handler.hits

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()
