"""The simulated server: answers every page request from the recorded
session, locally and deterministically, optionally substituting a mutated
body for the target API exchange.

The server speaks plain HTTP/1.1 on a loopback port and accepts both
proxy-style absolute-form request targets (``GET http://site/x``, which
is how a browser configured with an HTTP proxy sends them) and ordinary
origin-form targets (reconstructed against the Host header).  Requests
for ``https://`` URLs arrive as plaintext absolute-form too; no TLS is
ever spoken, the scheme is just part of the match key.

Matching is by (method, normalized URL).  Request headers never
participate; an optional strict mode also compares request bodies so two
POSTs to one endpoint can be told apart.  Unmatched requests are answered
per the miss policy and remembered in the plan's miss log, which the
campaign inspects to decide whether a run can be trusted.
"""

from __future__ import annotations

import enum
import http.server
import logging
import re
import threading
from dataclasses import dataclass, field
from urllib.parse import urlsplit, urlunsplit

from .session import RecordedSession

log = logging.getLogger(__name__)


class ReplayError(Exception):
    pass


class BindFailure(ReplayError):
    pass


class MissPolicy(str, enum.Enum):
    RESPOND_404 = "respond-404"
    ABORT_RUN = "abort-run"


_PCT = re.compile(r"%([0-9a-fA-F]{2})")

# never replayed verbatim: connection management belongs to this server,
# and bodies are stored decoded so stale framing/encoding headers would lie
_DROPPED_HEADERS = {
    "connection",
    "keep-alive",
    "proxy-connection",
    "te",
    "trailer",
    "transfer-encoding",
    "upgrade",
    "content-length",
    "content-encoding",
}

_BODYLESS_STATUSES = {204, 304}


def normalize_url(url: str) -> str:
    """Canonical form for matching: no fragment, lowercase scheme and
    authority, uppercase percent-escape hex; query kept byte-wise."""
    parts = urlsplit(url)
    upper = lambda m: "%" + m.group(1).upper()
    return urlunsplit(
        (
            parts.scheme.lower(),
            parts.netloc.lower(),
            _PCT.sub(upper, parts.path),
            _PCT.sub(upper, parts.query),
            "",
        )
    )


def match_request(
    session: RecordedSession,
    method: str,
    url: str,
    body: bytes = b"",
    strict_body: bool = False,
):
    """The first recorded exchange matching the request, or None.

    Repeats of one URL (pages that re-poll an API) all map to that first
    exchange, so every poll sees the same body.
    """
    key = (method.upper(), normalize_url(url))
    for exchange in session.exchanges:
        if (exchange.method.upper(), normalize_url(exchange.url)) != key:
            continue
        if strict_body and exchange.request_body != body:
            continue
        return exchange
    return None


@dataclass
class ReplayPlan:
    """Mutable per-worker state: which mutation is live, what missed."""

    session: RecordedSession
    active_mutation: bytes | None = None
    miss_policy: MissPolicy = MissPolicy.RESPOND_404
    strict_body: bool = False
    miss_log: list = field(default_factory=list)
    aborted: bool = False

    def __post_init__(self):
        self._lock = threading.Lock()

    def set_mutation(self, body) -> None:
        with self._lock:
            self.active_mutation = body

    def reset(self, mutation=None) -> None:
        """Fresh run: clear the miss log and install the next mutation."""
        with self._lock:
            self.miss_log = []
            self.aborted = False
            self.active_mutation = mutation

    def record_miss(self, method: str, url: str) -> None:
        with self._lock:
            self.miss_log.append(f"{method} {url}")
            if self.miss_policy is MissPolicy.ABORT_RUN:
                self.aborted = True

    def _is_target(self, exchange) -> bool:
        target = self.session.target
        if exchange is target:
            return True
        if self.strict_body:
            return False
        # re-polls of the target URL map to earlier duplicates; they must
        # still see the mutated body
        return (exchange.method.upper(), normalize_url(exchange.url)) == (
            target.method.upper(),
            normalize_url(target.url),
        )

    def response_for(self, method: str, url: str, body: bytes):
        """(status, headers, body) for a request, or None on a miss."""
        exchange = match_request(
            self.session, method, url, body, strict_body=self.strict_body
        )
        if exchange is None:
            return None
        with self._lock:
            mutation = self.active_mutation
        payload = exchange.response_body
        if mutation is not None and self._is_target(exchange):
            payload = mutation
        return exchange.status, exchange.response_headers, payload


class _ReplayHandler(http.server.BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    # one response spans two writes (headers, body); without this the
    # second write stalls on the peer's delayed ACK
    disable_nagle_algorithm = True

    # one deterministic byte stream per request sequence: no Server/Date
    def send_response(self, code, message=None):
        self.send_response_only(code, message)

    def log_message(self, fmt, *args):
        log.debug("replay %s", fmt % args)

    def _request_url(self) -> str:
        if self.path.startswith(("http://", "https://")):
            return self.path
        host = self.headers.get("Host") or "%s:%d" % self.server.server_address[:2]
        return f"http://{host}{self.path}"

    def _request_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length > 0 else b""

    def _serve(self):
        plan: ReplayPlan = self.server.plan
        url = self._request_url()
        # a HEAD probes the GET resource; recordings only ever hold the GET
        method = "GET" if self.command == "HEAD" else self.command
        found = plan.response_for(method, url, self._request_body())
        if found is None:
            plan.record_miss(method, url)
            log.info("replay miss: %s %s", method, url)
            self.send_response(404)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        status, headers, body = found
        self.send_response(status)
        for name, value in headers:
            if name.lower() not in _DROPPED_HEADERS:
                self.send_header(name, value)
        if status in _BODYLESS_STATUSES or 100 <= status < 200:
            self.end_headers()
            return
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(body)

    do_GET = _serve
    do_POST = _serve
    do_PUT = _serve
    do_DELETE = _serve
    do_PATCH = _serve
    do_OPTIONS = _serve
    do_HEAD = _serve

    def do_CONNECT(self):
        # plaintext only; encrypted sessions enter via HAR import
        self.send_response(501)
        self.send_header("Content-Length", "0")
        self.end_headers()


class ReplayServer:
    """A loopback HTTP server bound to one ReplayPlan.

    Each fuzzing worker owns one instance on its own ephemeral port and
    points its browser's proxy at it.
    """

    def __init__(self, plan: ReplayPlan, host: str = "127.0.0.1", port: int = 0):
        self.plan = plan
        self._host = host
        self._requested_port = port
        self._httpd = None
        self._thread = None

    def start(self) -> "ReplayServer":
        try:
            self._httpd = http.server.ThreadingHTTPServer(
                (self._host, self._requested_port), _ReplayHandler
            )
        except OSError as exc:
            raise BindFailure(
                f"cannot bind {self._host}:{self._requested_port}: {exc}"
            ) from exc
        self._httpd.plan = self.plan
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(
            target=lambda: self._httpd.serve_forever(poll_interval=0.05),
            name="replay-server",
            daemon=True,
        )
        self._thread.start()
        log.info("replay server listening on %s", self.address)
        return self

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    @property
    def port(self) -> int:
        if self._httpd is None:
            raise ReplayError("server not started")
        return self._httpd.server_address[1]

    @property
    def address(self) -> str:
        return f"{self._host}:{self.port}"

    def __enter__(self) -> "ReplayServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
