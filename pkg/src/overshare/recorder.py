"""Capture proxy and end-to-end session recording.

Recording mirrors replay: the browser is pointed at a local HTTP proxy,
but instead of answering from an archive the proxy forwards each request
to the real origin and keeps a copy of the exchange.  Plaintext HTTP
only; encrypted sessions come in through the HAR import path instead.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import requests

from .script import InteractionScript
from .session import Exchange, Headers, RecordedSession, build_session
from .webdriver import drive

log = logging.getLogger(__name__)

# Upstream fetches that stall longer than this produce a 504 to the
# browser rather than hanging a recording forever.
FORWARD_TIMEOUT_S = 30.0

_HOP_BY_HOP = frozenset(
    {
        "connection",
        "keep-alive",
        "proxy-authenticate",
        "proxy-authorization",
        "proxy-connection",
        "te",
        "trailer",
        "transfer-encoding",
        "upgrade",
    }
)

# Bodies are stored decoded, so the framing and encoding headers of the
# original response would lie if kept alongside them.
_UNRECORDED_RESPONSE = _HOP_BY_HOP | {"content-encoding", "content-length"}

# Encodings requests transparently decodes; anything else gets recorded
# as-is with a warning.
_DECODED_ENCODINGS = frozenset({"", "identity", "gzip", "deflate", "x-gzip"})


class RecorderError(Exception):
    """Base class for recording failures."""


class ProxyBindFailure(RecorderError):
    """The capture proxy could not bind its listening port."""

    def __init__(self, host: str, port: int, reason: str) -> None:
        super().__init__(f"cannot bind capture proxy on {host}:{port}: {reason}")
        self.host = host
        self.port = port


class RecordingFailed(RecorderError):
    """The script did not reach the page-updated state while recording."""

    def __init__(self, phase: str, failure_reason: str | None) -> None:
        detail = failure_reason or "unknown"
        super().__init__(
            f"recording script ended in state {phase!r} ({detail}); "
            "a session is only complete once the page has updated"
        )
        self.phase = phase
        self.failure_reason = failure_reason


def _recordable(headers: Headers, dropped: frozenset[str]) -> Headers:
    return tuple((n, v) for n, v in headers if n.lower() not in dropped)


class _CaptureHandler(BaseHTTPRequestHandler):
    """Forwards one browser request upstream and records the exchange."""

    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True
    proxy: "CaptureProxy"  # injected by CaptureProxy.start

    # Identification headers would make re-recordings differ byte-wise.
    def send_response(self, code: int, message: str | None = None) -> None:
        self.send_response_only(code, message)

    def log_message(self, format: str, *args: object) -> None:
        log.debug("capture-proxy: " + format, *args)

    def _request_url(self) -> str | None:
        if self.path.startswith(("http://", "https://")):
            return self.path
        host = self.headers.get("Host")
        if self.path.startswith("/") and host:
            return f"http://{host}{self.path}"
        return None

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _reply(self, status: int, body: bytes, headers: Headers = ()) -> None:
        self.send_response(status)
        for name, value in headers:
            self.send_header(name, value)
        bodyless = status in (204, 304) or 100 <= status < 200
        if not bodyless:
            self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if not bodyless and self.command != "HEAD" and body:
            self.wfile.write(body)

    def _serve(self) -> None:
        url = self._request_url()
        if url is None:
            self._reply(400, b"absolute-form request required\n")
            return
        body = self._read_body()
        client_headers = tuple(self.headers.items())

        forward = {
            n: v
            for n, v in client_headers
            if n.lower() not in _HOP_BY_HOP and n.lower() != "host"
        }
        # The archive stores decoded bodies, so ask the origin to skip
        # compression outright; gzip/deflate are decoded anyway if the
        # origin insists.
        forward["Accept-Encoding"] = "identity"

        try:
            with requests.Session() as http:
                http.trust_env = False
                upstream = http.request(
                    self.command,
                    url,
                    headers=forward,
                    data=body,
                    allow_redirects=False,
                    timeout=FORWARD_TIMEOUT_S,
                )
        except requests.Timeout:
            log.warning("capture-proxy: upstream timeout for %s", url)
            self._reply(504, b"upstream timeout\n")
            return
        except requests.RequestException as exc:
            log.warning("capture-proxy: cannot reach %s: %s", url, exc)
            self._reply(502, b"upstream unreachable\n")
            return

        encoding = upstream.headers.get("Content-Encoding", "").lower()
        if encoding not in _DECODED_ENCODINGS:
            log.warning(
                "capture-proxy: origin sent Content-Encoding %r for %s "
                "despite identity being requested; body recorded as-is",
                encoding,
                url,
            )

        # raw.headers keeps duplicates (Set-Cookie) that the folded
        # requests.Response.headers mapping would merge.
        upstream_headers = tuple(upstream.raw.headers.items())
        payload = upstream.content

        self.proxy.record(
            Exchange(
                method=self.command,
                url=url,
                request_headers=_recordable(client_headers, _HOP_BY_HOP),
                request_body=body,
                status=upstream.status_code,
                response_headers=_recordable(upstream_headers, _UNRECORDED_RESPONSE),
                response_body=payload,
                sequence_no=0,  # reassigned under the proxy lock
            )
        )
        self._reply(
            upstream.status_code,
            payload,
            _recordable(upstream_headers, _UNRECORDED_RESPONSE),
        )

    do_GET = do_POST = do_PUT = do_DELETE = do_PATCH = do_OPTIONS = _serve
    do_HEAD = _serve

    def do_CONNECT(self) -> None:
        # No TLS interception: encrypted recordings go through HAR import.
        self._reply(501, b"CONNECT tunnelling is not supported\n")


class CaptureProxy:
    """Recording HTTP proxy; one instance records one browsing session."""

    def __init__(self, port: int = 0, host: str = "127.0.0.1") -> None:
        self.host = host
        self._requested_port = port
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None
        self._lock = threading.Lock()
        self._exchanges: list[Exchange] = []

    def start(self) -> None:
        handler = type("BoundCaptureHandler", (_CaptureHandler,), {"proxy": self})
        try:
            self._server = ThreadingHTTPServer(
                (self.host, self._requested_port), handler
            )
        except OSError as exc:
            raise ProxyBindFailure(self.host, self._requested_port, str(exc)) from exc
        self._server.daemon_threads = True
        self._thread = threading.Thread(
            target=lambda: self._server.serve_forever(poll_interval=0.05),
            name=f"capture-proxy:{self.port}",
            daemon=True,
        )
        self._thread.start()

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def __enter__(self) -> "CaptureProxy":
        self.start()
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.stop()

    @property
    def port(self) -> int:
        if self._server is None:
            raise RuntimeError("capture proxy is not running")
        return self._server.server_address[1]

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    def record(self, exchange: Exchange) -> None:
        with self._lock:
            self._exchanges.append(
                replace(exchange, sequence_no=len(self._exchanges))
            )

    def exchanges(self) -> tuple[Exchange, ...]:
        with self._lock:
            return tuple(self._exchanges)


def record_session(
    script: InteractionScript,
    proxy_port: int,
    driver_endpoint: str,
    notes: str = "",
) -> RecordedSession:
    """Run the script against the live site and capture every exchange.

    The browser is driven through a freshly started capture proxy; once
    the script reaches the page-updated state the observed traffic is
    assembled into a session with the target exchange resolved.  Raises
    TargetNeverRequested when no captured URL path contains the script's
    target matcher, RecordingFailed when the script never completes, and
    ProxyBindFailure / DriverUnreachable for infrastructure problems.
    """
    proxy = CaptureProxy(port=proxy_port)
    proxy.start()
    try:
        result = drive(script, driver_endpoint, proxy.port, proxy_host=proxy.host)
        if not result.final_state.reached_s2:
            reason = result.final_state.failure_reason
            raise RecordingFailed(
                result.final_state.phase.value,
                reason.value if reason is not None else None,
            )
        return build_session(proxy.exchanges(), script.target_matcher, notes=notes)
    finally:
        proxy.stop()
