"""Recorded browsing sessions: the full set of request/response pairs a
page needed, plus which exchange is the API under test.

A session is captured live through the recording proxy or imported from a
HAR 1.2 export (the practical path for HTTPS sites, since browsers export
HAR with bodies already decrypted).  Either way it ends up as one
immutable :class:`RecordedSession` that the replay server answers from.

Sessions persist as a single self-describing JSON archive with bodies
base64-encoded, so a capture doubles as a server-state snapshot that can
be re-tested long after the real backend has moved on.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from urllib.parse import urlsplit

from .mutate import ApiResponseTree

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

Headers = tuple  # ordered ((name, value), ...) pairs


class SessionError(Exception):
    """Base for session-store failures."""


class IoFailure(SessionError):
    pass


class SchemaVersionMismatch(SessionError):
    def __init__(self, found):
        super().__init__(f"archive schema_version {found!r}, expected {SCHEMA_VERSION}")
        self.found = found


class CorruptArchive(SessionError):
    pass


class MalformedHar(SessionError):
    def __init__(self, reason: str):
        super().__init__(f"not a usable HAR 1.2 document: {reason}")
        self.reason = reason


class MissingResponseContent(SessionError):
    def __init__(self, entry_index: int):
        super().__init__(f"HAR entry {entry_index} has no response content text")
        self.entry_index = entry_index


class TargetNeverRequested(SessionError):
    def __init__(self, target_matcher: str):
        super().__init__(f"no recorded request URL path contains {target_matcher!r}")
        self.target_matcher = target_matcher


@dataclass(frozen=True)
class Exchange:
    """One observed request/response pair."""

    method: str
    url: str
    request_headers: Headers
    request_body: bytes
    status: int
    response_headers: Headers
    response_body: bytes
    sequence_no: int

    def __post_init__(self):
        parts = urlsplit(self.url)
        if not parts.scheme or not parts.netloc:
            raise ValueError(f"exchange URL must be absolute: {self.url!r}")
        if not 100 <= self.status <= 599:
            raise ValueError(f"implausible HTTP status {self.status}")

    def path(self) -> str:
        return urlsplit(self.url).path


@dataclass(frozen=True)
class RecordedSession:
    """Everything the page fetched, in capture order, plus the target."""

    exchanges: tuple
    target_index: int
    created_at: str = ""
    notes: str = ""

    def __post_init__(self):
        if not self.exchanges:
            raise ValueError("a session needs at least one exchange")
        if not 0 <= self.target_index < len(self.exchanges):
            raise ValueError(f"target_index {self.target_index} out of range")
        seen = set()
        for exchange in self.exchanges:
            if exchange.sequence_no in seen:
                raise ValueError(f"duplicate sequence_no {exchange.sequence_no}")
            seen.add(exchange.sequence_no)
        # the target body must be mutable JSON; fails fast otherwise
        ApiResponseTree.from_bytes(self.target.response_body)

    @property
    def target(self) -> Exchange:
        return self.exchanges[self.target_index]


def find_target_index(exchanges, target_matcher: str) -> int:
    """First exchange whose URL path contains the matcher.

    Several matches are legal (pages re-poll APIs); the first in capture
    order wins and the rest are logged so the operator can check the
    intended one was picked.
    """
    matches = [
        i for i, ex in enumerate(exchanges) if target_matcher in ex.path()
    ]
    if not matches:
        raise TargetNeverRequested(target_matcher)
    if len(matches) > 1:
        log.warning(
            "target pattern %r matched %d requests; using the first (%s)",
            target_matcher,
            len(matches),
            ", ".join(exchanges[i].url for i in matches),
        )
    return matches[0]


def build_session(exchanges, target_matcher: str, notes: str = "") -> RecordedSession:
    return RecordedSession(
        exchanges=tuple(exchanges),
        target_index=find_target_index(exchanges, target_matcher),
        created_at=_now(),
        notes=notes,
    )


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# HAR import

def _har_headers(entry_part: dict) -> Headers:
    return tuple(
        (h["name"], h["value"]) for h in entry_part.get("headers", ())
    )


def import_har(document, target_matcher: str, notes: str = "") -> RecordedSession:
    """Build a session from a HAR 1.2 document (parsed dict or JSON text).

    Entries keep their log order; response bodies come from
    ``response.content.text``, base64-decoded when the entry says so.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise MalformedHar(f"not JSON: {exc}") from exc
    if not isinstance(document, dict) or not isinstance(document.get("log"), dict):
        raise MalformedHar("missing top-level log object")
    entries = document["log"].get("entries")
    if not isinstance(entries, list):
        raise MalformedHar("log.entries is not a list")

    exchanges = []
    for index, entry in enumerate(entries):
        try:
            request = entry["request"]
            response = entry["response"]
            method = request["method"]
            url = request["url"]
            status = response["status"]
            content = response["content"]
        except (TypeError, KeyError) as exc:
            raise MalformedHar(f"entry {index} lacks {exc}") from exc
        if not isinstance(content, dict) or "text" not in content:
            raise MissingResponseContent(index)
        text = content["text"]
        if content.get("encoding") == "base64":
            try:
                body = base64.b64decode(text, validate=True)
            except (binascii.Error, ValueError) as exc:
                raise MalformedHar(f"entry {index} body is not base64: {exc}") from exc
        else:
            body = str(text).encode("utf-8")
        post = request.get("postData", {})
        request_body = str(post.get("text", "")).encode("utf-8")
        try:
            exchanges.append(
                Exchange(
                    method=method,
                    url=url,
                    request_headers=_har_headers(request),
                    request_body=request_body,
                    status=status,
                    response_headers=_har_headers(response),
                    response_body=body,
                    sequence_no=index,
                )
            )
        except (TypeError, ValueError) as exc:
            raise MalformedHar(f"entry {index}: {exc}") from exc
    if not exchanges:
        raise MalformedHar("no entries")
    return RecordedSession(
        exchanges=tuple(exchanges),
        target_index=find_target_index(exchanges, target_matcher),
        created_at=_now(),
        notes=notes,
    )


# ---------------------------------------------------------------------------
# archive persistence

def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _exchange_to_json(ex: Exchange) -> dict:
    return {
        "method": ex.method,
        "url": ex.url,
        "request_headers": [list(h) for h in ex.request_headers],
        "request_body_b64": _b64(ex.request_body),
        "status": ex.status,
        "response_headers": [list(h) for h in ex.response_headers],
        "response_body_b64": _b64(ex.response_body),
        "sequence_no": ex.sequence_no,
    }


def _exchange_from_json(obj: dict) -> Exchange:
    return Exchange(
        method=obj["method"],
        url=obj["url"],
        request_headers=tuple((h[0], h[1]) for h in obj["request_headers"]),
        request_body=base64.b64decode(obj["request_body_b64"]),
        status=obj["status"],
        response_headers=tuple((h[0], h[1]) for h in obj["response_headers"]),
        response_body=base64.b64decode(obj["response_body_b64"]),
        sequence_no=obj["sequence_no"],
    )


def save_session(session: RecordedSession, path) -> None:
    archive = {
        "schema_version": SCHEMA_VERSION,
        "created_at": session.created_at,
        "target_index": session.target_index,
        "notes": session.notes,
        "exchanges": [_exchange_to_json(ex) for ex in session.exchanges],
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(archive, fh)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_session(path) -> RecordedSession:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    try:
        archive = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorruptArchive(f"{path}: not JSON: {exc}") from exc
    if not isinstance(archive, dict):
        raise CorruptArchive(f"{path}: archive is not an object")
    version = archive.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(version)
    try:
        return RecordedSession(
            exchanges=tuple(
                _exchange_from_json(obj) for obj in archive["exchanges"]
            ),
            target_index=archive["target_index"],
            created_at=archive.get("created_at", ""),
            notes=archive.get("notes", ""),
        )
    except (KeyError, IndexError, TypeError, ValueError, binascii.Error) as exc:
        raise CorruptArchive(f"{path}: {exc}") from exc


def with_new_target(session: RecordedSession, target_matcher: str) -> RecordedSession:
    """Re-point an existing session at a different target API."""
    return replace(
        session, target_index=find_target_index(session.exchanges, target_matcher)
    )
