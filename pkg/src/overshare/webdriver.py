"""Drive a browser through an interaction script and extract the DOM.

Talks the W3C WebDriver wire protocol over HTTP to whatever endpoint the
operator supplies (chromedriver, geckodriver, or the bundled jsdom-based
shim).  Each drive creates a fresh browser session whose traffic is routed
through the replay server via the standard manual-proxy capability, so a
run never touches the real network.

A drive walks the script's actions in order.  Everything before the FUZZ
marker brings the page to the state where the target request has been
sent; the waits after it define when the page has finished updating.
Behavioral outcomes (an element missing, a wait timing out) are encoded in
the returned :class:`DriveResult`; infrastructure problems (driver down,
protocol violations) raise instead, so callers can retry or abort.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass

import requests

from .script import Action, ActionKind, InteractionScript

log = logging.getLogger(__name__)

ELEMENT_KEY = "element-6066-11e4-a52e-4f735466cecf"

DEFAULT_TIMEOUT_MS = 30_000
POLL_INTERVAL_MS = 100

ERRORS_PROBE = "return window.__pageErrors || [];"
OUTER_HTML_PROBE = "return document.documentElement.outerHTML;"
ELEMENT_HTML_PROBE = "return arguments[0].outerHTML;"
SHADOW_PROBE = (
    "var all = document.querySelectorAll('*');"
    "for (var i = 0; i < all.length; i++) {"
    "  if (all[i].shadowRoot) { return true; }"
    "}"
    "return false;"
)


class DriverProtocolError(RuntimeError):
    """The driver answered outside the protocol (or not at all mid-session)."""


class DriverUnreachable(DriverProtocolError):
    """No driver is listening at the endpoint."""


class NoSuchElement(LookupError):
    def __init__(self, selector: str):
        super().__init__(f"no element matches {selector!r}")
        self.selector = selector


class AreaNotFound(LookupError):
    def __init__(self, selector: str):
        super().__init__(f"area-of-interest {selector!r} matched nothing")
        self.selector = selector


class AreaAmbiguous(ValueError):
    def __init__(self, selector: str, count: int):
        super().__init__(f"area-of-interest {selector!r} matched {count} elements")
        self.selector = selector
        self.count = count


class Phase(str, enum.Enum):
    S0_INITIAL = "initial"
    S1_REQUEST_SENT = "request-sent"
    S2_PAGE_UPDATED = "page-updated"
    FAILED = "failed"


class FailureReason(str, enum.Enum):
    ELEMENT_NOT_FOUND = "element-not-found"
    STATE_NOT_REACHED = "state-not-reached"
    AREA_NOT_FOUND = "area-not-found"


@dataclass(frozen=True)
class CampaignState:
    phase: Phase
    failure_reason: FailureReason | None = None

    @property
    def reached_s2(self) -> bool:
        return self.phase is Phase.S2_PAGE_UPDATED


@dataclass(frozen=True)
class DriveResult:
    final_state: CampaignState
    dom_html: str | None
    client_errors: tuple
    wall_time_ms: int
    shadow_roots_detected: bool = False
    failed_action_index: int | None = None


class WebDriverClient:
    """Minimal blocking client for the WebDriver REST wire protocol."""

    def __init__(self, endpoint: str, timeout_s: float = 60.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self._http = requests.Session()
        self._http.trust_env = False  # never route driver traffic via env proxies

    def _call(self, method: str, path: str, payload=None, creating=False):
        url = f"{self.endpoint}{path}"
        try:
            response = self._http.request(
                method, url, json=payload, timeout=self.timeout_s
            )
        except requests.RequestException as exc:
            if creating:
                raise DriverUnreachable(f"no driver at {self.endpoint}: {exc}") from exc
            raise DriverProtocolError(f"driver connection lost: {exc}") from exc
        try:
            body = response.json()
        except ValueError as exc:
            raise DriverProtocolError(
                f"non-JSON driver reply ({response.status_code}) for {path}"
            ) from exc
        if response.status_code >= 400:
            value = body.get("value") if isinstance(body, dict) else None
            error = (value or {}).get("error", "unknown error")
            message = (value or {}).get("message", "")
            if error == "no such element":
                raise NoSuchElement(message or path)
            raise DriverProtocolError(f"{error}: {message}")
        return body.get("value") if isinstance(body, dict) else None

    # -- session lifecycle ------------------------------------------------

    def new_session(self, proxy_address: str | None = None) -> str:
        capabilities: dict = {"alwaysMatch": {}}
        if proxy_address is not None:
            capabilities["alwaysMatch"]["proxy"] = {
                "proxyType": "manual",
                "httpProxy": proxy_address,
                "sslProxy": proxy_address,
            }
        value = self._call(
            "POST", "/session", {"capabilities": capabilities}, creating=True
        )
        try:
            return value["sessionId"]
        except (TypeError, KeyError) as exc:
            raise DriverProtocolError(f"malformed new-session reply: {value!r}") from exc

    def delete_session(self, session_id: str) -> None:
        self._call("DELETE", f"/session/{session_id}")

    # -- commands -----------------------------------------------------------

    def navigate(self, session_id: str, url: str) -> None:
        self._call("POST", f"/session/{session_id}/url", {"url": url})

    def find_element(self, session_id: str, xpath: str) -> str:
        value = self._call(
            "POST",
            f"/session/{session_id}/element",
            {"using": "xpath", "value": xpath},
        )
        try:
            return value[ELEMENT_KEY]
        except (TypeError, KeyError) as exc:
            raise DriverProtocolError(f"malformed element reply: {value!r}") from exc

    def find_elements(self, session_id: str, xpath: str) -> list:
        value = self._call(
            "POST",
            f"/session/{session_id}/elements",
            {"using": "xpath", "value": xpath},
        )
        if not isinstance(value, list):
            raise DriverProtocolError(f"malformed elements reply: {value!r}")
        return [ref[ELEMENT_KEY] for ref in value]

    def click(self, session_id: str, element_id: str) -> None:
        self._call("POST", f"/session/{session_id}/element/{element_id}/click", {})

    def send_keys(self, session_id: str, element_id: str, text: str) -> None:
        self._call(
            "POST",
            f"/session/{session_id}/element/{element_id}/value",
            {"text": text},
        )

    def execute(self, session_id: str, script: str, args: list | None = None):
        return self._call(
            "POST",
            f"/session/{session_id}/execute/sync",
            {"script": script, "args": args or []},
        )

    def perform_actions(self, session_id: str, actions: list) -> None:
        self._call("POST", f"/session/{session_id}/actions", {"actions": actions})

    def hover(self, session_id: str, element_id: str) -> None:
        self.perform_actions(
            session_id,
            [
                {
                    "type": "pointer",
                    "id": "mouse",
                    "parameters": {"pointerType": "mouse"},
                    "actions": [
                        {
                            "type": "pointerMove",
                            "duration": 0,
                            "origin": {ELEMENT_KEY: element_id},
                            "x": 0,
                            "y": 0,
                        }
                    ],
                }
            ],
        )

    def scroll(self, session_id: str, delta_y: int) -> None:
        self.perform_actions(
            session_id,
            [
                {
                    "type": "wheel",
                    "id": "wheel",
                    "actions": [
                        {
                            "type": "scroll",
                            "x": 0,
                            "y": 0,
                            "deltaX": 0,
                            "deltaY": delta_y,
                            "duration": 0,
                            "origin": "viewport",
                        }
                    ],
                }
            ],
        )


def extract_dom(
    client: WebDriverClient, session_id: str, area_of_interest: str | None = None
) -> str:
    """Serialized outer HTML of the page, or of the area's unique subtree."""
    if area_of_interest is None:
        return client.execute(session_id, OUTER_HTML_PROBE)
    refs = client.find_elements(session_id, area_of_interest)
    if not refs:
        raise AreaNotFound(area_of_interest)
    if len(refs) > 1:
        raise AreaAmbiguous(area_of_interest, len(refs))
    return client.execute(session_id, ELEMENT_HTML_PROBE, [{ELEMENT_KEY: refs[0]}])


def _wait_for_element(
    client: WebDriverClient, session_id: str, selector: str, timeout_ms: int
) -> bool:
    deadline = time.monotonic() + timeout_ms / 1000.0
    while True:
        try:
            client.find_element(session_id, selector)
            return True
        except NoSuchElement:
            if time.monotonic() >= deadline:
                return False
            time.sleep(POLL_INTERVAL_MS / 1000.0)


def drive(
    script: InteractionScript,
    driver_endpoint: str,
    proxy_port: int,
    timeout_ms: int | None = None,
    capture_on_timeout: bool = True,
    proxy_host: str = "127.0.0.1",
) -> DriveResult:
    """Run the script in a fresh proxied browser session.

    The effective wait ceiling is the explicit argument if given, else the
    script's TIMEOUT directive, else 30 s.
    """
    effective_timeout = (
        timeout_ms if timeout_ms is not None else script.timeout_ms or DEFAULT_TIMEOUT_MS
    )
    client = WebDriverClient(driver_endpoint)
    started = time.monotonic()
    session_id = client.new_session(f"{proxy_host}:{proxy_port}")

    def elapsed_ms() -> int:
        return int((time.monotonic() - started) * 1000)

    def finish(state, dom, errors, shadow, failed_index=None) -> DriveResult:
        return DriveResult(
            final_state=state,
            dom_html=dom,
            client_errors=tuple(errors),
            wall_time_ms=elapsed_ms(),
            shadow_roots_detected=shadow,
            failed_action_index=failed_index,
        )

    phase = Phase.S0_INITIAL
    try:
        for index, action in enumerate(script.actions):
            try:
                phase = _apply_action(
                    client, session_id, action, phase, effective_timeout
                )
            except NoSuchElement:
                log.info("action %d (%s) found no element", index, action.kind.value)
                return finish(
                    CampaignState(Phase.FAILED, FailureReason.ELEMENT_NOT_FOUND),
                    None,
                    _collect_errors(client, session_id),
                    _detect_shadow_roots(client, session_id),
                    failed_index=index,
                )
            except _WaitTimedOut:
                log.info("action %d timed out after %d ms", index, effective_timeout)
                dom = None
                if capture_on_timeout:
                    dom = _capture_area(client, session_id, script.area_of_interest)
                return finish(
                    CampaignState(Phase.FAILED, FailureReason.STATE_NOT_REACHED),
                    dom,
                    _collect_errors(client, session_id),
                    _detect_shadow_roots(client, session_id),
                    failed_index=index,
                )
        errors = _collect_errors(client, session_id)
        shadow = _detect_shadow_roots(client, session_id)
        try:
            dom = extract_dom(client, session_id, script.area_of_interest)
        except AreaNotFound:
            return finish(
                CampaignState(Phase.FAILED, FailureReason.AREA_NOT_FOUND),
                None,
                errors,
                shadow,
            )
        return finish(CampaignState(Phase.S2_PAGE_UPDATED), dom, errors, shadow)
    finally:
        try:
            client.delete_session(session_id)
        except DriverProtocolError:
            log.warning("could not delete driver session %s", session_id)


class _WaitTimedOut(Exception):
    pass


def _apply_action(
    client: WebDriverClient,
    session_id: str,
    action: Action,
    phase: Phase,
    timeout_ms: int,
) -> Phase:
    kind = action.kind
    if kind is ActionKind.FUZZ:
        # position marker: the target request went out during the actions
        # before this one
        return Phase.S1_REQUEST_SENT
    if kind is ActionKind.LOAD:
        client.navigate(session_id, action.payload)
    elif kind is ActionKind.INPUT:
        element = client.find_element(session_id, action.selector)
        client.send_keys(session_id, element, action.payload)
    elif kind is ActionKind.CLICK:
        element = client.find_element(session_id, action.selector)
        client.click(session_id, element)
    elif kind is ActionKind.HOVER:
        element = client.find_element(session_id, action.selector)
        client.hover(session_id, element)
    elif kind is ActionKind.SLEEP:
        time.sleep(action.sleep_ms() / 1000.0)
    elif kind is ActionKind.SCROLL:
        client.scroll(session_id, action.scroll_delta())
    elif kind is ActionKind.WAIT_LOCATE:
        if not _wait_for_element(client, session_id, action.selector, timeout_ms):
            raise _WaitTimedOut()
    return phase


def _collect_errors(client: WebDriverClient, session_id: str) -> list:
    try:
        errors = client.execute(session_id, ERRORS_PROBE)
    except DriverProtocolError:
        return []
    if not isinstance(errors, list):
        return []
    return [str(e) for e in errors]


def _detect_shadow_roots(client: WebDriverClient, session_id: str) -> bool:
    try:
        return bool(client.execute(session_id, SHADOW_PROBE))
    except DriverProtocolError:
        return False


def _capture_area(
    client: WebDriverClient, session_id: str, area: str | None
) -> str | None:
    try:
        return extract_dom(client, session_id, area)
    except (AreaNotFound, AreaAmbiguous, DriverProtocolError):
        return None
