"""The interaction-script DSL: how to walk a page from cold start to the
state where the target API's effect is visible.

A script is a plain UTF-8 text file, one directive per line::

    TARGET /api/v2/stock/get

    LOAD https://www.example.com/path/page
    INPUT //input[@id="text-postcode"] 3000
    CLICK //span[text()='Check availability']
    WAIT_LOCATE //div[@id="stock-info"]/div[2]
    FUZZ

Keywords are case-sensitive uppercase.  Blank lines and lines starting
with ``#`` are ignored; LF and CRLF both work.  ``TARGET`` names the URL
path substring of the API under test and must appear exactly once.  The
``FUZZ`` marker must appear exactly once, after at least one ``LOAD``; the
actions before it replay the user journey, and any ``WAIT_LOCATE`` (before
or after it) polls until its element exists.  Two optional knobs extend
the action grammar: ``AREA <xpath>`` restricts DOM capture to one subtree
and ``TIMEOUT <ms>`` caps every wait.

Selectors are XPath.  ``CLICK``/``HOVER``/``WAIT_LOCATE``/``AREA`` take
the whole rest of the line (spaces allowed); ``INPUT`` takes a
whitespace-free selector followed by the text to type, so an INPUT
selector must not contain spaces.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from urllib.parse import urlsplit


class ScriptError(ValueError):
    """Base for all DSL parse/validation failures."""


class UnknownDirective(ScriptError):
    def __init__(self, line_no: int, keyword: str):
        super().__init__(f"line {line_no}: unknown directive {keyword!r}")
        self.line_no = line_no
        self.keyword = keyword


class MissingTarget(ScriptError):
    def __init__(self):
        super().__init__("script declares no TARGET")


class DuplicateTarget(ScriptError):
    def __init__(self, line_no: int):
        super().__init__(f"line {line_no}: TARGET declared more than once")
        self.line_no = line_no


class MissingFuzzMarker(ScriptError):
    def __init__(self):
        super().__init__("script has no FUZZ marker")


class MalformedArgument(ScriptError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class ActionKind(str, enum.Enum):
    LOAD = "LOAD"
    INPUT = "INPUT"
    CLICK = "CLICK"
    WAIT_LOCATE = "WAIT_LOCATE"
    HOVER = "HOVER"
    SLEEP = "SLEEP"
    SCROLL = "SCROLL"
    FUZZ = "FUZZ"


# which argument slots each action kind uses
_SELECTOR_ONLY = {ActionKind.CLICK, ActionKind.HOVER, ActionKind.WAIT_LOCATE}
_PAYLOAD_ONLY = {ActionKind.LOAD, ActionKind.SLEEP, ActionKind.SCROLL}

DEFAULT_TIMEOUT_MS = 30_000


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    selector: str | None = None
    payload: str | None = None

    def sleep_ms(self) -> int:
        assert self.kind is ActionKind.SLEEP
        return int(self.payload)

    def scroll_delta(self) -> int:
        assert self.kind is ActionKind.SCROLL
        return int(self.payload)


@dataclass(frozen=True)
class InteractionScript:
    """A parsed configuration: the target API matcher plus the ordered
    browser actions that take the client from its initial state to the
    post-update state."""

    target_matcher: str
    actions: tuple[Action, ...] = field(default_factory=tuple)
    area_of_interest: str | None = None
    timeout_ms: int = DEFAULT_TIMEOUT_MS

    def prefix_actions(self) -> tuple[Action, ...]:
        """Actions up to (excluding) the FUZZ marker."""
        idx = self._fuzz_index()
        return self.actions[:idx]

    def _fuzz_index(self) -> int:
        for i, a in enumerate(self.actions):
            if a.kind is ActionKind.FUZZ:
                return i
        raise MissingFuzzMarker()


def _is_absolute_url(url: str) -> bool:
    parts = urlsplit(url)
    return parts.scheme in ("http", "https") and bool(parts.netloc)


def validate_script(
    script: InteractionScript, source_lines: tuple[int, ...] | None = None
) -> None:
    """Enforce the structural invariants; raises a ScriptError subclass.

    ``source_lines`` maps each action back to its line in the DSL source
    so errors point at the offending line; without it (programmatically
    built scripts) the action's 1-based position is reported instead.
    """
    if not script.target_matcher:
        raise MissingTarget()
    fuzz_seen = 0
    load_seen = 0
    for i, action in enumerate(script.actions):
        line = source_lines[i] if source_lines is not None else i + 1
        if action.kind is ActionKind.FUZZ:
            if load_seen == 0:
                raise MalformedArgument(line, "FUZZ before any LOAD")
            fuzz_seen += 1
            if fuzz_seen > 1:
                raise MalformedArgument(line, "duplicate FUZZ marker")
            continue
        if action.kind is ActionKind.LOAD:
            load_seen += 1
            if not action.payload or not _is_absolute_url(action.payload):
                raise MalformedArgument(line, "LOAD needs an absolute http(s) URL")
        elif action.kind in _SELECTOR_ONLY:
            if not action.selector:
                raise MalformedArgument(line, f"{action.kind.value} needs a selector")
        elif action.kind is ActionKind.INPUT:
            if not action.selector:
                raise MalformedArgument(line, "INPUT needs a selector")
            if any(ch.isspace() for ch in action.selector):
                raise MalformedArgument(line, "INPUT selector must not contain whitespace")
            if action.payload is None:
                raise MalformedArgument(line, "INPUT needs text to type")
        elif action.kind is ActionKind.SLEEP:
            if not _parses_as_int(action.payload) or int(action.payload) < 0:
                raise MalformedArgument(line, "SLEEP needs a non-negative integer")
        elif action.kind is ActionKind.SCROLL:
            if not _parses_as_int(action.payload):
                raise MalformedArgument(line, "SCROLL needs a signed integer")
    if fuzz_seen == 0:
        raise MissingFuzzMarker()
    if script.area_of_interest is not None and not script.area_of_interest:
        raise MalformedArgument(0, "AREA selector is empty")
    if script.timeout_ms <= 0:
        raise MalformedArgument(0, "TIMEOUT must be positive")


def _parses_as_int(text: str | None) -> bool:
    if text is None:
        return False
    try:
        int(text)
    except ValueError:
        return False
    return True


def parse_script(text: str) -> InteractionScript:
    """Parse a DSL document; the resulting action order equals source order."""
    target: str | None = None
    area: str | None = None
    timeout: int | None = None
    actions: list[Action] = []
    action_lines: list[int] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        keyword, _, rest = line.partition(" ")
        rest = rest.strip()
        if keyword == "TARGET":
            if target is not None:
                raise DuplicateTarget(line_no)
            if not rest:
                raise MalformedArgument(line_no, "TARGET needs a URL path pattern")
            target = rest
        elif keyword == "AREA":
            if area is not None:
                raise MalformedArgument(line_no, "duplicate AREA")
            if not rest:
                raise MalformedArgument(line_no, "AREA needs an XPath selector")
            area = rest
        elif keyword == "TIMEOUT":
            if timeout is not None:
                raise MalformedArgument(line_no, "duplicate TIMEOUT")
            if not rest.isdigit() or int(rest) <= 0:
                raise MalformedArgument(line_no, "TIMEOUT needs a positive integer")
            timeout = int(rest)
        elif keyword in ActionKind.__members__:
            kind = ActionKind[keyword]
            actions.append(_parse_action(kind, rest, line_no))
            action_lines.append(line_no)
        else:
            raise UnknownDirective(line_no, keyword)

    if target is None:
        raise MissingTarget()
    script = InteractionScript(
        target_matcher=target,
        actions=tuple(actions),
        area_of_interest=area,
        timeout_ms=timeout if timeout is not None else DEFAULT_TIMEOUT_MS,
    )
    validate_script(script, tuple(action_lines))
    return script


def _parse_action(kind: ActionKind, rest: str, line_no: int) -> Action:
    if kind is ActionKind.FUZZ:
        if rest:
            raise MalformedArgument(line_no, "FUZZ takes no argument")
        return Action(kind)
    if kind in _SELECTOR_ONLY:
        if not rest:
            raise MalformedArgument(line_no, f"{kind.value} needs a selector")
        return Action(kind, selector=rest)
    if kind in _PAYLOAD_ONLY:
        if not rest:
            raise MalformedArgument(line_no, f"{kind.value} needs an argument")
        return Action(kind, payload=rest)
    # INPUT: selector token, then everything after it is the text to type
    selector, _, payload = rest.partition(" ")
    if not selector:
        raise MalformedArgument(line_no, "INPUT needs a selector and text")
    return Action(ActionKind.INPUT, selector=selector, payload=payload.strip())


def serialize_script(script: InteractionScript) -> str:
    """Render a script back to DSL text; parse(serialize(s)) == s."""
    validate_script(script)
    lines = [f"TARGET {script.target_matcher}"]
    if script.timeout_ms != DEFAULT_TIMEOUT_MS:
        lines.append(f"TIMEOUT {script.timeout_ms}")
    if script.area_of_interest is not None:
        lines.append(f"AREA {script.area_of_interest}")
    lines.append("")
    for action in script.actions:
        if action.kind is ActionKind.FUZZ:
            lines.append("FUZZ")
        elif action.kind in _SELECTOR_ONLY:
            lines.append(f"{action.kind.value} {action.selector}")
        elif action.kind in _PAYLOAD_ONLY:
            lines.append(f"{action.kind.value} {action.payload}")
        else:
            lines.append(f"INPUT {action.selector} {action.payload}".rstrip())
    return "\n".join(lines) + "\n"
