"""Interaction-script DSL: parsing, validation, serialization round-trip."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overshare.script import (
    DEFAULT_TIMEOUT_MS,
    Action,
    ActionKind,
    DuplicateTarget,
    InteractionScript,
    MalformedArgument,
    MissingFuzzMarker,
    MissingTarget,
    UnknownDirective,
    parse_script,
    serialize_script,
    validate_script,
)

# ---------------------------------------------------------------------------
# generator for random valid scripts (independent of the serializer)

# printable ASCII without whitespace, so tokens survive line splitting
_token = st.text(
    alphabet=st.characters(min_codepoint=33, max_codepoint=126),
    min_size=1,
    max_size=16,
)
# selectors for CLICK/HOVER/WAIT_LOCATE/AREA may contain internal spaces
_selector = st.one_of(
    _token,
    st.builds(lambda a, b: f"{a} {b}", _token, _token),
)
_input_text = st.one_of(
    st.just(""),
    _token,
    st.builds(lambda a, b: f"{a} {b}", _token, _token),
)


def _actions() -> st.SearchStrategy[Action]:
    return st.one_of(
        st.builds(
            lambda n: Action(ActionKind.LOAD, payload=f"https://host{n}.example/page"),
            st.integers(0, 99),
        ),
        st.builds(lambda s: Action(ActionKind.CLICK, selector=s), _selector),
        st.builds(lambda s: Action(ActionKind.HOVER, selector=s), _selector),
        st.builds(lambda s: Action(ActionKind.WAIT_LOCATE, selector=s), _selector),
        st.builds(
            lambda s, t: Action(ActionKind.INPUT, selector=s, payload=t),
            _token,
            _input_text,
        ),
        st.builds(
            lambda n: Action(ActionKind.SLEEP, payload=str(n)), st.integers(0, 60_000)
        ),
        st.builds(
            lambda n: Action(ActionKind.SCROLL, payload=str(n)),
            st.integers(-2_000, 2_000),
        ),
    )


@st.composite
def _scripts(draw) -> InteractionScript:
    before = draw(st.lists(_actions(), max_size=5))
    after = draw(st.lists(_actions(), max_size=3))
    actions = (
        Action(ActionKind.LOAD, payload="https://origin.example/app"),
        *before,
        Action(ActionKind.FUZZ),
        *after,
    )
    return InteractionScript(
        target_matcher=draw(_token),
        actions=actions,
        area_of_interest=draw(st.none() | _selector),
        timeout_ms=draw(st.sampled_from([DEFAULT_TIMEOUT_MS, 5_000, 120_000])),
    )


# ---------------------------------------------------------------------------
# parsing

SAMPLE_CONFIG = """\
TARGET /api/v2/stock/get

LOAD https://www.example.com/path/page
INPUT //input[@id="text-postcode"] 3000
CLICK //span[text()='Check availability']
WAIT_LOCATE //div[@id="stock-info"]/div[2]
FUZZ
"""


def test_parses_sample_config():
    script = parse_script(SAMPLE_CONFIG)
    assert script.target_matcher == "/api/v2/stock/get"
    assert script.actions == (
        Action(ActionKind.LOAD, payload="https://www.example.com/path/page"),
        Action(ActionKind.INPUT, selector='//input[@id="text-postcode"]', payload="3000"),
        Action(ActionKind.CLICK, selector="//span[text()='Check availability']"),
        Action(ActionKind.WAIT_LOCATE, selector='//div[@id="stock-info"]/div[2]'),
        Action(ActionKind.FUZZ),
    )
    assert script.area_of_interest is None
    assert script.timeout_ms == DEFAULT_TIMEOUT_MS


def test_sleep_payload_is_milliseconds_text():
    script = parse_script("TARGET /a\nLOAD http://x/\nSLEEP 500\nFUZZ\n")
    sleep = script.actions[1]
    assert sleep == Action(ActionKind.SLEEP, payload="500")
    assert sleep.sleep_ms() == 500


def test_scroll_accepts_negative_delta():
    script = parse_script("TARGET /a\nLOAD http://x/\nSCROLL -250\nFUZZ\n")
    assert script.actions[1].scroll_delta() == -250


def test_comments_blank_lines_and_crlf_are_ignored():
    text = "# header\r\nTARGET /a\r\n\r\n  # indented comment\r\nLOAD http://x/\r\nFUZZ\r\n"
    script = parse_script(text)
    assert script.target_matcher == "/a"
    assert [a.kind for a in script.actions] == [ActionKind.LOAD, ActionKind.FUZZ]


def test_area_and_timeout_directives():
    text = "TARGET /a\nTIMEOUT 5000\nAREA //main[@id='content']\nLOAD http://x/\nFUZZ\n"
    script = parse_script(text)
    assert script.area_of_interest == "//main[@id='content']"
    assert script.timeout_ms == 5000


def test_input_selector_is_first_token_rest_is_payload():
    script = parse_script("TARGET /a\nLOAD http://x/\nINPUT //input[@name='q'] hello world\nFUZZ\n")
    action = script.actions[1]
    assert action.selector == "//input[@name='q']"
    assert action.payload == "hello world"


def test_input_with_no_text_types_empty_string():
    script = parse_script("TARGET /a\nLOAD http://x/\nINPUT //input[@name='q']\nFUZZ\n")
    assert script.actions[1].payload == ""


def test_click_selector_keeps_internal_spaces():
    script = parse_script("TARGET /a\nLOAD http://x/\nCLICK //span[text()='Check availability']\nFUZZ\n")
    assert script.actions[1].selector == "//span[text()='Check availability']"


def test_wait_locate_allowed_before_fuzz():
    script = parse_script("TARGET /a\nLOAD http://x/\nWAIT_LOCATE //div[1]\nFUZZ\n")
    assert script.actions[1].kind is ActionKind.WAIT_LOCATE


def test_actions_after_fuzz_are_kept_in_order():
    text = "TARGET /a\nLOAD http://x/\nFUZZ\nWAIT_LOCATE //p\nSLEEP 100\n"
    script = parse_script(text)
    assert [a.kind for a in script.actions] == [
        ActionKind.LOAD,
        ActionKind.FUZZ,
        ActionKind.WAIT_LOCATE,
        ActionKind.SLEEP,
    ]


def test_prefix_actions_stop_at_fuzz_marker():
    script = parse_script(SAMPLE_CONFIG)
    assert len(script.prefix_actions()) == 4
    assert all(a.kind is not ActionKind.FUZZ for a in script.prefix_actions())


def test_parsing_is_deterministic():
    assert parse_script(SAMPLE_CONFIG) == parse_script(SAMPLE_CONFIG)


# ---------------------------------------------------------------------------
# rejection

def test_empty_text_is_missing_target():
    with pytest.raises(MissingTarget):
        parse_script("")


def test_comment_only_text_is_missing_target():
    with pytest.raises(MissingTarget):
        parse_script("# nothing here\n\n")


def test_missing_fuzz_marker():
    with pytest.raises(MissingFuzzMarker):
        parse_script("TARGET /a\nLOAD http://x/\n")


def test_duplicate_target_reports_line():
    with pytest.raises(DuplicateTarget) as exc:
        parse_script("TARGET /a\nLOAD http://x/\nTARGET /b\nFUZZ\n")
    assert exc.value.line_no == 3


def test_unknown_directive_reports_line_and_keyword():
    with pytest.raises(UnknownDirective) as exc:
        parse_script("TARGET /a\n\nGOTO //x\n")
    assert exc.value.line_no == 3
    assert exc.value.keyword == "GOTO"


def test_keywords_are_case_sensitive():
    with pytest.raises(UnknownDirective) as exc:
        parse_script("TARGET /a\nload http://x/\nFUZZ\n")
    assert exc.value.keyword == "load"


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("TARGET /a\nFUZZ\n", "FUZZ before any LOAD"),
        ("TARGET /a\nLOAD http://x/\nFUZZ\nFUZZ\n", "duplicate FUZZ"),
        ("TARGET /a\nLOAD /relative\nFUZZ\n", "absolute"),
        ("TARGET /a\nLOAD http://x/\nSLEEP -5\nFUZZ\n", "SLEEP"),
        ("TARGET /a\nLOAD http://x/\nSLEEP soon\nFUZZ\n", "SLEEP"),
        ("TARGET /a\nLOAD http://x/\nSCROLL fast\nFUZZ\n", "SCROLL"),
        ("TARGET /a\nLOAD http://x/\nFUZZ now\n", "FUZZ takes no argument"),
        ("TARGET /a\nCLICK\nLOAD http://x/\nFUZZ\n", "CLICK needs a selector"),
        ("TARGET\nLOAD http://x/\nFUZZ\n", "TARGET"),
        ("TARGET /a\nTIMEOUT 0\nLOAD http://x/\nFUZZ\n", "TIMEOUT"),
        ("TARGET /a\nTIMEOUT 5\nTIMEOUT 6\nLOAD http://x/\nFUZZ\n", "duplicate TIMEOUT"),
        ("TARGET /a\nAREA //x\nAREA //y\nLOAD http://x/\nFUZZ\n", "duplicate AREA"),
        ("TARGET /a\nAREA\nLOAD http://x/\nFUZZ\n", "AREA"),
    ],
)
def test_malformed_arguments_rejected(text, fragment):
    with pytest.raises(MalformedArgument) as exc:
        parse_script(text)
    assert fragment in str(exc.value)


def test_malformed_argument_reports_source_line():
    with pytest.raises(MalformedArgument) as exc:
        parse_script("TARGET /a\nLOAD http://x/\n\n# pad\nSLEEP -1\nFUZZ\n")
    assert exc.value.line_no == 5


def test_validate_rejects_input_selector_with_whitespace():
    script = InteractionScript(
        target_matcher="/a",
        actions=(
            Action(ActionKind.LOAD, payload="http://x/"),
            Action(ActionKind.INPUT, selector="//input[@a='b c']", payload="t"),
            Action(ActionKind.FUZZ),
        ),
    )
    with pytest.raises(MalformedArgument) as exc:
        validate_script(script)
    assert "whitespace" in str(exc.value)


def test_validate_rejects_missing_fuzz_in_programmatic_script():
    script = InteractionScript(
        target_matcher="/a", actions=(Action(ActionKind.LOAD, payload="http://x/"),)
    )
    with pytest.raises(MissingFuzzMarker):
        validate_script(script)


# ---------------------------------------------------------------------------
# serialization round-trip

def test_sample_config_round_trips():
    script = parse_script(SAMPLE_CONFIG)
    assert parse_script(serialize_script(script)) == script


def test_minimal_script_serializes_to_three_directives():
    script = InteractionScript(
        target_matcher="/api/x",
        actions=(Action(ActionKind.LOAD, payload="https://a.example/"), Action(ActionKind.FUZZ)),
    )
    lines = [l for l in serialize_script(script).splitlines() if l]
    assert lines == ["TARGET /api/x", "LOAD https://a.example/", "FUZZ"]


def test_serialize_emits_area_and_timeout():
    script = parse_script("TARGET /a\nTIMEOUT 7000\nAREA //main\nLOAD http://x/\nFUZZ\n")
    text = serialize_script(script)
    assert "TIMEOUT 7000" in text
    assert "AREA //main" in text
    assert parse_script(text) == script


@settings(max_examples=200)
@given(_scripts())
def test_round_trip_identity(script):
    assert parse_script(serialize_script(script)) == script
