"""Command-line front end.

Subcommands cover the whole workflow: record or import a session, run
preflight alone, fuzz a recorded session, and re-validate a saved
report.  Exit codes are part of the interface: 0 success, 1 operational
error, 2 campaign aborted in preflight (reason letter on stderr),
3 validation failed.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .campaign import (
    BaselineStateNotReached,
    CampaignAborted,
    CampaignError,
    NondeterministicRequests,
    ShadowRootsUnsupported,
    ValidationOutcome,
    emit_report,
    preflight,
    report_from_json,
    run_campaign,
    validate_simultaneous,
)
from .domdiff import TargetNondeterministic
from .mutate import UnsupportedContentType
from .recorder import RecorderError, record_session
from .replay import ReplayError
from .script import InteractionScript, ScriptError, parse_script
from .session import SessionError, import_har, load_session, save_session
from .webdriver import DriverProtocolError

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_OPERATIONAL = 1
EXIT_ABORTED = 2
EXIT_VALIDATION_FAILED = 3

# preflight abort letters, named on stderr so wrappers can triage
_ABORT_LETTERS = (
    (TargetNondeterministic, "B"),
    (NondeterministicRequests, "F"),
    (ShadowRootsUnsupported, "S"),
)

_OPERATIONAL_ERRORS = (
    ScriptError,
    SessionError,
    RecorderError,
    ReplayError,
    DriverProtocolError,
    UnsupportedContentType,
    CampaignError,
    OSError,
)


class UsageError(Exception):
    """Bad invocation that argparse cannot catch, such as a missing endpoint."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overshare",
        description=(
            "Find excessive data exposure in web APIs: replay a recorded "
            "session, delete one response field at a time, and flag fields "
            "whose removal leaves the page unchanged."
        ),
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log progress details"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_driver(cmd):
        cmd.add_argument(
            "--driver",
            help="WebDriver endpoint URL (defaults to $WEBDRIVER_URL)",
        )

    record = sub.add_parser("record", help="capture a browsing session")
    record.add_argument("--config", required=True, help="interaction script file")
    record.add_argument("--out", required=True, help="session archive to write")
    record.add_argument(
        "--proxy-port",
        type=int,
        default=0,
        help="capture proxy port (default: ephemeral)",
    )
    record.add_argument("--notes", default="", help="free-form archive notes")
    add_driver(record)
    record.set_defaults(func=_cmd_record)

    har = sub.add_parser("import-har", help="build a session from a HAR file")
    har.add_argument("--har", required=True, help="HAR file to import")
    har.add_argument(
        "--target", required=True, help="substring of the target API URL path"
    )
    har.add_argument("--out", required=True, help="session archive to write")
    har.set_defaults(func=_cmd_import_har)

    pre = sub.add_parser("preflight", help="check a session is fuzzable")
    pre.add_argument("--config", required=True)
    pre.add_argument("--session", required=True)
    pre.add_argument("--replays", type=int, default=3)
    pre.add_argument("--timeout", type=int, help="per-drive timeout in ms")
    add_driver(pre)
    pre.set_defaults(func=_cmd_preflight)

    fuzz = sub.add_parser("fuzz", help="run the full campaign")
    fuzz.add_argument("--config", required=True)
    fuzz.add_argument("--session", required=True)
    fuzz.add_argument("--workers", type=int, default=1)
    fuzz.add_argument("--replays", type=int, default=3)
    fuzz.add_argument("--timeout", type=int, help="per-drive timeout in ms")
    fuzz.add_argument("--report", help="write the JSON report here")
    fuzz.add_argument("--csv", help="write the CSV report here")
    add_driver(fuzz)
    fuzz.set_defaults(func=_cmd_fuzz)

    val = sub.add_parser(
        "validate", help="re-check a report by deleting all flagged fields at once"
    )
    val.add_argument("--report", required=True, help="JSON report to validate")
    val.add_argument("--session", required=True)
    val.add_argument("--config", required=True)
    val.add_argument("--replays", type=int, default=3)
    val.add_argument("--timeout", type=int, help="per-drive timeout in ms")
    add_driver(val)
    val.set_defaults(func=_cmd_validate)

    return parser


def _load_script(path: str) -> InteractionScript:
    return parse_script(Path(path).read_text(encoding="utf-8"))


def _driver_endpoint(args) -> str:
    endpoint = args.driver or os.environ.get("WEBDRIVER_URL")
    if not endpoint:
        raise UsageError("no WebDriver endpoint: pass --driver or set WEBDRIVER_URL")
    return endpoint


def _cmd_record(args) -> int:
    script = _load_script(args.config)
    session = record_session(
        script, args.proxy_port, _driver_endpoint(args), notes=args.notes
    )
    save_session(session, args.out)
    print(
        f"recorded {len(session.exchanges)} exchanges to {args.out}; "
        f"target: {session.target.url}"
    )
    return EXIT_OK


def _cmd_import_har(args) -> int:
    session = import_har(Path(args.har).read_bytes(), args.target)
    save_session(session, args.out)
    print(
        f"imported {len(session.exchanges)} exchanges to {args.out}; "
        f"target: {session.target.url}"
    )
    return EXIT_OK


def _cmd_preflight(args) -> int:
    script = _load_script(args.config)
    session = load_session(args.session)
    result = preflight(
        script,
        session,
        _driver_endpoint(args),
        replays=args.replays,
        timeout_ms=args.timeout,
    )
    print(f"preflight ok: ignore mask covers {len(result.mask)} slot(s)")
    return EXIT_OK


def _print_iteration(done: int, total: int, verdict) -> None:
    print(
        f"[{done}/{total}] {verdict.path.text()}: {verdict.verdict.value}",
        file=sys.stderr,
    )


def _cmd_fuzz(args) -> int:
    script = _load_script(args.config)
    session = load_session(args.session)
    report = run_campaign(
        script,
        session,
        _driver_endpoint(args),
        workers=args.workers,
        replays=args.replays,
        timeout_ms=args.timeout,
        progress=_print_iteration,
    )
    if args.report:
        emit_report(report, "json", args.report)
        print(f"report written to {args.report}")
    if args.csv:
        emit_report(report, "csv", args.csv)
        print(f"csv written to {args.csv}")

    print(f"target: {report.target_url}")
    print(f"fields tested: {report.total_fields}")
    print(f"flagged excessive: {len(report.flagged)}")
    for verdict in report.flagged:
        print(f"  {verdict.path.text()}")
    print(f"ignore mask size: {report.mask_size}")
    print(f"validation: {report.validation.outcome.value}")
    print(f"rate: {report.tests_per_minute():.1f} tests/minute")
    if report.validation.outcome is ValidationOutcome.FAIL:
        print(
            "validation failed (V): the flagged set interacts; "
            "individual verdicts need manual review",
            file=sys.stderr,
        )
        return EXIT_VALIDATION_FAILED
    return EXIT_OK


def _cmd_validate(args) -> int:
    script = _load_script(args.config)
    session = load_session(args.session)
    report = report_from_json(Path(args.report).read_text(encoding="utf-8"))
    result = validate_simultaneous(
        [v.path for v in report.flagged],
        session,
        script,
        _driver_endpoint(args),
        replays=args.replays,
        timeout_ms=args.timeout,
    )
    print(f"validation: {result.outcome.value}")
    if result.detail is not None:
        print(f"  first divergence: {result.detail.to_json()}")
    if result.outcome is ValidationOutcome.FAIL:
        print("validation failed (V)", file=sys.stderr)
        return EXIT_VALIDATION_FAILED
    if result.outcome is ValidationOutcome.SKIPPED:
        print("validation could not run", file=sys.stderr)
        return EXIT_OPERATIONAL
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (TargetNondeterministic, NondeterministicRequests, ShadowRootsUnsupported) as exc:
        letter = next(l for kind, l in _ABORT_LETTERS if isinstance(exc, kind))
        print(f"campaign aborted, reason {letter}: {exc}", file=sys.stderr)
        return EXIT_ABORTED
    except BaselineStateNotReached as exc:
        print(f"campaign aborted: {exc}", file=sys.stderr)
        return EXIT_ABORTED
    except CampaignAborted as exc:
        print(
            f"error: {exc}; {len(exc.partial)} field verdict(s) completed",
            file=sys.stderr,
        )
        return EXIT_OPERATIONAL
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPERATIONAL
    except _OPERATIONAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPERATIONAL


if __name__ == "__main__":
    sys.exit(main())
