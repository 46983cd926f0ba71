"""Campaign orchestration: preflight, per-field runs, validation, report.

A campaign tests one recorded session end to end.  Preflight drives the
unmutated session once for the baseline plus k more times to learn which
page slots flutter on their own; the fuzzing phase then drives the
script once per deletable field with that field removed from the target
response and decides each verdict by comparing the resulting page
against the baseline.  A field whose removal leaves the page identical
was never used by the client: that is the finding.
"""

from __future__ import annotations

import csv
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

from .domdiff import (
    ComparisonResult,
    DivergenceKind,
    DivergencePoint,
    DomTree,
    IgnoreMask,
    Verdict,
    build_ignore_mask,
    compare,
    parse_html,
)
from .mutate import (
    ApiResponseTree,
    FieldPath,
    apply_all_deletions,
    apply_deletion,
    enumerate_leaves,
)
from .replay import ReplayPlan, ReplayServer
from .script import InteractionScript
from .session import IoFailure, RecordedSession
from .webdriver import DriverProtocolError, DriveResult, drive

log = logging.getLogger(__name__)

DEFAULT_REPLAYS = 3

# A broken driver fails every remaining field the same way; stop burning
# time once the pattern is unmistakable.
MAX_CONSECUTIVE_DRIVER_FAILURES = 10


class CampaignError(Exception):
    """Base class for campaign-level failures."""


class BaselineStateNotReached(CampaignError):
    """The unmutated session never reached the page-updated state."""

    def __init__(self, phase: str, failure_reason: str | None) -> None:
        detail = failure_reason or "unknown"
        super().__init__(
            f"baseline drive ended in state {phase!r} ({detail}); "
            "the script must complete against the unmutated session"
        )
        self.phase = phase
        self.failure_reason = failure_reason


class NondeterministicRequests(CampaignError):
    """The page asked for URLs that are not in the recorded session."""

    def __init__(self, miss_log: Sequence[str]) -> None:
        shown = ", ".join(miss_log[:5])
        super().__init__(
            f"{len(miss_log)} request(s) missed the recording ({shown}); "
            "the page cannot be replayed faithfully"
        )
        self.miss_log = tuple(miss_log)


class ShadowRootsUnsupported(CampaignError):
    """The page builds shadow roots, which DOM serialization cannot see."""

    def __init__(self) -> None:
        super().__init__(
            "the page attaches shadow roots; their content is invisible to "
            "DOM comparison, so verdicts would be meaningless"
        )


class CampaignAborted(CampaignError):
    """A systemic failure ended the campaign early.

    Carries every verdict completed before the abort so partial results
    are not lost.
    """

    def __init__(self, reason: str, partial: Sequence["FieldVerdict"]) -> None:
        super().__init__(f"campaign aborted: {reason} ({len(partial)} fields done)")
        self.reason = reason
        self.partial = tuple(partial)


class FieldOutcome(str, Enum):
    EXCESSIVE = "excessive"
    NON_EXCESSIVE = "non-excessive"
    CLIENT_ERROR = "client-error"
    STATE_NOT_REACHED = "state-not-reached"


class ValidationOutcome(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class FieldVerdict:
    """Outcome of one deletion test."""

    path: FieldPath
    verdict: FieldOutcome
    divergence: ComparisonResult | None = None
    duration_ms: int = 0
    client_errors: tuple = ()


@dataclass(frozen=True)
class ValidationResult:
    outcome: ValidationOutcome
    detail: DivergencePoint | None = None


@dataclass(frozen=True)
class PreflightResult:
    baseline: DomTree
    mask: IgnoreMask
    # errors the page raises even unmutated; mutated runs are only charged
    # for errors beyond these
    baseline_errors: tuple = ()


@dataclass(frozen=True)
class FuzzReport:
    target_url: str
    total_fields: int
    flagged: tuple
    others: tuple
    mask_size: int
    validation: ValidationResult
    campaign_wall_time_ms: int
    workers: int

    def all_verdicts(self) -> tuple:
        return self.flagged + self.others

    def tests_per_minute(self) -> float:
        if self.campaign_wall_time_ms <= 0:
            return 0.0
        return self.total_fields * 60_000 / self.campaign_wall_time_ms


ProgressCallback = Callable[[int, int, FieldVerdict], None]


# ---------------------------------------------------------------------------
# preflight

def preflight(
    script: InteractionScript,
    session: RecordedSession,
    driver_endpoint: str,
    replays: int = DEFAULT_REPLAYS,
    timeout_ms: int | None = None,
) -> PreflightResult:
    """Drive the unmutated session 1 + replays times and learn the mask.

    Aborts the campaign when the page cannot be fuzzed at all: structural
    nondeterminism (TargetNondeterministic), requests outside the
    recording (NondeterministicRequests), shadow roots
    (ShadowRootsUnsupported), or a baseline that never completes
    (BaselineStateNotReached).
    """
    plan = ReplayPlan(session)
    trees: list[DomTree] = []
    baseline_errors: tuple = ()
    with ReplayServer(plan) as server:
        for attempt in range(1 + replays):
            plan.reset()
            result = drive(script, driver_endpoint, server.port, timeout_ms=timeout_ms)
            if not result.final_state.reached_s2:
                reason = result.final_state.failure_reason
                raise BaselineStateNotReached(
                    result.final_state.phase.value,
                    reason.value if reason is not None else None,
                )
            if plan.miss_log:
                raise NondeterministicRequests(tuple(plan.miss_log))
            if result.shadow_roots_detected:
                raise ShadowRootsUnsupported()
            if attempt == 0:
                baseline_errors = result.client_errors
                if baseline_errors:
                    log.warning(
                        "baseline page raises %d error(s) on its own; they "
                        "will not count against mutated runs",
                        len(baseline_errors),
                    )
            trees.append(parse_html(result.dom_html))
    baseline, *replay_trees = trees
    mask = (
        build_ignore_mask(baseline, replay_trees)
        if replay_trees
        else IgnoreMask.empty()
    )
    if len(mask):
        log.info("ignore mask covers %d fluttering slot(s)", len(mask))
    return PreflightResult(baseline=baseline, mask=mask, baseline_errors=baseline_errors)


# ---------------------------------------------------------------------------
# per-field execution

def _drive_with_retry(
    script: InteractionScript,
    driver_endpoint: str,
    proxy_port: int,
    timeout_ms: int | None,
) -> tuple[DriveResult | None, str | None]:
    """One retry on driver trouble; (result, None) or (None, error text)."""
    last: DriverProtocolError | None = None
    for attempt in (1, 2):
        try:
            return drive(script, driver_endpoint, proxy_port, timeout_ms=timeout_ms), None
        except DriverProtocolError as exc:
            last = exc
            log.warning("drive attempt %d failed: %s", attempt, exc)
    return None, str(last)


def _verdict_of(
    result: DriveResult,
    baseline: DomTree,
    mask: IgnoreMask,
    known_errors: frozenset,
) -> tuple[FieldOutcome, ComparisonResult | None, tuple]:
    new_errors = tuple(e for e in result.client_errors if e not in known_errors)
    if new_errors:
        # a crashed page often also stalls the script, so the error is the
        # better diagnosis; never a finding, compare skipped
        return FieldOutcome.CLIENT_ERROR, None, new_errors
    if not result.final_state.reached_s2:
        # the scripted interaction could not complete, so the page clearly
        # behaved differently without this field; never a finding
        return FieldOutcome.STATE_NOT_REACHED, None, new_errors
    outcome = compare(baseline, parse_html(result.dom_html), mask)
    if outcome.is_identical:
        return FieldOutcome.EXCESSIVE, outcome, ()
    return FieldOutcome.NON_EXCESSIVE, outcome, ()


class _ReplayPool:
    """Hands each worker thread its own replay server, lazily."""

    def __init__(self, session: RecordedSession) -> None:
        self._session = session
        self._local = threading.local()
        self._servers: list[ReplayServer] = []
        self._lock = threading.Lock()

    def bundle(self) -> tuple[ReplayServer, ReplayPlan]:
        got = getattr(self._local, "bundle", None)
        if got is None:
            plan = ReplayPlan(self._session)
            server = ReplayServer(plan).start()
            got = (server, plan)
            self._local.bundle = got
            with self._lock:
                self._servers.append(server)
        return got

    def close(self) -> None:
        with self._lock:
            servers, self._servers = list(self._servers), []
        for server in servers:
            server.stop()


class _Tally:
    """Progress counting and the consecutive-driver-failure fuse."""

    def __init__(self, total: int, progress: ProgressCallback | None) -> None:
        self.total = total
        self.progress = progress
        self.abort = threading.Event()
        self._done = 0
        self._consecutive_failures = 0
        self._lock = threading.Lock()

    def record(self, verdict: FieldVerdict, driver_failed: bool) -> None:
        with self._lock:
            self._done += 1
            if driver_failed:
                self._consecutive_failures += 1
                if self._consecutive_failures >= MAX_CONSECUTIVE_DRIVER_FAILURES:
                    self.abort.set()
            else:
                self._consecutive_failures = 0
            done = self._done
        if self.progress is not None:
            self.progress(done, self.total, verdict)


def run_campaign(
    script: InteractionScript,
    session: RecordedSession,
    driver_endpoint: str,
    workers: int = 1,
    replays: int = DEFAULT_REPLAYS,
    timeout_ms: int | None = None,
    progress: ProgressCallback | None = None,
) -> FuzzReport:
    """Fuzz every deletable field of the session's target response.

    Runs preflight first, then one drive per field (parallel across
    workers, each with a private replay server), then the
    simultaneous-removal validation over whatever was flagged.
    """
    started = time.monotonic()
    pre = preflight(script, session, driver_endpoint, replays=replays, timeout_ms=timeout_ms)
    tree = ApiResponseTree.from_bytes(session.target.response_body)
    paths = enumerate_leaves(tree)
    known_errors = frozenset(pre.baseline_errors)
    tally = _Tally(len(paths), progress)
    pool = _ReplayPool(session)

    def test_field(path: FieldPath) -> FieldVerdict | None:
        if tally.abort.is_set():
            return None
        server, plan = pool.bundle()
        plan.reset(mutation=apply_deletion(tree, path))
        field_started = time.monotonic()
        result, error = _drive_with_retry(
            script, driver_endpoint, server.port, timeout_ms
        )
        duration = int((time.monotonic() - field_started) * 1000)
        if result is None:
            verdict = FieldVerdict(
                path,
                FieldOutcome.CLIENT_ERROR,
                duration_ms=duration,
                client_errors=(f"webdriver: {error}",),
            )
            tally.record(verdict, driver_failed=True)
            return verdict
        kind, outcome, errors = _verdict_of(result, pre.baseline, pre.mask, known_errors)
        verdict = FieldVerdict(
            path, kind, divergence=outcome, duration_ms=duration, client_errors=errors
        )
        tally.record(verdict, driver_failed=False)
        return verdict

    collected: list[FieldVerdict] = []
    try:
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="fuzz") as executor:
            futures = [executor.submit(test_field, path) for path in paths]
            for future in futures:
                try:
                    verdict = future.result()
                except Exception as exc:
                    raise CampaignAborted(str(exc), collected) from exc
                if verdict is not None:
                    collected.append(verdict)
    finally:
        pool.close()

    if tally.abort.is_set():
        raise CampaignAborted(
            f"{MAX_CONSECUTIVE_DRIVER_FAILURES} consecutive driver failures",
            collected,
        )

    flagged = tuple(
        sorted(
            (v for v in collected if v.verdict is FieldOutcome.EXCESSIVE),
            key=lambda v: v.path.text(),
        )
    )
    others = tuple(
        sorted(
            (v for v in collected if v.verdict is not FieldOutcome.EXCESSIVE),
            key=lambda v: v.path.text(),
        )
    )
    validation = validate_simultaneous(
        [v.path for v in flagged],
        session,
        script,
        driver_endpoint,
        baseline=pre.baseline,
        mask=pre.mask,
        known_errors=known_errors,
        timeout_ms=timeout_ms,
    )
    wall = int((time.monotonic() - started) * 1000)
    report = FuzzReport(
        target_url=session.target.url,
        total_fields=len(paths),
        flagged=flagged,
        others=others,
        mask_size=len(pre.mask),
        validation=validation,
        campaign_wall_time_ms=wall,
        workers=workers,
    )
    log.info(
        "campaign done: %d/%d fields flagged in %.1fs (%.1f tests/min)",
        len(flagged),
        report.total_fields,
        wall / 1000,
        report.tests_per_minute(),
    )
    return report


# ---------------------------------------------------------------------------
# simultaneous-removal validation

def validate_simultaneous(
    flagged_paths: Iterable[FieldPath],
    session: RecordedSession,
    script: InteractionScript,
    driver_endpoint: str,
    baseline: DomTree | None = None,
    mask: IgnoreMask | None = None,
    known_errors: frozenset | None = None,
    replays: int = DEFAULT_REPLAYS,
    timeout_ms: int | None = None,
) -> ValidationResult:
    """Delete every flagged field at once and check the page still agrees.

    Flagged fields are individually invisible to the client; if removing
    all of them together changes the page, some only looked unused in
    isolation and the result is a validation failure.  Zero flagged
    fields pass trivially.  Baseline and mask are recomputed via
    preflight when not supplied (the standalone validation path).
    """
    paths = list(flagged_paths)
    if not paths:
        return ValidationResult(ValidationOutcome.PASS)
    if baseline is None or mask is None:
        pre = preflight(
            script, session, driver_endpoint, replays=replays, timeout_ms=timeout_ms
        )
        baseline, mask = pre.baseline, pre.mask
        known_errors = frozenset(pre.baseline_errors)
    tree = ApiResponseTree.from_bytes(session.target.response_body)
    plan = ReplayPlan(session)
    with ReplayServer(plan) as server:
        plan.reset(mutation=apply_all_deletions(tree, paths))
        result, error = _drive_with_retry(script, driver_endpoint, server.port, timeout_ms)
    if result is None:
        log.warning("validation drive failed twice (%s); outcome unknown", error)
        return ValidationResult(ValidationOutcome.SKIPPED)
    if not result.final_state.reached_s2:
        # removing the whole set stopped the page from updating at all
        return ValidationResult(ValidationOutcome.FAIL)
    new_errors = [
        e for e in result.client_errors if e not in (known_errors or frozenset())
    ]
    if new_errors:
        log.warning(
            "validation run raised %d page error(s); comparing anyway",
            len(new_errors),
        )
    outcome = compare(baseline, parse_html(result.dom_html), mask)
    if outcome.is_identical:
        return ValidationResult(ValidationOutcome.PASS)
    return ValidationResult(ValidationOutcome.FAIL, outcome.first_divergence)


# ---------------------------------------------------------------------------
# report serialization

def _comparison_to_json(outcome: ComparisonResult | None) -> dict | None:
    if outcome is None:
        return None
    return {
        "verdict": outcome.verdict.value,
        "first_divergence": (
            outcome.first_divergence.to_json()
            if outcome.first_divergence is not None
            else None
        ),
    }


def _parse_address(text: str) -> tuple:
    return tuple(int(part) for part in text.split("/") if part)


def _comparison_from_json(doc: dict | None) -> ComparisonResult | None:
    if doc is None:
        return None
    divergence = doc.get("first_divergence")
    point = None
    if divergence is not None:
        point = DivergencePoint(
            address=_parse_address(divergence["address"]),
            kind=DivergenceKind(divergence["kind"]),
            detail=divergence["detail"],
        )
    return ComparisonResult(Verdict(doc["verdict"]), point)


def _field_to_json(verdict: FieldVerdict) -> dict:
    return {
        "path": verdict.path.text(),
        "verdict": verdict.verdict.value,
        "duration_ms": verdict.duration_ms,
        "client_errors": list(verdict.client_errors),
        "divergence": _comparison_to_json(verdict.divergence),
    }


def _field_from_json(doc: dict) -> FieldVerdict:
    return FieldVerdict(
        path=FieldPath.parse(doc["path"]),
        verdict=FieldOutcome(doc["verdict"]),
        divergence=_comparison_from_json(doc.get("divergence")),
        duration_ms=doc["duration_ms"],
        client_errors=tuple(doc.get("client_errors", ())),
    )


def report_to_json(report: FuzzReport) -> dict:
    validation: dict = {"outcome": report.validation.outcome.value}
    validation["detail"] = (
        report.validation.detail.to_json() if report.validation.detail else None
    )
    return {
        "target_url": report.target_url,
        "total_fields": report.total_fields,
        "workers": report.workers,
        "mask_size": report.mask_size,
        "campaign_wall_time_ms": report.campaign_wall_time_ms,
        "tests_per_minute": round(report.tests_per_minute(), 2),
        "validation": validation,
        "flagged": [_field_to_json(v) for v in report.flagged],
        "others": [_field_to_json(v) for v in report.others],
    }


def report_from_json(document: dict | str | bytes) -> FuzzReport:
    if isinstance(document, (str, bytes)):
        document = json.loads(document)
    validation_doc = document["validation"]
    detail_doc = validation_doc.get("detail")
    detail = None
    if detail_doc is not None:
        detail = DivergencePoint(
            address=_parse_address(detail_doc["address"]),
            kind=DivergenceKind(detail_doc["kind"]),
            detail=detail_doc["detail"],
        )
    return FuzzReport(
        target_url=document["target_url"],
        total_fields=document["total_fields"],
        flagged=tuple(_field_from_json(v) for v in document["flagged"]),
        others=tuple(_field_from_json(v) for v in document["others"]),
        mask_size=document["mask_size"],
        validation=ValidationResult(
            ValidationOutcome(validation_doc["outcome"]), detail
        ),
        campaign_wall_time_ms=document["campaign_wall_time_ms"],
        workers=document["workers"],
    )


def emit_report(report: FuzzReport, format: str, path) -> None:
    """Write the report as JSON (full detail) or CSV (one row per field)."""
    try:
        if format == "json":
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(report_to_json(report), fh, indent=2)
                fh.write("\n")
        elif format == "csv":
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["path", "verdict", "duration_ms"])
                for verdict in sorted(
                    report.all_verdicts(), key=lambda v: v.path.text()
                ):
                    writer.writerow(
                        [verdict.path.text(), verdict.verdict.value, verdict.duration_ms]
                    )
        else:
            raise ValueError(f"unknown report format {format!r}")
    except OSError as exc:
        raise IoFailure(f"cannot write report to {path}: {exc}") from exc
