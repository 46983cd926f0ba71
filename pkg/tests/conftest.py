"""Shared fixtures: the jsdom WebDriver shim and the acceptance summary.

End-to-end tests drive real campaigns against ``webdriver-shim/``, a
small Node process speaking the WebDriver wire protocol over jsdom.
Tests marked ``criterion(...)`` roll up into a pass/fail line per
acceptance criterion at the end of the run.
"""

from __future__ import annotations

import shutil
import subprocess
import time
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
SHIM_DIR = REPO_ROOT / "webdriver-shim"

# criterion name -> {"passed": bool, "notes": [str, ...]}, in execution order
_acceptance: dict = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): acceptance criterion exercised by this test"
    )


def _read_listening_port(process, timeout: float = 30.0) -> int:
    deadline = time.monotonic() + timeout
    assert process.stdout is not None
    while time.monotonic() < deadline:
        line = process.stdout.readline()
        if not line:
            break
        if line.startswith("LISTENING "):
            return int(line.split()[1])
    process.kill()
    raise RuntimeError("webdriver shim did not report a listening port")


@pytest.fixture(scope="session")
def driver_endpoint():
    """WebDriver endpoint of a shim process owned by this test session."""
    node = shutil.which("node")
    if node is None:
        pytest.fail("end-to-end tests need node on PATH for webdriver-shim")
    if not (SHIM_DIR / "node_modules").is_dir():
        install = subprocess.run(
            ["npm", "install", "--no-audit", "--no-fund"],
            cwd=SHIM_DIR,
            capture_output=True,
            text=True,
        )
        if install.returncode != 0:
            pytest.fail(f"npm install failed in {SHIM_DIR}:\n{install.stderr}")
    process = subprocess.Popen(
        [node, "server.js", "--port", "0"],
        cwd=SHIM_DIR,
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
    )
    try:
        port = _read_listening_port(process)
        yield f"http://127.0.0.1:{port}"
    finally:
        process.terminate()
        try:
            process.wait(timeout=10)
        except subprocess.TimeoutExpired:
            process.kill()


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None and report.when in ("setup", "call"):
        entry = _acceptance.setdefault(
            marker.args[0], {"passed": True, "notes": []}
        )
        if report.failed or (report.when == "setup" and report.skipped):
            entry["passed"] = False
        for key, value in report.user_properties:
            if key == "acceptance_note" and value not in entry["notes"]:
                entry["notes"].append(value)
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, entry in _acceptance.items():
        status = "PASS" if entry["passed"] else "FAIL"
        notes = f"  ({'; '.join(entry['notes'])})" if entry["notes"] else ""
        terminalreporter.write_line(f"{status}  {name}{notes}")
