import stat
from pathlib import Path

import pytest

from solcat.environment import external_config, plain_config

_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1].removeprefix("test_")
    _acceptance_results.append((name, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance_results:
        terminalreporter.write_line(f"{outcome}: {name}")

STUB_SOURCE = """\
#!/usr/bin/env python3
\"\"\"Scripted stand-in for a conda-compatible environment manager.\"\"\"
import os
import pathlib
import subprocess
import sys

MARKERS = pathlib.Path({markers!r})
MARKERS.mkdir(parents=True, exist_ok=True)


def fail_if_requested(stage):
    if os.environ.get("STUB_FAIL") == stage:
        print(f"stub: simulated {{stage}} failure", file=sys.stderr)
        sys.exit(2)


def main():
    args = sys.argv[1:]
    if args[:2] == ["env", "create"]:
        fail_if_requested("create")
        name = args[args.index("--name") + 1]
        env_file = pathlib.Path(args[args.index("--file") + 1])
        assert env_file.is_file(), env_file
        marker = MARKERS / name
        if marker.exists():
            print("stub: environment exists", file=sys.stderr)
            sys.exit(1)
        marker.write_text(env_file.read_text())
        sys.exit(0)
    if args[:2] == ["env", "remove"]:
        fail_if_requested("remove")
        name = args[args.index("--name") + 1]
        marker = MARKERS / name
        if marker.exists():
            marker.unlink()
        sys.exit(0)
    if args[:1] == ["run"]:
        fail_if_requested("run")
        name = args[args.index("--name") + 1]
        if not (MARKERS / name).exists():
            print("stub: no such environment", file=sys.stderr)
            sys.exit(1)
        child = args[args.index("--name") + 2:]
        sys.exit(subprocess.run(child).returncode)
    print(f"stub: unknown invocation {{args}}", file=sys.stderr)
    sys.exit(64)


main()
"""


@pytest.fixture
def home(tmp_path) -> Path:
    return tmp_path / "home"


@pytest.fixture
def handle(home):
    from solcat.collection import open_collection

    with open_collection(home) as h:
        yield h


@pytest.fixture
def plain_cfg(home):
    return plain_config(home / "envs")


@pytest.fixture
def stub_tool(tmp_path) -> Path:
    """A fake environment-manager binary that records envs in a markers dir."""
    markers = tmp_path / "stub_markers"
    script = tmp_path / "stub_env_manager"
    script.write_text(STUB_SOURCE.format(markers=str(markers)))
    script.chmod(script.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return script


@pytest.fixture
def external_cfg(stub_tool, home):
    return external_config(home / "envs", executable=str(stub_tool))
