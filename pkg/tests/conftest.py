import os
from pathlib import Path

import pytest

from agitation_ssl.cli import main

ACCEPTANCE = []  # verdict lines from test_acceptance, repeated in the terminal summary


def run_cli(workdir, *argv):
    """Run the command line inside ``workdir`` (config paths are relative)."""
    cwd = os.getcwd()
    os.chdir(workdir)
    try:
        return main(list(argv))
    finally:
        os.chdir(cwd)


@pytest.fixture(scope="session")
def tiny_runs(tmp_path_factory):
    """Two complete runs of the tiny preset with the same seed, in separate directories."""
    dirs = []
    for name in ("run_a", "run_b"):
        d = tmp_path_factory.mktemp(name)
        assert run_cli(d, "all", "--config", "tiny", "-q") == 0
        dirs.append(Path(d))
    return dirs


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
