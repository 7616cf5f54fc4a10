import pytest

from ssflow import harness

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def full_bundle(tmp_path_factory):
    """The full benchmark suite, run once and shared (about a minute)."""
    out = tmp_path_factory.mktemp("checks")
    return harness.run_benchmarks(suite="full", out_dir=out), out


@pytest.fixture
def acceptance():
    def record(label, ok, detail):
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
