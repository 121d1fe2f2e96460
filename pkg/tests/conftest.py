import pytest

from imcflab.sphere import SphereGrid


@pytest.fixture(scope="session")
def grid16():
    return SphereGrid.full(16)


@pytest.fixture(scope="session")
def grid32():
    return SphereGrid.full(32)


@pytest.fixture(scope="session")
def polar4():
    return SphereGrid.polar(4, 128)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            for key, text in rep.user_properties:
                if key == "criterion":
                    lines.append(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {text}")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
