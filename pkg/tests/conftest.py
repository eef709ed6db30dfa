import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from epicast.data.io import load_panels, write_panels  # noqa: E402
from epicast.data.synth import SynthConfig, generate_synthetic  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_panels():
    return load_panels(FIXTURES / "panel")


@pytest.fixture(scope="session")
def default_panels():
    return generate_synthetic(SynthConfig(), 0)


@pytest.fixture
def panel_dir(tmp_path, fixture_panels):
    d = tmp_path / "panel"
    write_panels(fixture_panels, d)
    return d


# Acceptance criteria report one line each; collected here so they show up in
# the terminal summary regardless of output capturing.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
