import pytest

# Hurst families exercised across the suite.
FAMILY_SPECS = [
    "const:H=0.5",
    "const:H=0.2",
    "plateau:hmin=0.3,hmax=0.7,a=0.4,b=0.6",
    "cusp:hmin=0.3,x=0.5,p=2,c=1.5,cap=0.8",
    "cusp:hmin=0.3,x=0.4,p=3,c=4,cap=0.75",
    "sine:base=0.5,amp=0.2,freq=2",
]

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the final summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
