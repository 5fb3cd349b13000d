from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import pytest

GOLDEN = Path(__file__).parent / "golden" / "oracle_values.txt"


def _parse(value: str):
    value = value.strip()
    if "/" in value:
        return Fraction(value)
    return float(value)


def load_golden() -> dict:
    out = {}
    for line in GOLDEN.read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = _parse(value)
    return out


@pytest.fixture(scope="session")
def golden() -> dict:
    return load_golden()


# Acceptance criteria register one verdict line each; they are printed in the
# terminal summary so a run shows a pass/fail line per criterion.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
