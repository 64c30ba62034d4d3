from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    """Store one acceptance outcome and echo it."""
    ACCEPTANCE[criterion] = (ok, detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
