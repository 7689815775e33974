import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


class Criterion:
    """Records one pass/fail line per acceptance criterion, then asserts."""

    def __call__(self, label: str, passed: bool, detail: str) -> None:
        line = f"{label}: {'PASS' if passed else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line


@pytest.fixture
def criterion() -> Criterion:
    return Criterion()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
