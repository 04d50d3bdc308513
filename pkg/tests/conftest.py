import numpy as np
import pytest

from roa.resample import Dataset


@pytest.fixture
def normal20():
    return Dataset.from_values(np.random.default_rng(123).normal(0.0, 1.0, 20), "normal20")


def pytest_configure(config):
    config.verdicts = []


@pytest.fixture
def verdict(request, capsys):
    """Print and remember one PASS/FAIL line."""
    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"
        request.config.verdicts.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    if config.verdicts:
        terminalreporter.section("acceptance")
        for line in config.verdicts:
            terminalreporter.write_line(line)
