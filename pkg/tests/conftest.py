import numpy as np
import pytest

RESULTS: dict = {}


def record(key: str, ok: bool, detail: str) -> str:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}"
    RESULTS[key] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")

    def order(k):
        num = "".join(ch for ch in k if ch.isdigit())
        return (int(num), k)

    for key in sorted(RESULTS, key=order):
        terminalreporter.write_line(RESULTS[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
