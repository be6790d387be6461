from collections import defaultdict

import pytest

_RESULTS: dict[int, list[tuple[str, bool, str]]] = defaultdict(list)


@pytest.fixture
def criterion():
    """Record ``(number, part, ok, detail)`` for the end-of-session acceptance table."""

    def record(number: int, part: str, ok: bool, detail: str = "") -> bool:
        _RESULTS[number].append((part, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        parts = _RESULTS[number]
        ok = all(p[1] for p in parts)
        tr.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}")
        for part, good, detail in parts:
            tr.write_line(f"    [{'pass' if good else 'FAIL'}] {part}: {detail}")
