import pytest

#: criterion number -> list of (part, passed, detail); filled by test_acceptance.py
CRITERIA: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, part: str, passed: bool, detail: str) -> None:
    CRITERIA.setdefault(criterion, []).append((part, bool(passed), detail))
    print(f"criterion {criterion} [{part}]: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        parts = CRITERIA[n]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{name}: {'ok' if p else 'FAIL'} ({d})" for name, p, d in parts)
        terminalreporter.write_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} | {detail}")


@pytest.fixture
def record_criterion():
    return record
