"""Shared test plumbing: the acceptance suite records one verdict per
criterion here, and the terminal summary prints them as single lines."""

CRITERION_RESULTS = {}


def record_criterion(num: int, ok: bool, detail: str):
    """Store a criterion verdict; call before asserting so failures still print."""
    CRITERION_RESULTS[num] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERION_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERION_RESULTS):
        ok, detail = CRITERION_RESULTS[num]
        tag = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{tag}] criterion {num}: {detail}")
