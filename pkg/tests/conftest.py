import pytest

N_CRITERIA = 11
_outcomes = {}  # criterion -> list of (passed, detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): test belongs to numbered acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.skipped:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        detail = ", ".join(f"{k}={v}" for k, v in item.user_properties)
        if rep.failed and not detail:
            detail = f"{item.name} failed"
        _outcomes.setdefault(mark.args[0], []).append((rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        runs = _outcomes.get(n)
        if not runs:
            terminalreporter.write_line(f"criterion {n:>2}: NOT RUN")
            continue
        verdict = "PASS" if all(ok for ok, _ in runs) else "FAIL"
        detail = "; ".join(d for _, d in runs if d)
        terminalreporter.write_line(f"criterion {n:>2}: {verdict}  {detail}")
