import contextlib

ACCEPTANCE_LINES: list[str] = []


@contextlib.contextmanager
def criterion(name: str):
    """Record one PASS/FAIL line for the acceptance summary."""
    detail = {}
    try:
        yield detail
    except BaseException as exc:
        ACCEPTANCE_LINES.append(f"FAIL  {name}: {detail.get('msg', '')} {type(exc).__name__}: {exc}".rstrip())
        print(ACCEPTANCE_LINES[-1])
        raise
    ACCEPTANCE_LINES.append(f"PASS  {name}: {detail.get('msg', '')}".rstrip())
    print(ACCEPTANCE_LINES[-1])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
