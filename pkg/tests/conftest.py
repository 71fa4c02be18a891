import contextlib

ACCEPTANCE: dict = {}


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record a PASS/FAIL line for an acceptance criterion; the body sets ``detail``."""
    box = {"detail": ""}
    ACCEPTANCE[number] = (title, False, "did not finish")
    try:
        yield box
    except BaseException as e:
        ACCEPTANCE[number] = (title, False, f"{box['detail']} {type(e).__name__}: {e}".strip())
        raise
    ACCEPTANCE[number] = (title, True, box["detail"])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} -- {detail}")
