import pytest

RESULTS: dict[int, tuple[str, bool, str]] = {}


class Criterion:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.details: list[str] = []
        RESULTS[number] = (title, False, "not finished")

    def note(self, text: str):
        self.details.append(text)

    def check(self, ok, text: str):
        self.note(text)
        assert ok, text

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        detail = "; ".join(self.details)
        if exc is not None:
            detail = f"{detail}; {exc}" if detail else str(exc)
        RESULTS[self.number] = (self.title, exc_type is None, detail)
        return False


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        title, ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
