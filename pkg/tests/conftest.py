import pytest

_ACCEPTANCE = {}


class AcceptanceReport:
    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.details = []

    def note(self, text):
        self.details.append(text)
        print(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = "; ".join(self.details)
        if exc_type is not None and not self.details:
            detail = f"{exc_type.__name__}: {exc}"
        _ACCEPTANCE[self.number] = f"criterion {self.number} [{status}] {self.title}" + (f" -- {detail}" if detail else "")
        return False


@pytest.fixture
def criterion():
    return AcceptanceReport


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
