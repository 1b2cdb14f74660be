import contextlib
import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion number -> (title, passed, detail); filled by the ``criterion`` fixture
_RESULTS: dict[int, tuple[str, bool, str]] = {}


class _Recorder:
    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.details = []

    def note(self, text):
        self.details.append(text)


@pytest.fixture
def criterion():
    """``with criterion(n, title) as c: ...`` records PASS/FAIL for criterion ``n``."""

    @contextlib.contextmanager
    def _ctx(number, title):
        rec = _Recorder(number, title)
        try:
            yield rec
        except BaseException as exc:
            detail = "; ".join(rec.details + [f"{type(exc).__name__}: {exc}".splitlines()[0]])
            _RESULTS[number] = (title, False, detail)
            print(f"FAIL [{number}] {title} :: {detail}")
            raise
        detail = "; ".join(rec.details)
        _RESULTS[number] = (title, True, detail)
        print(f"PASS [{number}] {title} :: {detail}")

    return _ctx


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok, detail = _RESULTS[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{number:2d}] {title} :: {detail}")
