import os
from contextlib import contextmanager

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, print_blob=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@contextmanager
def _criterion(number: int, title: str):
    """Record pass/fail of one acceptance criterion and echo a one-line verdict."""
    try:
        yield
    except BaseException as exc:
        _ACCEPTANCE[number] = (False, f"{title} :: {type(exc).__name__}: {str(exc).splitlines()[0][:160] if str(exc) else ''}")
        print(f"\nACCEPTANCE {number}: FAIL  {title}")
        raise
    _ACCEPTANCE[number] = (True, title)
    print(f"\nACCEPTANCE {number}: PASS  {title}")


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, title = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
