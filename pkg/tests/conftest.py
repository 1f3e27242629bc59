import pytest
from hypothesis import settings

from pbds.fixtures import Q2_TEXT, Q_POPSTATE_TEXT, REUSE_TEMPLATE_TEXT, cities_db, f_popden, f_state
from pbds.parser import parse_query
from pbds.partition import Stats

settings.register_profile("pbds", deadline=None, max_examples=100)
settings.load_profile("pbds")


@pytest.fixture
def db():
    return cities_db()


@pytest.fixture
def stats(db):
    return Stats.from_db(db)


@pytest.fixture
def q2():
    return parse_query(Q2_TEXT)


@pytest.fixture
def q_popstate():
    return parse_query(Q_POPSTATE_TEXT)


@pytest.fixture
def reuse_text():
    return REUSE_TEMPLATE_TEXT


@pytest.fixture
def fstate():
    return f_state()


@pytest.fixture
def fpopden():
    return f_popden()


# ----------------------------------------------------- acceptance reporting

_ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    """Record ``(number, passed, detail, seconds)`` for the end-of-run summary."""
    def record(number, passed, detail, seconds):
        _ACCEPTANCE[number] = (passed, detail, seconds)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({seconds:.2f}s) {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        passed, detail, seconds = _ACCEPTANCE[n]
        terminalreporter.write_line(
            f"criterion {n}: {'PASS' if passed else 'FAIL'} ({seconds:.2f}s) {detail}")
