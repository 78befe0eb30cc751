import collections

import pytest

_outcomes = collections.defaultdict(list)
_titles = {}
_notes = collections.defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    _titles[number] = title
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes[number].append(rep.passed)


@pytest.fixture
def acceptance(request):
    """Attach measured values to the criterion of the running test."""
    mark = request.node.get_closest_marker("criterion")
    number = mark.args[0] if mark else None

    def note(text):
        _notes[number].append(text)

    return note


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        ok = all(_outcomes[number])
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {_titles[number]}"
        if _notes[number]:
            line += "  [" + "; ".join(_notes[number]) + "]"
        terminalreporter.write_line(line)
