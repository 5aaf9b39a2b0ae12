import numpy as np
import pytest

from stegoscope.image_io import synth_cover


@pytest.fixture
def flat128():
    return np.full((64, 64), 128, dtype=np.uint8)


@pytest.fixture
def noise_cover():
    return synth_cover(5, 64, 64, "value-noise")


_ACCEPTANCE = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark and (rep.when == "call" or rep.failed):
        _ACCEPTANCE.append((mark.args[0], mark.args[1], rep.outcome, getattr(item, "detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n, title, outcome, detail in sorted(_ACCEPTANCE):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status}  {title}" + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def detail(request):
    """Call with a string to attach a measurement to the criterion's summary line."""
    def put(text):
        request.node.detail = text
    return put
