import warnings

import pytest
from hypothesis import settings

from pectube.presets import table1_assembly, table1_domain, table1_stack

settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_pole_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="no pole in", category=RuntimeWarning)
        yield


@pytest.fixture(params=["carbon", "stainless"])
def table1(request):
    """(stack, assembly, domain) at the default truncation length."""
    mat = request.param
    dom = table1_domain(mat)
    return table1_stack(mat), table1_assembly(dom.h), dom


@pytest.fixture
def carbon():
    dom = table1_domain("carbon")
    return table1_stack("carbon"), table1_assembly(dom.h), dom


@pytest.fixture
def stainless():
    dom = table1_domain("stainless")
    return table1_stack("stainless"), table1_assembly(dom.h), dom


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for tag in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[tag])
