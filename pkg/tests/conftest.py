import pytest

from coarsekit import _accel, _core_py, graphs, linalg

ACCEPTANCE_RESULTS = []

BACKENDS = ["python"] + (["compiled"] if _accel.BACKEND == "compiled" else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    module = _core_py if request.param == "python" else _accel.core
    monkeypatch.setattr(graphs, "core", module)
    monkeypatch.setattr(linalg, "core", module)
    return module


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)
