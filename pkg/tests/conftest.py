import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hanet import _backend, _pykernels  # noqa: E402

try:
    from hanet import _kernels
except ImportError:  # pragma: no cover - exercised only without a compiler
    _kernels = None

BACKENDS = {"python": _pykernels}
if _kernels is not None:
    BACKENDS["compiled"] = _kernels


@pytest.fixture(params=sorted(BACKENDS))
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    monkeypatch.setattr(_backend, "kernels", BACKENDS[request.param])
    return request.param


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    def record(name: str, passed: bool, detail: str = ""):
        line = f"{'PASS' if passed else 'FAIL'}  {name}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
