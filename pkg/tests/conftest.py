import pytest

from pkepvd import qsim
from pkepvd.rng import Rng


@pytest.fixture
def rng():
    return Rng("5eed")


@pytest.fixture(autouse=True)
def _restore_caps():
    support, density = qsim.SUPPORT_CAP, qsim.DENSITY_CAP
    yield
    qsim.SUPPORT_CAP, qsim.DENSITY_CAP = support, density


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
