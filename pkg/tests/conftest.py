import pytest

from ftl2lwr import discretizer, velocity


@pytest.fixture
def gs():
    return velocity.greenshields()


@pytest.fixture(params=["greenshields", "quadratic"])
def model(request):
    return velocity.get_model(request.param)


@pytest.fixture
def shock_density():
    return discretizer.riemann(0.2, 0.8)


@pytest.fixture
def rarefaction_density():
    return discretizer.riemann(1.0, 0.0)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(mod.RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
