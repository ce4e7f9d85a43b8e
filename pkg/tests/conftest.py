import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("lab", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: numbered acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(':'))):
            terminalreporter.write_line(line)
