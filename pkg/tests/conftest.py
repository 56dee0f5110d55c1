from importlib import resources

import pytest
from hypothesis import settings

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")

# criterion label -> list of (test name, passed)
_CRITERIA: dict[str, list[tuple[str, bool]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion this test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _CRITERIA.setdefault(marker.args[0], []).append((item.name, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, results in _CRITERIA.items():
        failed = [name for name, ok in results if not ok]
        status = "FAIL" if failed else "PASS"
        detail = f"  ({', '.join(failed)} failed)" if failed else ""
        terminalreporter.write_line(f"{status}  {label}  [{len(results) - len(failed)}/{len(results)} checks]{detail}")


@pytest.fixture(scope="session")
def data_dir():
    return resources.files("defitvr") / "data"
