import pytest


def pytest_addoption(parser):
    parser.addoption("--full-scale", action="store_true", help="run tests at full problem sizes")


def pytest_configure(config):
    config.addinivalue_line("markers", "full_scale: full-size reproduction, minutes to hours")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--full-scale"):
        return
    skip = pytest.mark.skip(reason="needs --full-scale")
    for item in items:
        if "full_scale" in item.keywords:
            item.add_marker(skip)


CRITERIA = {}


def record_criterion(number, passed, detail):
    """One acceptance verdict; printed immediately and again in the terminal summary."""
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    CRITERIA[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
