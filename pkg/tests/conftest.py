from collections import defaultdict
from dataclasses import replace

import pytest

from cpdm_fso.config import default_config
from cpdm_fso.sweep import emit_outputs, run_sweep

_criteria: dict[int, dict] = defaultdict(lambda: {"title": "", "outcomes": []})


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criteria[mark.args[0]]["title"] = mark.args[1]


def pytest_runtest_logreport(report):
    if report.when == "call" or report.outcome != "passed":
        num = getattr(report, "_criterion", None)
        if num is not None:
            _criteria[num]["outcomes"].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result()._criterion = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        c = _criteria[num]
        if not c["outcomes"] or all(o == "skipped" for o in c["outcomes"]):
            status = "NOT RUN"
        elif all(o == "passed" for o in c["outcomes"]):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status:7s} {c['title']}")


@pytest.fixture(scope="session")
def default_sweep(tmp_path_factory):
    """The shipped configuration swept once, serially, with outputs on disk."""
    cfg = replace(default_config(), workers=1)
    results = run_sweep(cfg)
    out = tmp_path_factory.mktemp("sweep_serial")
    emit_outputs(results, cfg, out)
    return cfg, results, out
