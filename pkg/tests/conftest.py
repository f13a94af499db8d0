import numpy as np
import pytest

# criterion number -> {"title", "outcomes": [(nodeid, outcome, detail)]}
_CRITERIA = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def measured(request):
    """Record a measured quantity for the acceptance summary line."""
    def record(text):
        request.node.user_properties.append(("measured", text))
    return record


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark:
            num, title = mark.args
            _CRITERIA.setdefault(num, {"title": title, "outcomes": []})


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    num = getattr(report, "_acceptance", None)
    if num is None:
        return
    detail = "; ".join(v for k, v in report.user_properties if k == "measured")
    _CRITERIA[num]["outcomes"].append((report.nodeid.split("::")[-1], report.outcome, detail))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    rep._acceptance = mark.args[0] if mark else None


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        entry = _CRITERIA[num]
        outs = entry["outcomes"]
        if not outs:
            continue
        ok = all(o == "passed" for _, o, _ in outs)
        tr.write_line(f"C{num:<2} {'PASS' if ok else 'FAIL'}  {entry['title']}")
        for name, o, detail in outs:
            tr.write_line(f"      {o.upper():<7} {name}" + (f"  [{detail}]" if detail else ""))
