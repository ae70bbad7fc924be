"""Collects acceptance-criterion outcomes and prints one PASS/FAIL line per criterion."""

import pytest

_RESULTS: dict[int, dict] = {}


def pytest_runtest_logreport(report):
    mark = getattr(report, "_acceptance", None)
    if mark is None:
        return
    number, title = mark
    entry = _RESULTS.setdefault(number, {"title": title, "ok": True, "ran": False, "detail": []})
    if report.when == "call":
        entry["ran"] = True
        entry["detail"] += [v for k, v in report.user_properties if k == "detail"]
    if report.failed:
        entry["ok"] = False


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("acceptance")
    if m is not None:
        outcome.get_result()._acceptance = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        r = _RESULTS[number]
        status = "PASS" if r["ok"] and r["ran"] else ("FAIL" if r["ran"] or not r["ok"] else "NOT RUN")
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {r['title']}")
        for line in r["detail"]:
            terminalreporter.write_line(f"    {line}")


@pytest.fixture
def detail(request):
    """``detail("...")`` attaches a measured value to the acceptance summary line."""

    def add(text: str):
        request.node.user_properties.append(("detail", text))
        print(text)

    return add
