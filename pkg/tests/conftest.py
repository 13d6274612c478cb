import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# --------------------------------------------------------------------------
# acceptance summary: one line per criterion

_NOTES: dict = {}
_OUTCOMES: dict = {}


@pytest.fixture
def note(request):
    """Attach a short measured-value note to the current acceptance check."""

    def add(text: str) -> None:
        _NOTES.setdefault(request.node.nodeid, []).append(text)

    return add


def pytest_runtest_logreport(report):
    marker = report.keywords.get("acceptance") if hasattr(report, "keywords") else None
    if not marker:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _OUTCOMES[report.nodeid] = report.outcome


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m:
            item.user_properties.append(("criterion", m.args[0]))
            _CRITERIA[item.nodeid] = m.args[0]


_CRITERIA: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    by_criterion: dict = {}
    for nodeid, crit in _CRITERIA.items():
        if nodeid in _OUTCOMES:
            by_criterion.setdefault(crit, []).append(nodeid)
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(by_criterion):
        ids = by_criterion[crit]
        ok = all(_OUTCOMES[i] == "passed" for i in ids)
        parts = []
        for i in ids:
            name = i.split("::")[-1]
            detail = "; ".join(_NOTES.get(i, []))
            parts.append(f"{name} [{_OUTCOMES[i]}{': ' + detail if detail else ''}]")
        tr.write_line(f"criterion {crit:>2}: {'PASS' if ok else 'FAIL'}  " + " | ".join(parts))
