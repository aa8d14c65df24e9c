import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from sparse_ocp.multiindex import IndexSet, MultiIndex, is_admissible

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def downward_closed_sets(draw, max_dim=3, max_size=20):
    """Random downward-closed sets grown one admissible index at a time."""
    size = draw(st.integers(1, max_size))
    lam = IndexSet()
    while len(lam) < size:
        cands = sorted({nu.shifted(j, 1) for nu in lam for j in range(1, max_dim + 1)}
                       - set(lam.members))
        cands = [c for c in cands if is_admissible(c, lam)]
        lam.add(draw(st.sampled_from(cands)))
    return lam


def gaussian_moment(d: int) -> float:
    """E[y^d] for y ~ N(0, 1): 0 for odd d, (d-1)!! for even d."""
    if d % 2:
        return 0.0
    out = 1.0
    for k in range(d - 1, 0, -2):
        out *= k
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting: one PASS/FAIL line per criterion ------------------------

_criteria: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k, title): acceptance criterion k")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    k, title = mark.args
    detail = "; ".join(f"{name}={value}" for name, value in item.user_properties)
    entry = _criteria.setdefault(k, [title, True, []])
    entry[1] = entry[1] and rep.passed
    if detail and rep.when == "call":
        entry[2].append(detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_criteria):
        title, ok, details = _criteria[k]
        line = f"criterion {k}: {'PASS' if ok else 'FAIL'} - {title}"
        if details:
            line += " (" + " | ".join(details) + ")"
        terminalreporter.write_line(line)
