import numpy as np
import pytest
from hypothesis import settings

from hsirestore.simulate import make_ground_truth

settings.register_profile("ci", max_examples=50, deadline=None)
settings.register_profile("dev", max_examples=10, deadline=None)
settings.load_profile("ci")

DATA = __import__("pathlib").Path(__file__).parent / "data"

# seed of the canonical synthetic scene used by the benchmark tests
SCENE_SEED = 7

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this test checks")
    config.addinivalue_line("markers", "slow: benchmark-sized test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "status": []})
    if rep.when == "call":
        if hasattr(rep, "wasxfail"):
            entry["status"].append("KNOWN-FAIL" if rep.skipped else "XPASS")
        else:
            entry["status"].append(rep.outcome.upper())
    elif rep.failed:
        entry["status"].append("ERROR")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        st = entry["status"]
        if st and all(s == "PASSED" for s in st):
            verdict = "PASS"
        elif "FAILED" in st or "ERROR" in st or "XPASS" in st:
            verdict = "FAIL"
        elif "KNOWN-FAIL" in st:
            verdict = "FAIL (known, %d of %d checks)" % (st.count("KNOWN-FAIL"), len(st))
        else:
            verdict = "NOT RUN"
        terminalreporter.write_line(f"criterion {number:2d} {verdict:<28} {entry['title']}")


@pytest.fixture(scope="session")
def scene():
    """Rank-8 self-similar 64x64x32 cube."""
    return make_ground_truth(64, 64, 32, 8, SCENE_SEED)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_basis(rng, n, k):
    q, r = np.linalg.qr(rng.standard_normal((n, k)))
    return q * np.sign(np.diag(r))


def random_spd(rng, n, cond=50.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    vals = np.geomspace(1.0, 1.0 / cond, n) * rng.uniform(0.5, 2.0)
    c = (q * vals) @ q.T
    return 0.5 * (c + c.T)
