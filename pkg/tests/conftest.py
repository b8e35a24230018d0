import numpy as np
import pytest

from fpfnav.fpf_core import FpfParams

FD_STEP = 1e-5
# central differences at FD_STEP carry ~1e-9 absolute truncation error for
# these fields, so relative comparisons get that much absolute slack
FD_ATOL = 1e-9


def central_gradient(f, q, h=FD_STEP):
    q = np.asarray(q, dtype=float)
    grad = np.zeros(2)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        grad[k] = (f(q + e) - f(q - e)) / (2 * h)
    return grad


def assert_matches_negative_gradient(force, potential, q, rtol=1e-6):
    expected = -central_gradient(potential, q)
    err = np.linalg.norm(np.asarray(force) - expected)
    assert err <= rtol * np.linalg.norm(expected) + FD_ATOL, (force, expected, err)


def random_params(rng, varsigma=(1.05, 3.0), k_v=(1.05, 3.0), sigma1=(0.5, 2.0)):
    s1 = rng.uniform(*sigma1)
    return FpfParams(rng.uniform(*k_v), s1, s1 * rng.uniform(*varsigma))


@pytest.fixture
def design_params():
    return FpfParams(k_v=2.0, sigma1=1.0, sigma2=2.4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# --- acceptance report ----------------------------------------------------------

_verdicts = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and not rep.failed):
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if number not in _verdicts or rep.failed:
        _verdicts[number] = (title, "PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_verdicts):
        title, verdict, detail = _verdicts[number]
        line = f"criterion {number:>2} {verdict}  {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
