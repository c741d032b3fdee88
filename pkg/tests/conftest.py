import pytest
from hypothesis import HealthCheck, settings

from sarkit.waveform import OfdmParams

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): acceptance criterion number n")


@pytest.fixture
def detail(request):
    """Free-text summary an acceptance test fills in for the report line."""
    info = {}
    request.node._acceptance_detail = info
    return info


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    n = mark.args[0]
    info = getattr(item, "_acceptance_detail", {})
    text = ", ".join(f"{k}={v}" for k, v in info.items())
    if rep.failed and n in _ACCEPTANCE and not _ACCEPTANCE[n][0]:
        return
    _ACCEPTANCE[n] = (rep.passed if rep.when == "call" else False, text)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, text = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}")


@pytest.fixture(scope="session")
def small():
    """Small waveform that keeps the exact-grid properties of the full one."""
    return OfdmParams(fc=1e9, N=64, delta_f=1e6, T=1.25e-6, T_cp=0.25e-6, fs=128e6, nu=14, f_prf=1e3)


@pytest.fixture(scope="session")
def full():
    return OfdmParams()


TINY = """
name = "tiny"
seed = 3
M = 41

[waveform]
fc = 1.0e9
N = 64
delta_f = 1.0e6
T = 1.25e-6
T_cp = 0.25e-6
fs = 128.0e6
f_prf = 1000.0

[scene]
preset = "table1"
speed = 10.0

[errors]
cpe_max = 1.0
to_max = 2.0e-9

[grid]
u = [-1.0, 1.0]
v = [12.0, 18.0]
du = 0.1

[trigger]
order = 7
pri_samples = 2000
"""


@pytest.fixture
def tiny_toml(tmp_path):
    """Path to a scenario small enough to run every CLI stage in seconds."""
    path = tmp_path / "tiny.toml"
    path.write_text(TINY)
    return path
