import pytest

from memchua import config
from memchua.dynamics import IntegratorConfig, integrate


@pytest.fixture(scope="session")
def chaotic_cfg():
    return config.load("memristive-chaotic")


@pytest.fixture(scope="session")
def chaotic_traj(chaotic_cfg):
    # full-resolution run: 0.05 s transient, 0.15 s kept
    cfg = IntegratorConfig(dt=1e-6, t_end=0.2, transient_skip=0.05)
    return integrate(chaotic_cfg.initial_state, chaotic_cfg.circuit, cfg)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
