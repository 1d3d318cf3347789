import numpy as np
import pytest

from ucm_blowup.grid import RadialGrid
from ucm_blowup.initial_data import ProfileSpec, build_initial_state
from ucm_blowup.model import Parameters, background_speed


def pulse(n, params=None, L=0.5, R=5.0, r_max=10.0, **kw):
    """Smooth pulse data on an ``n``-cell grid over ``[0, r_max]``."""
    params = params or Parameters()
    grid = RadialGrid(n, r_max / n)
    spec = ProfileSpec(L=L, R=R, delta_A=kw.pop("delta_A", 0.1), **kw)
    return build_initial_state(spec, params, grid)


@pytest.fixture
def params():
    return Parameters()


@pytest.fixture
def sigma(params):
    return background_speed(params)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


# -- acceptance verdict lines ---------------------------------------------------

ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    """Store the verdict and echo it; ``pytest_terminal_summary`` repeats it."""
    ACCEPTANCE[number] = (passed, detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        verdict = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
        terminalreporter.write_line(f"criterion {k}: {verdict}  {detail}")
