import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_state(rng, D, M, order=None, normalized=False, scale=0.3):
    """A random physically sensible state; coefficients decay with order."""
    from gradbgk.hermite import index_count, index_map
    from gradbgk.state import GradState, normalize

    order = M if order is None else order
    m = index_map(order, D)
    rho = rng.uniform(0.5, 3.0)
    u = rng.uniform(-1.0, 1.0, size=D)
    theta = rng.uniform(0.5, 2.0)
    coeffs = np.zeros(index_count(order, D))
    coeffs[0] = rho
    orders = m.orders()
    for off in range(1, len(m)):
        coeffs[off] = rho * scale ** orders[off] * rng.normal()
    st = GradState(D=D, M=M, u=u, theta=theta, coeffs=coeffs, order=order)
    if normalized:
        st = normalize(st)
    return st


def pytest_terminal_summary(terminalreporter):
    """Emit the per-criterion acceptance lines after the run (the summary
    stage is never captured, so they reach plain logs too)."""
    try:
        from test_acceptance import ACCEPTANCE_LINES
    except ImportError:
        return
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
