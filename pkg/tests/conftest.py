import numpy as np
import pytest

from backscatter_ce.fading import LinkGeometry, LinkShapes, beta_moments, link_params

ACCEPTANCE_LINES: list[str] = []


def default_params(num_tags: int, d_forward=None):
    """Table-default geometry with fixed forward distances."""
    if d_forward is None:
        d_forward = tuple(np.linspace(5.0, 7.0, num_tags)) if num_tags else None
    geo = LinkGeometry(d_forward=d_forward)
    params = link_params(geo, LinkShapes(), num_tags)
    return params, beta_moments(params), geo.noise_var


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
