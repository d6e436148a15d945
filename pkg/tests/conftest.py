import numpy as np
import pytest

from einwarp.chart import Direction, ProfileFunction, ScalarField, Signature
from einwarp.curvature import flat_metric, hyperbolic_halfspace
from einwarp.warp import WarpedProductSpec, flat_fiber

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def hyperbolic_spec():
    """H^3 warped over flat R^2 with f = 1/x3; Einstein with constant -4."""
    n = 3
    f = ScalarField(
        lambda x: 1 / x[2],
        lambda x: np.array([0.0, 0.0, -1 / x[2] ** 2]),
        lambda x: np.diag([0.0, 0.0, 2 / x[2] ** 3]),
        label="1/x3",
    )
    return WarpedProductSpec(hyperbolic_halfspace(n), flat_fiber(2), f, -4.0, base_box=((0, 1), (0, 1), (0.5, 1.5)))


@pytest.fixture
def trivial_spec():
    return WarpedProductSpec(flat_metric(Signature.euclidean(3)), flat_fiber(2), ScalarField.constant(1.0, 3), 0.0)


@pytest.fixture
def exponential_spec():
    d = Direction.axis(3, 0)
    f = ScalarField.from_profile(ProfileFunction.exponential(1.0, 1.0), d)
    return WarpedProductSpec(flat_metric(d.sig), flat_fiber(2), f, 0.0, d)
