import math

import pytest

from billiards import CircleTable, EllipseTable, PerturbedCircleTable


@pytest.fixture(scope="session")
def circle():
    return CircleTable(1.0)


@pytest.fixture(scope="session")
def ellipse21():
    return EllipseTable(2.0, 1.0)


@pytest.fixture(scope="session")
def ellipse_e05():
    return EllipseTable(1.0, math.sqrt(1.0 - 0.25))


@pytest.fixture(scope="session")
def perturbed():
    return PerturbedCircleTable(1.0, [(3, 0.05, 0.0)])
