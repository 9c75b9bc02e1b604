import numpy as np
import pytest

from ylab import geometry, pde


@pytest.fixture(scope="session")
def ball_field_8():
    """Solved unit-ball field at h = 1/8, shared across tests."""
    fld, report = pde.solve_v(geometry.ball(3, 1.0), 1 / 8)
    return fld, report


def center_value(fld):
    """Field value at the origin node."""
    idx = tuple(int(round(-o / fld.h)) for o in fld.origin)
    return float(fld.values[idx])


def exact_ball_values(fld, R=1.0):
    pts = fld.interior_points()
    return (R * R - (pts ** 2).sum(axis=1)) / (2.0 * R)
