import numpy as np
import pytest

from cosmon.cutoffs import plateau, plateau_derivative, smooth_step, smooth_step_derivative


def test_smooth_step_exact_ends():
    x = np.linspace(-1, 3, 401)
    s = smooth_step(x, 0.0, 2.0)
    assert np.all(s[x <= 0] == 0.0)
    assert np.all(s[x >= 2] == 1.0)
    assert np.all(np.diff(s) >= 0)
    assert smooth_step(1.0, 0.0, 2.0) == pytest.approx(0.5)


def test_plateau_support_and_flat():
    x = np.linspace(-2, 2, 801)
    p = plateau(x, (-1.0, 1.0), (-0.5, 0.5))
    assert np.all(p[np.abs(x) >= 1] == 0.0)
    assert np.all(p[np.abs(x) <= 0.5] == 1.0)
    assert np.all((p >= 0) & (p <= 1))


def test_plateau_half_line():
    x = np.linspace(0, 10, 101)
    p = plateau(x, (1.0, np.inf), (2.0, np.inf))
    assert np.all(p[x >= 2] == 1.0) and np.all(p[x <= 1] == 0.0)


@pytest.mark.parametrize("x0", [0.3, 1.0, 1.7])
def test_derivatives_by_differences(x0):
    h = 1e-6
    fd = (smooth_step(x0 + h, 0.0, 2.0) - smooth_step(x0 - h, 0.0, 2.0)) / (2 * h)
    assert smooth_step_derivative(x0, 0.0, 2.0) == pytest.approx(fd, rel=1e-6)
    fd = (plateau(x0 + h, (0.0, 2.0), (0.8, 1.2)) - plateau(x0 - h, (0.0, 2.0), (0.8, 1.2))) / (2 * h)
    assert plateau_derivative(x0, (0.0, 2.0), (0.8, 1.2)) == pytest.approx(fd, rel=1e-6, abs=1e-9)
