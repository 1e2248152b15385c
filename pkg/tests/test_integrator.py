import math

import numpy as np
import pytest

from core.integrator import bisect_crossing, integrate, rk4_step, time_grid


def test_time_grid_appends_final_time():
    np.testing.assert_allclose(time_grid(1.0, 0.3), [0.0, 0.3, 0.6, 0.9, 1.0])


def test_time_grid_lands_on_final_node():
    grid = time_grid(1.0, 0.25)
    assert len(grid) == 5
    assert grid[-1] == 1.0


def test_time_grid_rejects_bad_step():
    with pytest.raises(ValueError):
        time_grid(1.0, 0.0)


def test_rk4_exponential_decay():
    times = time_grid(1.0, 0.01)
    y = integrate(lambda t, y: -y, np.array([1.0]), times, keep=False)
    assert y[0] == pytest.approx(math.exp(-1.0), abs=1e-9)


def test_integrate_keeps_trajectory_and_observes():
    seen = []
    times = time_grid(0.5, 0.1)
    trajectory = integrate(lambda t, y: np.ones_like(y), np.zeros(2), times,
                           observer=lambda i, t, y: seen.append(i))
    assert trajectory.shape == (len(times), 2)
    assert seen == list(range(len(times)))
    np.testing.assert_allclose(trajectory[-1], [0.5, 0.5])


def test_rk4_step_accepts_array_step():
    y = np.ones((2, 1))
    out = rk4_step(lambda t, y: np.ones_like(y), 0.0, y, np.array([[0.1], [0.2]]))
    np.testing.assert_allclose(out[:, 0], [1.1, 1.2])


def test_bisect_crossing_locates_zero():
    def rhs(_t, y):
        return np.array([y[1], -y[0]])

    t0 = 3.1
    y0 = np.array([math.sin(t0), math.cos(t0)])
    t_cross, y_cross = bisect_crossing(rhs, t0, y0, 0.1, lambda y: y[0])
    assert t_cross == pytest.approx(math.pi, abs=1e-6)
    assert abs(y_cross[0]) < 1e-6
