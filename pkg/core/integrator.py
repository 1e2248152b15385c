"""
Fixed-step classical Runge-Kutta integration shared by all flows and propagators
"""

import math
from typing import Callable, Optional, Tuple

import numpy as np

Rhs = Callable[[float, np.ndarray], np.ndarray]

# Cells shorter than this are dropped from a time grid
_GRID_SLACK = 1e-9


def time_grid(t_final: float, step: float) -> np.ndarray:
    """
    Nodes k * step for k = 0, 1, ... below t_final, followed by t_final itself.

    Every flow and every field in the toolkit lives on this grid, so a field
    integrated up to t_max and one integrated up to a shorter t_f share their
    leading cells exactly.
    """
    if step <= 0:
        raise ValueError("integrator step must be positive")
    if t_final <= 0:
        return np.zeros(1)
    full = int(math.floor(t_final / step + _GRID_SLACK))
    nodes = step * np.arange(full + 1, dtype=float)
    if t_final - nodes[-1] > _GRID_SLACK * step:
        nodes = np.append(nodes, t_final)
    else:
        nodes[-1] = t_final
    return nodes


def rk4_step(rhs: Rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step"""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(rhs: Rhs, y0: np.ndarray, times: np.ndarray,
              observer: Optional[Callable[[int, float, np.ndarray], None]] = None,
              keep: bool = True) -> np.ndarray:
    """
    Integrate y' = rhs(t, y) over the given nodes.

    Args:
        rhs: Right-hand side, vectorized over any leading batch axes of y.
        y0: Initial state.
        times: Increasing nodes starting at the initial time.
        observer: Optional callback invoked as observer(index, t, y) at every node.
        keep: Store the state at every node; otherwise only the final state.

    Returns:
        Array of shape (len(times),) + y0.shape, or y0.shape when keep is False.
    """
    y = np.array(y0, dtype=float)
    trajectory = np.empty((len(times),) + y.shape) if keep else None
    if keep:
        trajectory[0] = y
    if observer is not None:
        observer(0, float(times[0]), y)

    for i in range(len(times) - 1):
        t = float(times[i])
        y = rk4_step(rhs, t, y, float(times[i + 1]) - t)
        if keep:
            trajectory[i + 1] = y
        if observer is not None:
            observer(i + 1, float(times[i + 1]), y)

    return trajectory if keep else y


def bisect_crossing(rhs: Rhs, t: float, y: np.ndarray, h: float,
                    indicator: Callable[[np.ndarray], float],
                    tol: float = 1e-13) -> Tuple[float, np.ndarray]:
    """
    Locate the zero of indicator(y(t + s)) for s in (0, h] by bisection.

    The state at t + s is produced by a single RK4 step of length s from (t, y),
    the same scheme that detected the sign change.

    Returns:
        (crossing time, state at the crossing)
    """
    lo, hi = 0.0, h
    y_hi = rk4_step(rhs, t, y, h)
    start = np.sign(indicator(y))
    if start == 0:
        start = -np.sign(indicator(y_hi))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        y_mid = rk4_step(rhs, t, y, mid)
        if np.sign(indicator(y_mid)) == start:
            lo = mid
        else:
            hi, y_hi = mid, y_mid
    return t + hi, y_hi
