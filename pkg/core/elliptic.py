"""
Elliptic integrals of the first kind and the Jacobi amplitude.

All functions use the parameter convention m (integrand 1/sqrt(1 - m sin^2 t)),
not the modulus k = sqrt(m).
"""

import math

import numpy as np

from core.errors import DomainError

_EPS = np.finfo(float).eps
_MAX_ITER = 64


def _check_parameter(m) -> float:
    m = float(m)
    if not math.isfinite(m) or m < 0.0 or m >= 1.0:
        raise DomainError(f"elliptic parameter m = {m!r} outside [0, 1)")
    return m


def ellip_K(m) -> float:
    """Complete elliptic integral of the first kind, via the arithmetic-geometric mean"""
    m = _check_parameter(m)
    a, b = 1.0, math.sqrt(1.0 - m)
    for _ in range(_MAX_ITER):
        if abs(a - b) <= _EPS * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)


def _landen_F(phi: np.ndarray, m: float) -> np.ndarray:
    """Descending Landen transformation for |phi| <= pi/2"""
    a, b, c = 1.0, math.sqrt(1.0 - m), math.sqrt(m)
    angle = phi.copy()
    scale = 1.0
    for _ in range(_MAX_ITER):
        if c <= _EPS * a:
            break
        # tan(psi) = (b/a) tan(angle) on the branch nearest to angle
        psi = np.arctan2(b * np.sin(angle), a * np.cos(angle))
        psi += 2.0 * np.pi * np.rint((angle - psi) / (2.0 * np.pi))
        angle = angle + psi
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        scale *= 2.0
    return angle / (scale * a)


def ellip_F(phi, m):
    """
    Incomplete elliptic integral of the first kind F(phi | m).

    Args:
        phi: Amplitude angle, scalar or array.
        m: Elliptic parameter in [0, 1).

    Returns:
        F with the same shape as phi. Odd in phi and quasi-periodic,
        F(phi + pi) = F(phi) + 2 K(m).
    """
    m = _check_parameter(m)
    phi_arr = np.asarray(phi, dtype=float)
    quarter = ellip_K(m)

    # Reduce to [-pi/2, pi/2] with the quasi-periodicity
    turns = np.rint(phi_arr / np.pi)
    reduced = np.atleast_1d(phi_arr - turns * np.pi)
    value = _landen_F(reduced, m).reshape(phi_arr.shape) + 2.0 * turns * quarter

    if np.ndim(phi) == 0:
        return float(value)
    return value


def jacobi_am(u, m):
    """
    Jacobi amplitude am(u | m), the inverse of ellip_F in its angle.

    Newton iteration on F(phi) - u seeded with u * pi / (2 K), after reducing u
    to [-K, K] with am(u + 2K) = am(u) + pi.
    """
    m = _check_parameter(m)
    u_arr = np.asarray(u, dtype=float)
    quarter = ellip_K(m)

    turns = np.rint(u_arr / (2.0 * quarter))
    reduced = np.atleast_1d(u_arr - 2.0 * turns * quarter)
    angle = reduced * (np.pi / (2.0 * quarter))

    half_pi = 0.5 * np.pi
    for _ in range(_MAX_ITER):
        residual = ellip_F(angle, m) - reduced
        step = residual * np.sqrt(1.0 - m * np.sin(angle) ** 2)
        angle = np.clip(angle - step, -half_pi, half_pi)
        if np.max(np.abs(step)) <= 4.0 * _EPS * max(1.0, float(np.max(np.abs(angle)))):
            break

    value = angle.reshape(u_arr.shape) + turns * np.pi
    if np.ndim(u) == 0:
        return float(value)
    return value
