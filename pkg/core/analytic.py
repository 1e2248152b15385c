"""
Closed-form order-1 robust pulses.

energy_o1_*  elliptic energy-optimal pulse robust to offsets (u_y = 0)
bangbang_o1  time-optimal x-axis pulse with two switches per period
alpha_o1_*   elliptic phase-only pulse robust to amplitude errors
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from core.config import DEFAULT_STEP
from core.dynamics import ControlField, FieldKind
from core.elliptic import ellip_F, ellip_K, jacobi_am
from core.errors import DomainError

logger = logging.getLogger(__name__)

# Gauss-Legendre rule for the cumulative x_1 integral on array grids
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
_GL_PANEL = 0.05


def _cumulative_integral(func, t) -> np.ndarray:
    """int_0^t func for every entry of t, via composite Gauss-Legendre panels"""
    t = np.asarray(t, dtype=float)
    flat = t.reshape(-1)
    top = float(np.max(flat)) if flat.size else 0.0
    panels = max(1, int(math.ceil(top / _GL_PANEL)))
    breaks = np.union1d(np.linspace(0.0, top, panels + 1), flat[flat > 0])
    left, right = breaks[:-1], breaks[1:]
    half = 0.5 * (right - left)
    nodes = (0.5 * (left + right))[:, None] + half[:, None] * _GL_NODES[None, :]
    pieces = half * np.sum(_GL_WEIGHTS * func(nodes), axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(pieces)])
    index = np.searchsorted(breaks, flat)
    return cumulative[index].reshape(t.shape)


@dataclass(frozen=True, eq=False)
class EnergyO1Solution:
    """
    Order-1 energy extremal Omega_0x = 2 sqrt(m) cos(nu), nu(t) = am(t + rho, m).

    rho_sign < 0 is the branch with theta(t*) = +pi.
    """

    H: float
    rho_sign: float
    m: float
    rho: float
    t_star: float
    area: float
    field: ControlField

    def nu(self, t):
        return jacobi_am(np.asarray(t, dtype=float) + self.rho, self.m)

    def omega_0x(self, t):
        return 2.0 * math.sqrt(self.m) * np.cos(self.nu(t))

    def theta(self, t):
        root = math.sqrt(self.m)
        start = 2.0 * math.asin(root * math.sin(jacobi_am(self.rho, self.m)))
        return 2.0 * np.arcsin(root * np.sin(self.nu(t))) - start

    def x1(self, t):
        """int_0^t sin(theta); adaptive quadrature for scalars, panel rule for arrays"""
        if np.ndim(t) == 0:
            value, _ = quad(lambda s: math.sin(self.theta(s)), 0.0, float(t), epsabs=1e-13, epsrel=1e-12,
                            limit=200)
            return value
        return _cumulative_integral(lambda s: np.sin(self.theta(s)), t)


def _energy_o1_constants(H: float, rho_sign: float) -> Tuple[float, float]:
    if not 0.0 < H < 1.0:
        raise DomainError(f"H = {H!r} outside the oscillating family (0, 1)")
    m = 0.5 * (1.0 + H)
    rho = math.copysign(ellip_F(math.asin(1.0 / math.sqrt(2.0 * m)), m), rho_sign)
    return m, rho


def energy_o1_field(H: float, rho_sign: float = -1.0, step: float = DEFAULT_STEP) -> EnergyO1Solution:
    """
    Energy-optimal order-1 x-axis pulse on [0, t*], t* = 2 K(m).

    Raises:
        DomainError: H outside (0, 1).
    """
    m, rho = _energy_o1_constants(H, rho_sign)
    t_star = 2.0 * ellip_K(m)
    # |Omega_0x| integrates to the total variation of theta, which peaks once
    area = 4.0 * math.asin(math.sqrt(m))
    root = 2.0 * math.sqrt(m)
    field = ControlField.from_function(
        lambda t: (root * np.cos(jacobi_am(t + rho, m)), 0.0), t_star, step)
    return EnergyO1Solution(H, rho_sign, m, rho, t_star, area, field)


def _energy_o1_curve(H: float, rho_sign: float) -> EnergyO1Solution:
    m, rho = _energy_o1_constants(H, rho_sign)
    return EnergyO1Solution(H, rho_sign, m, rho, 2.0 * ellip_K(m), 4.0 * math.asin(math.sqrt(m)), None)


def energy_o1_state(H: float, rho_sign: float, t):
    """(theta(t), x_1(t)) along the order-1 energy extremal"""
    curve = _energy_o1_curve(H, rho_sign)
    return curve.theta(t), curve.x1(t)


def energy_o1_optimum(rho_sign: float = -1.0, bracket=(0.05, 0.99)) -> float:
    """H cancelling x_1 at t* = 2 K(m), the robust inversion"""
    def x1_at_t_star(H):
        curve = _energy_o1_curve(H, rho_sign)
        return curve.x1(curve.t_star)

    H = brentq(x1_at_t_star, *bracket, xtol=1e-13)
    logger.debug("order-1 energy optimum H = %.10f", H)
    return H


def excitation_o1(bracket=(0.01, 0.99)) -> Tuple[float, float]:
    """
    Order-1 robust excitation: theta = -pi/2 with x_1 = 0.

    On the rho > 0 branch theta first returns to -pi/2 at t_e = 2 K(m) - rho;
    x_1(t_e) changes sign across the oscillating family.

    Returns:
        (H, t_e)
    """
    def x1_at_excitation(H):
        curve = _energy_o1_curve(H, 1.0)
        return curve.x1(2.0 * ellip_K(curve.m) - curve.rho)

    H = brentq(x1_at_excitation, *bracket, xtol=1e-12)
    m, rho = _energy_o1_constants(H, 1.0)
    return H, 2.0 * ellip_K(m) - rho


@dataclass(frozen=True, eq=False)
class BangBangSolution:
    """Order-1 bang-bang family; u_x = +1, -1, +1 on [0, T1], [T1, T2], [T2, T]"""

    H: float
    T1: float
    T2: float
    period: float
    field: ControlField

    @property
    def s(self) -> float:
        return math.sqrt(1.0 - self.H ** 2)

    @property
    def t_star(self) -> float:
        """Inversion time 2 T1 - pi, which tends to 2 pi as H -> 1"""
        return 2.0 * self.T1 - math.pi

    def _branch(self, t):
        t = np.asarray(t, dtype=float)
        return t, [t <= self.T1, t <= self.T2]

    def theta(self, t):
        t, conditions = self._branch(t)
        return np.select(conditions, [t, 2.0 * self.T1 - t], t + 2.0 * (self.T1 - self.T2))

    def x1(self, t):
        t, conditions = self._branch(t)
        s = self.s
        return np.select(conditions,
                         [1.0 - np.cos(t), 1.0 + 2.0 * s + np.cos(t - 2.0 * self.T1)],
                         1.0 + 4.0 * s - np.cos(t + 2.0 * (self.T1 - self.T2)))


def bangbang_o1(H: float, step: float = DEFAULT_STEP) -> BangBangSolution:
    """
    Switching times of the order-1 time-optimal family, one period of field.

    Raises:
        DomainError: H >= 1 (rotating regime without switches) or H < 0.
    """
    if not 0.0 <= H < 1.0:
        raise DomainError(f"H = {H!r}: switches exist only for 0 <= H < 1")
    T1 = math.pi + math.atan2(H, math.sqrt(1.0 - H * H))
    T2 = 3.0 * T1 - math.pi
    period = 4.0 * T1 - 2.0 * math.pi
    field = ControlField.bang_bang([T1, T2], period, step)
    return BangBangSolution(H, T1, T2, period, field)


@dataclass(frozen=True, eq=False)
class AlphaO1Solution:
    """Order-1 amplitude-robust phase-only pulse, nu(t) = am(omega t + K(m), m)"""

    I_x: float
    I_y: float
    omega: float
    m: float
    t_final: float
    field: ControlField

    @property
    def quarter(self) -> float:
        return ellip_K(self.m)

    def argument(self, t):
        return self.omega * np.asarray(t, dtype=float) + self.quarter

    def omega_0z(self, t):
        return -self.omega * math.sqrt(self.m) * np.cos(jacobi_am(self.argument(t), self.m))

    def phase(self, t):
        """
        phi = -2 [sgn(sin nu) arccos(sqrt(1 - m sin^2 nu)) - arccos(sqrt(1 - m))].

        sin(nu) > 0 exactly on even half-periods of the argument, so the sign
        factor is the parity of floor(argument / 2K).
        """
        u = self.argument(t)
        nu = jacobi_am(u, self.m)
        parity = np.where(np.floor(u / (2.0 * self.quarter)) % 2 == 0, 1.0, -1.0)
        inner = np.arccos(np.sqrt(np.clip(1.0 - self.m * np.sin(nu) ** 2, 0.0, 1.0)))
        return -2.0 * (parity * inner - math.acos(math.sqrt(1.0 - self.m)))


def _alpha_constants(I_x: float, I_y: float) -> Tuple[float, float]:
    omega = (I_x * I_x + I_y * I_y) ** 0.25
    if omega <= 0.0:
        raise DomainError("(I_x, I_y) = (0, 0) has no amplitude-robust extremal")
    m = 0.5 - I_x / (2.0 * omega * omega)
    if not 0.0 <= m < 1.0:
        raise DomainError(f"elliptic parameter m = {m!r} outside [0, 1)")
    return omega, m


def alpha_o1_field(I_x: float, I_y: float, step: float = DEFAULT_STEP) -> AlphaO1Solution:
    """
    Phase-only amplitude-robust pulse on [0, t_f], t_f = 4 K(m) / omega.

    Raises:
        DomainError: m outside [0, 1) or omega = 0.
    """
    omega, m = _alpha_constants(I_x, I_y)
    t_final = 4.0 * ellip_K(m) / omega
    shell = AlphaO1Solution(I_x, I_y, omega, m, t_final, None)

    def sample(t):
        phi = shell.phase(t)
        return np.cos(phi), np.sin(phi)

    field = ControlField.from_function(sample, t_final, step, kind=FieldKind.PHASE_ONLY)
    return AlphaO1Solution(I_x, I_y, omega, m, t_final, field)


def alpha_o1_state(I_x: float, I_y: float, t):
    """(Omega_0z(t), phi(t)) along the order-1 amplitude extremal"""
    omega, m = _alpha_constants(I_x, I_y)
    shell = AlphaO1Solution(I_x, I_y, omega, m, 4.0 * ellip_K(m) / omega, None)
    return shell.omega_0z(t), shell.phase(t)
