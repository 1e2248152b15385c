"""
Bloch-vector, perturbative-cascade and Bloch-matrix propagation.

Fields are zero-order-hold: the value stored at node t_i holds on
[t_i, t_{i+1}). Inside each field cell the linear dynamics is advanced with
classical RK4 sub-steps no longer than the configured step, so piecewise
constant pulses (GRAPE segments, bang-bang arcs) are integrated exactly as
sampled.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import find_peaks

from core.config import DEFAULT_STEP, PROFILE_POINTS
from core.errors import ConfigurationError, FieldError, RequestOutOfRangeError
from core.integrator import rk4_step, time_grid

logger = logging.getLogger(__name__)

NORTH_POLE = np.array([0.0, 0.0, 1.0])
SOUTH_POLE = np.array([0.0, 0.0, -1.0])
DELTA_GENERATOR = np.array([[0.0, 1.0, 0.0],
                            [-1.0, 0.0, 0.0],
                            [0.0, 0.0, 0.0]])

_SUBSTEP_SLACK = 1e-9
_UNIT_TOL = 1e-10


class FieldKind(str, Enum):
    GENERAL = 'general'
    PHASE_ONLY = 'phase-only'
    BANG_BANG = 'bang-bang'


class CascadeMode(str, Enum):
    STATE_OFFSET = 'state-offset'
    STATE_AMPLITUDE = 'state-amplitude'
    GATE_OFFSET = 'gate-offset'


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product over the last axis, broadcasting the leading ones"""
    ax, ay, az = a[..., 0], a[..., 1], a[..., 2]
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx], axis=-1)


def cross_ez(a: np.ndarray) -> np.ndarray:
    """a x e_z"""
    return np.stack([a[..., 1], -a[..., 0], np.zeros_like(a[..., 0])], axis=-1)


def bloch_generator(ux, uy, delta=0.0, alpha=0.0) -> np.ndarray:
    """
    Generator of the Bloch equation q' = M q.

    All arguments broadcast; the result has shape broadcast_shape + (3, 3).
    """
    ux, uy, delta, alpha = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (ux, uy, delta, alpha)))
    gain = 1.0 + alpha
    matrix = np.zeros(ux.shape + (3, 3))
    matrix[..., 0, 1] = delta
    matrix[..., 0, 2] = -gain * uy
    matrix[..., 1, 0] = -delta
    matrix[..., 1, 2] = gain * ux
    matrix[..., 2, 0] = gain * uy
    matrix[..., 2, 1] = -gain * ux
    return matrix


@dataclass(frozen=True, eq=False)
class ControlField:
    """
    Sampled pulse on a strictly increasing grid starting at 0.

    ux[i], uy[i] hold on [times[i], times[i+1]); the final entry is the value
    held at the last node and does not contribute to any propagation.
    """

    times: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    kind: FieldKind = FieldKind.GENERAL
    switch_times: Tuple[float, ...] = ()

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        ux = np.asarray(self.ux, dtype=float)
        uy = np.asarray(self.uy, dtype=float)
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'ux', ux)
        object.__setattr__(self, 'uy', uy)
        object.__setattr__(self, 'kind', FieldKind(self.kind))
        object.__setattr__(self, 'switch_times', tuple(float(s) for s in self.switch_times))

        if times.ndim != 1 or len(times) < 2:
            raise FieldError("a control field needs at least two time nodes")
        if ux.shape != times.shape or uy.shape != times.shape:
            raise FieldError("ux and uy must have one value per time node")
        if times[0] != 0.0:
            raise FieldError("time grid must start at 0")
        if np.any(np.diff(times) <= 0):
            raise FieldError("time grid must be strictly increasing")
        if not (np.all(np.isfinite(ux)) and np.all(np.isfinite(uy))):
            raise FieldError("field samples must be finite")
        if self.kind is FieldKind.PHASE_ONLY:
            if np.max(np.abs(ux ** 2 + uy ** 2 - 1.0)) > _UNIT_TOL:
                raise FieldError("phase-only field must satisfy ux^2 + uy^2 = 1")
        elif self.kind is FieldKind.BANG_BANG:
            if np.any(np.abs(np.abs(ux) - 1.0) > _UNIT_TOL) or np.any(uy != 0.0):
                raise FieldError("bang-bang field must satisfy |ux| = 1 and uy = 0")

    # Constructors

    @classmethod
    def from_nodes(cls, times, ux_nodes, uy_nodes, unit_norm: bool = False) -> 'ControlField':
        """
        Field whose cell values are the averages of the adjacent node values.

        With unit_norm the averaged vector is projected back on the unit circle
        and the field is tagged phase-only.
        """
        times = np.asarray(times, dtype=float)
        ux_nodes = np.asarray(ux_nodes, dtype=float)
        uy_nodes = np.asarray(uy_nodes, dtype=float)
        ux = np.empty_like(ux_nodes)
        uy = np.empty_like(uy_nodes)
        ux[:-1] = 0.5 * (ux_nodes[:-1] + ux_nodes[1:])
        uy[:-1] = 0.5 * (uy_nodes[:-1] + uy_nodes[1:])
        ux[-1], uy[-1] = ux[-2], uy[-2]
        if unit_norm:
            norm = np.hypot(ux, uy)
            ux, uy = ux / norm, uy / norm
            return cls(times, ux, uy, FieldKind.PHASE_ONLY)
        return cls(times, ux, uy, FieldKind.GENERAL)

    @classmethod
    def from_phase(cls, times, phi) -> 'ControlField':
        phi = np.asarray(phi, dtype=float)
        return cls(times, np.cos(phi), np.sin(phi), FieldKind.PHASE_ONLY)

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]],
                      t_final: float, step: float = DEFAULT_STEP,
                      kind: FieldKind = FieldKind.GENERAL) -> 'ControlField':
        """Sample func(t) -> (ux, uy) at the midpoint of every grid cell"""
        times = time_grid(t_final, step)
        mid = 0.5 * (times[:-1] + times[1:])
        ux_mid, uy_mid = func(mid)
        ux = np.append(np.broadcast_to(ux_mid, mid.shape), np.nan)
        uy = np.append(np.broadcast_to(uy_mid, mid.shape), np.nan)
        ux[-1], uy[-1] = ux[-2], uy[-2]
        if kind is FieldKind.PHASE_ONLY:
            norm = np.hypot(ux, uy)
            ux, uy = ux / norm, uy / norm
        return cls(times, ux, uy, kind)

    @classmethod
    def bang_bang(cls, switch_times: Sequence[float], duration: float,
                  step: float = DEFAULT_STEP, first_sign: float = 1.0) -> 'ControlField':
        """x-axis pulse of amplitude one flipping sign at every switch time"""
        switches = sorted(float(s) for s in switch_times if 0.0 < s < duration)
        nodes = np.union1d(time_grid(duration, step), switches)
        keep = np.concatenate([[True], np.diff(nodes) > _SUBSTEP_SLACK * step])
        nodes = nodes[keep]
        for s in switches:
            nodes[np.argmin(np.abs(nodes - s))] = s
        flips = np.searchsorted(np.asarray(switches), nodes, side='right')
        ux = np.where(flips % 2 == 0, 1.0, -1.0) * math.copysign(1.0, first_sign)
        ux[-1] = ux[-2]
        return cls(nodes, ux, np.zeros_like(ux), FieldKind.BANG_BANG, tuple(switches))

    # Derived quantities

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def phase(self) -> np.ndarray:
        return np.unwrap(np.arctan2(self.uy, self.ux))

    def cells(self, t_final: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Cell lengths and values covering [0, t_final].

        Raises:
            RequestOutOfRangeError: t_final lies beyond the last node.
        """
        if t_final is None:
            t_final = self.duration
        if t_final > self.duration * (1.0 + 1e-12) + 1e-12:
            raise RequestOutOfRangeError(
                f"t_final = {t_final:.9g} beyond field duration {self.duration:.9g}")
        if t_final <= 0.0:
            return np.zeros(0), np.zeros(0), np.zeros(0)
        t_final = min(t_final, self.duration)
        count = int(np.searchsorted(self.times, t_final, side='left'))
        starts = self.times[:count]
        ends = np.minimum(self.times[1:count + 1], t_final)
        lengths = ends - starts
        return lengths, self.ux[:count], self.uy[:count]

    def area(self, t_final: Optional[float] = None) -> float:
        lengths, ux, uy = self.cells(t_final)
        return float(np.sum(np.hypot(ux, uy) * lengths))

    def energy(self, t_final: Optional[float] = None) -> float:
        lengths, ux, uy = self.cells(t_final)
        return float(np.sum((ux ** 2 + uy ** 2) * lengths))

    def truncated(self, t_final: float) -> 'ControlField':
        """Copy restricted to [0, t_final]"""
        lengths, ux, uy = self.cells(t_final)
        times = np.concatenate([[0.0], np.cumsum(lengths)])
        times[-1] = t_final
        ux = np.append(ux, ux[-1])
        uy = np.append(uy, uy[-1])
        switches = tuple(s for s in self.switch_times if s < t_final)
        return ControlField(times, ux, uy, self.kind, switches)


@dataclass(eq=False)
class PerturbativeStack:
    """Taylor coefficients q_0..q_N (state modes) or R_0..R_N (gate mode)"""

    order: int
    mode: CascadeMode
    entries: np.ndarray

    @classmethod
    def initial(cls, order: int, mode, q0: np.ndarray = NORTH_POLE) -> 'PerturbativeStack':
        mode = parse_mode(mode)
        if order < 0:
            raise ConfigurationError("cascade order must be non-negative")
        if mode is CascadeMode.GATE_OFFSET:
            entries = np.zeros((order + 1, 3, 3))
            entries[0] = np.eye(3)
        else:
            entries = np.zeros((order + 1, 3))
            entries[0] = q0
        return cls(order, mode, entries)

    @property
    def is_gate(self) -> bool:
        return self.mode is CascadeMode.GATE_OFFSET

    def layout(self) -> np.ndarray:
        """Internal layout with Bloch vectors on the last axis (gate columns become rows)"""
        if self.is_gate:
            return np.swapaxes(self.entries, -1, -2).copy()
        return self.entries.copy()

    @classmethod
    def from_layout(cls, order: int, mode: CascadeMode, layout: np.ndarray) -> 'PerturbativeStack':
        if mode is CascadeMode.GATE_OFFSET:
            return cls(order, mode, np.swapaxes(layout, -1, -2).copy())
        return cls(order, mode, np.array(layout, copy=True))


@dataclass(eq=False)
class RobustnessProfile:
    """Fidelity as a function of one inhomogeneity parameter"""

    parameter: str
    values: np.ndarray
    fidelity: np.ndarray

    def local_maxima(self, prominence: float = 1e-3) -> int:
        """Number of interior peaks, ignoring ripples below the prominence"""
        peaks, _ = find_peaks(self.fidelity, prominence=prominence)
        return int(len(peaks))


def parse_mode(mode) -> CascadeMode:
    try:
        return CascadeMode(mode)
    except ValueError as exc:
        raise ConfigurationError(f"unknown cascade mode {mode!r}") from exc


def _substeps(length: float, step: float) -> int:
    return max(1, int(math.ceil(length / step - _SUBSTEP_SLACK)))


def _bloch_rhs(ux: float, uy: float, delta, alpha):
    gain = 1.0 + np.asarray(alpha, dtype=float)
    delta = np.asarray(delta, dtype=float)

    def rhs(_t, q):
        w = np.stack(np.broadcast_arrays(gain * ux, gain * uy, delta), axis=-1)
        return cross(q, w)

    return rhs


def cascade_rhs(mode: CascadeMode, ux, uy):
    """
    Right-hand side of the block-triangular cascade in internal layout.

    ux, uy are scalars or arrays broadcasting against the leading batch axes.
    """
    u = np.stack(np.broadcast_arrays(np.asarray(ux, dtype=float),
                                     np.asarray(uy, dtype=float),
                                     np.zeros(np.shape(ux))), axis=-1)

    order_axis = -3 if mode is CascadeMode.GATE_OFFSET else -2

    def rhs(_t, layout):
        # layout: batch + (N+1, [3,] 3); u must broadcast over the cascade axes
        extra = layout.ndim - u.ndim
        field_vec = u.reshape(u.shape[:-1] + (1,) * extra + (3,))
        out = cross(layout, field_vec)
        # cascade index: axis -2 for states, -3 for gate columns
        lower = np.moveaxis(layout, order_axis, 0)[:-1]
        if mode is CascadeMode.STATE_AMPLITUDE:
            coupling = cross(lower, np.moveaxis(np.broadcast_to(field_vec, layout.shape), order_axis, 0)[:-1])
        else:
            coupling = cross_ez(lower)
        np.moveaxis(out, order_axis, 0)[1:] += coupling
        return out

    return rhs


def _check_unit(q0) -> np.ndarray:
    q0 = np.asarray(q0, dtype=float)
    if q0.shape != (3,) or abs(np.linalg.norm(q0) - 1.0) > 1e-9:
        raise ConfigurationError("initial Bloch vector must be a unit 3-vector")
    return q0


def propagate_bloch(field: ControlField, delta: float = 0.0, alpha: float = 0.0,
                    q0=NORTH_POLE, t_final: Optional[float] = None,
                    step: float = DEFAULT_STEP) -> Tuple[np.ndarray, np.ndarray]:
    """
    Integrate the Bloch equation for one offset / amplitude error.

    Returns:
        (times, states) on the integrator grid, states of shape (len(times), 3).
    """
    q = _check_unit(q0).copy()
    lengths, ux, uy = field.cells(t_final)
    times = [0.0]
    states = [q.copy()]
    t = 0.0
    for length, ux_i, uy_i in zip(lengths, ux, uy):
        substeps = _substeps(length, step)
        h = length / substeps
        rhs = _bloch_rhs(ux_i, uy_i, delta, alpha)
        for _ in range(substeps):
            q = rk4_step(rhs, t, q, h)
            t += h
            times.append(t)
            states.append(q)
    return np.asarray(times), np.asarray(states)


def propagate_ensemble(field: ControlField, deltas=0.0, alphas=0.0, q0=NORTH_POLE,
                       t_final: Optional[float] = None, step: float = DEFAULT_STEP) -> np.ndarray:
    """Final Bloch vectors for many (delta, alpha) pairs at once, shape (P, 3)"""
    q0 = _check_unit(q0)
    deltas, alphas = np.broadcast_arrays(np.atleast_1d(np.asarray(deltas, dtype=float)),
                                         np.atleast_1d(np.asarray(alphas, dtype=float)))
    q = np.tile(q0, (deltas.size, 1))
    lengths, ux, uy = field.cells(t_final)
    for length, ux_i, uy_i in zip(lengths, ux, uy):
        substeps = _substeps(length, step)
        h = length / substeps
        rhs = _bloch_rhs(ux_i, uy_i, deltas, alphas)
        for _ in range(substeps):
            q = rk4_step(rhs, 0.0, q, h)
    return q


def propagate_cascade(field: ControlField, stack: PerturbativeStack,
                      t_final: Optional[float] = None, step: float = DEFAULT_STEP,
                      keep: bool = True):
    """
    Integrate the perturbative cascade driven by a field.

    q_0' = H0 q_0 and q_k' = H0 q_k + C q_{k-1}, with C the offset generator
    (state-offset, gate-offset) or H0 itself (state-amplitude).

    Returns:
        (times, list of PerturbativeStack) when keep is True, else the final stack.
    """
    mode = parse_mode(stack.mode)
    layout = stack.layout()
    lengths, ux, uy = field.cells(t_final)
    times = [0.0]
    history = [PerturbativeStack.from_layout(stack.order, mode, layout)] if keep else None
    t = 0.0
    for length, ux_i, uy_i in zip(lengths, ux, uy):
        substeps = _substeps(length, step)
        h = length / substeps
        rhs = cascade_rhs(mode, ux_i, uy_i)
        for _ in range(substeps):
            layout = rk4_step(rhs, t, layout, h)
            t += h
            if keep:
                times.append(t)
                history.append(PerturbativeStack.from_layout(stack.order, mode, layout))
    if keep:
        return np.asarray(times), history
    return PerturbativeStack.from_layout(stack.order, mode, layout)


def inversion_fidelity(q_final) -> float:
    """F = -z"""
    return -np.asarray(q_final, dtype=float)[..., 2]


def layout_fidelity(layout: np.ndarray, target: np.ndarray, gate: bool) -> np.ndarray:
    """
    Robust fidelity on internal-layout stacks with arbitrary leading batch axes.

    target is the Bloch vector (state) or the gate in internal layout (G transposed).
    """
    homogeneous = layout[..., 0, :] - target
    inhomogeneous = layout[..., 1:, :]
    if gate:
        return -(np.sum(homogeneous ** 2, axis=(-2, -1))
                 + np.sum(inhomogeneous ** 2, axis=(-3, -2, -1)))
    return -(np.sum(homogeneous ** 2, axis=-1) + np.sum(inhomogeneous ** 2, axis=(-2, -1)))


def robust_fidelity(stack_final: PerturbativeStack, target) -> float:
    """
    F = -||q_0 - target||^2 - sum_k ||q_k||^2 (state) or the Frobenius analogue (gate).

    F <= 0 and F = 0 exactly when the robust transfer is realized.
    """
    target = np.asarray(target, dtype=float)
    expected = (3, 3) if stack_final.is_gate else (3,)
    if target.shape != expected:
        raise ConfigurationError(
            f"target shape {target.shape} does not match {stack_final.mode.value} stack")
    if stack_final.is_gate:
        target = target.T
    return float(layout_fidelity(stack_final.layout(), target, stack_final.is_gate))


def robustness_profile(field: ControlField, parameter: str = 'delta', grid=None,
                       t_final: Optional[float] = None, step: float = DEFAULT_STEP,
                       q0=NORTH_POLE) -> RobustnessProfile:
    """Inversion fidelity -z(t_f) over a grid of offsets or amplitude errors"""
    if grid is None:
        grid = np.linspace(-1.0, 1.0, PROFILE_POINTS)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ConfigurationError("profile grid must not be empty")
    if parameter == 'delta':
        finals = propagate_ensemble(field, deltas=grid, q0=q0, t_final=t_final, step=step)
    elif parameter == 'alpha':
        finals = propagate_ensemble(field, alphas=grid, q0=q0, t_final=t_final, step=step)
    else:
        raise ConfigurationError(f"unknown profile parameter {parameter!r}")
    return RobustnessProfile(parameter, grid, inversion_fidelity(finals))


def scaling_exponent(field: ControlField, parameter: str = 'delta', values=None, target=SOUTH_POLE,
                     t_final: Optional[float] = None, step: float = DEFAULT_STEP) -> float:
    """
    Least-squares slope of log ||q(t_f; p) - target|| against log p.

    An order-N robust transfer shows a slope of about N + 1.
    """
    if values is None:
        values = np.geomspace(1e-3, 1e-2, 7)
    values = np.asarray(values, dtype=float)
    if parameter == 'delta':
        finals = propagate_ensemble(field, deltas=values, t_final=t_final, step=step)
    else:
        finals = propagate_ensemble(field, alphas=values, t_final=t_final, step=step)
    deviation = np.linalg.norm(finals - np.asarray(target, dtype=float), axis=-1)
    slope, _ = np.polyfit(np.log(values), np.log(deviation), 1)
    logger.debug("scaling exponent over %s in [%g, %g]: %.3f", parameter, values[0], values[-1], slope)
    return float(slope)
