"""
Extremal flows of the robust control problems.

Every variant integrates a stack of adjoint-derived vectors (Omega_0..Omega_N,
or the per-spin momenta ell_1..ell_N for ensembles) whose leading components
generate the candidate control field. Flows are vectorized over a batch of
shooting points; the single-point entry points wrap the batch engine and turn
a vanished normalization r into a SingularFlowError.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.config import DEFAULT_STEP, R_THRESHOLD
from core.dynamics import ControlField, cross, cross_ez
from core.errors import ConfigurationError, SingularFlowError
from core.integrator import bisect_crossing, integrate, rk4_step, time_grid
from core.pulse_io import write_csv

logger = logging.getLogger(__name__)

# Offsets of the broadband ensembles studied for 2, 3 and 4 spins
DEFAULT_ENSEMBLE_OFFSETS = {
    1: (0.0,),
    2: (-0.5, 0.5),
    3: (-0.5, 0.0, 0.5),
    4: (-0.5, -1.0 / 6.0, 1.0 / 6.0, 0.5),
}


class Variant(str, Enum):
    ENERGY_OFFSET = 'energy-offset'
    TIME_OFFSET = 'time-offset'
    AMPLITUDE = 'amplitude'
    ENSEMBLE = 'ensemble'
    GATE_TIME = 'gate-time'


class CostKind(str, Enum):
    ENERGY = 'energy'
    TIME = 'time'


class Reduction(str, Enum):
    """One-field families with a symmetry-reduced parameterization"""
    ENERGY_O1 = 'energy-o1'
    ENERGY_O2 = 'energy-o2'
    ENERGY_O3 = 'energy-o3'
    BANG_BANG = 'bang-bang'


def parse_variant(value) -> Variant:
    try:
        return Variant(value)
    except ValueError as exc:
        raise ConfigurationError(f"unknown flow variant {value!r}") from exc


def parse_cost(value) -> CostKind:
    try:
        return CostKind(value)
    except ValueError as exc:
        raise ConfigurationError(f"unknown cost kind {value!r}") from exc


def dimension(variant, order: int) -> int:
    """Number of free shooting parameters"""
    variant = parse_variant(variant)
    if order < 1:
        raise ConfigurationError("flow order must be at least 1")
    if variant is Variant.ENSEMBLE:
        return 2 * order - 2
    if variant is Variant.GATE_TIME:
        return 3 * order + 2
    return 2 * order


def default_cost(variant: Variant) -> CostKind:
    return CostKind.ENERGY if variant is Variant.ENERGY_OFFSET else CostKind.TIME


@dataclass(frozen=True, eq=False)
class ShootingPoint:
    """
    Free initial data of one extremal.

    For ensembles the order is the number of spins and offsets lists their
    detunings; cost selects the energy or time normalization of the field.
    """

    variant: Variant
    order: int
    params: np.ndarray
    cost: Optional[CostKind] = None
    offsets: Tuple[float, ...] = ()
    reduction: Optional[Reduction] = None

    def __post_init__(self):
        variant = parse_variant(self.variant)
        object.__setattr__(self, 'variant', variant)
        object.__setattr__(self, 'params', np.asarray(self.params, dtype=float).reshape(-1))
        cost = default_cost(variant) if self.cost is None else parse_cost(self.cost)
        object.__setattr__(self, 'cost', cost)
        if self.reduction is not None:
            object.__setattr__(self, 'reduction', Reduction(self.reduction))

        expected = dimension(variant, self.order)
        if self.params.size != expected:
            raise ConfigurationError(
                f"{variant.value} order {self.order} takes {expected} parameters, got {self.params.size}")
        if not np.all(np.isfinite(self.params)):
            raise ConfigurationError("shooting parameters must be finite")

        if variant is Variant.ENSEMBLE:
            offsets = self.offsets or DEFAULT_ENSEMBLE_OFFSETS.get(self.order, ())
            if len(offsets) != self.order:
                raise ConfigurationError(f"ensemble of {self.order} spins needs {self.order} offsets")
            object.__setattr__(self, 'offsets', tuple(float(d) for d in offsets))
        elif self.offsets:
            raise ConfigurationError("offsets only apply to the ensemble variant")

    def with_params(self, params) -> 'ShootingPoint':
        return ShootingPoint(self.variant, self.order, params, self.cost, self.offsets, self.reduction)

    def to_dict(self) -> dict:
        return {
            'variant': self.variant.value,
            'order': self.order,
            'params': [float(v) for v in self.params],
            'cost': self.cost.value,
            'offsets': list(self.offsets),
            'reduction': self.reduction.value if self.reduction else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'ShootingPoint':
        return cls(data['variant'], int(data['order']), data['params'], data.get('cost'),
                   tuple(data.get('offsets', ())), data.get('reduction'))


# One-field reductions

def energy_o1(H: float, rho_sign: float = -1.0) -> ShootingPoint:
    """
    Order-1 energy extremal with u_y = 0.

    rho_sign < 0 starts with Omega_1 = (0, 1, 0), rho_sign > 0 with (0, -1, 0).
    """
    theta = 0.5 * math.pi if rho_sign < 0 else -0.5 * math.pi
    return ShootingPoint(Variant.ENERGY_OFFSET, 1, [math.sqrt(2.0 * H), theta],
                         reduction=Reduction.ENERGY_O1)


def energy_o2(H: float, J: float, mirrored: bool = False) -> ShootingPoint:
    """
    Order-2 energy extremal with u_y = 0 labelled by its constants H and J.

    Omega_2 = (-1, 0, 0); the mirrored branch is the same extremal rotated by
    pi about z (field of opposite sign).
    """
    omega_0x = math.sqrt(2.0 * H)
    radicand = 2.0 * J + 2.0 * omega_0x
    if radicand < 0:
        raise ConfigurationError(f"(H, J) = ({H}, {J}) has no real order-2 extremal")
    omega_1y = math.sqrt(radicand)
    params = [omega_0x, 0.0, omega_1y, math.pi]
    if mirrored:
        params = [-omega_0x, 0.0, -omega_1y, 0.0]
    return ShootingPoint(Variant.ENERGY_OFFSET, 2, params, reduction=Reduction.ENERGY_O2)


def energy_o3(omega_0x: float, omega_1y: float, omega_2x: float, mirrored: bool = False) -> ShootingPoint:
    """Order-3 energy extremal with u_y = 0; Omega_3(0) = (0, -1, 0), or (0, 1, 0) mirrored"""
    theta = 0.5 * math.pi if mirrored else -0.5 * math.pi
    params = [omega_0x, 0.0, omega_1y, omega_2x, 0.0, theta]
    return ShootingPoint(Variant.ENERGY_OFFSET, 3, params, reduction=Reduction.ENERGY_O3)


def bang_bang_o1(H: float, mirrored: bool = False) -> ShootingPoint:
    """Order-1 time extremal on the x axis starting at Omega_0x = H, Omega_1 = (0, 1, 0)"""
    params = [-H, -0.5 * math.pi] if mirrored else [H, 0.5 * math.pi]
    return ShootingPoint(Variant.TIME_OFFSET, 1, params, reduction=Reduction.BANG_BANG)


def amplitude_from_invariants(I_x: float, I_y: float) -> ShootingPoint:
    """Order-1 amplitude extremal with invariants I_x = 1 - 2 Omega_1x, I_y = -2 Omega_1y"""
    return ShootingPoint(Variant.AMPLITUDE, 1, [0.5 * (1.0 - I_x), -0.5 * I_y])


def ensemble_point(params, offsets: Sequence[float], cost=CostKind.TIME) -> ShootingPoint:
    return ShootingPoint(Variant.ENSEMBLE, len(offsets), params, cost, tuple(offsets))


def initial_omega(point: ShootingPoint) -> np.ndarray:
    """Initial stack, shape (N + 1, 3), or (N, 3) momenta for ensembles"""
    p = point.params
    n = point.order
    variant = point.variant

    if variant in (Variant.ENERGY_OFFSET, Variant.TIME_OFFSET):
        stack = np.zeros((n + 1, 3))
        stack[0, 0] = p[0]
        for k in range(1, n):
            stack[k, :2] = p[2 * k - 1:2 * k + 1]
        stack[n, :2] = math.cos(p[-1]), math.sin(p[-1])
        return stack

    if variant is Variant.AMPLITUDE:
        stack = np.zeros((n + 1, 3))
        stack[0, 0] = 1.0
        stack[1:, :2] = p.reshape(n, 2)
        return stack

    if variant is Variant.ENSEMBLE:
        stack = np.zeros((n, 3))
        if n > 1:
            stack[:-1, :2] = p.reshape(n - 1, 2)
        stack[-1, 0] = 1.0 - np.sum(stack[:-1, 0])
        stack[-1, 1] = -np.sum(stack[:-1, 1])
        return stack

    # gate
    stack = np.zeros((n + 1, 3))
    stack[0] = p[:3]
    for k in range(1, n):
        stack[k] = p[3 * k:3 * k + 3]
    theta, phi = p[-2], p[-1]
    stack[n] = math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)
    return stack


class FlowSystem:
    """Vectorized extremal dynamics for a batch of points sharing variant, order and cost"""

    def __init__(self, points: Sequence[ShootingPoint]):
        points = list(points)
        if not points:
            raise ConfigurationError("empty batch of shooting points")
        head = points[0]
        for point in points:
            if (point.variant, point.order, point.cost) != (head.variant, head.order, head.cost):
                raise ConfigurationError("a flow batch must share variant, order and cost")

        self.variant = head.variant
        self.order = head.order
        self.cost = head.cost
        self.y0 = np.stack([initial_omega(p) for p in points])
        self.divides_by_r = (self.variant in (Variant.TIME_OFFSET, Variant.GATE_TIME)
                             or (self.variant is Variant.ENSEMBLE and self.cost is CostKind.TIME))
        self.unit_field = self.divides_by_r or self.variant is Variant.AMPLITUDE
        if self.variant is Variant.ENSEMBLE:
            self.offsets = np.array([p.offsets for p in points], dtype=float)[:, :, None]

    def control(self, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(u_x, u_y, r) generated by the stacks y of shape (B, M, 3)"""
        if self.variant is Variant.ENSEMBLE:
            sx, sy = np.sum(y[..., 0], axis=-1), np.sum(y[..., 1], axis=-1)
        else:
            sx, sy = y[..., 0, 0], y[..., 0, 1]
        r = np.hypot(sx, sy)
        if self.divides_by_r:
            safe = np.where(r < R_THRESHOLD, 1.0, r)
            return sx / safe, sy / safe, r
        return sx, sy, r

    def rhs(self, _t, y: np.ndarray) -> np.ndarray:
        ux, uy, _ = self.control(y)
        u = np.stack([ux, uy, np.zeros_like(ux)], axis=-1)[..., None, :]
        out = cross(y, u)
        if self.variant is Variant.AMPLITUDE:
            out[..., :-1, :] += cross(y[..., 1:, :], u)
        elif self.variant is Variant.ENSEMBLE:
            out += self.offsets * cross_ez(y)
        else:
            out[..., :-1, :] += cross_ez(y[..., 1:, :])
        return out


@dataclass(eq=False)
class BatchFlow:
    """Batch integration output; failed points have r below threshold somewhere"""

    times: np.ndarray
    omega: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    failed: np.ndarray
    failure_time: np.ndarray


def flow_batch(points: Sequence[ShootingPoint], t_final: float, step: float = DEFAULT_STEP,
               keep: bool = True) -> BatchFlow:
    """
    Integrate many shooting points of one variant at once.

    Returns:
        BatchFlow with omega of shape (K, B, M, 3) when keep is True, else (B, M, 3);
        node controls ux, uy of shape (K, B).
    """
    system = FlowSystem(points)
    times = time_grid(t_final, step)
    batch = len(system.y0)
    ux = np.empty((len(times), batch))
    uy = np.empty((len(times), batch))
    failed = np.zeros(batch, dtype=bool)
    failure_time = np.full(batch, np.nan)

    def observe(i, t, y):
        cx, cy, r = system.control(y)
        ux[i], uy[i] = cx, cy
        if system.divides_by_r:
            newly = (r < R_THRESHOLD) & ~failed
            failure_time[newly] = t
            np.logical_or(failed, newly, out=failed)

    omega = integrate(system.rhs, system.y0, times, observer=observe, keep=keep)
    if failed.any():
        logger.debug("%d of %d points hit r < %g", int(failed.sum()), batch, R_THRESHOLD)
    return BatchFlow(times, omega, ux, uy, failed, failure_time)


@dataclass(frozen=True, eq=False)
class OmegaStack:
    """Omega_0..Omega_N (or ell_1..ell_N) at one time, or a trajectory with a leading time axis"""

    variant: Variant
    vectors: np.ndarray
    cost: CostKind = CostKind.TIME
    offsets: Tuple[float, ...] = ()


@dataclass(eq=False)
class FirstIntegralAudit:
    """Conserved quantities at the first state and their max drift along the trajectory"""

    values: Dict[str, float] = field(default_factory=dict)
    drift: Dict[str, float] = field(default_factory=dict)

    @property
    def max_drift(self) -> float:
        return max(self.drift.values(), default=0.0)

    def passed(self, tolerance: float = 1e-8) -> bool:
        return self.max_drift <= tolerance

    def to_dict(self) -> dict:
        return {'values': dict(self.values), 'drift': dict(self.drift)}


@dataclass(eq=False)
class FlowResult:
    """Integrated extremal with its generated field"""

    point: ShootingPoint
    times: np.ndarray
    omega: np.ndarray
    field: ControlField
    switch_times: Tuple[float, ...] = ()

    def stack(self) -> OmegaStack:
        return OmegaStack(self.point.variant, self.omega, self.point.cost, self.point.offsets)

    def audit(self) -> FirstIntegralAudit:
        return first_integrals(self.point.variant, self.stack())


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _is_one_field(v: np.ndarray, zero_components) -> bool:
    return all(np.max(np.abs(v[..., k, c])) <= 1e-12 for k, c in zero_components)


def integral_catalog(variant: Variant, v: np.ndarray, cost: CostKind, offsets) -> Dict[str, np.ndarray]:
    """Conserved quantities of a variant evaluated on stacks with any leading axes"""
    x, y, z = 0, 1, 2
    out: Dict[str, np.ndarray] = {}

    if variant is Variant.ENSEMBLE:
        sx, sy = np.sum(v[..., x], axis=-1), np.sum(v[..., y], axis=-1)
        r = np.hypot(sx, sy)
        shift = np.sum(np.asarray(offsets) * v[..., z], axis=-1)
        out['H'] = 0.5 * r ** 2 + shift if cost is CostKind.ENERGY else r + shift
        for k in range(v.shape[-2]):
            out[f'|ell_{k + 1}|'] = np.linalg.norm(v[..., k, :], axis=-1)
        return out

    n = v.shape[-2] - 1
    o0, o1 = v[..., 0, :], v[..., 1, :]
    out[f'|Omega_{n}|^2'] = _dot(v[..., n, :], v[..., n, :])

    if variant is Variant.AMPLITUDE:
        out['u_x^2+u_y^2'] = o0[..., x] ** 2 + o0[..., y] ** 2
        if n == 1:
            out['Omega_0z-Omega_1z'] = o0[..., z] - o1[..., z]
            out['I_x'] = o0[..., x] - 2.0 * o1[..., x]
            out['I_y'] = o0[..., y] - 2.0 * o1[..., y]
            out['J'] = _dot(o0, o1)
            out['M'] = np.linalg.norm(o1, axis=-1)
        return out

    r = np.hypot(o0[..., x], o0[..., y])
    out['Omega_0z'] = o0[..., z]

    if variant in (Variant.TIME_OFFSET, Variant.GATE_TIME):
        out['H'] = r + o1[..., z]
        if n == 1:
            out['I'] = _dot(o0, o1)
        return out

    # energy-offset
    out['H'] = 0.5 * r ** 2 + o1[..., z]
    if n == 1:
        out['I'] = _dot(o0, o1)
        if _is_one_field(v, [(0, y), (1, x)]):
            out['ell'] = o1[..., y] ** 2 + o1[..., z] ** 2
    elif n == 2:
        o2 = v[..., 2, :]
        out['I'] = _dot(o1, o2)
        out['J'] = 0.5 * _dot(o1, o1) + _dot(o0, o2)
        out['K'] = _dot(o0, o1) + o2[..., z]
    elif n == 3 and _is_one_field(v, [(0, y), (1, x), (2, y), (2, z), (3, x)]):
        o2, o3 = v[..., 2, :], v[..., 3, :]
        out['2H'] = o0[..., x] ** 2 + 2.0 * o1[..., z]
        out['2I'] = o2[..., x] ** 2 + 2.0 * o1[..., y] * o3[..., y] + 2.0 * o1[..., z] * o3[..., z]
        out['2J'] = (o1[..., y] ** 2 + o1[..., z] ** 2 + 2.0 * o0[..., x] * o2[..., x]
                     + 2.0 * o3[..., z])
        out['Omega_3yz^2'] = o3[..., y] ** 2 + o3[..., z] ** 2
    return out


def first_integrals(variant, state: OmegaStack) -> FirstIntegralAudit:
    """
    Evaluate the conserved quantities of a variant.

    A single state yields zero drift; a trajectory (leading time axis) yields
    the max deviation from the first state.
    """
    variant = parse_variant(variant)
    if state.variant is not variant:
        raise ConfigurationError(f"state of {state.variant.value} audited as {variant.value}")
    vectors = np.asarray(state.vectors, dtype=float)
    catalog = integral_catalog(variant, vectors, state.cost, state.offsets)

    audit = FirstIntegralAudit()
    for name, series in catalog.items():
        series = np.atleast_1d(series)
        audit.values[name] = float(series[0])
        audit.drift[name] = float(np.max(np.abs(series - series[0])))
    return audit


def dump_flow(result: FlowResult, path) -> None:
    """CSV t,Omega_0x,Omega_0y,... of an integrated flow"""
    label = 'ell' if result.point.variant is Variant.ENSEMBLE else 'Omega'
    first = 1 if result.point.variant is Variant.ENSEMBLE else 0
    count = result.omega.shape[1]
    header = ['t'] + [f'{label}_{k}{c}' for k in range(first, first + count) for c in 'xyz']
    rows = np.column_stack([result.times, result.omega.reshape(len(result.times), -1)])
    write_csv(path, header, rows)
    logger.info("flow dump written to %s", path)


def _run_single(point: ShootingPoint, variant: Variant, t_final: float, step: float,
                debug_dump=None) -> FlowResult:
    if point.variant is not variant:
        raise ConfigurationError(f"{point.variant.value} point passed to the {variant.value} flow")
    batch = flow_batch([point], t_final, step)
    if batch.failed[0]:
        raise SingularFlowError(batch.failure_time[0], point)
    system_unit = FlowSystem([point]).unit_field
    field_ = ControlField.from_nodes(batch.times, batch.ux[:, 0], batch.uy[:, 0], unit_norm=system_unit)
    result = FlowResult(point, batch.times, batch.omega[:, 0], field_)
    if debug_dump:
        dump_flow(result, debug_dump)
    return result


def flow_energy_offset(point: ShootingPoint, t_final: float, step: float = DEFAULT_STEP,
                       debug_dump=None) -> FlowResult:
    """Energy-optimal offset extremal, u = (Omega_0x, Omega_0y)"""
    return _run_single(point, Variant.ENERGY_OFFSET, t_final, step, debug_dump)


def _bang_bang_rhs(sign: float):
    def rhs(_t, y):
        return np.array([y[1], sign * y[2], -sign * y[1]])
    return rhs


def _sign_of(y) -> float:
    if y[0] != 0.0:
        return math.copysign(1.0, y[0])
    return math.copysign(1.0, y[1]) if y[1] != 0.0 else 1.0


def _locate_switch(rhs, t, y, h, sign):
    """
    Time and state of the first zero of Omega_0x in (t, t + h] at fixed sign.

    A step can leave and re-enter the current sign when Omega_0x grazes zero,
    so the minimum of sign * Omega_0x (where Omega_1y vanishes) is inspected too.
    """
    end = rk4_step(rhs, t, y, h)
    if sign * end[0] < 0:
        return bisect_crossing(rhs, t, y, h, lambda v: v[0])
    if sign * y[1] < 0 < sign * end[1]:
        t_turn, y_turn = bisect_crossing(rhs, t, y, h, lambda v: v[1])
        if sign * y_turn[0] < 0:
            return bisect_crossing(rhs, t, y, t_turn - t, lambda v: v[0])
    return None


def _flow_bang_bang(point: ShootingPoint, t_final: float, step: float) -> FlowResult:
    """
    Reduced order-1 time system on the x axis with u_x = sign(Omega_0x).

    The sign is held over each RK4 step; a sign change inside a step is located
    by bisection and the step is restarted from the switch.
    """
    times = time_grid(t_final, step)
    y = np.array([point.params[0], math.sin(point.params[1]), 0.0])
    sign = _sign_of(y)
    first_sign = sign
    switches: List[float] = []
    states = [y]

    for i in range(len(times) - 1):
        t, t_next = float(times[i]), float(times[i + 1])
        while True:
            rhs = _bang_bang_rhs(sign)
            found = _locate_switch(rhs, t, y, t_next - t, sign)
            if found is None:
                y = rk4_step(rhs, t, y, t_next - t)
                break
            t, y = found
            y = np.array([0.0, y[1], y[2]])
            switches.append(t)
            sign = -sign
            if t_next - t <= 1e-15:
                break
        states.append(y)

    reduced = np.asarray(states)
    omega = np.zeros((len(times), 2, 3))
    omega[:, 0, 0] = reduced[:, 0]
    omega[:, 1, 1] = reduced[:, 1]
    omega[:, 1, 2] = reduced[:, 2]
    field_ = ControlField.bang_bang(switches, times[-1], step, first_sign)
    logger.debug("bang-bang flow at H = %.12g: switches %s", point.params[0], switches)
    return FlowResult(point, times, omega, field_, tuple(switches))


def flow_time_offset(point: ShootingPoint, t_final: float, step: float = DEFAULT_STEP,
                     debug_dump=None) -> FlowResult:
    """
    Time-optimal offset extremal, u = (Omega_0x, Omega_0y) / r.

    Order-1 points on the x axis (Omega_1x = 0) follow the reduced bang-bang
    system, where r = |Omega_0x| vanishes at every switch.

    Raises:
        SingularFlowError: r fell below threshold outside the bang-bang regime.
    """
    if point.variant is not Variant.TIME_OFFSET:
        raise ConfigurationError(f"{point.variant.value} point passed to the time-offset flow")
    if is_bang_bang(point):
        result = _flow_bang_bang(point, t_final, step)
        if debug_dump:
            dump_flow(result, debug_dump)
        return result
    return _run_single(point, Variant.TIME_OFFSET, t_final, step, debug_dump)


def flow_amplitude(point: ShootingPoint, t_final: float, step: float = DEFAULT_STEP,
                   debug_dump=None) -> FlowResult:
    """Amplitude-robust extremal; the same flow serves both costs"""
    return _run_single(point, Variant.AMPLITUDE, t_final, step, debug_dump)


def flow_ensemble(point: ShootingPoint, t_final: float, step: float = DEFAULT_STEP,
                  offsets: Optional[Sequence[float]] = None, cost=None,
                  debug_dump=None) -> FlowResult:
    """
    Broadband extremal for spins with offsets Delta_k.

    offsets and cost override the ones carried by the point.
    """
    if offsets is not None or cost is not None:
        point = ShootingPoint(point.variant, point.order, point.params,
                              cost if cost is not None else point.cost,
                              tuple(offsets) if offsets is not None else point.offsets)
    return _run_single(point, Variant.ENSEMBLE, t_final, step, debug_dump)


def flow_gate(point: ShootingPoint, t_final: float, step: float = DEFAULT_STEP,
              debug_dump=None) -> FlowResult:
    """Time-optimal gate extremal with Omega_0z = I held constant"""
    return _run_single(point, Variant.GATE_TIME, t_final, step, debug_dump)


_FLOWS = {
    Variant.ENERGY_OFFSET: flow_energy_offset,
    Variant.TIME_OFFSET: flow_time_offset,
    Variant.AMPLITUDE: flow_amplitude,
    Variant.ENSEMBLE: flow_ensemble,
    Variant.GATE_TIME: flow_gate,
}


def run_flow(point: ShootingPoint, t_final: float, step: float = DEFAULT_STEP,
             debug_dump=None) -> FlowResult:
    """Dispatch to the flow of the point's variant"""
    return _FLOWS[point.variant](point, t_final, step, debug_dump=debug_dump)


def is_bang_bang(point: ShootingPoint) -> bool:
    return (point.variant is Variant.TIME_OFFSET and point.order == 1
            and (point.reduction is Reduction.BANG_BANG or abs(math.cos(point.params[1])) <= 1e-12))
