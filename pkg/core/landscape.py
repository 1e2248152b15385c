"""
Shooting landscapes: objective, grid scans, local refinement and global search.

The objective integrates an extremal flow and the matching error cascade side
by side on one time grid, so large batches never hold full trajectories. The
field of each cell is the mean of the flow's controls at its two nodes (unit
norm for time costs), identical to ControlField.from_nodes on the same grid.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import qmc

from core.config import (BOX_HALF_WIDTH, DEFAULT_STEP, DEFAULT_TMAX, FEASIBILITY_TOL, PEAK_LEVEL, R_THRESHOLD,
                         feasibility_tolerance, multistart_count)
from core.dynamics import (SOUTH_POLE, CascadeMode, ControlField, PerturbativeStack, cascade_rhs,
                           cross)
from core.errors import ConfigurationError, NotFoundError, SingularFlowError
from core.flows import (CostKind, FirstIntegralAudit, FlowSystem, Reduction, ShootingPoint, Variant,
                        amplitude_from_invariants, bang_bang_o1, dimension, energy_o1, energy_o2,
                        energy_o3, flow_time_offset, integral_catalog, is_bang_bang, parse_cost,
                        parse_variant, run_flow)
from core.integrator import rk4_step
from core.pulse_io import write_csv

logger = logging.getLogger(__name__)

GATES = {
    'NOT': np.diag([1.0, -1.0, -1.0]),
    'X': np.diag([1.0, -1.0, -1.0]),
    'Y': np.diag([-1.0, 1.0, -1.0]),
    'H': np.array([[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]]),
}

_SLACK = 1e-9
_CHUNK = 256
_PENALTY = 2.0
_FD_STEP = 1e-6
_CONVERGED_F = 1e-9
# Continuation levels H = 1 - 10^-k towards the bang-bang separatrix
_BANG_BANG_LEVELS = range(1, 11)


def gate_matrix(name: str) -> np.ndarray:
    try:
        return GATES[name.upper()].copy()
    except KeyError:
        raise ConfigurationError(f"unknown gate {name!r}; choose from {', '.join(GATES)}") from None


def _resolve_target(variant: Variant, target) -> np.ndarray:
    if target is None:
        return gate_matrix('NOT') if variant is Variant.GATE_TIME else SOUTH_POLE.copy()
    if isinstance(target, str):
        return gate_matrix(target)
    target = np.asarray(target, dtype=float)
    expected = (3, 3) if variant is Variant.GATE_TIME else (3,)
    if target.shape != expected:
        raise ConfigurationError(f"target shape {target.shape} does not match the {variant.value} variant")
    return target


class _Cascade:
    """Error dynamics driven by the generated field, with the matching residual"""

    def __init__(self, points: Sequence[ShootingPoint], target: np.ndarray):
        head = points[0]
        batch = len(points)
        self.variant = head.variant
        if self.variant is Variant.ENSEMBLE:
            self.deltas = np.array([p.offsets for p in points], dtype=float)
            self.initial = np.zeros((batch, head.order, 3))
            self.initial[..., 2] = 1.0
            self.target = target
            return

        if self.variant is Variant.GATE_TIME:
            self.mode = CascadeMode.GATE_OFFSET
            self.target = target.T
        elif self.variant is Variant.AMPLITUDE:
            self.mode = CascadeMode.STATE_AMPLITUDE
            self.target = target
        else:
            self.mode = CascadeMode.STATE_OFFSET
            self.target = target
        layout = PerturbativeStack.initial(head.order, self.mode).layout()
        self.initial = np.broadcast_to(layout, (batch,) + layout.shape).copy()

    def rhs(self, ux: np.ndarray, uy: np.ndarray):
        if self.variant is not Variant.ENSEMBLE:
            return cascade_rhs(self.mode, ux, uy)
        w = np.stack(np.broadcast_arrays(ux[:, None], uy[:, None], self.deltas), axis=-1)
        return lambda _t, q: cross(q, w)

    def residual(self, layout: np.ndarray) -> np.ndarray:
        batch = layout.shape[0]
        if self.variant is Variant.ENSEMBLE:
            return (layout - self.target).reshape(batch, -1)
        head = (layout[:, 0] - self.target).reshape(batch, -1)
        return np.concatenate([head, layout[:, 1:].reshape(batch, -1)], axis=1)

    def fidelity(self, layout: np.ndarray) -> np.ndarray:
        return -np.sum(self.residual(layout) ** 2, axis=1)

    def expand(self, h: np.ndarray, layout: np.ndarray) -> np.ndarray:
        return h.reshape((len(h),) + (1,) * (layout.ndim - 1))


@dataclass(eq=False)
class _ShotHistory:
    times: np.ndarray
    fidelity: np.ndarray
    area: np.ndarray
    energy: np.ndarray


@dataclass(eq=False)
class _Shot:
    final: np.ndarray
    residual: np.ndarray
    area: np.ndarray
    energy: np.ndarray
    failed: np.ndarray
    failure_time: np.ndarray
    history: Optional[_ShotHistory] = None
    audits: Optional[List[FirstIntegralAudit]] = None


def _shoot(points: Sequence[ShootingPoint], t_ends, step: float, target: np.ndarray,
           track: bool = False, audit: bool = False) -> _Shot:
    """
    Integrate flow and cascade of a homogeneous batch up to per-point end times.

    Nodes sit at k * step; a point's last cell is shortened to end exactly at
    its own t_end, following time_grid.
    """
    system = FlowSystem(points)
    cascade = _Cascade(points, target)
    batch = len(points)
    t_ends = np.broadcast_to(np.asarray(t_ends, dtype=float), (batch,)).copy()

    y = system.y0.copy()
    layout = cascade.initial.copy()
    ux_prev, uy_prev, r = system.control(y)
    failed = system.divides_by_r & (r < R_THRESHOLD)
    failure_time = np.where(failed, 0.0, np.nan)
    area = np.zeros(batch)
    energy = np.zeros(batch)

    offsets = np.array([p.offsets for p in points]) if system.variant is Variant.ENSEMBLE else ()
    if audit:
        start = integral_catalog(system.variant, y, system.cost, offsets)
        drift = {name: np.zeros(batch) for name in start}

    if track:
        times, fidelity, areas, energies = [0.0], [cascade.fidelity(layout)], [area.copy()], [energy.copy()]

    i = 0
    while True:
        t_i = i * step
        remaining = t_ends - t_i
        h = np.where(remaining > step * (1.0 + _SLACK), step, remaining)
        h = np.where(remaining <= step * _SLACK, 0.0, h)
        if not np.any(h > 0):
            break

        y = rk4_step(system.rhs, t_i, y, h[:, None, None])
        ux_new, uy_new, r = system.control(y)
        if system.divides_by_r:
            newly = (r < R_THRESHOLD) & ~failed & (h > 0)
            failure_time[newly] = t_i + h[newly]
            failed |= newly

        cx, cy = 0.5 * (ux_prev + ux_new), 0.5 * (uy_prev + uy_new)
        if system.unit_field:
            norm = np.hypot(cx, cy)
            norm = np.where(norm > 0, norm, 1.0)
            cx, cy = cx / norm, cy / norm
        layout = rk4_step(cascade.rhs(cx, cy), t_i, layout, cascade.expand(h, layout))
        magnitude2 = cx * cx + cy * cy
        area += np.sqrt(magnitude2) * h
        energy += magnitude2 * h
        ux_prev, uy_prev = ux_new, uy_new

        if audit:
            current = integral_catalog(system.variant, y, system.cost, offsets)
            for name, value in current.items():
                if name in drift:
                    np.maximum(drift[name], np.abs(value - start[name]), out=drift[name])
        if track:
            times.append(t_i + float(np.max(h)))
            fidelity.append(cascade.fidelity(layout))
            areas.append(area.copy())
            energies.append(energy.copy())
        i += 1

    shot = _Shot(layout, cascade.residual(layout), area, energy, failed, failure_time)
    if track:
        shot.history = _ShotHistory(np.asarray(times), np.asarray(fidelity), np.asarray(areas),
                                    np.asarray(energies))
    if audit:
        shot.audits = [FirstIntegralAudit({n: float(start[n][b]) for n in start},
                                          {n: float(drift[n][b]) for n in drift})
                       for b in range(batch)]
    return shot


def _sweep_field(field_: ControlField, points: Sequence[ShootingPoint], target: np.ndarray,
                 step: float) -> _ShotHistory:
    """Track F(t), area and energy of the cascade driven by a fixed field"""
    cascade = _Cascade(points, target)
    layout = cascade.initial.copy()
    lengths, ux, uy = field_.cells()
    times, fidelity, areas, energies = [0.0], [cascade.fidelity(layout)], [0.0], [0.0]
    area = energy = t = 0.0
    for length, cx, cy in zip(lengths, ux, uy):
        substeps = max(1, int(math.ceil(length / step - _SLACK)))
        h = length / substeps
        rhs = cascade.rhs(np.array([cx]), np.array([cy]))
        for _ in range(substeps):
            layout = rk4_step(rhs, t, layout, h)
            t += h
        magnitude2 = cx * cx + cy * cy
        area += math.sqrt(magnitude2) * length
        energy += magnitude2 * length
        times.append(field_.times[len(times)])
        fidelity.append(cascade.fidelity(layout))
        areas.append(area)
        energies.append(energy)
    return _ShotHistory(np.asarray(times), np.asarray(fidelity)[:, :1],
                        np.asarray(areas)[:, None], np.asarray(energies)[:, None])


@dataclass(eq=False)
class ObjectiveResult:
    """Best fidelity over the window, its time, and the field's area and energy up to it"""

    fidelity: float
    t_star: float
    area: float
    energy: float
    failed: bool = False
    failure_time: float = math.nan
    audit: Optional[FirstIntegralAudit] = None

    def cost(self, kind: CostKind) -> float:
        return self.energy if kind is CostKind.ENERGY else self.t_star

    def to_dict(self) -> dict:
        return {
            'Fstar': self.fidelity, 'tstar': self.t_star, 'Astar': self.area, 'Estar': self.energy,
            'failed': self.failed, 'failure_time': self.failure_time,
            'audit': self.audit.to_dict() if self.audit else None,
        }


def _failed_result(time: float) -> ObjectiveResult:
    return ObjectiveResult(math.nan, math.nan, math.nan, math.nan, True, float(time))


def _peak_index(values: np.ndarray, level: float = PEAK_LEVEL) -> int:
    """
    Earliest interior local maximum with F >= -level, else the global maximum.

    Later returns of a robust extremal can score marginally higher on a coarse
    grid; the first one is the minimum-time (and minimum-cost) transfer.
    """
    inner = values[1:-1]
    peaks = np.flatnonzero((inner >= values[:-2]) & (inner >= values[2:]) & (inner >= -level)) + 1
    if peaks.size:
        return int(peaks[0])
    return int(np.argmax(values))


def _parabolic_peak(times: np.ndarray, values: np.ndarray) -> Tuple[float, float]:
    """Vertex of the parabola through the selected discrete maximum and its two neighbours"""
    i = _peak_index(values)
    if i == 0 or i == len(values) - 1:
        return float(times[i]), float(values[i])
    t0, t1, t2 = times[i - 1:i + 2]
    f0, f1, f2 = values[i - 1:i + 2]
    denominator = (t1 - t0) * (f1 - f2) - (t1 - t2) * (f1 - f0)
    if denominator == 0:
        return float(t1), float(f1)
    t_peak = t1 - 0.5 * ((t1 - t0) ** 2 * (f1 - f2) - (t1 - t2) ** 2 * (f1 - f0)) / denominator
    t_peak = min(max(t_peak, t0), t2)
    # Lagrange form through the three samples
    value = (f0 * (t_peak - t1) * (t_peak - t2) / ((t0 - t1) * (t0 - t2))
             + f1 * (t_peak - t0) * (t_peak - t2) / ((t1 - t0) * (t1 - t2))
             + f2 * (t_peak - t0) * (t_peak - t1) / ((t2 - t0) * (t2 - t1)))
    return float(t_peak), float(min(max(value, f1), 0.0))


def _summarize(history: _ShotHistory, column: int) -> ObjectiveResult:
    t_star, fidelity = _parabolic_peak(history.times, history.fidelity[:, column])
    area = float(np.interp(t_star, history.times, history.area[:, column]))
    energy = float(np.interp(t_star, history.times, history.energy[:, column]))
    return ObjectiveResult(fidelity, t_star, area, energy)


def _group_key(point: ShootingPoint):
    return point.variant, point.order, point.cost, is_bang_bang(point)


def objective_batch(points: Sequence[ShootingPoint], t_max: float = DEFAULT_TMAX,
                    step: float = DEFAULT_STEP, target=None, audit: bool = False) -> List[ObjectiveResult]:
    """
    Objective of many points; failed points are marked, never raised.

    Points are grouped by variant, order and cost and shot in chunks; results
    come back in input order.
    """
    points = list(points)
    results: List[Optional[ObjectiveResult]] = [None] * len(points)
    groups: Dict[tuple, List[int]] = {}
    for index, point in enumerate(points):
        groups.setdefault(_group_key(point), []).append(index)

    for key, indices in groups.items():
        variant = key[0]
        goal = _resolve_target(variant, target)
        if key[3]:
            for index in indices:
                results[index] = _bang_bang_objective(points[index], t_max, step, goal)
            continue
        for start in range(0, len(indices), _CHUNK):
            chunk = indices[start:start + _CHUNK]
            shot = _shoot([points[j] for j in chunk], t_max, step, goal, track=True, audit=audit)
            for column, index in enumerate(chunk):
                if shot.failed[column]:
                    results[index] = _failed_result(shot.failure_time[column])
                    continue
                result = _summarize(shot.history, column)
                if audit:
                    result.audit = shot.audits[column]
                results[index] = result
    return results


def _bang_bang_objective(point: ShootingPoint, t_max: float, step: float, goal: np.ndarray) -> ObjectiveResult:
    flow = flow_time_offset(point, t_max, step)
    history = _sweep_field(flow.field, [point], goal, step)
    result = _summarize(history, 0)
    result.audit = flow.audit()
    return result


def objective(point: ShootingPoint, t_max: float = DEFAULT_TMAX, step: float = DEFAULT_STEP,
              target=None) -> ObjectiveResult:
    """
    Shooting objective of one point with its first-integral audit.

    Raises:
        SingularFlowError: r vanished along the flow.
    """
    result = objective_batch([point], t_max, step, target, audit=True)[0]
    if result.failed:
        raise SingularFlowError(result.failure_time, point)
    return result


def residual(point: ShootingPoint, t_final: float, step: float = DEFAULT_STEP, target=None) -> np.ndarray:
    """
    Shooting residual at t_final: q_0 - target followed by q_1..q_N (or the
    per-spin / gate analogue). Its squared norm is -F(t_final).
    """
    goal = _resolve_target(point.variant, target)
    if is_bang_bang(point):
        flow = flow_time_offset(point, t_final, step)
        cascade = _Cascade([point], goal)
        return cascade.residual(_final_layout(flow.field, cascade, step))[0]
    shot = _shoot([point], t_final, step, goal)
    if shot.failed[0]:
        raise SingularFlowError(shot.failure_time[0], point)
    return shot.residual[0]


def _final_layout(field_: ControlField, cascade: _Cascade, step: float) -> np.ndarray:
    layout = cascade.initial.copy()
    lengths, ux, uy = field_.cells()
    t = 0.0
    for length, cx, cy in zip(lengths, ux, uy):
        substeps = max(1, int(math.ceil(length / step - _SLACK)))
        h = length / substeps
        rhs = cascade.rhs(np.array([cx]), np.array([cy]))
        for _ in range(substeps):
            layout = rk4_step(rhs, t, layout, h)
            t += h
    return layout


# Landscapes

_GENERAL = 'general'


@dataclass(frozen=True)
class Landscape:
    """
    Named coordinates over the shooting parameters of one variant and order.

    kind is a one-field reduction ('energy-o1', 'energy-o2', 'energy-o3',
    'bang-bang', 'amplitude-o1') or 'general' (raw parameters).
    """

    variant: Variant
    order: int
    kind: str
    axes: Tuple[str, ...]
    box: Tuple[Tuple[float, float], ...]
    cost: CostKind
    offsets: Tuple[float, ...] = ()

    @property
    def dimension(self) -> int:
        return len(self.axes)

    def to_point(self, coords) -> ShootingPoint:
        c = [float(v) for v in np.asarray(coords, dtype=float).reshape(-1)]
        if self.kind == 'energy-o1':
            if c[0] <= 0:
                raise ConfigurationError("H must be positive")
            return energy_o1(c[0])
        if self.kind == 'energy-o2':
            if c[0] < 0:
                raise ConfigurationError("H must be non-negative")
            return energy_o2(c[0], c[1])
        if self.kind == 'energy-o3':
            return energy_o3(*c)
        if self.kind == 'bang-bang':
            return bang_bang_o1(c[0])
        if self.kind == 'amplitude-o1':
            return amplitude_from_invariants(*c)
        return ShootingPoint(self.variant, self.order, c, self.cost, self.offsets)

    def coords_of(self, point: ShootingPoint) -> np.ndarray:
        p = point.params
        if self.kind == 'energy-o1':
            return np.array([0.5 * p[0] ** 2])
        if self.kind == 'energy-o2':
            return np.array([0.5 * p[0] ** 2, 0.5 * p[2] ** 2 - abs(p[0])])
        if self.kind == 'energy-o3':
            return np.array([p[0], p[2], p[3]])
        if self.kind == 'bang-bang':
            return np.array([p[0]])
        if self.kind == 'amplitude-o1':
            return np.array([1.0 - 2.0 * p[0], -2.0 * p[1]])
        return p.copy()

    def lower_bounds(self) -> np.ndarray:
        lower = np.full(self.dimension, -np.inf)
        if self.kind in ('energy-o1', 'energy-o2'):
            lower[0] = 1e-12
        return lower

    def with_box(self, box) -> 'Landscape':
        box = tuple((float(lo), float(hi)) for lo, hi in box)
        if len(box) != self.dimension:
            raise ConfigurationError(f"search box needs {self.dimension} intervals, got {len(box)}")
        return Landscape(self.variant, self.order, self.kind, self.axes, box, self.cost, self.offsets)


def _general_axes(variant: Variant, order: int) -> Tuple[Tuple[str, ...], Tuple[Tuple[float, float], ...]]:
    w = BOX_HALF_WIDTH
    axes: List[str] = []
    box: List[Tuple[float, float]] = []
    if variant in (Variant.ENERGY_OFFSET, Variant.TIME_OFFSET):
        axes.append('Omega_0x')
        box.append((-w, w))
        for k in range(1, order):
            axes += [f'Omega_{k}x', f'Omega_{k}y']
            box += [(-w, w)] * 2
        axes.append('theta')
        box.append((-math.pi, math.pi))
    elif variant is Variant.AMPLITUDE:
        for k in range(1, order + 1):
            axes += [f'Omega_{k}x', f'Omega_{k}y']
            box += [(-w, w)] * 2
    elif variant is Variant.ENSEMBLE:
        for k in range(1, order):
            axes += [f'ell_{k}x', f'ell_{k}y']
            box += [(-w, w)] * 2
    else:
        axes += ['Omega_0x', 'Omega_0y', 'I']
        box += [(-w, w), (-w, w), (-1.0, 1.0)]
        for k in range(1, order):
            axes += [f'Omega_{k}x', f'Omega_{k}y', f'Omega_{k}z']
            box += [(-w, w)] * 3
        axes += ['theta', 'phi']
        box += [(0.0, math.pi), (-math.pi, math.pi)]
    return tuple(axes), tuple(box)


def landscape_for(variant, order: int, cost=None, offsets: Sequence[float] = (),
                  general: bool = False) -> Landscape:
    """
    Default landscape of a variant: one-field reductions where they exist
    (energy orders 1-3, time order 1, amplitude order 1), raw parameters otherwise.
    """
    variant = parse_variant(variant)
    dimension(variant, order)
    if cost is None:
        cost = CostKind.ENERGY if variant is Variant.ENERGY_OFFSET else CostKind.TIME
    cost = parse_cost(cost)
    w = BOX_HALF_WIDTH

    if not general:
        if variant is Variant.ENERGY_OFFSET and order == 1:
            return Landscape(variant, 1, 'energy-o1', ('H',), ((0.05, 0.99),), cost)
        if variant is Variant.ENERGY_OFFSET and order == 2:
            return Landscape(variant, 2, 'energy-o2', ('H', 'J'), ((0.0, 1.5), (0.0, 2.0)), cost)
        if variant is Variant.ENERGY_OFFSET and order == 3:
            return Landscape(variant, 3, 'energy-o3', ('Omega_0x', 'Omega_1y', 'Omega_2x'),
                             ((-w, w),) * 3, cost)
        if variant is Variant.TIME_OFFSET and order == 1:
            return Landscape(variant, 1, 'bang-bang', ('H',), ((0.0, 1.0),), cost)
        if variant is Variant.AMPLITUDE and order == 1:
            return Landscape(variant, 1, 'amplitude-o1', ('I_x', 'I_y'), ((-2.0, 2.0), (0.0, 2.0)), cost)

    axes, box = _general_axes(variant, order)
    if variant is Variant.ENSEMBLE:
        template = ShootingPoint(variant, order, np.zeros(len(axes)), cost, tuple(offsets))
        offsets = template.offsets
    return Landscape(variant, order, _GENERAL, axes, box, cost, tuple(offsets))


_KIND_OF_REDUCTION = {
    Reduction.ENERGY_O1: 'energy-o1',
    Reduction.ENERGY_O2: 'energy-o2',
    Reduction.ENERGY_O3: 'energy-o3',
    Reduction.BANG_BANG: 'bang-bang',
}


def landscape_of_point(point: ShootingPoint) -> Landscape:
    """Landscape in which a point's own parameterization lives"""
    if point.reduction is not None:
        scape = landscape_for(point.variant, point.order, point.cost)
        if scape.kind == _KIND_OF_REDUCTION[point.reduction]:
            return scape
    return landscape_for(point.variant, point.order, point.cost, point.offsets, general=True)


# Records

@dataclass(eq=False)
class SynthesisRecord:
    """A refined extremal: shooting point, optimal time, area, energy, fidelity and audit"""

    point: ShootingPoint
    coords: Dict[str, float]
    t_star: float
    area: float
    energy: float
    fidelity: float
    converged: bool
    audit: FirstIntegralAudit
    target: List = field(default_factory=list)
    step: float = DEFAULT_STEP
    switch_times: Tuple[float, ...] = ()
    evaluations: int = 0
    pulse_path: Optional[str] = None
    field: Optional[ControlField] = None
    tolerance: float = FEASIBILITY_TOL

    @property
    def variant(self) -> Variant:
        return self.point.variant

    @property
    def order(self) -> int:
        return self.point.order

    @property
    def feasible(self) -> bool:
        return self.converged and abs(self.fidelity) <= self.tolerance

    def cost(self, kind: CostKind) -> float:
        return self.energy if kind is CostKind.ENERGY else self.t_star

    def to_dict(self) -> dict:
        return {
            'variant': self.variant.value,
            'order': self.order,
            'point': self.point.to_dict(),
            'coords': dict(self.coords),
            'tstar': self.t_star,
            'Astar': self.area,
            'Estar': self.energy,
            'Fstar': self.fidelity,
            'converged': self.converged,
            'audit': self.audit.to_dict(),
            'target': self.target,
            'step': self.step,
            'switch_times': list(self.switch_times),
            'evaluations': self.evaluations,
            'pulse_path': self.pulse_path,
            'tolerance': self.tolerance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'SynthesisRecord':
        audit = FirstIntegralAudit(dict(data['audit']['values']), dict(data['audit']['drift']))
        return cls(ShootingPoint.from_dict(data['point']), dict(data['coords']), data['tstar'],
                   data['Astar'], data['Estar'], data['Fstar'], data['converged'], audit,
                   data.get('target', []), data.get('step', DEFAULT_STEP),
                   tuple(data.get('switch_times', ())), data.get('evaluations', 0), data.get('pulse_path'),
                   tolerance=data.get('tolerance', FEASIBILITY_TOL))


def _build_record(scape: Landscape, coords: np.ndarray, t_final: float, step: float, goal: np.ndarray,
                  converged: bool, evaluations: int) -> SynthesisRecord:
    point = scape.to_point(coords)
    flow = run_flow(point, t_final, step)
    res = residual(point, t_final, step, goal)
    return SynthesisRecord(
        point=point,
        coords={name: float(v) for name, v in zip(scape.axes, coords)},
        t_star=float(t_final),
        area=flow.field.area(),
        energy=flow.field.energy(),
        fidelity=-float(np.sum(res ** 2)),
        converged=bool(converged),
        audit=flow.audit(),
        target=goal.tolist(),
        step=step,
        switch_times=tuple(s for s in flow.switch_times if s <= t_final),
        evaluations=evaluations,
        field=flow.field,
    )


class _ResidualMap:
    """Residual of (coords, t_f) rows, evaluated in one batched shot"""

    def __init__(self, scape: Landscape, step: float, goal: np.ndarray):
        self.scape = scape
        self.step = step
        self.goal = goal
        self.size = None
        self.evaluations = 0

    def __call__(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(rows)
        points, valid = [], []
        for row in rows:
            try:
                if row[-1] <= 0:
                    raise ConfigurationError("t_f must be positive")
                points.append(self.scape.to_point(row[:-1]))
                valid.append(True)
            except (ConfigurationError, ValueError):
                points.append(None)
                valid.append(False)

        good = [p for p in points if p is not None]
        self.evaluations += len(rows)
        if good:
            shot = _shoot(good, rows[np.asarray(valid), -1], self.step, self.goal)
            self.size = shot.residual.shape[1]
        if self.size is None:
            raise ConfigurationError("no valid starting point for refinement")

        out = np.full((len(rows), self.size), _PENALTY)
        if good:
            out[np.asarray(valid)] = np.where(shot.failed[:, None], _PENALTY, shot.residual)
        return out


def refine(point0: ShootingPoint, landscape: Optional[Landscape] = None, t_guess: Optional[float] = None,
           t_max: float = DEFAULT_TMAX, step: float = DEFAULT_STEP, target=None,
           max_evaluations: int = 100, tolerance: Optional[float] = None) -> SynthesisRecord:
    """
    Drive the shooting residual to zero jointly in the landscape coordinates and t_f.

    Trust-region least squares with batched central-difference Jacobians; the
    initial t_f is the objective's t* unless given. The run converges once the
    relative step drops below 1e-10 or F* >= -1e-9; hitting the evaluation cap
    first returns the best iterate with converged = False.

    Args:
        tolerance: |F*| accepted as robust; defaults to the variant's level.
    """
    scape = landscape or landscape_of_point(point0)
    if scape.kind == 'bang-bang':
        raise ConfigurationError("the bang-bang family is solved by continuation, see find_global")
    goal = _resolve_target(point0.variant, target)
    if t_guess is None:
        t_guess = objective(point0, t_max, step, goal).t_star
    if tolerance is None:
        tolerance = feasibility_tolerance(scape.variant, scape.order)

    x0 = np.append(scape.coords_of(point0), t_guess)
    lower = np.append(scape.lower_bounds(), step)
    x0 = np.maximum(x0, lower + 1e-12)
    residuals = _ResidualMap(scape, step, goal)

    def fun(x):
        return residuals(x[None, :])[0]

    def jac(x):
        n = len(x)
        h = _FD_STEP * np.maximum(1.0, np.abs(x))
        rows = np.concatenate([x + np.diag(h), x - np.diag(h)])
        values = residuals(rows)
        # rows of values are perturbed x components; columns are residual entries
        return ((values[:n] - values[n:]) / (2.0 * h)[:, None]).T

    solution = least_squares(fun, x0, jac=jac, bounds=(lower, np.full(len(x0), np.inf)),
                             method='trf', xtol=1e-10, ftol=1e-12, gtol=1e-12, max_nfev=max_evaluations)
    record = _build_record(scape, solution.x[:-1], solution.x[-1], step, goal,
                           solution.status > 0, residuals.evaluations)
    record.converged = record.converged or record.fidelity >= -_CONVERGED_F
    record.tolerance = float(tolerance)
    logger.info("refined %s order %d: F* = %.3e, t* = %.6f (%.4f pi), status %d",
                point0.variant.value, point0.order, record.fidelity, record.t_star,
                record.t_star / math.pi, solution.status)
    return record


def _bang_bang_limit(t_max: float, step: float, goal: np.ndarray) -> SynthesisRecord:
    """Follow the bang-bang family towards H -> 1, where the robust inversion lives"""
    record = None
    for k in _BANG_BANG_LEVELS:
        H = 1.0 - 10.0 ** (-k)
        point = bang_bang_o1(H)
        flow = flow_time_offset(point, t_max, step)
        history = _sweep_field(flow.field, [point], goal, step)
        result = _summarize(history, 0)
        logger.debug("bang-bang continuation H = 1 - 1e-%d: F* = %.3e at t = %.9f", k, result.fidelity,
                     result.t_star)
        truncated = flow.field.truncated(result.t_star)
        # re-shot at t* so the stored F* is reproducible from the record alone
        res = residual(point, result.t_star, step, goal)
        record = SynthesisRecord(
            point=point,
            coords={'H': H},
            t_star=result.t_star,
            area=truncated.area(),
            energy=truncated.energy(),
            fidelity=-float(np.sum(res ** 2)),
            converged=True,
            audit=flow.audit(),
            target=goal.tolist(),
            step=step,
            switch_times=tuple(s for s in flow.switch_times if s <= result.t_star),
            evaluations=k,
            field=truncated,
        )
    return record


Evaluator = Callable[[Sequence[ShootingPoint]], List[ObjectiveResult]]


def _default_evaluator(t_max: float, step: float, target) -> Evaluator:
    return lambda points: objective_batch(points, t_max, step, target)


def find_global(variant, order: int, box=None, count: Optional[int] = None, seed: int = 0,
                cost=None, offsets: Sequence[float] = (), t_max: float = DEFAULT_TMAX,
                step: float = DEFAULT_STEP, target=None, refine_count: int = 12,
                evaluate: Optional[Evaluator] = None, landscape: Optional[Landscape] = None,
                tolerance: Optional[float] = None) -> SynthesisRecord:
    """
    Multistart search: Sobol starts in the box, objective, refinement of the best
    starts, and selection of the cheapest robust record (energy for energy
    costs, t* for time costs).

    A record is robust when |F*| <= tolerance, by default the variant's own
    level (1e-6 for state transfers, looser for gates). Starts whose refined
    extremal turns singular are skipped.

    Raises:
        NotFoundError: no refined record is feasible; carries the best ones.
    """
    scape = landscape or landscape_for(variant, order, cost, offsets)
    if box:
        scape = scape.with_box(box)
    goal = _resolve_target(scape.variant, target)
    if tolerance is None:
        tolerance = feasibility_tolerance(scape.variant, scape.order)

    if scape.kind == 'bang-bang':
        record = _bang_bang_limit(t_max, step, goal)
        record.tolerance = float(tolerance)
        if not record.feasible:
            raise NotFoundError("bang-bang continuation did not reach a robust inversion", [record])
        return record

    evaluate = evaluate or _default_evaluator(t_max, step, goal)
    if scape.dimension == 0:
        starts = np.zeros((1, 0))
    else:
        count = count or multistart_count(scape.dimension)
        sampler = qmc.Sobol(scape.dimension, scramble=True, seed=seed)
        lo, hi = np.array(scape.box).T
        starts = qmc.scale(sampler.random(count), lo, hi)

    points = [scape.to_point(row) for row in starts]
    results = evaluate(points)
    ranked = sorted(range(len(points)),
                    key=lambda i: (results[i].failed, -np.nan_to_num(results[i].fidelity, nan=-np.inf), i))
    ranked = [i for i in ranked if not results[i].failed][:refine_count]
    logger.info("%d starts evaluated, refining %d", len(points), len(ranked))

    records = []
    for i in ranked:
        try:
            records.append(refine(points[i], scape, results[i].t_star, t_max, step, goal,
                                  tolerance=tolerance))
        except SingularFlowError as e:
            logger.debug("start %d dropped: %s", i, e)

    feasible = [r for r in records if r.feasible]
    if not feasible:
        best = sorted(records, key=lambda r: -r.fidelity)[:5]
        raise NotFoundError(f"no robust {scape.variant.value} order {scape.order} solution in the box", best)
    return min(feasible, key=lambda r: (round(r.cost(scape.cost), 9), -r.fidelity))


# Grid scans

@dataclass(eq=False)
class LandscapeScan:
    """Full-factorial objective maps over the landscape axes"""

    landscape: Landscape
    axes: List[Tuple[str, np.ndarray]]
    fidelity: np.ndarray
    t_star: np.ndarray
    area: np.ndarray
    energy: np.ndarray
    failed: np.ndarray

    def best(self) -> Tuple[Tuple[float, ...], float]:
        """Coordinates and F* of the best non-failed cell"""
        scores = np.where(self.failed, -np.inf, self.fidelity)
        index = np.unravel_index(int(np.argmax(scores)), scores.shape)
        return tuple(values[i] for (_, values), i in zip(self.axes, index)), float(scores[index])

    def to_csv(self, path) -> None:
        """Long table with one row per cell; failed cells carry nan"""
        names = [name for name, _ in self.axes]
        grids = np.meshgrid(*[values for _, values in self.axes], indexing='ij')
        columns = [g.reshape(-1) for g in grids]
        columns += [self.fidelity.reshape(-1), self.t_star.reshape(-1), self.area.reshape(-1)]
        write_csv(path, names + ['Fstar', 'tstar', 'Astar'], zip(*columns))

    def map_to_csv(self, quantity: str, path) -> None:
        """Matrix form of one 2-D map: first column is the first axis"""
        data = {'Fstar': self.fidelity, 'tstar': self.t_star, 'Astar': self.area}[quantity]
        if data.ndim != 2:
            raise ConfigurationError("matrix export needs a two-dimensional scan")
        (name0, values0), (_, values1) = self.axes
        header = [name0] + [f"{v:.17g}" for v in values1]
        write_csv(path, header, (np.concatenate([[v], row]) for v, row in zip(values0, data)))


def grid_scan(landscape: Landscape, resolution, t_max: float = DEFAULT_TMAX, step: float = DEFAULT_STEP,
              target=None, evaluate: Optional[Evaluator] = None) -> LandscapeScan:
    """
    Evaluate the objective on a rectangular grid.

    Args:
        landscape: Coordinates and box to scan.
        resolution: Points per axis, an int for every axis or one per axis.
        evaluate: Batch evaluator, e.g. a process-pool worker; in-process by default.
    """
    counts = np.broadcast_to(np.asarray(resolution, dtype=int), (landscape.dimension,))
    axes = [(name, np.linspace(lo, hi, int(n))) for name, (lo, hi), n in zip(landscape.axes, landscape.box, counts)]
    grids = np.meshgrid(*[values for _, values in axes], indexing='ij')
    coords = np.stack([g.reshape(-1) for g in grids], axis=1)
    shape = grids[0].shape

    points, valid = [], []
    for row in coords:
        try:
            points.append(landscape.to_point(row))
            valid.append(True)
        except (ConfigurationError, ValueError):
            valid.append(False)

    evaluate = evaluate or _default_evaluator(t_max, step, target)
    results = iter(evaluate(points)) if points else iter(())
    cells = [next(results) if ok else _failed_result(0.0) for ok in valid]

    def gather(attr):
        return np.array([getattr(c, attr) for c in cells], dtype=float).reshape(shape)

    failed = np.array([c.failed for c in cells]).reshape(shape)
    scan = LandscapeScan(landscape, axes, gather('fidelity'), gather('t_star'), gather('area'),
                         gather('energy'), failed)
    logger.info("scanned %d cells, %d failed", failed.size, int(failed.sum()))
    return scan
