"""
Phase-only gradient ascent pulse engineering over an ensemble of offsets.

Amplitude is locked to 1, so every segment is an exact rotation about
w = (cos phi, sin phi, delta) and |w| does not depend on phi.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.dynamics import ControlField, RobustnessProfile, inversion_fidelity, propagate_ensemble
from core.errors import ConfigurationError, GradientError

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 200
DEFAULT_ITERATIONS = 300
DEFAULT_STEP_SIZE = 1.0
# Backtracking gives up once the trial step falls below this
_MIN_STEP = 1e-12
_GROWTH = 1.5


def ensemble_offsets(count: int, low: float = -0.5, high: float = 0.5) -> np.ndarray:
    """Evenly spaced training offsets"""
    if count < 1:
        raise ConfigurationError("an ensemble needs at least one spin")
    if count == 1:
        return np.array([0.5 * (low + high)])
    return np.linspace(low, high, count)


@dataclass(frozen=True, eq=False)
class GrapeProblem:
    """Offsets of the training ensemble, fixed duration and number of phase segments"""

    offsets: np.ndarray
    duration: float
    samples: int = DEFAULT_SAMPLES
    guess: Optional[np.ndarray] = None

    def __post_init__(self):
        offsets = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        object.__setattr__(self, 'offsets', offsets)
        if offsets.ndim != 1 or offsets.size == 0 or not np.all(np.isfinite(offsets)):
            raise ConfigurationError("GRAPE offsets must be a non-empty finite list")
        if not self.duration > 0:
            raise ConfigurationError("GRAPE duration must be positive")
        if self.samples < 1:
            raise ConfigurationError("GRAPE needs at least one phase segment")
        if self.guess is not None:
            guess = np.asarray(self.guess, dtype=float).reshape(-1)
            if guess.size != self.samples:
                raise ConfigurationError(f"guess has {guess.size} phases for {self.samples} segments")
            object.__setattr__(self, 'guess', guess)

    @property
    def dt(self) -> float:
        return self.duration / self.samples

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.duration, self.samples + 1)

    def to_field(self, phases) -> ControlField:
        phases = np.asarray(phases, dtype=float)
        return ControlField.from_phase(self.times, np.append(phases, phases[-1]))


def _skew(v: np.ndarray) -> np.ndarray:
    """Matrix of v x (.) for vectors on the last axis"""
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1], out[..., 0, 2] = -v[..., 2], v[..., 1]
    out[..., 1, 0], out[..., 1, 2] = v[..., 2], -v[..., 0]
    out[..., 2, 0], out[..., 2, 1] = -v[..., 1], v[..., 0]
    return out


def _segments(problem: GrapeProblem, phases: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Segment rotations exp(-dt [w]x) and their phase derivatives, both (n, K, 3, 3).

    Rodrigues form R = I + s W + c W^2 with W = [w]x, s = -sin(a dt)/a and
    c = (1 - cos(a dt))/a^2, a = |w|.
    """
    deltas = problem.offsets
    cos, sin = np.cos(phases)[:, None], np.sin(phases)[:, None]
    w = np.stack(np.broadcast_arrays(cos, sin, deltas[None, :]), axis=-1)
    dw = np.stack(np.broadcast_arrays(-sin, cos, np.zeros((1, len(deltas)))), axis=-1)

    a = np.sqrt(1.0 + deltas ** 2)[None, :, None, None]
    s = -np.sin(a * problem.dt) / a
    c = (1.0 - np.cos(a * problem.dt)) / a ** 2
    W, dW = _skew(w), _skew(dw)
    rotation = np.eye(3) + s * W + c * (W @ W)
    # a is phase independent, so only W varies
    derivative = s * dW + c * (dW @ W + W @ dW)
    return rotation, derivative


def grape_gradient(problem: GrapeProblem, phases) -> Tuple[float, np.ndarray]:
    """
    Mean inversion fidelity (1/K) sum_k -z_k(T) and its gradient in the phases.

    Forward states are stored per segment; the costate runs backward from
    -e_z / K, and each phase picks up lambda_j^T dR_j q_{j-1} summed over spins.
    """
    phases = np.asarray(phases, dtype=float).reshape(-1)
    if phases.size != problem.samples:
        raise ConfigurationError(f"{phases.size} phases for {problem.samples} segments")
    rotation, derivative = _segments(problem, phases)
    n, spins = rotation.shape[:2]

    states = np.empty((n + 1, spins, 3))
    states[0] = (0.0, 0.0, 1.0)
    for j in range(n):
        states[j + 1] = np.einsum('kab,kb->ka', rotation[j], states[j])
    fidelity = float(-np.mean(states[-1, :, 2]))

    costate = np.zeros((spins, 3))
    costate[:, 2] = -1.0 / spins
    gradient = np.empty(n)
    for j in range(n - 1, -1, -1):
        gradient[j] = np.einsum('ka,kab,kb->', costate, derivative[j], states[j])
        costate = np.einsum('kba,kb->ka', rotation[j], costate)
    return fidelity, gradient


def mean_fidelity(problem: GrapeProblem, phases) -> float:
    return grape_gradient(problem, phases)[0]


def smooth_perturbation(samples: int, seed: int = 0, amplitude: float = 0.1, modes: int = 5) -> np.ndarray:
    """Seeded low-frequency Fourier sum, zero mean"""
    rng = np.random.default_rng(seed)
    x = (np.arange(samples) + 0.5) / samples
    k = np.arange(1, modes + 1)[:, None]
    coefficients = rng.normal(size=(2, modes, 1)) / k
    wave = np.sum(coefficients[0] * np.sin(2.0 * math.pi * k * x) + coefficients[1] * np.cos(2.0 * math.pi * k * x),
                  axis=0)
    scale = np.max(np.abs(wave))
    return amplitude * wave / scale if scale > 0 else wave


def initial_phases(problem: GrapeProblem, reference: Optional[ControlField] = None, seed: int = 0,
                   perturbation: float = 0.1) -> np.ndarray:
    """
    Starting phases: the problem's own guess, else the reference pulse phase at
    segment midpoints plus a smooth perturbation, else a seeded random smooth profile.
    """
    if problem.guess is not None:
        return problem.guess.copy()
    if reference is not None:
        mid = 0.5 * (problem.times[:-1] + problem.times[1:])
        scaled = mid * reference.duration / problem.duration
        index = np.clip(np.searchsorted(reference.times, scaled, side='right') - 1, 0, len(reference.times) - 1)
        base = reference.phase[index]
        return base + smooth_perturbation(problem.samples, seed, perturbation)
    return smooth_perturbation(problem.samples, seed, amplitude=math.pi)


@dataclass(eq=False)
class GrapeResult:
    problem: GrapeProblem
    phases: np.ndarray
    fidelity: float
    history: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def pulse(self) -> ControlField:
        return self.problem.to_field(self.phases)

    @property
    def iterations(self) -> int:
        return len(self.history) - 1


def grape_optimize(problem: GrapeProblem, iterations: int = DEFAULT_ITERATIONS,
                   step_size: float = DEFAULT_STEP_SIZE, phases0=None, tolerance: float = 1e-12,
                   callback=None) -> GrapeResult:
    """
    Gradient ascent on the phases with a monotone backtracking line search.

    A trial step that lowers the fidelity is halved until it does not; an
    accepted step lets the next trial grow. History holds the fidelity of every
    accepted iterate, so it never decreases.

    Raises:
        GradientError: the gradient became non-finite; carries the iterate.
    """
    phases = initial_phases(problem) if phases0 is None else np.asarray(phases0, dtype=float).copy()
    fidelity, gradient = grape_gradient(problem, phases)
    history = [fidelity]
    step = step_size
    converged = False

    for iteration in range(iterations):
        if not np.all(np.isfinite(gradient)):
            raise GradientError(f"non-finite gradient at iteration {iteration}", phases.copy())
        if float(np.dot(gradient, gradient)) <= tolerance ** 2:
            converged = True
            break

        while step >= _MIN_STEP:
            trial = phases + step * gradient
            trial_fidelity, trial_gradient = grape_gradient(problem, trial)
            if trial_fidelity >= fidelity:
                break
            step *= 0.5
        else:
            logger.debug("line search exhausted at iteration %d, F = %.12f", iteration, fidelity)
            converged = True
            break

        gain = trial_fidelity - fidelity
        phases, fidelity, gradient = trial, trial_fidelity, trial_gradient
        history.append(fidelity)
        step *= _GROWTH
        if callback is not None:
            callback(iteration, fidelity)
        if gain <= tolerance:
            converged = True
            break

    logger.info("GRAPE over %d spins: F = %.8f after %d iterations", len(problem.offsets), fidelity,
                len(history) - 1)
    return GrapeResult(problem, phases, fidelity, history, converged)


def count_local_maxima(profile: RobustnessProfile, prominence: float = 1e-3) -> int:
    """Number of robustness-profile peaks, the shape measure used to compare pulses"""
    return profile.local_maxima(prominence)


def compare_profiles(first: RobustnessProfile, second: RobustnessProfile,
                     prominence: float = 1e-3) -> Tuple[int, int]:
    if not np.array_equal(first.values, second.values):
        raise ConfigurationError("profiles must share their parameter grid")
    return count_local_maxima(first, prominence), count_local_maxima(second, prominence)


def training_fidelity(problem: GrapeProblem, pulse: ControlField, offsets: Optional[Sequence[float]] = None,
                      step: float = 1e-3) -> float:
    """Mean -z over the training offsets for an arbitrary pulse, for parity checks"""
    deltas = problem.offsets if offsets is None else np.asarray(offsets, dtype=float)
    finals = propagate_ensemble(pulse, deltas=deltas, step=step)
    return float(np.mean(inversion_fidelity(finals)))
