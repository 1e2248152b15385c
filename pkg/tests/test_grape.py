import math

import numpy as np
import pytest

import core.grape as grape
from core.dynamics import RobustnessProfile, robustness_profile
from core.errors import ConfigurationError, GradientError
from core.grape import (GrapeProblem, compare_profiles, count_local_maxima, ensemble_offsets, grape_gradient,
                        grape_optimize, initial_phases, mean_fidelity, smooth_perturbation, training_fidelity)


@pytest.fixture
def problem():
    return GrapeProblem(ensemble_offsets(3), 2.0 * math.pi, 40)


def test_ensemble_offsets():
    np.testing.assert_allclose(ensemble_offsets(3), [-0.5, 0.0, 0.5])
    np.testing.assert_allclose(ensemble_offsets(1), [0.0])
    with pytest.raises(ConfigurationError):
        ensemble_offsets(0)


def test_problem_validation():
    with pytest.raises(ConfigurationError):
        GrapeProblem([0.0], -1.0, 10)
    with pytest.raises(ConfigurationError):
        GrapeProblem([], 1.0, 10)
    with pytest.raises(ConfigurationError):
        GrapeProblem([0.0], 1.0, 10, guess=np.zeros(9))


def test_gradient_matches_finite_differences(problem):
    phases = smooth_perturbation(problem.samples, seed=3, amplitude=math.pi)
    _, gradient = grape_gradient(problem, phases)
    h = 1e-6
    for j in (0, 7, 20, 39):
        bump = np.zeros_like(phases)
        bump[j] = h
        numeric = (mean_fidelity(problem, phases + bump) - mean_fidelity(problem, phases - bump)) / (2 * h)
        assert gradient[j] == pytest.approx(numeric, abs=1e-7)


def test_constant_phase_pi_pulse_is_stationary():
    problem = GrapeProblem([0.0], math.pi, 20)
    fidelity, gradient = grape_gradient(problem, np.zeros(20))
    assert fidelity == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(gradient, 0.0, atol=1e-12)


def test_exact_segments_match_integrated_pulse(problem):
    phases = smooth_perturbation(problem.samples, seed=1, amplitude=1.0)
    pulse = problem.to_field(phases)
    assert training_fidelity(problem, pulse, step=1e-3) == pytest.approx(mean_fidelity(problem, phases), abs=1e-9)


def test_optimize_is_monotone(problem):
    phases0 = smooth_perturbation(problem.samples, seed=5, amplitude=1.0)
    result = grape_optimize(problem, iterations=15, phases0=phases0)
    assert result.history[0] == pytest.approx(mean_fidelity(problem, phases0))
    assert all(b >= a for a, b in zip(result.history, result.history[1:]))
    assert result.fidelity == result.history[-1]
    assert result.fidelity > result.history[0]
    assert result.iterations == len(result.history) - 1
    assert result.pulse.duration == pytest.approx(problem.duration)


def test_non_finite_gradient_raises(problem, monkeypatch):
    def broken(_problem, phases):
        return 0.0, np.full(len(phases), np.nan)

    monkeypatch.setattr(grape, 'grape_gradient', broken)
    with pytest.raises(GradientError) as excinfo:
        grape_optimize(problem, iterations=3, phases0=np.zeros(problem.samples))
    np.testing.assert_array_equal(excinfo.value.iterate, np.zeros(problem.samples))


def test_initial_phases():
    guess = np.linspace(0.0, 1.0, 8)
    assert np.array_equal(initial_phases(GrapeProblem([0.0], 1.0, 8, guess=guess)), guess)
    random = initial_phases(GrapeProblem([0.0], 1.0, 8), seed=2)
    assert random.shape == (8,) and np.max(np.abs(random)) == pytest.approx(math.pi)
    np.testing.assert_array_equal(random, initial_phases(GrapeProblem([0.0], 1.0, 8), seed=2))


def test_profile_peak_counting():
    values = np.linspace(-1.0, 1.0, 201)
    single = RobustnessProfile('delta', values, -values ** 2)
    double = RobustnessProfile('delta', values,
                               np.exp(-(values - 0.5) ** 2 / 0.02) + np.exp(-(values + 0.5) ** 2 / 0.02))
    assert count_local_maxima(single) == 1
    assert compare_profiles(single, double) == (1, 2)
    ripple = RobustnessProfile('delta', values, -values ** 2 + 1e-5 * np.cos(40.0 * math.pi * values))
    assert count_local_maxima(ripple) == 1
    with pytest.raises(ConfigurationError):
        compare_profiles(single, RobustnessProfile('delta', values[:-1], values[:-1]))


@pytest.mark.slow
def test_composite_guess_improves_two_spin_inversion():
    samples = 64
    duration = 2.0 * math.pi
    times = (np.arange(samples) + 0.5) * duration / samples
    # 90_0 180_90 90_0 composite inversion
    guess = np.where((times > 0.5 * math.pi) & (times < 1.5 * math.pi), 0.5 * math.pi, 0.0)
    problem = GrapeProblem([-0.5, 0.5], duration, samples, guess=guess)
    result = grape_optimize(problem, iterations=200)
    assert result.fidelity >= max(result.history[0], 0.98)


def test_trained_pulse_keeps_parity_with_its_seed():
    samples = 40
    duration = 2.0 * math.pi
    times = (np.arange(samples) + 0.5) * duration / samples
    seed_phases = np.where((times > 0.5 * math.pi) & (times < 1.5 * math.pi), 0.5 * math.pi, 0.0)
    problem = GrapeProblem([-0.5, 0.0, 0.5], duration, samples)
    reference = problem.to_field(seed_phases)
    result = grape_optimize(problem, iterations=30, phases0=seed_phases)

    reference_fidelity = training_fidelity(problem, reference, step=1e-3)
    assert result.fidelity >= reference_fidelity - 1e-9
    assert training_fidelity(problem, result.pulse, step=1e-3) == pytest.approx(result.fidelity, abs=1e-9)

    grid = np.linspace(-0.6, 0.6, 121)
    trained, seeded = compare_profiles(robustness_profile(result.pulse, 'delta', grid, step=1e-2),
                                       robustness_profile(reference, 'delta', grid, step=1e-2))
    assert trained >= 1 and seeded >= 1
    assert trained == count_local_maxima(robustness_profile(result.pulse, 'delta', grid, step=1e-2))
