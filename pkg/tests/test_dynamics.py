import math

import numpy as np
import pytest

from core.dynamics import (NORTH_POLE, SOUTH_POLE, CascadeMode, ControlField, FieldKind, PerturbativeStack,
                           bloch_generator, cross, propagate_bloch, propagate_cascade, propagate_ensemble,
                           robust_fidelity, robustness_profile, scaling_exponent)
from core.errors import ConfigurationError, FieldError, RequestOutOfRangeError

STEP = 1e-2


@pytest.fixture
def pi_pulse():
    return ControlField.from_function(lambda t: (1.0, 0.0), math.pi, STEP)


@pytest.fixture
def shaped_pulse():
    """A generic two-axis pulse, so cascade checks are not special to rotations about x"""
    return ControlField.from_function(lambda t: (np.cos(0.7 * t), 0.5 * np.sin(1.3 * t)), 2.5, STEP)


def test_pi_pulse_inverts(pi_pulse):
    times, states = propagate_bloch(pi_pulse)
    assert times[-1] == pytest.approx(math.pi)
    np.testing.assert_allclose(states[-1], SOUTH_POLE, atol=1e-7)
    np.testing.assert_allclose(np.linalg.norm(states, axis=1), 1.0, atol=1e-9)


def test_ensemble_matches_single_propagation(shaped_pulse):
    deltas = np.array([-0.3, 0.0, 0.4])
    finals = propagate_ensemble(shaped_pulse, deltas=deltas)
    for delta, final in zip(deltas, finals):
        np.testing.assert_allclose(final, propagate_bloch(shaped_pulse, delta)[1][-1], atol=1e-14)


def test_generator_matches_cross_product():
    q = np.array([0.3, -0.5, 0.8])
    matrix = bloch_generator(0.4, -0.2, 0.7, 0.1)
    w = np.array([1.1 * 0.4, 1.1 * -0.2, 0.7])
    np.testing.assert_allclose(matrix @ q, cross(q, w), atol=1e-15)


def test_field_invariants():
    with pytest.raises(FieldError):
        ControlField([0.0, 1.0, 0.5], [0, 0, 0], [0, 0, 0])
    with pytest.raises(FieldError):
        ControlField([0.1, 1.0], [0, 0], [0, 0])
    with pytest.raises(FieldError):
        ControlField([0.0, 1.0], [2.0, 2.0], [0.0, 0.0], FieldKind.PHASE_ONLY)
    with pytest.raises(FieldError):
        ControlField([0.0, 1.0], [0.5, 0.5], [0.0, 0.0], FieldKind.BANG_BANG)


def test_cells_beyond_duration(pi_pulse):
    with pytest.raises(RequestOutOfRangeError):
        pi_pulse.cells(4.0)


def test_area_energy_and_truncation(pi_pulse):
    assert pi_pulse.area() == pytest.approx(math.pi, abs=1e-12)
    assert pi_pulse.energy(1.0) == pytest.approx(1.0, abs=1e-12)
    short = pi_pulse.truncated(1.234)
    assert short.duration == 1.234
    assert short.area() == pytest.approx(1.234, abs=1e-12)


def test_bang_bang_field_switches():
    field = ControlField.bang_bang([1.234, 2.5], 3.0, 0.1)
    assert 1.234 in field.times
    assert field.switch_times == (1.234, 2.5)
    lengths, ux, _ = field.cells()
    starts = field.times[:-1]
    np.testing.assert_array_equal(ux, np.where((starts >= 1.234) & (starts < 2.5), -1.0, 1.0))
    assert field.area() == pytest.approx(3.0, abs=1e-12)


def test_phase_field_round_trip():
    phi = np.linspace(0.0, 3.0, 11)
    field = ControlField.from_phase(np.linspace(0.0, 1.0, 11), phi)
    assert field.kind is FieldKind.PHASE_ONLY
    np.testing.assert_allclose(field.phase, phi, atol=1e-12)


def _finite_difference(field, parameter, eps=1e-4):
    if parameter == 'delta':
        plus = propagate_bloch(field, delta=eps)[1][-1]
        minus = propagate_bloch(field, delta=-eps)[1][-1]
    else:
        plus = propagate_bloch(field, alpha=eps)[1][-1]
        minus = propagate_bloch(field, alpha=-eps)[1][-1]
    return (plus - minus) / (2 * eps)


def test_offset_cascade_is_the_offset_derivative(shaped_pulse):
    final = propagate_cascade(shaped_pulse, PerturbativeStack.initial(2, CascadeMode.STATE_OFFSET), keep=False)
    np.testing.assert_allclose(final.entries[0], propagate_bloch(shaped_pulse)[1][-1], atol=1e-14)
    np.testing.assert_allclose(final.entries[1], _finite_difference(shaped_pulse, 'delta'), atol=1e-7)


def test_amplitude_cascade_is_the_amplitude_derivative(shaped_pulse):
    final = propagate_cascade(shaped_pulse, PerturbativeStack.initial(1, CascadeMode.STATE_AMPLITUDE),
                              keep=False)
    np.testing.assert_allclose(final.entries[1], _finite_difference(shaped_pulse, 'alpha'), atol=1e-7)


def test_gate_cascade_columns_follow_state_cascade(shaped_pulse):
    gate = propagate_cascade(shaped_pulse, PerturbativeStack.initial(2, CascadeMode.GATE_OFFSET), keep=False)
    state = propagate_cascade(shaped_pulse, PerturbativeStack.initial(2, CascadeMode.STATE_OFFSET), keep=False)
    # the third column of each gate entry is the state cascade started at the north pole
    for k in range(3):
        np.testing.assert_allclose(gate.entries[k][:, 2], state.entries[k], atol=1e-12)
    np.testing.assert_allclose(gate.entries[0].T @ gate.entries[0], np.eye(3), atol=1e-9)


def test_cascade_history_is_kept(pi_pulse):
    times, history = propagate_cascade(pi_pulse, PerturbativeStack.initial(1, 'state-offset'))
    assert len(times) == len(history)
    np.testing.assert_allclose(history[0].entries[0], NORTH_POLE)


def test_robust_fidelity():
    stack = PerturbativeStack.initial(2, CascadeMode.STATE_OFFSET)
    assert robust_fidelity(stack, NORTH_POLE) == 0.0
    assert robust_fidelity(stack, SOUTH_POLE) == pytest.approx(-4.0)
    with pytest.raises(ConfigurationError):
        robust_fidelity(stack, np.eye(3))


def test_unknown_cascade_mode():
    with pytest.raises(ConfigurationError):
        PerturbativeStack.initial(1, 'sideways')


def test_pi_pulse_profile(pi_pulse):
    profile = robustness_profile(pi_pulse)
    assert len(profile.values) == 1000
    assert profile.fidelity.max() == pytest.approx(1.0, abs=1e-5)
    assert profile.local_maxima() == 1
    with pytest.raises(ConfigurationError):
        robustness_profile(pi_pulse, 'gamma')


def test_pi_pulse_is_first_order_sensitive(pi_pulse):
    slope = scaling_exponent(pi_pulse, 'delta')
    assert 0.9 < slope < 1.1


def test_second_order_composite_pulse_scaling():
    # 180_0 followed by the 180_p 360_3p 180_p corrector, p = arccos(-1/4)
    p = math.acos(-0.25)
    times = np.array([0.0, 1.0, 2.0, 4.0, 5.0]) * math.pi
    field = ControlField.from_phase(times, [0.0, p, 3.0 * p, p, p])
    slope = scaling_exponent(field, 'alpha', step=1e-3)
    assert slope == pytest.approx(3.0, abs=0.2)
