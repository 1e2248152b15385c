import math

import numpy as np
import pytest

from core.analytic import (alpha_o1_field, alpha_o1_state, bangbang_o1, energy_o1_field, energy_o1_optimum,
                           energy_o1_state, excitation_o1)
from core.dynamics import FieldKind
from core.errors import DomainError


@pytest.fixture(scope='module')
def optimum():
    return energy_o1_optimum()


def test_energy_optimum_constants(optimum):
    assert optimum == pytest.approx(0.6522, abs=1e-3)
    solution = energy_o1_field(optimum, step=1e-2)
    assert solution.area / math.pi == pytest.approx(1.45, abs=0.01)
    assert solution.field.area() == pytest.approx(solution.area, rel=1e-3)


def test_energy_optimum_inverts_robustly(optimum):
    solution = energy_o1_field(optimum, step=1e-2)
    theta, x1 = energy_o1_state(optimum, -1.0, solution.t_star)
    assert theta == pytest.approx(math.pi, abs=1e-10)
    assert x1 == pytest.approx(0.0, abs=1e-8)


def test_energy_state_starts_at_rest():
    theta, x1 = energy_o1_state(0.4, -1.0, np.array([0.0, 0.5, 1.0]))
    assert theta[0] == pytest.approx(0.0, abs=1e-12)
    assert x1[0] == 0.0


@pytest.mark.parametrize('H', [0.0, 1.0, -0.2, 1.5])
def test_energy_family_domain(H):
    with pytest.raises(DomainError):
        energy_o1_field(H)


def test_excitation_lands_on_equator():
    H, t_e = excitation_o1()
    assert 0.0 < H < 1.0
    theta, x1 = energy_o1_state(H, 1.0, t_e)
    assert theta == pytest.approx(-0.5 * math.pi, abs=1e-10)
    assert x1 == pytest.approx(0.0, abs=1e-8)


def test_bang_bang_branches_are_continuous():
    solution = bangbang_o1(0.5)
    for switch in (solution.T1, solution.T2):
        before, after = switch - 1e-10, switch + 1e-10
        assert solution.theta(before) == pytest.approx(solution.theta(after), abs=1e-8)
        assert solution.x1(before) == pytest.approx(solution.x1(after), abs=1e-8)


def test_bang_bang_inversion_time():
    solution = bangbang_o1(0.5)
    assert solution.theta(solution.t_star) == pytest.approx(math.pi, abs=1e-12)
    assert bangbang_o1(0.999999).t_star == pytest.approx(2.0 * math.pi, abs=1e-2)
    assert solution.field.switch_times == pytest.approx((solution.T1, solution.T2))


def test_bang_bang_domain():
    with pytest.raises(DomainError):
        bangbang_o1(1.0)


def test_amplitude_pulse_duration_and_phase():
    solution = alpha_o1_field(0.6995, 1.1192, step=1e-2)
    assert solution.t_final / math.pi == pytest.approx(1.86, abs=0.03)
    assert solution.field.kind is FieldKind.PHASE_ONLY
    assert solution.phase(0.0) == pytest.approx(0.0, abs=1e-9)
    _, phi = alpha_o1_state(0.6995, 1.1192, 0.0)
    assert phi == pytest.approx(0.0, abs=1e-9)


def test_amplitude_domain():
    with pytest.raises(DomainError):
        alpha_o1_field(0.0, 0.0)
