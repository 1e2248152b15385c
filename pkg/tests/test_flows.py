import math

import numpy as np
import pytest

from core.analytic import bangbang_o1, energy_o1_field
from core.dynamics import FieldKind
from core.errors import ConfigurationError, SingularFlowError
from core.flows import (CostKind, OmegaStack, ShootingPoint, Variant, amplitude_from_invariants, dimension,
                        dump_flow, energy_o1, energy_o2, ensemble_point, first_integrals, flow_batch,
                        flow_time_offset, initial_omega, is_bang_bang, bang_bang_o1, run_flow)

STEP = 1e-2


@pytest.mark.parametrize('variant, order, expected', [
    ('energy-offset', 1, 2),
    ('energy-offset', 3, 6),
    ('time-offset', 2, 4),
    ('amplitude', 1, 2),
    ('ensemble', 3, 4),
    ('gate-time', 1, 5),
])
def test_dimension(variant, order, expected):
    assert dimension(variant, order) == expected


def test_unknown_variant_and_bad_order():
    with pytest.raises(ConfigurationError):
        dimension('sideways', 1)
    with pytest.raises(ConfigurationError):
        dimension('energy-offset', 0)


def test_parameter_count_is_checked():
    with pytest.raises(ConfigurationError):
        ShootingPoint('energy-offset', 2, [1.0, 2.0])


def test_offsets_only_for_ensembles():
    with pytest.raises(ConfigurationError):
        ShootingPoint('energy-offset', 1, [1.0, 0.0], offsets=(0.1,))
    with pytest.raises(ConfigurationError):
        ensemble_point([0.1, 0.2], (-0.5, 0.0, 0.5))


def test_energy_o1_initial_stack():
    point = energy_o1(0.5)
    np.testing.assert_allclose(point.params, [1.0, 0.5 * math.pi])
    stack = initial_omega(point)
    np.testing.assert_allclose(stack, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], atol=1e-15)


def test_ensemble_stack_sums_to_unit_field():
    stack = initial_omega(ensemble_point([0.3, 0.2], (-0.5, 0.5)))
    np.testing.assert_allclose(stack.sum(axis=0), [1.0, 0.0, 0.0], atol=1e-15)


def test_point_dict_round_trip():
    point = ensemble_point([0.3, 0.2], (-0.5, 0.5), cost='energy')
    back = ShootingPoint.from_dict(point.to_dict())
    assert back.variant is Variant.ENSEMBLE and back.cost is CostKind.ENERGY
    assert back.offsets == (-0.5, 0.5)
    np.testing.assert_array_equal(back.params, point.params)


@pytest.mark.parametrize('point, t_final', [
    (energy_o2(0.7256, 0.7985), 2.0 * math.pi),
    (energy_o1(0.65), 5.0),
    (amplitude_from_invariants(0.6995, 1.1192), 6.0),
    (ensemble_point([0.3, 0.2], (-0.5, 0.5), cost=CostKind.ENERGY), 4.0),
])
def test_first_integrals_are_conserved(point, t_final):
    audit = run_flow(point, t_final, STEP).audit()
    assert audit.values
    assert audit.max_drift <= 1e-6


def test_single_state_has_no_drift():
    point = energy_o2(0.7256, 0.7985)
    audit = first_integrals('energy-offset', OmegaStack(Variant.ENERGY_OFFSET, initial_omega(point)))
    assert audit.max_drift == 0.0
    assert set(audit.values) >= {'H', 'I', 'J', 'K'}
    assert audit.values['H'] == pytest.approx(0.7256, abs=1e-12)


def test_audit_rejects_wrong_variant():
    state = OmegaStack(Variant.AMPLITUDE, initial_omega(amplitude_from_invariants(0.5, 0.5)))
    with pytest.raises(ConfigurationError):
        first_integrals('energy-offset', state)


def test_vanishing_normalization_is_singular():
    point = ShootingPoint('time-offset', 1, [0.0, 0.3])
    assert not is_bang_bang(point)
    with pytest.raises(SingularFlowError) as excinfo:
        flow_time_offset(point, 1.0, STEP)
    assert excinfo.value.time == 0.0


def test_flow_batch_marks_failed_points():
    points = [ShootingPoint('time-offset', 1, [0.0, 0.3]), ShootingPoint('time-offset', 1, [1.0, 0.3])]
    batch = flow_batch(points, 0.5, STEP)
    assert batch.failed.tolist() == [True, False]
    assert batch.failure_time[0] == 0.0
    assert math.isnan(batch.failure_time[1])
    assert batch.omega.shape == (len(batch.times), 2, 2, 3)


def test_flow_batch_rejects_mixed_variants():
    with pytest.raises(ConfigurationError):
        flow_batch([energy_o1(0.5), bang_bang_o1(0.5)], 1.0, STEP)


def test_bang_bang_switches_match_closed_form():
    solution = bangbang_o1(0.5)
    result = run_flow(bang_bang_o1(0.5), solution.T2 + 0.5, STEP)
    assert len(result.switch_times) == 2
    assert result.switch_times[0] == pytest.approx(solution.T1, abs=1e-6)
    assert result.switch_times[1] == pytest.approx(solution.T2, abs=1e-6)
    assert result.field.kind is FieldKind.BANG_BANG
    assert set(np.unique(result.field.ux)) == {-1.0, 1.0}


def test_energy_flow_matches_elliptic_solution():
    H = 0.65
    solution = energy_o1_field(H, step=STEP)
    result = run_flow(energy_o1(H), solution.t_star, STEP)
    np.testing.assert_allclose(result.omega[:, 0, 0], solution.omega_0x(result.times), atol=1e-6)
    assert np.max(np.abs(result.omega[:, 0, 1])) <= 1e-12


def test_dump_flow_header(tmp_path):
    result = run_flow(energy_o1(0.5), 0.1, STEP)
    path = tmp_path / 'flow.csv'
    dump_flow(result, path)
    lines = path.read_text().splitlines()
    assert lines[0] == 't,Omega_0x,Omega_0y,Omega_0z,Omega_1x,Omega_1y,Omega_1z'
    assert len(lines) == len(result.times) + 1


GATE_POINT = ShootingPoint('gate-time', 1, [1.0, 0.5, 0.3, 1.0, 0.4])


def test_gate_flow_conserves_hamiltonian_and_norm():
    audit = run_flow(GATE_POINT, 0.8, 1e-3).audit()
    assert set(audit.values) >= {'H', '|Omega_1|^2', 'Omega_0z', 'I'}
    assert audit.values['Omega_0z'] == pytest.approx(0.3)
    assert audit.values['|Omega_1|^2'] == pytest.approx(1.0)
    assert audit.drift['H'] <= 1e-8
    assert audit.drift['|Omega_1|^2'] <= 1e-8
    assert audit.drift['Omega_0z'] <= 1e-12


def test_gate_flow_without_z_component_is_the_offset_flow():
    gate = run_flow(ShootingPoint('gate-time', 1, [1.2, 0.0, 0.0, 0.5 * math.pi, 0.3]), 1.0, STEP)
    offset = run_flow(ShootingPoint('time-offset', 1, [1.2, 0.3]), 1.0, STEP)
    np.testing.assert_allclose(gate.omega, offset.omega, atol=1e-12)
    np.testing.assert_allclose(gate.field.ux, offset.field.ux, atol=1e-12)
    np.testing.assert_allclose(gate.field.uy, offset.field.uy, atol=1e-12)


def test_time_cost_ensemble_conserves_momentum_norms():
    audit = run_flow(ensemble_point([0.3, 0.2], (-0.5, 0.5), cost='time'), 1.2, 1e-3).audit()
    assert set(audit.values) == {'H', '|ell_1|', '|ell_2|'}
    assert audit.max_drift <= 1e-8


def test_time_cost_ensemble_field_is_unit():
    result = run_flow(ensemble_point([0.3, 0.2], (-0.5, 0.5), cost='time'), 1.2, STEP)
    np.testing.assert_allclose(np.hypot(result.field.ux, result.field.uy), 1.0, atol=1e-9)


def test_rotating_regime_never_switches():
    # H > 1 keeps Omega_0x = H + sin t away from zero
    result = run_flow(bang_bang_o1(1.5), 4.0 * math.pi, STEP)
    assert result.switch_times == ()
    assert set(np.unique(result.field.ux)) == {1.0}
    assert np.min(result.omega[:, 0, 0]) == pytest.approx(0.5, abs=1e-4)


@pytest.mark.parametrize('point, t_final', [
    (ShootingPoint('time-offset', 2, [2.0, 0.3, 0.2, 0.4]), 1.0),
    (ShootingPoint('amplitude', 2, [0.2, -0.3, 0.1, 0.4]), 3.0),
    (ShootingPoint('time-offset', 3, [2.0, 0.3, 0.2, 0.1, -0.2, 0.4]), 0.8),
])
def test_higher_order_flows_conserve_integrals(point, t_final):
    audit = run_flow(point, t_final, 1e-3).audit()
    assert f'|Omega_{point.order}|^2' in audit.values
    assert audit.max_drift <= 1e-8
