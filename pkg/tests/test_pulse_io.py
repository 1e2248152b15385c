import numpy as np
import pytest

from core.dynamics import ControlField, FieldKind, RobustnessProfile
from core.errors import PulseFileError
from core.pulse_io import load_profile, load_pulse, save_profile, save_pulse


def test_general_pulse_round_trip(tmp_path):
    field = ControlField([0.0, 0.1, 0.3], [0.1, -0.2, -0.2], [1.0 / 3.0, 0.5, 0.5])
    path = save_pulse(field, tmp_path / 'pulse.csv')
    assert path.read_text().splitlines()[0] == 't,ux,uy'
    loaded = load_pulse(path)
    np.testing.assert_array_equal(loaded.times, field.times)
    np.testing.assert_array_equal(loaded.ux, field.ux)
    np.testing.assert_array_equal(loaded.uy, field.uy)


def test_phase_pulse_written_as_phase(tmp_path):
    field = ControlField.from_phase([0.0, 0.5, 1.0], [0.0, 1.0, 2.0])
    path = save_pulse(field, tmp_path / 'phase.csv')
    assert path.read_text().splitlines()[0] == 't,phi'
    loaded = load_pulse(path)
    assert loaded.kind is FieldKind.PHASE_ONLY
    np.testing.assert_allclose(loaded.phase, [0.0, 1.0, 2.0], atol=1e-12)


@pytest.mark.parametrize('body, line', [
    ('t,ux,uy\n0,1,0\n0.1,abc,0\n', 3),
    ('t,ux,uy\n0,1,0\n0.1,1\n', 3),
    ('t,ux,uy\n0,1,0\n0.2,1,0\n0.1,1,0\n', 4),
    ('time,ux,uy\n0,1,0\n', 1),
    ('t,phi\n0.5,0\n1.0,0\n', 2),
])
def test_malformed_pulse_reports_line(tmp_path, body, line):
    path = tmp_path / 'bad.csv'
    path.write_text(body)
    with pytest.raises(PulseFileError) as excinfo:
        load_pulse(path)
    assert excinfo.value.line == line
    assert f"bad.csv:{line}:" in str(excinfo.value)


def test_missing_pulse_file(tmp_path):
    with pytest.raises(PulseFileError):
        load_pulse(tmp_path / 'absent.csv')


def test_profile_round_trip(tmp_path):
    profile = RobustnessProfile('delta', np.linspace(-1, 1, 5), np.array([0.1, 0.5, 1.0, 0.5, 0.1]))
    path = save_profile(profile, tmp_path / 'profile.csv')
    assert path.read_text().splitlines()[0] == 'param,fidelity'
    loaded = load_profile(path)
    np.testing.assert_array_equal(loaded.values, profile.values)
    np.testing.assert_array_equal(loaded.fidelity, profile.fidelity)
