import json

import pytest

from cli.app import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, PulseForgeApp, parse_box, run
from core.dynamics import ControlField
from core.pulse_io import save_pulse
from core.record_store import RecordStore, verify_manifest

QUICK = ['--step', '0.01', '--threads', '1']


@pytest.fixture
def pi_pulse_file(tmp_path):
    field = ControlField([0.0, 3.141592653589793], [1.0, 1.0], [0.0, 0.0])
    return save_pulse(field, tmp_path / 'pi.csv')


@pytest.mark.parametrize('argv', [
    [],
    ['synthesize'],
    ['synthesize', '--variant', 'sideways'],
    ['synthesize', '--variant', 'energy-offset', '--step', '-1'],
    ['synthesize', '--variant', 'gate-time', '--tol', '-1'],
    ['landscape', '--variant', 'energy-offset', '--order', '2', '--box', '0:1'],
    ['profile', 'pulse.csv', '--range', '1:0'],
    ['grape', '--spins', '2'],
    ['validate', '--only', 'no-such-check'],
])
def test_usage_errors(argv, tmp_path):
    assert run(argv + ['--out', str(tmp_path)] if argv else argv) == EXIT_USAGE


def test_parse_box():
    assert parse_box('0:1, -2:2') == ((0.0, 1.0), (-2.0, 2.0))


def test_profile_of_pi_pulse(tmp_path, pi_pulse_file, capsys):
    code = run(['profile', str(pi_pulse_file), '--points', '21', '--out', str(tmp_path)] + QUICK)
    assert code == EXIT_OK
    out = tmp_path / 'pi.delta.profile.csv'
    assert len(out.read_text().splitlines()) == 22
    assert verify_manifest(out) == []
    assert 'local maxima: 1' in capsys.readouterr().out


def test_malformed_pulse_is_numerical_failure(tmp_path):
    bad = tmp_path / 'bad.csv'
    bad.write_text('t,ux,uy\n0,1,0\n0.5,oops,0\n')
    assert run(['profile', str(bad), '--out', str(tmp_path)] + QUICK) == EXIT_NUMERICAL


def test_synthesize_then_validate(tmp_path):
    out = ['--out', str(tmp_path)]
    code = run(['synthesize', '--variant', 'time-offset', '--order', '1', '--tmax', '7', '--seed', '3']
               + QUICK + out)
    assert code == EXIT_OK
    record_path = tmp_path / 'time-offset-o1-s3.json'
    assert record_path.exists()
    assert len(RecordStore(tmp_path).get_records()) == 1

    assert run(['validate', '--only', 'elliptic-roundtrip'] + out) == EXIT_OK
    report = json.loads((tmp_path / 'validation.json').read_text())
    assert [c['name'] for c in report['criteria']] == ['elliptic-roundtrip', 'record:time-offset-o1-s3.json']
    assert report['config']['subcommand'] == 'validate'
    assert report['system']['cpu_logical'] >= 1

    document = json.loads(record_path.read_text())
    document['record']['Fstar'] = 0.0
    record_path.write_text(json.dumps(document))
    assert run(['validate', '--only', 'elliptic-roundtrip'] + out) == EXIT_NUMERICAL


def test_landscape_writes_maps(tmp_path):
    code = run(['landscape', '--variant', 'energy-offset', '--order', '2', '--resolution', '3', '--tmax', '3',
                '--step', '0.05', '--threads', '1', '--out', str(tmp_path)])
    assert code == EXIT_OK
    for suffix in ('scan', 'Fstar', 'tstar', 'Astar'):
        path = tmp_path / f'energy-offset-o2.{suffix}.csv'
        assert path.exists()
        assert verify_manifest(path) == []


def test_grape_from_record(tmp_path, energy_record, run_config):
    record_path = RecordStore(tmp_path).save_record(energy_record, run_config)
    code = run(['grape', '--record', str(record_path), '--spins', '3', '--samples', '24', '--iterations', '5',
                '--step', '0.05', '--out', str(tmp_path)])
    assert code == EXIT_OK
    for name in ('grape.pulse.csv', 'grape.history.csv'):
        assert verify_manifest(tmp_path / name) == []
    assert (tmp_path / 'grape.profile.csv').exists()
    assert (tmp_path / 'reference.profile.csv').exists()


def test_config_defaults():
    app = PulseForgeApp()
    config = app.make_config(app.parse_args(['validate']))
    assert config.step == 0.01
    config = app.make_config(app.parse_args(['synthesize', '--variant', 'energy-offset']))
    assert config.cost == 'energy' and config.step == 1e-3


@pytest.mark.parametrize('variant, order', [
    ('energy-offset', 1),
    ('amplitude', 1),
    ('ensemble', 2),
    ('gate-time', 1),
])
def test_synthesize_other_variants_exit_cleanly(tmp_path, variant, order):
    argv = ['synthesize', '--variant', variant, '--order', str(order), '--starts', '4', '--refine-count', '1',
            '--tmax', '5', '--step', '0.05', '--threads', '1', '--tol', '1e-2', '--out', str(tmp_path)]
    code = run(argv)
    assert code in (EXIT_OK, EXIT_NUMERICAL)
    if code == EXIT_OK:
        record_path = tmp_path / f'{variant}-o{order}-s0.json'
        assert record_path.exists()
        assert json.loads(record_path.read_text())['record']['tolerance'] == 1e-2


def test_tolerance_reaches_config():
    app = PulseForgeApp()
    config = app.make_config(app.parse_args(['synthesize', '--variant', 'gate-time', '--tol', '0.05']))
    assert config.tolerance == 0.05
    assert config.to_dict()['tolerance'] == 0.05
