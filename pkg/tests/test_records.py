import json

import numpy as np
import pytest

from core.dynamics import RobustnessProfile
from core.errors import PulseFileError
from core.pulse_io import save_profile
from core.record_store import (RecordStore, load_record, record_name, verify_manifest, verify_record_file,
                               write_manifest)
from core.validation import run_acceptance, verify_saved_record


def test_save_and_load_record(tmp_path, energy_record, run_config):
    store = RecordStore(tmp_path)
    path = store.save_record(energy_record, run_config)
    assert path.name == 'energy-offset-o1-s7.json'
    assert (tmp_path / 'energy-offset-o1-s7.pulse.csv').exists()
    assert verify_record_file(path) == []

    record, config = load_record(path)
    assert config == run_config
    assert record.t_star == energy_record.t_star
    assert record.fidelity == energy_record.fidelity
    np.testing.assert_array_equal(record.field.ux, energy_record.field.ux)
    assert record_name(record, config) == 'energy-offset-o1-s7'


def test_saved_record_reproduces_fidelity(tmp_path, energy_record, run_config):
    path = RecordStore(tmp_path).save_record(energy_record, run_config)
    result = verify_saved_record(path)
    assert result.passed, result.detail
    assert result.values['deviation'] <= 1e-9


def test_edited_record_is_detected(tmp_path, energy_record, run_config):
    path = RecordStore(tmp_path).save_record(energy_record, run_config)
    document = json.loads(path.read_text())
    document['record']['Fstar'] = 0.0
    path.write_text(json.dumps(document))
    assert any('content hash mismatch' in p for p in verify_record_file(path))
    assert not verify_saved_record(path).passed


def test_edited_pulse_is_detected(tmp_path, energy_record, run_config):
    path = RecordStore(tmp_path).save_record(energy_record, run_config)
    pulse = tmp_path / 'energy-offset-o1-s7.pulse.csv'
    lines = pulse.read_text().splitlines()
    lines[1] = '0,0.5,0'
    pulse.write_text('\n'.join(lines) + '\n')
    problems = verify_record_file(path)
    assert problems == ['energy-offset-o1-s7.pulse.csv: content hash mismatch']


def test_creation_date_is_outside_the_hash(tmp_path, energy_record, run_config):
    path = RecordStore(tmp_path).save_record(energy_record, run_config)
    document = json.loads(path.read_text())
    document['created'] = '1999-01-01 00:00:00'
    path.write_text(json.dumps(document))
    assert verify_record_file(path) == []


def test_unreadable_record(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{not json')
    with pytest.raises(PulseFileError):
        load_record(path)
    assert verify_record_file(path)


def test_manifest_round_trip_and_tamper(tmp_path, run_config):
    values = np.linspace(-1.0, 1.0, 5)
    path = save_profile(RobustnessProfile('delta', values, -values ** 2), tmp_path / 'profile.csv')
    manifest = write_manifest(path, run_config, 'profile', {'points': 5})
    assert manifest.name == 'profile.csv.meta.json'
    assert verify_manifest(path) == []

    path.write_text(path.read_text() + '2,0\n')
    assert verify_manifest(path) == ['profile.csv: content hash mismatch']
    manifest.unlink()
    assert verify_manifest(path) == ['profile.csv.meta.json: missing manifest']


def test_index_operations(tmp_path, energy_record, run_config):
    store = RecordStore(tmp_path)
    store.save_record(energy_record, run_config)
    store.save_record(energy_record, run_config)
    store.save_record(energy_record, run_config, name='second')
    assert [entry['name'] for entry in store.get_records()] == ['energy-offset-o1-s7', 'second']

    reopened = RecordStore(tmp_path)
    assert [entry['name'] for entry in reopened.get_records()] == ['energy-offset-o1-s7', 'second']
    assert reopened.get_records()[1]['Fstar'] == energy_record.fidelity


def test_acceptance_sweeps_saved_records(tmp_path, energy_record, run_config):
    store = RecordStore(tmp_path)
    store.save_record(energy_record, run_config)
    report = run_acceptance(records_dir=tmp_path, only=['elliptic-roundtrip'])
    assert [r.name for r in report.results] == ['elliptic-roundtrip', 'record:energy-offset-o1-s7.json']
    assert report.passed
    assert report.to_dict()['passed'] is True
