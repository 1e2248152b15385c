"""
Persistence of synthesis records and hashed run artifacts
"""

import hashlib
import json
import logging
import os
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from core.config import RunConfig, default_output_dir
from core.errors import PulseFileError
from core.landscape import SynthesisRecord
from core.pulse_io import load_pulse, save_pulse

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

INDEX_NAME = 'index.json'
MANIFEST_SUFFIX = '.meta.json'


def canonical_json(body: Dict[str, Any]) -> bytes:
    """Key-sorted compact JSON, the byte form every content hash is taken over"""
    return json.dumps(body, sort_keys=True, separators=(',', ':')).encode('utf-8')


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def record_name(record: SynthesisRecord, config: RunConfig) -> str:
    return f"{record.variant.value}-o{record.order}-s{config.seed}"


def write_manifest(path: PathLike, config: RunConfig, kind: str, extra: Optional[Dict[str, Any]] = None) -> Path:
    """
    Sidecar `<file>.meta.json` carrying the run configuration and the file's hash.

    Used for CSV artifacts (profiles, scans, GRAPE pulses) that cannot embed
    their own metadata.
    """
    path = Path(path)
    body = {
        'kind': kind,
        'file': path.name,
        'file_sha256': sha256_file(path),
        'config': config.to_dict(),
        'extra': extra or {},
    }
    manifest = path.with_name(path.name + MANIFEST_SUFFIX)
    with open(manifest, 'w', encoding='utf-8') as f:
        json.dump(dict(body, sha256=sha256_bytes(canonical_json(body))), f, indent=2)
    return manifest


def verify_manifest(path: PathLike) -> List[str]:
    """Problems found in an artifact and its sidecar; empty when intact"""
    path = Path(path)
    manifest = path.with_name(path.name + MANIFEST_SUFFIX)
    if not manifest.exists():
        return [f"{manifest.name}: missing manifest"]
    with open(manifest, 'r', encoding='utf-8') as f:
        data = json.load(f)
    problems = []
    stored = data.pop('sha256', None)
    if stored != sha256_bytes(canonical_json(data)):
        problems.append(f"{manifest.name}: manifest content hash mismatch")
    if not path.exists():
        problems.append(f"{path.name}: missing")
    elif sha256_file(path) != data.get('file_sha256'):
        problems.append(f"{path.name}: content hash mismatch")
    return problems


class RecordStore:
    """Stores synthesis records as JSON plus pulse CSV under one run directory"""

    def __init__(self, directory: Optional[PathLike] = None):
        """
        Initialize the record store.

        Args:
            directory: Run directory. If None, uses the per-user default.
        """
        self.directory = Path(directory) if directory is not None else default_output_dir()
        self.directory.mkdir(parents=True, exist_ok=True)
        self.index_file = self.directory / INDEX_NAME
        self.index: List[Dict[str, Any]] = []
        self.load_index()

    def load_index(self):
        """Load the record index from disk"""
        if self.index_file.exists():
            try:
                with open(self.index_file, 'r', encoding='utf-8') as f:
                    self.index = json.load(f)
            except (OSError, ValueError) as e:
                logger.error("could not read record index %s: %s", self.index_file, e)
                self.index = []

    def save_index(self):
        try:
            with open(self.index_file, 'w', encoding='utf-8') as f:
                json.dump(self.index, f, indent=2)
        except OSError as e:
            logger.error("could not write record index %s: %s", self.index_file, e)

    def save_record(self, record: SynthesisRecord, config: RunConfig, name: Optional[str] = None) -> Path:
        """
        Write `<name>.pulse.csv` and `<name>.json` and add the record to the index.

        The JSON body embeds the run configuration and the pulse file hash; its
        own hash covers the canonical body and excludes the creation date.
        """
        name = name or record_name(record, config)
        pulse_path = self.directory / f"{name}.pulse.csv"
        if record.field is not None:
            save_pulse(record.field, pulse_path)
            record.pulse_path = str(pulse_path)

        body = {
            'record': record.to_dict(),
            'config': config.to_dict(),
            'pulse_sha256': sha256_file(pulse_path) if pulse_path.exists() else None,
        }
        document = dict(body, sha256=sha256_bytes(canonical_json(body)),
                        created=time.strftime('%Y-%m-%d %H:%M:%S'))
        path = self.directory / f"{name}.json"
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(document, f, indent=2)

        self.index = [entry for entry in self.index if entry.get('name') != name]
        self.index.append({
            'name': name,
            'variant': record.variant.value,
            'order': record.order,
            'tstar': record.t_star,
            'Astar': record.area,
            'Fstar': record.fidelity,
            'path': str(path),
            'date': document['created'],
        })
        self.save_index()
        logger.info("record %s saved to %s", name, path)
        return path

    def get_records(self) -> List[Dict[str, Any]]:
        """Get all index entries"""
        return [dict(entry) for entry in self.index]


def verify_record_file(path: PathLike) -> List[str]:
    """Problems found in a saved record and its pulse file; empty when intact"""
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            document = json.load(f)
    except (OSError, ValueError) as e:
        return [f"{path.name}: unreadable ({e})"]

    problems = []
    body = {key: document.get(key) for key in ('record', 'config', 'pulse_sha256')}
    if document.get('sha256') != sha256_bytes(canonical_json(body)):
        problems.append(f"{path.name}: content hash mismatch")
    pulse_path = (document.get('record') or {}).get('pulse_path')
    if pulse_path:
        if not os.path.exists(pulse_path):
            problems.append(f"{os.path.basename(pulse_path)}: missing")
        elif sha256_file(pulse_path) != body['pulse_sha256']:
            problems.append(f"{os.path.basename(pulse_path)}: content hash mismatch")
    return problems


def load_record(path: PathLike) -> Tuple[SynthesisRecord, RunConfig]:
    """
    Read a saved record, with its pulse when the file is present.

    Raises:
        PulseFileError: unreadable document or a pulse that fails to parse.
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            document = json.load(f)
        record = SynthesisRecord.from_dict(document['record'])
        config = RunConfig.from_dict(document['config'])
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise PulseFileError(str(path), 0, f"unreadable record: {e}") from e
    if record.pulse_path and os.path.exists(record.pulse_path):
        record.field = load_pulse(record.pulse_path)
    return record, config
