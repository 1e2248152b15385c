"""
Pulse, profile and tabular CSV readers and writers
"""

import csv
import logging
import os
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np

from core.dynamics import ControlField, FieldKind, RobustnessProfile
from core.errors import FieldError, PulseFileError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

GENERAL_HEADER = ['t', 'ux', 'uy']
PHASE_HEADER = ['t', 'phi']
PROFILE_HEADER = ['param', 'fidelity']


def format_float(value: float) -> str:
    """Round-trip exact text form of a float"""
    return f"{float(value):.17g}"


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
    """Write a numeric table with a one-line header"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_float(v) for v in row])
    return path


def read_csv(path: PathLike, expected_headers: Sequence[Sequence[str]]):
    """
    Read a numeric table.

    Args:
        path: CSV file.
        expected_headers: Accepted header rows.

    Returns:
        (header, array of shape (rows, columns))

    Raises:
        PulseFileError: missing file, unknown header or a malformed row,
            reported with its 1-based line number.
    """
    path = str(path)
    if not os.path.exists(path):
        raise PulseFileError(path, 0, "file does not exist")

    with open(path, 'r', newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        try:
            header = [cell.strip() for cell in next(reader)]
        except StopIteration:
            raise PulseFileError(path, 1, "empty file") from None
        if header not in [list(h) for h in expected_headers]:
            raise PulseFileError(path, 1, f"unexpected header {','.join(header)!r}")

        rows: List[List[float]] = []
        for line, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise PulseFileError(path, line, f"expected {len(header)} columns, found {len(row)}")
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise PulseFileError(path, line, f"non-numeric value in {','.join(row)!r}") from None
            if not all(np.isfinite(values)):
                raise PulseFileError(path, line, "non-finite value")
            rows.append(values)

    return header, np.asarray(rows, dtype=float).reshape(len(rows), len(header))


def save_pulse(field: ControlField, path: PathLike) -> Path:
    """Write t,phi for phase-only fields and t,ux,uy otherwise"""
    if field.kind is FieldKind.PHASE_ONLY:
        rows = zip(field.times, field.phase)
        return write_csv(path, PHASE_HEADER, rows)
    return write_csv(path, GENERAL_HEADER, zip(field.times, field.ux, field.uy))


def load_pulse(path: PathLike) -> ControlField:
    """
    Load a pulse CSV.

    Raises:
        PulseFileError: malformed file or a sample violating the field invariants.
    """
    header, data = read_csv(path, [GENERAL_HEADER, PHASE_HEADER])
    if len(data) < 2:
        raise PulseFileError(str(path), len(data) + 1, "a pulse needs at least two samples")

    times = data[:, 0]
    if times[0] != 0.0:
        raise PulseFileError(str(path), 2, "time grid must start at 0")
    steps = np.diff(times)
    if np.any(steps <= 0):
        line = int(np.argmax(steps <= 0)) + 3
        raise PulseFileError(str(path), line, "time grid must be strictly increasing")

    try:
        if header == PHASE_HEADER:
            field = ControlField.from_phase(times, data[:, 1])
        else:
            field = ControlField(times, data[:, 1], data[:, 2], FieldKind.GENERAL)
    except FieldError as e:
        raise PulseFileError(str(path), 0, str(e)) from e

    logger.debug("loaded %d samples from %s", len(times), path)
    return field


def save_profile(profile: RobustnessProfile, path: PathLike) -> Path:
    return write_csv(path, PROFILE_HEADER, zip(profile.values, profile.fidelity))


def load_profile(path: PathLike, parameter: str = 'delta') -> RobustnessProfile:
    _, data = read_csv(path, [PROFILE_HEADER])
    return RobustnessProfile(parameter, data[:, 0].copy(), data[:, 1].copy())
