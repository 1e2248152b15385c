"""
Run configuration and numerical defaults
"""

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

DEFAULT_STEP = 1e-3
DEFAULT_TMAX = 6 * math.pi
R_THRESHOLD = 1e-9
PROFILE_POINTS = 1000
FEASIBILITY_TOL = 1e-6
# |F| below which a local maximum of F(t) counts as a return to the target
PEAK_LEVEL = 1e-3
BOX_HALF_WIDTH = 4.0

# Gates only reach the target approximately: about 1e-3 at order 1 and 0.1 at order 2
GATE_FEASIBILITY_TOL = {1: 1e-3, 2: 0.1}


def feasibility_tolerance(variant: str, order: int) -> float:
    """Largest |F*| accepted as a robust solution of a variant and order"""
    if variant == 'gate-time':
        return GATE_FEASIBILITY_TOL.get(order, max(GATE_FEASIBILITY_TOL.values()))
    return FEASIBILITY_TOL


def default_output_dir() -> Path:
    """Per-user run directory, created on demand"""
    return Path.home() / '.pulseforge' / 'runs'


def multistart_count(dimension: int) -> int:
    """Default number of quasi-random starts for a landscape of given dimension"""
    return 64 if dimension <= 4 else 256


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one CLI run"""

    subcommand: str
    variant: Optional[str] = None
    order: int = 1
    cost: str = 'time'
    box: Tuple[Tuple[float, float], ...] = ()
    step: float = DEFAULT_STEP
    tmax: float = DEFAULT_TMAX
    out: str = field(default_factory=lambda: str(default_output_dir()))
    seed: int = 0
    gate: str = 'NOT'
    offsets: Tuple[float, ...] = ()
    threads: Optional[int] = None
    tolerance: Optional[float] = None
    log_level: str = 'INFO'

    def to_dict(self) -> Dict[str, Any]:
        """Plain JSON-friendly view embedded in every artifact"""
        data = asdict(self)
        data['box'] = [list(bounds) for bounds in self.box]
        data['offsets'] = list(self.offsets)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        values = dict(data)
        values['box'] = tuple(tuple(bounds) for bounds in values.get('box', ()))
        values['offsets'] = tuple(values.get('offsets', ()))
        return cls(**values)
