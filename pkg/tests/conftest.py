import numpy as np
import pytest

from core.config import RunConfig
from core.dynamics import SOUTH_POLE
from core.flows import energy_o1, run_flow
from core.landscape import SynthesisRecord, landscape_for, residual

QUICK_STEP = 1e-2


@pytest.fixture
def energy_record():
    """Order-1 energy extremal near its robust optimum, stored as a record"""
    point = energy_o1(0.6522)
    t_star = 3.9
    flow = run_flow(point, t_star, QUICK_STEP)
    res = residual(point, t_star, QUICK_STEP)
    scape = landscape_for('energy-offset', 1)
    return SynthesisRecord(
        point=point,
        coords={'H': float(scape.coords_of(point)[0])},
        t_star=t_star,
        area=flow.field.area(),
        energy=flow.field.energy(),
        fidelity=-float(np.sum(res ** 2)),
        converged=True,
        audit=flow.audit(),
        target=SOUTH_POLE.tolist(),
        step=QUICK_STEP,
        field=flow.field,
    )


@pytest.fixture
def run_config(tmp_path):
    return RunConfig('synthesize', 'energy-offset', 1, 'energy', step=QUICK_STEP, out=str(tmp_path), seed=7)
