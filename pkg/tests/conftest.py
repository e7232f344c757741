import numpy as np
import pytest

from common.feqr_config import DgpConfig
from common.panel import PanelData
from simulation.dgp import generate_panel


def random_panel(seed, n_units, n_periods, n_regressors=1):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n_units, n_periods, n_regressors))
    y = rng.normal(size=(n_units, 1)) + x @ np.ones(n_regressors) + rng.standard_t(5, size=(n_units, n_periods))
    return PanelData(y=y, x=x)


@pytest.fixture
def small_panel():
    return random_panel(7, 4, 6)


@pytest.fixture(scope="session")
def dgp_panel():
    return generate_panel(DgpConfig(n_units=100, n_periods=20, base_seed=11), 0)


@pytest.fixture
def panel_csv():
    return "\n".join(
        [
            "unit,time,y,x1",
            "b,2,5.5,1.5",
            "a,1,1.0,0.5",
            "b,1,4.0,1.0",
            "a,3,3.0,2.0",
            "b,3,7.25,3.0",
            "a,2,2.0,-0.5",
            "",
        ]
    )
