"""Full-scale simulation runs (1000 x 1000 replications).

Skipped unless MRCT_LONG=1; each scenario takes several minutes to hours.
"""

import os

import pytest

from mrctdesign.design import DesignConfig
from mrctdesign.simulation import (
    BinaryScenario,
    NormalScenario,
    ProportionalHazardsScenario,
    SimulationConfig,
    simulate_study,
)

pytestmark = pytest.mark.slow

EQ3, EQ4 = (1 / 3,) * 3, (0.25,) * 4

# (scenario, fractions, published median of n0^D)
FULL_SCALE = [
    (NormalScenario((0.6, 0.4, 0.2)), EQ3, 284),
    (NormalScenario((0.8, 0.6, 0.4, 0.2)), EQ4, 134),
    (BinaryScenario((0.6, 0.4, 0.2)), EQ3, 56),
    (ProportionalHazardsScenario((0.7, 0.6, 0.4)), EQ3, 158),
    (ProportionalHazardsScenario((0.8, 0.7, 0.5, 0.4)), EQ4, 210),
]


@pytest.mark.parametrize("scenario,fractions,median", FULL_SCALE,
                         ids=["normal-R3", "normal-R4", "binary-R3", "ph-R3", "ph-R4"])
def test_full_scale_deviation_ranges(scenario, fractions, median):
    cfg = SimulationConfig(
        scenario, DesignConfig(alpha=0.025, beta=0.2, fractions=fractions),
        m_design=1000, m_verify=1000, benchmark_decimals=2,
    )
    rep = simulate_study(cfg, n_jobs=os.cpu_count() or 1)
    assert abs(rep.median_n0_design - median) <= 0.05 * median
    # published ranges across all scenarios
    assert 0.012 <= rep.mean_dev_power <= 0.068
    assert 0.013 <= rep.mean_dev_cp <= 0.048
