"""Desk-scale version of the three-step simulation (benchmark, design with
estimated parameters, verification) for the first normal and PH scenarios.

Run with ``python3 demos/desk_simulation.py [m_design m_verify]``.
"""

import sys
import time

from mrctdesign.design import DesignConfig
from mrctdesign.simulation import NormalScenario, ProportionalHazardsScenario, SimulationConfig, simulate_study

m_design, m_verify = (int(a) for a in sys.argv[1:3]) if len(sys.argv) > 2 else (50, 200)

for label, scen in (("normal D=(0.6,0.4,0.2)", NormalScenario((0.6, 0.4, 0.2))),
                    ("PH HR=(0.7,0.6,0.4)", ProportionalHazardsScenario((0.7, 0.6, 0.4)))):
    cfg = SimulationConfig(scen, DesignConfig(alpha=0.025, beta=0.2, fractions=(1 / 3,) * 3),
                           m_design=m_design, m_verify=m_verify, benchmark_decimals=2)
    t0 = time.perf_counter()
    rep = simulate_study(cfg)
    print(f"{label}: benchmark n0={rep.benchmark_n0} CP={rep.benchmark_cp:.2f}")
    print(f"  median n0^D={rep.median_n0_design:g} (MAD {rep.mad_n0_design:g})  mean CP^D={rep.mean_cp_design:.2f}")
    print(f"  dev(beta)={rep.mean_dev_power:.3f}  dev(CP)={rep.mean_dev_cp:.3f}")
    print(f"  flagged {rep.n_design_flagged}/{rep.m_design} ({rep.n_design_infeasible} infeasible)"
          f"  {time.perf_counter() - t0:.1f}s")
