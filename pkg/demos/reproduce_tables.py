"""Print every deterministic table: sample sizes, regional CPs, bounds,
equal-allocation CPs, simulation benchmarks, RMST scenario parameters, the
non-inferiority redesign and the LEADER re-analysis.

Run with ``python3 demos/reproduce_tables.py``.
"""

import math

from mrctdesign.analysis import TrialAnalysisInput, analyze_trial, summaries_from_hr
from mrctdesign.design import (
    DesignConfig,
    RegionDesignInput,
    cp_equal_allocation,
    cp_lower_bound,
    lower_bound_design,
    solve_overall_n0,
)
from mrctdesign.endpoints import (
    PiecewiseExponential,
    SurvivalRMSTEndpoint,
    UniformCensoring,
    Weibull,
    omega_survival_ph,
)
from mrctdesign.errors import NotAvailableError
from mrctdesign.model import RandomEffectsParams
from mrctdesign.simulation import (
    BinaryScenario,
    NormalScenario,
    ProportionalHazardsScenario,
    RMSTScenario,
    SimulationConfig,
    run_benchmark,
)

EQ3, UN3 = (1 / 3,) * 3, (0.2, 0.3, 0.5)
EQ4, UN4, DN4 = (0.25,) * 4, (0.1, 0.2, 0.3, 0.4), (0.4, 0.3, 0.2, 0.1)


def regions(omegas):
    return [RegionDesignInput(f"r{i + 1}", w) for i, w in enumerate(omegas)]


def sample_sizes():
    print("Overall n0 per group, alpha=0.025, beta=0.1, Omega=2")
    print(f"{'fractions':<22}{'tau/delta':>10}{'delta=0.25':>12}{'delta=0.5':>11}")
    for f in (EQ3, UN3, EQ4, UN4):
        cfg = DesignConfig(alpha=0.025, beta=0.1, fractions=f)
        for ratio in (0.2, 0.3, 0.4, 0.5):
            n = [solve_overall_n0(RandomEffectsParams.from_tau(d, ratio * d), cfg,
                                  regions([2.0] * len(f)), with_cp=False).n0 for d in (0.25, 0.5)]
            label = ",".join(f"{x:.2f}" for x in f)
            print(f"{label:<22}{ratio:>10}{n[0]:>12}{n[1]:>11}")


def regional_cp():
    print("\nRegion-1 CP, delta=0.25, tau=0.1")
    e = RandomEffectsParams.from_tau(0.25, 0.1)
    for f in [(0.1, 0.45, 0.45), (0.3, 0.35, 0.35), (0.5, 0.25, 0.25),
              (0.1, 0.3, 0.3, 0.3), (0.3, 0.7 / 3, 0.7 / 3, 0.7 / 3), (0.5, 0.5 / 3, 0.5 / 3, 0.5 / 3)]:
        res = solve_overall_n0(e, DesignConfig(alpha=0.025, beta=0.1, fractions=f), regions([2.0] * len(f)))
        print(f"  R={len(f)} f1={f[0]}: n0={res.n0} n01={res.regional_n0[0]} CP={100 * res.cp_per_region[0]:.1f}%")


def bounds_and_equal_allocation():
    print("\nWorst-case CP bound and equal-allocation CP (delta=0.25)")
    for alpha in (0.025, 0.05):
        for beta in (0.1, 0.2):
            cfg = DesignConfig(alpha=alpha, beta=beta)
            cells = []
            for ratio in (0.4, 0.6):
                e = RandomEffectsParams.from_tau(0.25, ratio * 0.25)
                value, tag = cp_lower_bound(e, cfg)
                cells.append(f"bound({ratio})={100 * value:.1f}% {tag}")
                for R in (3, 4):
                    try:
                        cells.append(f"R={R}:{100 * cp_equal_allocation(e, cfg, R):.1f}%")
                    except NotAvailableError:
                        cells.append(f"R={R}:n.a.")
            e = RandomEffectsParams.from_tau(0.25, 0.1)
            designs = [lower_bound_design(e, cfg, 2.0, f1) for f1 in (0.1, 0.5)]
            print(f"  alpha={alpha} beta={beta}: " + ", ".join(cells) + f", designs (f1=0.1, 0.5) {designs}")


def rmst_models(name):
    pars = {
        "early": [((0.07, 0.03), (0.02, 0.03)), ((0.07, 0.04), (0.03, 0.04)),
                  ((0.07, 0.05), (0.04, 0.05)), ((0.07, 0.06), (0.05, 0.06))],
        "late": [((0.04, 0.1), (0.04, 0.04)), ((0.05, 0.1), (0.05, 0.05)),
                 ((0.06, 0.1), (0.06, 0.06)), ((0.07, 0.1), (0.07, 0.07))],
        "crossing": [((1.6, 30), (1, 50)), ((1.6, 40), (1, 60)),
                     ((1.6, 50), (1, 70)), ((1.6, 60), (1, 80))],
    }[name]
    if name == "crossing":
        return tuple(Weibull(*c) for c, _ in pars), tuple(Weibull(*t) for _, t in pars)
    psi = 10.0 if name == "early" else 6.0
    return (tuple(PiecewiseExponential(*c, psi) for c, _ in pars),
            tuple(PiecewiseExponential(*t, psi) for _, t in pars))


def rmst_parameters():
    print("\nRMST scenarios at eta=80, censoring U(0, 240)")
    cens = UniformCensoring(0.0, 240.0)
    for name in ("early", "late", "crossing"):
        for r, (c, t) in enumerate(zip(*rmst_models(name))):
            ep = SurvivalRMSTEndpoint(c, t, 80.0, cens)
            s0, s1 = ep.arm_variances()
            print(f"  {name:<9} r{r + 1}: D={ep.effect:5.1f}  sigma1^2={s1:6.0f}  sigma0^2={s0:6.0f}")


def benchmarks():
    print("\nSimulation benchmarks (alpha=0.025, beta=0.2)")
    rows = [
        ("normal", NormalScenario((0.6, 0.4, 0.2)), (EQ3, UN3), 2),
        ("normal", NormalScenario((0.8, 0.6, 0.4, 0.2)), (EQ4, UN4), 2),
        ("binary", BinaryScenario((0.6, 0.4, 0.2)), (EQ3, UN3), 2),
        ("binary", BinaryScenario((0.6, 0.4, 0.3, 0.1)), (EQ4, UN4), 2),
        ("PH", ProportionalHazardsScenario((0.7, 0.6, 0.4)), (EQ3, UN3), 2),
        ("PH", ProportionalHazardsScenario((0.8, 0.7, 0.5, 0.4)), (EQ4, UN4), 2),
    ] + [(f"RMST {n}", RMSTScenario(*rmst_models(n)), (EQ4, DN4), None)
         for n in ("early", "late", "crossing")]
    for label, scen, fracs, decimals in rows:
        for f in fracs:
            cfg = SimulationConfig(scen, DesignConfig(alpha=0.025, beta=0.2, fractions=f),
                                   benchmark_decimals=decimals)
            n0, cp = run_benchmark(cfg)
            print(f"  {label:<14} R={len(f)} f={','.join(f'{x:.2f}' for x in f):<20} n0={n0:<5} CP={cp:.2f}")


def non_inferiority():
    print("\nNon-inferiority redesign, HR margin 1.3, tau^2=0.0077")
    for follow_up in (3.8, 4.5):
        omega = omega_survival_ph(0.018, 1.0, follow_up, 1.0)
        for f in (EQ4, UN4, (0.08, 0.27, 0.30, 0.35)):
            cfg = DesignConfig(alpha=0.025, beta=0.1, fractions=f, margin=math.log(1.3))
            res = solve_overall_n0(RandomEffectsParams(0.0, 0.0077), cfg, regions([omega] * 4))
            cps = ", ".join(f"{100 * c:.1f}" for c in res.cp_per_region)
            print(f"  L={follow_up} f={f}: n0={res.n0}  CP% = {cps}")


def leader():
    print("\nLEADER re-analysis (shrinkage HRs)")
    s = summaries_from_hr(("EU", "NA", "Asia", "ROW"), (0.82, 1.01, 0.62, 0.83),
                          (0.0087, 0.0093, 0.0656, 0.0113))
    rep = analyze_trial(TrialAnalysisInput(tuple(s), margin=math.log(1.3), pi=0.5, scale="log_hr"))
    print(f"  tau2={rep.tau2_hat:.4f}  D={rep.pooled.d_tilde:.3f}  1/w={rep.pooled.variance:.4f}")
    est, lo, hi = rep.overall
    print(f"  overall HR {est:.2f} ({lo:.2f}, {hi:.2f})")
    for row in rep.regions():
        print(f"  {row.region_id:<5} HR {row.estimate:.2f} ({row.lower:.2f}, {row.upper:.2f})"
              f"  NI consistent={row.consistent_ni}  superiority consistent={row.consistent_superiority}")


if __name__ == "__main__":
    sample_sizes()
    regional_cp()
    bounds_and_equal_allocation()
    rmst_parameters()
    benchmarks()
    non_inferiority()
    leader()
