"""Monte Carlo assessment of a design's power and consistency probability.

The study runs in three steps:

1. **Benchmark** - prior mean and SD from the true regional effects, then the
   overall sample size and the CP of the region of interest.
2. **Design** - draw a training sample per arm and region from the true
   models, estimate the regional effects and variance scales, and redo the
   design with the estimates.
3. **Verification** - with the designed size, draw regional effects from the
   estimated prior, simulate and analyse ``m_verify`` trials, and compare the
   empirical power and CP with their design values.

Steps 2 and 3 are repeated ``m_design`` times.  Replication ``i`` draws all its
random numbers from a stream that depends only on ``(master_seed, i)``, so
results do not depend on execution order or on ``n_jobs``.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import math

import numpy as np

from .design import (
    DesignConfig,
    RegionDesignInput,
    consistency_probability,
    regional_sizes,
    solve_overall_n0,
)
from .endpoints import (
    PiecewiseExponential,
    UniformCensoring,
    Weibull,
    calibrate_piecewise_late_rate,
    calibrate_weibull_shape,
    omega_binary,
    omega_continuous,
    omega_survival_ph,
    rmst,
    rmst_true_variance,
)
from .errors import (
    CalibrationError,
    ConvergenceError,
    DomainError,
    EstimationError,
    InfeasibleDesignError,
)
from .model import (
    RegionalSummary,
    moment_tau2,
    naive_hyperparams,
    pooled_estimate,
    shrinkage_estimate,
    wald_test,
)
from .survival import cox_loghr, rmst_estimate, rmst_variance_estimate

__all__ = [
    "NormalScenario",
    "BinaryScenario",
    "ProportionalHazardsScenario",
    "RMSTScenario",
    "SimulationConfig",
    "DesignOutcome",
    "VerificationSummary",
    "ReplicationRecord",
    "SimulationReport",
    "replication_rng",
    "run_benchmark",
    "benchmark_outcome",
    "run_design_replication",
    "run_verification",
    "verify_design",
    "simulate_study",
    "generate_regional_data",
]

_P_CLAMP = 1e-6


# ---------------------------------------------------------------------------
# Endpoint scenarios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalScenario:
    """Normal responses; the treatment mean is shifted by the regional effect."""

    effects: tuple
    sigma2_0: float = 1.0
    sigma2_1: float = 1.0
    kind = "normal"

    @property
    def n_regions(self):
        return len(self.effects)

    def true_effects(self):
        return [float(x) for x in self.effects]

    def true_omegas(self, ell):
        return [omega_continuous(self.sigma2_0, self.sigma2_1, ell)] * self.n_regions

    def draw(self, rng, r, effect, n0, n1):
        effect = self.effects[r] if effect is None else effect
        return {
            "y0": rng.normal(0.0, math.sqrt(self.sigma2_0), n0),
            "y1": rng.normal(effect, math.sqrt(self.sigma2_1), n1),
            "clamped": 0,
        }

    def estimate(self, data, ell):
        y0, y1 = data["y0"], data["y1"]
        n0, n1 = len(y0), len(y1)
        if n0 < 2 or n1 < 2:
            raise EstimationError("each arm needs at least two responses")
        s0, s1 = y0.var(ddof=1), y1.var(ddof=1)
        pooled = ((n0 - 1) * s0 + (n1 - 1) * s1) / (n0 + n1 - 2)
        if not (s0 > 0 and s1 > 0):
            raise EstimationError("zero within-group variance")
        return (
            float(y1.mean() - y0.mean()),
            float(pooled * (1.0 / n0 + 1.0 / n1)),
            float(s1 / ell + s0),
        )


@dataclass(frozen=True)
class BinaryScenario:
    """Bernoulli responses with control rate ``p0`` and treatment ``p0 + D``."""

    effects: tuple
    p0: float = 0.3
    kind = "binary"

    @property
    def n_regions(self):
        return len(self.effects)

    def true_effects(self):
        return [float(x) for x in self.effects]

    def true_omegas(self, ell):
        return [omega_binary(self.p0, self.p0 + d, ell) for d in self.effects]

    def draw(self, rng, r, effect, n0, n1):
        effect = self.effects[r] if effect is None else effect
        p1 = self.p0 + effect
        clamped = int(not _P_CLAMP <= p1 <= 1 - _P_CLAMP)
        p1 = min(max(p1, _P_CLAMP), 1 - _P_CLAMP)
        return {
            "y0": rng.random(n0) < self.p0,
            "y1": rng.random(n1) < p1,
            "clamped": clamped,
        }

    def estimate(self, data, ell):
        y0, y1 = data["y0"], data["y1"]
        n0, n1 = len(y0), len(y1)
        p0, p1 = y0.mean(), y1.mean()
        v0, v1 = p0 * (1 - p0), p1 * (1 - p1)
        sigma2 = v1 / n1 + v0 / n0
        if not sigma2 > 0:
            raise EstimationError("all responses identical in both arms")
        omega = v1 / ell + v0
        return float(p1 - p0), float(sigma2), float(omega)


@dataclass(frozen=True)
class ProportionalHazardsScenario:
    """Exponential event times, administrative censoring at ``follow_up``.

    Regional effects are negative log hazard ratios.
    """

    hazard_ratios: tuple
    lambda0: float = 0.05
    follow_up: float = 36.0
    kind = "survival_ph"

    @property
    def n_regions(self):
        return len(self.hazard_ratios)

    def true_effects(self):
        return [-math.log(hr) for hr in self.hazard_ratios]

    def true_omegas(self, ell):
        return [
            omega_survival_ph(self.lambda0, hr, self.follow_up, ell)
            for hr in self.hazard_ratios
        ]

    def draw(self, rng, r, effect, n0, n1):
        effect = -math.log(self.hazard_ratios[r]) if effect is None else effect
        lam1 = self.lambda0 * math.exp(-effect)
        t0 = rng.exponential(1.0 / self.lambda0, n0)
        t1 = rng.exponential(1.0 / lam1, n1)
        time = np.minimum(np.concatenate((t0, t1)), self.follow_up)
        event = np.concatenate((t0, t1)) <= self.follow_up
        group = np.concatenate((np.zeros(n0, int), np.ones(n1, int)))
        return {"time": time, "event": event, "group": group, "clamped": 0}

    def estimate(self, data, ell):
        try:
            d_hat, _ = cox_loghr(data["time"], data["event"], data["group"])
        except (ConvergenceError, DomainError) as exc:
            raise EstimationError(f"Cox fit failed: {exc}") from exc
        group, event = data["group"], data["event"]
        events = int(event.sum())
        sigma2 = (ell + 1.0) ** 2 / (ell * events)
        p0 = event[group == 0].mean()
        p1 = event[group == 1].mean()
        omega = (ell + 1.0) ** 2 / (ell * (p0 + ell * p1))
        return float(d_hat), float(sigma2), float(omega)


@dataclass(frozen=True)
class RMSTScenario:
    """Non-proportional hazards; effects are RMST differences at ``eta``.

    ``controls`` and ``treatments`` hold one event-time model per region
    (:class:`PiecewiseExponential` or :class:`Weibull`).  In verification the
    treatment arm is recalibrated to the drawn effect: the late hazard of a
    piecewise model, or the shape of a Weibull model.
    """

    controls: tuple
    treatments: tuple
    eta: float = 80.0
    censoring: object = UniformCensoring(0.0, 240.0)
    kind = "survival_rmst"

    def __post_init__(self):
        if len(self.controls) != len(self.treatments):
            raise DomainError("one control and one treatment model per region")

    @property
    def n_regions(self):
        return len(self.controls)

    def true_effects(self):
        return [
            rmst(t, self.eta) - rmst(c, self.eta)
            for c, t in zip(self.controls, self.treatments)
        ]

    def arm_variances(self):
        return [
            (
                rmst_true_variance(c, self.censoring, self.eta),
                rmst_true_variance(t, self.censoring, self.eta),
            )
            for c, t in zip(self.controls, self.treatments)
        ]

    def true_omegas(self, ell):
        return [s0 + s1 / ell for s0, s1 in self.arm_variances()]

    def treatment_for(self, r, effect):
        """Treatment model of region ``r`` tuned to an RMST difference."""
        ctl, trt = self.controls[r], self.treatments[r]
        if isinstance(ctl, PiecewiseExponential):
            g = calibrate_piecewise_late_rate(
                ctl.early_rate, ctl.late_rate, trt.early_rate,
                ctl.change_point, self.eta, effect,
            )
            return PiecewiseExponential(trt.early_rate, g, ctl.change_point)
        if isinstance(ctl, Weibull):
            nu = calibrate_weibull_shape(ctl.shape, ctl.scale, trt.scale, self.eta, effect)
            return Weibull(nu, trt.scale)
        raise DomainError(f"no calibration rule for {type(ctl).__name__}")

    def draw(self, rng, r, effect, n0, n1):
        trt = self.treatments[r] if effect is None else self.treatment_for(r, effect)
        t = np.concatenate((self.controls[r].sample(rng, n0), trt.sample(rng, n1)))
        c = self.censoring.sample(rng, n0 + n1)
        group = np.concatenate((np.zeros(n0, int), np.ones(n1, int)))
        return {"time": np.minimum(t, c), "event": t <= c, "group": group, "clamped": 0}

    def estimate(self, data, ell):
        time, event, group = data["time"], data["event"], data["group"]
        mu, var, n = [], [], []
        for k in (0, 1):
            sel = group == k
            mu.append(rmst_estimate(time[sel], event[sel], self.eta))
            var.append(rmst_variance_estimate(time[sel], event[sel], self.eta))
            n.append(int(sel.sum()))
        sigma2 = var[1] / n[1] + var[0] / n[0]
        if not sigma2 > 0:
            raise EstimationError("RMST variance estimate is zero")
        return float(mu[1] - mu[0]), float(sigma2), float(var[1] / ell + var[0])


def generate_regional_data(scenario, r, effect, n0_region, ell, rng):
    """Subject-level data for one region: ``n0_region`` controls and
    ``round(ell * n0_region)`` treated subjects."""
    n1 = int(round(ell * n0_region))
    return scenario.draw(rng, r, effect, int(n0_region), n1)


# ---------------------------------------------------------------------------
# Configuration and results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimulationConfig:
    """Everything needed to run the three-step study.

    Parameters
    ----------
    scenario : NormalScenario, BinaryScenario, ProportionalHazardsScenario or RMSTScenario
    design : DesignConfig
        Error rates, ``pi``, ``ell``, margin and regional fractions.
    training_n : int
        Training sample size per arm and region in the design step.
    m_design, m_verify : int
        Number of design replications and of verification trials per design.
    master_seed : int
    region_of_interest : int
    benchmark_decimals : int or None
        Round the benchmark prior mean and SD to this many decimals.
    rounding : {"ceil", "largest_remainder"}
        Rule that turns ``n0 f_r`` into regional group sizes.
    """

    scenario: object
    design: DesignConfig
    training_n: int = 1000
    m_design: int = 1000
    m_verify: int = 1000
    master_seed: int = 20240101
    region_of_interest: int = 0
    benchmark_decimals: int = None
    rounding: str = "ceil"

    def __post_init__(self):
        if self.m_design < 1 or self.m_verify < 1:
            raise DomainError("m_design and m_verify must be at least 1")
        if self.training_n < 2:
            raise DomainError("training_n must be at least 2")
        if self.scenario.n_regions != self.design.n_regions:
            raise DomainError(
                f"scenario has {self.scenario.n_regions} regions, design has "
                f"{self.design.n_regions} fractions"
            )


@dataclass(frozen=True)
class DesignOutcome:
    """Parameters handed from a design replication to verification."""

    n0: int
    cp: float
    delta: float
    tau: float
    effects: tuple = ()
    omegas: tuple = ()


@dataclass(frozen=True)
class VerificationSummary:
    n_trials: int
    n_significant: int
    n_consistent: int
    n_flagged: int
    n_clamped: int

    @property
    def n_valid(self):
        return self.n_trials - self.n_flagged

    @property
    def power(self):
        return self.n_significant / self.n_valid if self.n_valid else math.nan

    @property
    def cp(self):
        return self.n_consistent / self.n_significant if self.n_significant else math.nan


@dataclass(frozen=True)
class ReplicationRecord:
    index: int
    n0_design: int
    cp_design: float
    delta_design: float
    tau_design: float
    empirical_power: float
    empirical_cp: float
    dev_power: float
    dev_cp: float
    n_significant: int
    n_consistent: int
    n_verify_valid: int
    n_verify_flagged: int
    n_clamped: int
    flag: str = ""


@dataclass
class SimulationReport:
    benchmark_n0: int
    benchmark_cp: float
    benchmark_delta: float
    benchmark_tau: float
    median_n0_design: float
    mad_n0_design: float
    mean_cp_design: float
    mean_dev_power: float
    mean_dev_cp: float
    m_design: int
    m_verify: int
    n_design_flagged: int
    n_design_infeasible: int
    n_verify_flagged: int
    n_clamped: int
    master_seed: int
    records: list = field(default_factory=list)

    @property
    def design_flag_rate(self):
        return self.n_design_flagged / self.m_design

    @property
    def verify_flag_rate(self):
        valid = self.m_design - self.n_design_flagged
        return self.n_verify_flagged / (valid * self.m_verify) if valid else 0.0

    def summary(self):
        """Aggregate fields (no per-replication records) as a plain dict."""
        out = {k: v for k, v in asdict(self).items() if k != "records"}
        out["design_flag_rate"] = self.design_flag_rate
        out["verify_flag_rate"] = self.verify_flag_rate
        return out


# ---------------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------------

def replication_rng(master_seed, index):
    """Independent generator for replication ``index``."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(seq))


def _regions(omegas):
    return [RegionDesignInput(f"region{r + 1}", float(o)) for r, o in enumerate(omegas)]


def _design_for(effects, omegas, config):
    design = solve_overall_n0(effects, config.design, _regions(omegas), with_cp=False)
    cp = consistency_probability(
        effects, config.design, _regions(omegas), design.n0, config.region_of_interest
    )
    return design.n0, cp


def run_benchmark(config):
    """Design from the true parameters: ``(n0, CP of the region of interest)``."""
    outcome = benchmark_outcome(config)
    return outcome.n0, outcome.cp


def benchmark_outcome(config):
    effects_true = config.scenario.true_effects()
    omegas = config.scenario.true_omegas(config.design.ell)
    prior = naive_hyperparams(effects_true, decimals=config.benchmark_decimals)
    n0, cp = _design_for(prior, omegas, config)
    return DesignOutcome(
        n0=n0, cp=cp, delta=prior.delta, tau=prior.tau,
        effects=tuple(effects_true), omegas=tuple(omegas),
    )


def run_design_replication(config, rng):
    """Re-estimate the design inputs from one simulated training sample.

    Returns
    -------
    DesignOutcome

    Raises
    ------
    EstimationError
        When a regional training sample is degenerate.
    InfeasibleDesignError
        When the estimated heterogeneity rules out any finite design.
    """
    scen, ell = config.scenario, config.design.ell
    n1 = int(round(ell * config.training_n))
    effects, omegas = [], []
    for r in range(scen.n_regions):
        data = scen.draw(rng, r, None, config.training_n, n1)
        d_hat, _, omega = scen.estimate(data, ell)
        effects.append(d_hat)
        omegas.append(omega)
    prior = naive_hyperparams(effects)
    n0, cp = _design_for(prior, omegas, config)
    return DesignOutcome(
        n0=n0, cp=cp, delta=prior.delta, tau=prior.tau,
        effects=tuple(effects), omegas=tuple(omegas),
    )


def _draw_trial(outcome, config, rng, n0_regions):
    scen, ell = config.scenario, config.design.ell
    summaries, clamped = [], 0
    for r in range(scen.n_regions):
        effect = rng.normal(outcome.delta, outcome.tau)
        try:
            data = generate_regional_data(scen, r, effect, n0_regions[r], ell, rng)
        except CalibrationError:
            effect = rng.normal(outcome.delta, outcome.tau)
            data = generate_regional_data(scen, r, effect, n0_regions[r], ell, rng)
        clamped += data["clamped"]
        d_hat, sigma2, _ = scen.estimate(data, ell)
        summaries.append(RegionalSummary(f"region{r + 1}", d_hat, sigma2))
    return summaries, clamped


def run_verification(outcome, config, rng):
    """Simulate and analyse one trial at the designed size.

    Returns
    -------
    (bool, bool or None, int)
        Overall significance, consistency of the region of interest (``None``
        when not significant) and the number of clamped Bernoulli rates.

    Raises
    ------
    CalibrationError, EstimationError
        When the trial cannot be generated or analysed; callers flag it.
    """
    n0_regions = regional_sizes(outcome.n0, config.design.fractions, config.rounding)
    summaries, clamped = _draw_trial(outcome, config, rng, n0_regions)
    tau2 = moment_tau2(summaries)
    pooled = wald_test(
        pooled_estimate(summaries, tau2), config.design.alpha, config.design.margin
    )
    if not pooled.significant:
        return False, None, clamped
    shr = shrinkage_estimate(summaries[config.region_of_interest], tau2, pooled)
    m, pi = config.design.margin, config.design.pi
    consistent = shr.d_tilde_r + m >= pi * (pooled.d_tilde + m)
    return True, bool(consistent), clamped


def verify_design(outcome, config, rng, m_verify=None):
    """Run ``m_verify`` verification trials and tally the outcomes."""
    m = config.m_verify if m_verify is None else m_verify
    sig = cons = flagged = clamped = 0
    for _ in range(m):
        try:
            s, c, k = run_verification(outcome, config, rng)
        except (CalibrationError, EstimationError):
            flagged += 1
            continue
        clamped += k
        sig += s
        cons += bool(c)
    return VerificationSummary(m, sig, cons, flagged, clamped)


def _replicate(config, index):
    rng = replication_rng(config.master_seed, index)
    try:
        outcome = run_design_replication(config, rng)
    except (EstimationError, InfeasibleDesignError, DomainError) as exc:
        kind = "infeasible" if isinstance(exc, InfeasibleDesignError) else "estimation"
        msg = str(exc)
        return ReplicationRecord(
            index=index, n0_design=0, cp_design=math.nan, delta_design=math.nan,
            tau_design=math.nan, empirical_power=math.nan, empirical_cp=math.nan,
            dev_power=math.nan, dev_cp=math.nan, n_significant=0,
            n_consistent=0, n_verify_valid=0, n_verify_flagged=0, n_clamped=0,
            flag=msg if msg.startswith(kind) else f"{kind}: {msg}",
        )
    ver = verify_design(outcome, config, rng)
    target = 1.0 - config.design.beta
    return ReplicationRecord(
        index=index,
        n0_design=outcome.n0,
        cp_design=outcome.cp,
        delta_design=outcome.delta,
        tau_design=outcome.tau,
        empirical_power=ver.power,
        empirical_cp=ver.cp,
        dev_power=abs(ver.power - target),
        dev_cp=abs(ver.cp - outcome.cp),
        n_significant=ver.n_significant,
        n_consistent=ver.n_consistent,
        n_verify_valid=ver.n_valid,
        n_verify_flagged=ver.n_flagged,
        n_clamped=ver.n_clamped,
    )


def _replicate_star(args):
    return _replicate(*args)


def simulate_study(config, n_jobs=1):
    """Run the full study and aggregate it into a :class:`SimulationReport`.

    Parameters
    ----------
    config : SimulationConfig
    n_jobs : int
        Worker processes; results are identical for any value.
    """
    bench = benchmark_outcome(config)
    jobs = [(config, i) for i in range(config.m_design)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            records = list(pool.map(_replicate_star, jobs, chunksize=4))
    else:
        records = [_replicate(*job) for job in jobs]
    records.sort(key=lambda rec: rec.index)
    ok = [rec for rec in records if not rec.flag]
    if ok:
        n0s = np.array([rec.n0_design for rec in ok], dtype=float)
        med = float(np.median(n0s))
        mad = float(np.median(np.abs(n0s - med)))
        mean_cp = float(np.mean([rec.cp_design for rec in ok]))
        mean_dev_power = float(np.nanmean([rec.dev_power for rec in ok]))
        dev_cp = [rec.dev_cp for rec in ok if not math.isnan(rec.dev_cp)]
        mean_dev_cp = float(np.mean(dev_cp)) if dev_cp else math.nan
    else:
        med = mad = mean_cp = mean_dev_power = mean_dev_cp = math.nan
    return SimulationReport(
        benchmark_n0=bench.n0,
        benchmark_cp=bench.cp,
        benchmark_delta=bench.delta,
        benchmark_tau=bench.tau,
        median_n0_design=med,
        mad_n0_design=mad,
        mean_cp_design=mean_cp,
        mean_dev_power=mean_dev_power,
        mean_dev_cp=mean_dev_cp,
        m_design=config.m_design,
        m_verify=config.m_verify,
        n_design_flagged=len(records) - len(ok),
        n_design_infeasible=sum(rec.flag.startswith("infeasible") for rec in records),
        n_verify_flagged=sum(rec.n_verify_flagged for rec in ok),
        n_clamped=sum(rec.n_clamped for rec in records),
        master_seed=config.master_seed,
        records=records,
    )
