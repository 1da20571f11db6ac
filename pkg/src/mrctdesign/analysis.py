"""Re-analysis of a completed trial from regional summary statistics.

Given each region's effect estimate and its variance, estimate the
between-region variance, pool, shrink every regional effect toward the pooled
one and flag regions that keep at least a fraction ``pi`` of the overall
effect.  Hazard-ratio summaries are analysed as ``-log HR`` and reported back
on the HR scale.
"""

from dataclasses import dataclass
import csv
import math

from .errors import DomainError
from .model import (
    RegionalSummary,
    moment_tau2,
    pooled_estimate,
    shrink_all,
    wald_test,
)
from .numerics import std_normal_quantile

__all__ = [
    "TrialAnalysisInput",
    "TrialAnalysisReport",
    "analyze_trial",
    "schoenfeld_sigma2",
    "summaries_from_hr",
    "read_summaries_csv",
]

SCALES = ("identity", "log_hr")


def schoenfeld_sigma2(events, ell=1.0):
    """Large-sample variance ``(ell + 1)^2 / (ell * events)`` of a log hazard ratio."""
    if not events > 0:
        raise DomainError("at least one event is required")
    if not ell > 0:
        raise DomainError("allocation ratio must be positive")
    return (ell + 1.0) ** 2 / (ell * events)


def summaries_from_hr(region_ids, hazard_ratios, sigma2s):
    """Regional summaries on the ``-log HR`` scale."""
    out = []
    for rid, hr, s2 in zip(region_ids, hazard_ratios, sigma2s, strict=True):
        if not hr > 0:
            raise DomainError(f"region {rid!r}: hazard ratio must be positive")
        out.append(RegionalSummary(str(rid), -math.log(hr), float(s2)))
    return out


@dataclass(frozen=True)
class TrialAnalysisInput:
    """Regional summaries plus the decision settings.

    ``summaries`` are on the analysis scale (larger is better, e.g.
    ``-log HR``); ``scale="log_hr"`` only changes how results are reported.
    """

    summaries: tuple
    margin: float = 0.0
    alpha: float = 0.025
    pi: float = 0.5
    scale: str = "identity"
    ci_level: float = 0.95

    def __post_init__(self):
        if len(self.summaries) < 2:
            raise DomainError("at least two regions are required")
        if not self.margin >= 0:
            raise DomainError("margin must be non-negative")
        if not 0 < self.alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")
        if not 0.5 <= self.pi <= 1:
            raise DomainError("pi must lie in [0.5, 1]")
        if not 0 < self.ci_level < 1:
            raise DomainError("ci_level must lie in (0, 1)")
        if self.scale not in SCALES:
            raise DomainError(f"scale must be one of {SCALES}")


@dataclass(frozen=True)
class RegionReport:
    region_id: str
    estimate: float
    shrunken: float
    sd: float
    lower: float
    upper: float
    consistent_superiority: bool
    consistent_ni: bool


@dataclass(frozen=True)
class TrialAnalysisReport:
    tau2_hat: float
    pooled: object
    shrinkage: tuple
    intervals: tuple
    pooled_interval: tuple
    consistency_superiority: tuple
    consistency_ni: tuple
    scale: str = "identity"

    def _out(self, x):
        return math.exp(-x) if self.scale == "log_hr" else x

    def _out_interval(self, lo, hi):
        # exp(-x) reverses the order of the bounds
        if self.scale == "log_hr":
            return math.exp(-hi), math.exp(-lo)
        return lo, hi

    @property
    def overall(self):
        """Pooled effect and interval on the reporting scale."""
        lo, hi = self._out_interval(*self.pooled_interval)
        return self._out(self.pooled.d_tilde), lo, hi

    def regions(self):
        """Per-region rows on the reporting scale."""
        rows = []
        for shr, (lo, hi), sup, ni in zip(
            self.shrinkage, self.intervals,
            self.consistency_superiority, self.consistency_ni,
        ):
            lo, hi = self._out_interval(lo, hi)
            rows.append(RegionReport(
                region_id=shr.region_id,
                estimate=self._out(shr.d_tilde_r),
                shrunken=shr.d_tilde_r,
                sd=shr.sd,
                lower=lo,
                upper=hi,
                consistent_superiority=sup,
                consistent_ni=ni,
            ))
        return rows

    def to_dict(self):
        est, lo, hi = self.overall
        return {
            "scale": self.scale,
            "tau2_hat": self.tau2_hat,
            "pooled": {
                "d_tilde": self.pooled.d_tilde,
                "variance": self.pooled.variance,
                "test_statistic": self.pooled.test_statistic,
                "significant": self.pooled.significant,
                "estimate": est,
                "lower": lo,
                "upper": hi,
            },
            "regions": [
                {
                    "region_id": row.region_id,
                    "d_tilde_r": row.shrunken,
                    "sd": row.sd,
                    "estimate": row.estimate,
                    "lower": row.lower,
                    "upper": row.upper,
                    "consistent_superiority": row.consistent_superiority,
                    "consistent_ni": row.consistent_ni,
                }
                for row in self.regions()
            ],
        }


def analyze_trial(inp):
    """Random-effects re-analysis with shrinkage and consistency flags.

    Intervals are two-sided Wald intervals ``estimate -/+ z sd`` on the
    analysis scale, with ``z`` the ``(1 + ci_level) / 2`` normal quantile.
    ``alpha`` is the one-sided level of the overall test only.

    Parameters
    ----------
    inp : TrialAnalysisInput

    Returns
    -------
    TrialAnalysisReport
    """
    summaries = list(inp.summaries)
    tau2 = moment_tau2(summaries)
    pooled = wald_test(pooled_estimate(summaries, tau2), inp.alpha, inp.margin)
    shrunk = shrink_all(summaries, tau2, pooled)
    z = std_normal_quantile(0.5 + inp.ci_level / 2.0)
    intervals = tuple((s.d_tilde_r - z * s.sd, s.d_tilde_r + z * s.sd) for s in shrunk)
    d, m, pi = pooled.d_tilde, inp.margin, inp.pi
    return TrialAnalysisReport(
        tau2_hat=tau2,
        pooled=pooled,
        shrinkage=tuple(shrunk),
        intervals=intervals,
        pooled_interval=(d - z * pooled.sd, d + z * pooled.sd),
        consistency_superiority=tuple(bool(s.d_tilde_r >= pi * d) for s in shrunk),
        consistency_ni=tuple(bool(s.d_tilde_r + m >= pi * (d + m)) for s in shrunk),
        scale=inp.scale,
    )


def read_summaries_csv(path, scale="identity", ell=1.0):
    """Read ``region,estimate_or_hr,variance_or_events`` rows.

    With ``scale="log_hr"`` the second column holds hazard ratios.  A
    third-column value that is a whole number of at least 2 is read as an event
    count and converted with :func:`schoenfeld_sigma2`; anything else is a variance.
    """
    ids, est, var = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"region", "estimate_or_hr", "variance_or_events"}
        if not need <= set(reader.fieldnames or ()):
            raise DomainError(f"{path}: expected columns {sorted(need)}")
        for line, row in enumerate(reader, start=2):
            try:
                x = float(row["estimate_or_hr"])
                v = float(row["variance_or_events"])
            except ValueError as exc:
                raise DomainError(f"{path}:{line}: {exc}") from exc
            if v >= 2 and v == int(v):
                v = schoenfeld_sigma2(int(v), ell)
            ids.append(row["region"])
            est.append(x)
            var.append(v)
    if scale == "log_hr":
        return summaries_from_hr(ids, est, var)
    return [RegionalSummary(i, x, v) for i, x, v in zip(ids, est, var)]
