"""Random effects model algebra for regional treatment effects.

Regional estimates ``d_hat[r]`` are treated as ``N(D_r, sigma2[r])`` given the
true regional effect, with ``D_r ~ N(delta, tau2)`` across regions.  This module
holds the inverse-variance weights, the pooled estimate and its Wald test, the
DerSimonian-Laird moment estimator of ``tau2``, and the empirical Bayes
shrinkage estimator of each regional effect together with its variance.
"""

from dataclasses import dataclass, replace
import math

import numpy as np

from .errors import DomainError
from .numerics import std_normal_quantile

__all__ = [
    "RandomEffectsParams",
    "RegionalSummary",
    "PooledInference",
    "ShrinkageResult",
    "compute_weights",
    "pooled_estimate",
    "moment_tau2",
    "naive_hyperparams",
    "posterior_params",
    "shrinkage_estimate",
    "shrink_all",
    "rho_inverse",
    "total_weight_from_h",
    "wald_test",
]


@dataclass(frozen=True)
class RandomEffectsParams:
    """Mean ``delta`` and variance ``tau2`` of the regional-effect prior."""

    delta: float
    tau2: float

    def __post_init__(self):
        if not self.tau2 >= 0:
            raise DomainError(f"tau2 must be non-negative, got {self.tau2!r}")

    @property
    def tau(self):
        return math.sqrt(self.tau2)

    @classmethod
    def from_tau(cls, delta, tau):
        return cls(delta=float(delta), tau2=float(tau) ** 2)


@dataclass(frozen=True)
class RegionalSummary:
    region_id: str
    d_hat: float
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise DomainError(
                f"region {self.region_id!r}: sigma2 must be positive, got {self.sigma2!r}"
            )


@dataclass(frozen=True)
class PooledInference:
    """Inverse-variance pooled estimate of the overall effect.

    ``test_statistic`` and ``significant`` stay ``None`` until
    :func:`wald_test` fills them in.
    """

    d_tilde: float
    weights: tuple
    total_weight: float
    tau2: float
    test_statistic: float = None
    significant: bool = None

    @property
    def variance(self):
        return 1.0 / self.total_weight

    @property
    def sd(self):
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class ShrinkageResult:
    region_id: str
    d_tilde_r: float
    variance: float
    covariance_with_pooled: float
    rho_inv: float
    h: float
    posterior_mean: float
    posterior_variance: float

    @property
    def sd(self):
        return math.sqrt(self.variance)

    def interval(self, level=0.95):
        """Symmetric Wald interval ``d_tilde_r -/+ z * sd`` on the analysis scale."""
        z = std_normal_quantile(0.5 + level / 2.0)
        return self.d_tilde_r - z * self.sd, self.d_tilde_r + z * self.sd


def _as_sigma2(sigma2s):
    sigma2s = np.asarray(sigma2s, dtype=float)
    if sigma2s.ndim != 1 or sigma2s.size == 0:
        raise DomainError("at least one regional variance is required")
    if np.any(~(sigma2s > 0)):
        raise DomainError("regional variances must be positive")
    return sigma2s


def compute_weights(tau2, sigma2s):
    """Random-effects weights ``w_r = 1 / (tau2 + sigma2_r)`` and their sum."""
    if not tau2 >= 0:
        raise DomainError("tau2 must be non-negative")
    w = 1.0 / (tau2 + _as_sigma2(sigma2s))
    return w, float(w.sum())


def _unpack(summaries):
    if len(summaries) < 2:
        raise DomainError("at least two regions are required")
    d_hat = np.array([s.d_hat for s in summaries], dtype=float)
    sigma2 = np.array([s.sigma2 for s in summaries], dtype=float)
    return d_hat, sigma2


def pooled_estimate(summaries, tau2):
    """Weighted overall effect ``sum(w_r d_hat_r) / sum(w_r)``."""
    d_hat, sigma2 = _unpack(summaries)
    w, total = compute_weights(tau2, sigma2)
    return PooledInference(
        d_tilde=float(w @ d_hat / total),
        weights=tuple(float(x) for x in w),
        total_weight=total,
        tau2=float(tau2),
    )


def moment_tau2(summaries):
    """DerSimonian-Laird moment estimator of the between-region variance.

    Uses fixed-effect weights ``1 / sigma2_r`` to form Cochran's Q, then
    ``max(0, (Q - (R - 1)) / (W - sum(w_r^2) / W))``.
    """
    d_hat, sigma2 = _unpack(summaries)
    w = 1.0 / sigma2
    total = w.sum()
    d_fixed = w @ d_hat / total
    q = float(w @ (d_hat - d_fixed) ** 2)
    denom = float(total - (w @ w) / total)
    if denom <= 0:
        raise DomainError("degenerate moment-estimator denominator")
    return max(0.0, (q - (len(d_hat) - 1)) / denom)


def naive_hyperparams(regional_effects, decimals=None):
    """Prior mean and variance from a list of regional effects.

    ``delta`` is the arithmetic mean and ``tau`` the sample standard deviation
    (divisor ``R - 1``).  With ``decimals`` set, ``delta`` and ``tau`` are rounded
    to that many places before ``tau2`` is formed, the way hyperparameters
    are typically reported and re-entered by hand.
    """
    x = np.asarray(regional_effects, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise DomainError("at least two regional effects are required")
    delta = float(x.mean())
    tau = float(x.std(ddof=1))
    if decimals is not None:
        delta = round(delta, decimals)
        tau = round(tau, decimals)
    return RandomEffectsParams.from_tau(delta, tau)


def posterior_params(summary, prior):
    """Posterior mean and variance of ``D_r`` given ``d_hat_r``.

    A zero prior variance collapses the posterior onto ``prior.delta``.
    """
    tau2, s2 = prior.tau2, summary.sigma2
    if tau2 == 0:
        return float(prior.delta), 0.0
    kappa = tau2 / (tau2 + s2)
    mean = kappa * summary.d_hat + (1.0 - kappa) * prior.delta
    return float(mean), float(1.0 / (1.0 / tau2 + 1.0 / s2))


def total_weight_from_h(h_values, tau2):
    """Total weight written through the signal-to-noise ratios ``h_j``."""
    h = np.asarray(h_values, dtype=float)
    return float(np.sum(h / (h + 1.0)) / tau2)


def rho_inverse(h_values, r):
    """``1 / rho_r = var(D_tilde_r) / var(D_tilde)`` from ``h_j = tau2 / sigma2_j``.

    Equals ``1 + q_r * sum_{j != r} q_j`` with ``q_j = h_j / (h_j + 1)``.
    """
    h = np.asarray(h_values, dtype=float)
    if np.any(h < 0):
        raise DomainError("h values must be non-negative")
    q = h / (h + 1.0)
    return float(1.0 + q[r] * (q.sum() - q[r]))


def shrinkage_estimate(summary, tau2, pooled):
    """Empirical Bayes estimate of one regional effect.

    Replaces the prior mean by the pooled estimate in the posterior mean and
    returns the estimator's variance, its covariance with the pooled
    estimate (``1 / w``), ``1 / rho_r`` and ``h_r``.
    """
    if not math.isclose(pooled.tau2, tau2, rel_tol=1e-12, abs_tol=0.0):
        raise DomainError("pooled estimate was computed with a different tau2")
    s2 = summary.sigma2
    w = pooled.total_weight
    w_r = 1.0 / (tau2 + s2)
    if not any(math.isclose(w_r, x, rel_tol=1e-12) for x in pooled.weights):
        raise DomainError(
            f"region {summary.region_id!r} is not part of the pooled estimate"
        )
    kappa = tau2 / (tau2 + s2)
    d_tilde_r = kappa * summary.d_hat + (1.0 - kappa) * pooled.d_tilde
    var = w_r * tau2 * tau2 + s2 * (2.0 * tau2 + s2) / (w * (tau2 + s2) ** 2)
    post_mean, post_var = posterior_params(
        summary, RandomEffectsParams(pooled.d_tilde, tau2)
    )
    return ShrinkageResult(
        region_id=summary.region_id,
        d_tilde_r=float(d_tilde_r),
        variance=float(var),
        covariance_with_pooled=1.0 / w,
        rho_inv=float(var * w),
        h=float(tau2 / s2),
        posterior_mean=post_mean,
        posterior_variance=post_var,
    )


def shrink_all(summaries, tau2, pooled=None):
    """Shrinkage estimates for every region, pooling first if needed."""
    if pooled is None:
        pooled = pooled_estimate(summaries, tau2)
    return [shrinkage_estimate(s, tau2, pooled) for s in summaries]


def wald_test(pooled, alpha, margin=0.0):
    """One-sided z-test of the pooled effect against ``-margin``.

    ``T = (d_tilde + margin) * sqrt(w)``; the result is significant when
    ``T > z_{1-alpha}``.  ``margin = 0`` is the superiority test.
    """
    if not margin >= 0:
        raise DomainError("margin must be non-negative")
    t = (pooled.d_tilde + margin) * math.sqrt(pooled.total_weight)
    return replace(
        pooled,
        test_statistic=float(t),
        significant=bool(t > std_normal_quantile(1.0 - alpha)),
    )
