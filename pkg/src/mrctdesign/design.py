"""Overall sample size and regional consistency probability.

The control-group size ``n0`` solves

    sum_r 1 / (tau2 + omega_r / (n0 f_r)) = (z_{1-alpha} + z_{1-beta})^2 / (delta + M)^2,

and the consistency probability of region ``r`` (probability that the
shrunken regional effect is at least ``pi`` times the pooled effect, given
overall significance) is the truncated-normal average

    CP_r = E[ Phi((1 - pi)(U + z_{1-alpha} + z_{1-beta}) / sqrt(1/rho_r - 1)) | U > z_beta ].

Non-inferiority designs substitute ``delta + M`` for ``delta`` throughout.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, InfeasibleDesignError, NotAvailableError
from .model import rho_inverse
from .numerics import (
    DEFAULT_QUADRATURE,
    find_root,
    std_normal_cdf,
    std_normal_quantile,
    truncated_normal_expectation,
)

__all__ = [
    "DesignConfig",
    "RegionDesignInput",
    "DesignResult",
    "Feasibility",
    "ProfilePoint",
    "ATTAINED",
    "UNATTAINED",
    "z_sum",
    "check_feasibility",
    "solve_overall_n0",
    "closed_form_n0",
    "consistency_probability",
    "cp_from_rho_inverse",
    "cp_lower_bound",
    "lower_bound_design",
    "cp_equal_allocation",
    "cp_profile",
    "regional_sizes",
]

ATTAINED = "attained"
UNATTAINED = "unattained"

# below this 1/rho - 1 the CP integrand argument overflows; the limit is 1
_DEGENERATE_RHO = 1e-14
_FRACTION_TOL = 1e-9


@dataclass(frozen=True)
class DesignConfig:
    """Trial-level design parameters.

    Parameters
    ----------
    alpha : float
        One-sided significance level.
    beta : float
        Type II error; the design targets power ``1 - beta``.
    pi : float
        Fraction of the overall effect a region must retain to be consistent.
    ell : float
        Randomization ratio, treatment to control, common to all regions.
    fractions : sequence of float
        Regional shares ``f_r`` of the overall sample size (sum to one).
    margin : float
        Non-inferiority margin ``M`` on the effect scale; 0 for superiority.
    assurance : float
        Required consistency probability ``1 - gamma``.
    """

    alpha: float = 0.025
    beta: float = 0.1
    pi: float = 0.5
    ell: float = 1.0
    fractions: tuple = ()
    margin: float = 0.0
    assurance: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        if not 0 < self.alpha < 0.5:
            raise DomainError(f"alpha must lie in (0, 0.5), got {self.alpha!r}")
        if not 0 < self.beta < 0.5:
            raise DomainError(f"beta must lie in (0, 0.5), got {self.beta!r}")
        if not 0.5 <= self.pi <= 1:
            raise DomainError(f"pi must lie in [0.5, 1], got {self.pi!r}")
        if not self.ell > 0:
            raise DomainError("ell must be positive")
        if not self.margin >= 0:
            raise DomainError("margin must be non-negative")
        if not 0 < self.assurance <= 1:
            raise DomainError("assurance must lie in (0, 1]")
        if self.fractions:
            if any(not f > 0 for f in self.fractions):
                raise DomainError("regional fractions must be positive")
            total = math.fsum(self.fractions)
            if abs(total - 1.0) > _FRACTION_TOL:
                raise DomainError(f"fractions sum to {total:.10g}, not 1")

    @property
    def n_regions(self):
        return len(self.fractions)

    @property
    def z_sum(self):
        return z_sum(self.alpha, self.beta)

    def with_fractions(self, fractions):
        return DesignConfig(
            alpha=self.alpha, beta=self.beta, pi=self.pi, ell=self.ell,
            fractions=tuple(fractions), margin=self.margin,
            assurance=self.assurance,
        )


@dataclass(frozen=True)
class RegionDesignInput:
    """Variance scale of one region: ``var(D_hat_r) = omega / (n0 f_r)``."""

    region_id: str
    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise DomainError(f"region {self.region_id!r}: omega must be positive")


@dataclass(frozen=True)
class DesignResult:
    n0: int
    n1: int
    n0_continuous: float
    regional_n0: tuple
    regional_n1: tuple
    achieved_w: float
    target_w: float
    cp_per_region: tuple
    meets_assurance: tuple
    feasible: bool = True
    region_ids: tuple = ()


@dataclass(frozen=True)
class Feasibility:
    """Outcome of :func:`check_feasibility`.

    ``ratio`` is ``tau / (delta + M)``; the design exists iff it is below
    ``limit = sqrt(R) / z_sum``.  ``attainability_threshold`` is the value
    ``sqrt(2) / z_sum`` under which the worst-case CP bound is attained.
    """

    feasible: bool
    ratio: float
    limit: float
    attainability_threshold: float
    standard_thresholds: dict = field(default_factory=dict)
    message: str = ""


@dataclass(frozen=True)
class ProfilePoint:
    f_r: float
    n0: int
    n0_region: int
    cp: float
    rho_inv: float


def z_sum(alpha, beta):
    """``z_{1-alpha} + z_{1-beta}``."""
    return std_normal_quantile(1.0 - alpha) + std_normal_quantile(1.0 - beta)


def _effective_delta(effects, config):
    d = effects.delta + config.margin
    if not d > 0:
        raise DomainError(
            f"delta + margin must be positive, got {d!r}"
        )
    return d


_STANDARD_PAIRS = ((0.025, 0.1), (0.025, 0.2), (0.05, 0.1), (0.05, 0.2))


def check_feasibility(effects, config, n_regions):
    """Whether ``tau / (delta + M) < sqrt(R) / (z_{1-alpha} + z_{1-beta})``."""
    zs = config.z_sum
    limit = math.sqrt(n_regions) / zs
    d = effects.delta + config.margin
    if effects.tau2 == 0:
        ratio = 0.0
    elif d > 0:
        ratio = effects.tau / d
    else:
        ratio = math.inf
    feasible = ratio < limit
    standard = {
        f"alpha={a},beta={b}": math.sqrt(2.0) / z_sum(a, b) for a, b in _STANDARD_PAIRS
    }
    if feasible:
        message = f"feasible: tau/(delta+M) = {ratio:.4g} < sqrt(R)/(z_(1-alpha)+z_(1-beta)) = {limit:.4g}"
    else:
        message = (
            f"infeasible: tau/(delta+M) = {ratio:.4g} must be below "
            f"sqrt(R)/(z_(1-alpha)+z_(1-beta)) = sqrt({n_regions})/{zs:.4f} = {limit:.4g}"
        )
    return Feasibility(
        feasible=feasible,
        ratio=ratio,
        limit=limit,
        attainability_threshold=math.sqrt(2.0) / zs,
        standard_thresholds=standard,
        message=message,
    )


def _omegas(regions, config):
    omegas = np.array([r.omega for r in regions], dtype=float)
    if len(omegas) != config.n_regions:
        raise DomainError(
            f"{len(omegas)} regions but {config.n_regions} fractions"
        )
    if len(omegas) < 1:
        raise DomainError("at least one region is required")
    return omegas


def _ceil(x):
    # absorbs round-off when the continuous root is an integer
    return int(math.ceil(x - 1e-9))


def regional_sizes(n, fractions, method="ceil"):
    """Split a group size across regions.

    ``method="ceil"`` reports ``ceil(n f_r)`` per region (totals may exceed
    ``n`` by less than ``R``).  ``method="largest_remainder"`` floors every share
    and hands the leftover units to the largest fractional parts, so the
    shares sum exactly to ``n``.
    """
    f = np.asarray(fractions, dtype=float)
    raw = n * f
    if method == "ceil":
        return tuple(_ceil(x) for x in raw)
    if method == "largest_remainder":
        base = np.floor(raw + 1e-9).astype(int)
        leftover = int(n - base.sum())
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:leftover]] += 1
        return tuple(int(x) for x in base)
    raise DomainError(f"unknown rounding method {method!r}")


def _precision(n0, tau2, omegas, fractions):
    return float(np.sum(1.0 / (tau2 + omegas / (n0 * fractions))))


def solve_overall_n0(effects, config, regions, rounding="ceil", with_cp=True):
    """Smallest control-group size giving power ``1 - beta``.

    Parameters
    ----------
    effects : RandomEffectsParams
    config : DesignConfig
    regions : sequence of RegionDesignInput
        One per fraction, in the same order.
    rounding : {"ceil", "largest_remainder"}
        How regional sizes are derived from ``n0``.
    with_cp : bool
        Also evaluate every region's consistency probability at ``n0``.

    Returns
    -------
    DesignResult

    Raises
    ------
    InfeasibleDesignError
        If ``R / tau2`` does not exceed the target precision.
    """
    omegas = _omegas(regions, config)
    f = np.asarray(config.fractions)
    d = _effective_delta(effects, config)
    target = config.z_sum ** 2 / d ** 2
    tau2 = effects.tau2
    feas = check_feasibility(effects, config, len(omegas))
    if not feas.feasible:
        raise InfeasibleDesignError(feas.message, ratio=feas.ratio, limit=feas.limit)

    def excess(n0):
        return _precision(n0, tau2, omegas, f) - target

    lo, hi = 1e-8, 1e9
    while excess(hi) < 0:
        hi *= 10.0
        if hi > 1e300:  # pragma: no cover - excluded by the feasibility check
            raise InfeasibleDesignError(feas.message, feas.ratio, feas.limit)
    n_cont = find_root(excess, lo, hi, tol=1e-8)
    n0 = max(_ceil(n_cont), 1)
    cps = ()
    if with_cp:
        cps = tuple(
            consistency_probability(effects, config, regions, n0, r)
            for r in range(len(omegas))
        )
    reg0 = regional_sizes(n0, f, rounding)
    n1 = _ceil(config.ell * n0)
    return DesignResult(
        n0=n0,
        n1=n1,
        n0_continuous=n_cont,
        regional_n0=reg0,
        regional_n1=tuple(_ceil(config.ell * x) for x in reg0),
        achieved_w=_precision(n0, tau2, omegas, f),
        target_w=target,
        cp_per_region=cps,
        meets_assurance=tuple(cp >= config.assurance for cp in cps),
        region_ids=tuple(r.region_id for r in regions),
    )


def closed_form_n0(effects, config, omega, n_regions):
    """Group sizes for equal allocation and a common ``omega``.

    ``n0 = R omega z^2 / (R (delta + M)^2 - tau2 z^2)`` with
    ``z = z_{1-alpha} + z_{1-beta}``; returns ``(ceil(n0), ceil(ell n0))``.
    """
    if not omega > 0:
        raise DomainError("omega must be positive")
    zs2 = config.z_sum ** 2
    d = _effective_delta(effects, config)
    denom = n_regions * d ** 2 - effects.tau2 * zs2
    if denom <= 0:
        feas = check_feasibility(effects, config, n_regions)
        raise InfeasibleDesignError(feas.message, ratio=feas.ratio, limit=feas.limit)
    n0 = n_regions * omega * zs2 / denom
    return _ceil(n0), _ceil(config.ell * _ceil(n0))


def cp_from_rho_inverse(rho_inv, config, quadrature=DEFAULT_QUADRATURE):
    """Consistency probability for a given ``1 / rho_r``."""
    excess = rho_inv - 1.0
    if excess < _DEGENERATE_RHO:
        return 1.0
    return _cp_integral(1.0 / math.sqrt(excess), config, quadrature)


def _cp_integral(scale, config, quadrature=DEFAULT_QUADRATURE):
    """``E[Phi(scale (1 - pi)(U + z_sum)) | U > z_beta]``."""
    zs = config.z_sum
    a = scale * (1.0 - config.pi)
    z_beta = std_normal_quantile(config.beta)
    value = truncated_normal_expectation(
        lambda u: std_normal_cdf(a * (u + zs)), z_beta, quadrature
    )
    return min(1.0, max(0.0, value))


def consistency_probability(effects, config, regions, n0, r,
                            quadrature=DEFAULT_QUADRATURE):
    """Probability that region ``r`` is consistent given overall significance.

    Parameters
    ----------
    effects : RandomEffectsParams
    config : DesignConfig
    regions : sequence of RegionDesignInput
    n0 : float
        Control-group size (normally the integer from :func:`solve_overall_n0`).
    r : int
        Index of the region of interest.

    Returns
    -------
    float
        Exactly 1 when ``1/rho_r - 1`` vanishes (``tau = 0`` or a region with
        no information), where the shrunken and pooled estimates coincide.
    """
    omegas = _omegas(regions, config)
    if not n0 > 0:
        raise DomainError("n0 must be positive")
    if not -len(omegas) <= r < len(omegas):
        raise DomainError(f"region index {r} out of range")
    _effective_delta(effects, config)
    f = np.asarray(config.fractions)
    h = effects.tau2 * n0 * f / omegas
    return cp_from_rho_inverse(rho_inverse(h, r), config, quadrature)


def cp_lower_bound(effects, config, quadrature=DEFAULT_QUADRATURE):
    """Worst-case consistency probability over all allocations.

    Returns
    -------
    (float, str)
        The bound and whether it is ``"attained"`` (when
        ``tau2 z^2 / (2 (delta+M)^2) < 1``) or only a strict lower bound
        (``"unattained"``).
    """
    d = _effective_delta(effects, config)
    if effects.tau2 == 0:
        return 1.0, ATTAINED
    zs2 = config.z_sum ** 2
    q = effects.tau2 * zs2 / (2.0 * d ** 2)
    if q < 1.0:
        scale = 2.0 * d ** 2 / (effects.tau2 * zs2)
        return _cp_integral(scale, config, quadrature), ATTAINED
    denom = effects.tau2 * zs2 / d ** 2 - 1.0
    if denom <= 0:  # pragma: no cover - q >= 1 implies denom >= 1
        return 1.0, UNATTAINED
    return _cp_integral(1.0 / math.sqrt(denom), config, quadrature), UNATTAINED


def lower_bound_design(effects, config, omega, f_r):
    """Control-group size at which region ``r`` sits at the attained bound.

    The bound is reached when ``h_r / (h_r + 1) = tau2 z^2 / (2 (delta+M)^2)``;
    with ``h_r = tau2 n0 f_r / omega`` this fixes ``n0`` for a given ``f_r``.

    Raises
    ------
    NotAvailableError
        When the bound is not attainable.
    """
    d = _effective_delta(effects, config)
    if effects.tau2 == 0:
        raise NotAvailableError("bound is trivially 1 when tau = 0")
    q = effects.tau2 * config.z_sum ** 2 / (2.0 * d ** 2)
    if q >= 1.0:
        raise NotAvailableError(
            f"lower bound not attainable: tau/(delta+M) must be below "
            f"sqrt(2)/(z_(1-alpha)+z_(1-beta)) = {math.sqrt(2.0) / config.z_sum:.4f}"
        )
    h = q / (1.0 - q)
    return _ceil(h * omega / (effects.tau2 * f_r))


def cp_equal_allocation(effects, config, n_regions, quadrature=DEFAULT_QUADRATURE):
    """Consistency probability for equal fractions and a common ``omega``.

    Raises
    ------
    NotAvailableError
        When ``tau / (delta + M) >= sqrt(R) / z_sum``.
    """
    d = _effective_delta(effects, config)
    if n_regions < 2:
        raise DomainError("at least two regions are required")
    feas = check_feasibility(effects, config, n_regions)
    if not feas.feasible:
        raise NotAvailableError(feas.message)
    if effects.tau2 == 0:
        return 1.0
    zs2 = config.z_sum ** 2
    scale = d ** 2 * n_regions / (effects.tau2 * math.sqrt(n_regions - 1) * zs2)
    return _cp_integral(scale, config, quadrature)


def cp_profile(effects, config, regions, r, grid, quadrature=DEFAULT_QUADRATURE):
    """Re-solve the design as region ``r``'s share sweeps over ``grid``.

    The other regions split ``1 - f_r`` evenly.  Each point carries the
    re-solved ``n0``, region ``r``'s size ``ceil(n0 f_r)`` and its CP.
    """
    n = len(regions)
    if n < 2:
        raise DomainError("a profile needs at least two regions")
    points = []
    for f_r in grid:
        if not 0 < f_r < 1:
            raise DomainError(f"grid value {f_r!r} outside (0, 1)")
        fr = np.full(n, (1.0 - f_r) / (n - 1))
        fr[r] = f_r
        cfg = config.with_fractions(fr / fr.sum())
        res = solve_overall_n0(effects, cfg, regions, with_cp=False)
        h = effects.tau2 * res.n0 * np.asarray(cfg.fractions) / _omegas(regions, cfg)
        rho_inv = rho_inverse(h, r)
        points.append(ProfilePoint(
            f_r=float(f_r),
            n0=res.n0,
            n0_region=_ceil(res.n0 * f_r),
            cp=cp_from_rho_inverse(rho_inv, cfg, quadrature),
            rho_inv=rho_inv,
        ))
    return points
