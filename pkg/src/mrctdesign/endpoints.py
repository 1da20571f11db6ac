"""Endpoint adapters and parametric survival models.

Every endpoint reduces to a variance scale ``omega_r`` such that the regional
effect estimate has variance ``omega_r / (n0 f_r)``.  The survival part
provides exponential, piecewise exponential and Weibull event-time laws with
closed-form restricted mean survival time (RMST), the asymptotic variance of
the Kaplan-Meier RMST estimate, and the root-finding calibrations that tune a
treatment arm to a requested RMST difference.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate, special

from .errors import CalibrationError, DomainError, NumericalError
from .numerics import find_root

__all__ = [
    "Exponential",
    "PiecewiseExponential",
    "Weibull",
    "NoCensoring",
    "AdministrativeCensoring",
    "UniformCensoring",
    "ContinuousEndpoint",
    "BinaryEndpoint",
    "SurvivalPHEndpoint",
    "SurvivalRMSTEndpoint",
    "OmegaEndpoint",
    "omega_continuous",
    "omega_binary",
    "event_probability",
    "omega_survival_ph",
    "omega_survival_rmst",
    "omega_for",
    "rmst",
    "rmst_true_variance",
    "calibrate_piecewise_late_rate",
    "calibrate_weibull_shape",
]


def _positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")


# ---------------------------------------------------------------------------
# Event-time models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        _positive("rate", self.rate)

    breakpoints = ()

    def survival(self, t):
        return np.exp(-self.rate * np.asarray(t, dtype=float))

    def hazard(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.rate)

    def cumulative_hazard(self, t):
        return self.rate * np.asarray(t, dtype=float)

    def integrated_survival(self, t):
        """``int_0^t S(u) du``."""
        t = np.asarray(t, dtype=float)
        return -np.expm1(-self.rate * t) / self.rate

    def quantile(self, p):
        return -math.log1p(-p) / self.rate

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)


@dataclass(frozen=True)
class PiecewiseExponential:
    """Hazard ``early_rate`` on ``(0, change_point]`` and ``late_rate`` after."""

    early_rate: float
    late_rate: float
    change_point: float

    def __post_init__(self):
        _positive("early_rate", self.early_rate)
        _positive("late_rate", self.late_rate)
        _positive("change_point", self.change_point)

    @property
    def breakpoints(self):
        return (self.change_point,)

    def cumulative_hazard(self, t):
        t = np.asarray(t, dtype=float)
        psi = self.change_point
        return np.where(
            t <= psi,
            self.early_rate * t,
            self.early_rate * psi + self.late_rate * (t - psi),
        )

    def survival(self, t):
        return np.exp(-self.cumulative_hazard(t))

    def hazard(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= self.change_point, self.early_rate, self.late_rate)

    def integrated_survival(self, t):
        t = np.asarray(t, dtype=float)
        lam, gam, psi = self.early_rate, self.late_rate, self.change_point
        early = -np.expm1(-lam * np.minimum(t, psi)) / lam
        late = (
            math.exp(-lam * psi)
            * -np.expm1(-gam * np.maximum(t - psi, 0.0))
            / gam
        )
        return early + late

    def quantile(self, p):
        e = -math.log1p(-p)
        first = self.early_rate * self.change_point
        if e <= first:
            return e / self.early_rate
        return self.change_point + (e - first) / self.late_rate

    def sample(self, rng, size):
        e = rng.standard_exponential(size)
        first = self.early_rate * self.change_point
        return np.where(
            e <= first,
            e / self.early_rate,
            self.change_point + (e - first) / self.late_rate,
        )


@dataclass(frozen=True)
class Weibull:
    """``S(t) = exp(-(t / scale) ** shape)``."""

    shape: float
    scale: float

    def __post_init__(self):
        _positive("shape", self.shape)
        _positive("scale", self.scale)

    breakpoints = ()

    def cumulative_hazard(self, t):
        return (np.asarray(t, dtype=float) / self.scale) ** self.shape

    def survival(self, t):
        return np.exp(-self.cumulative_hazard(t))

    def hazard(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return self.shape / self.scale * (t / self.scale) ** (self.shape - 1.0)

    def integrated_survival(self, t):
        # int_0^t exp(-(u/s)^k) du = s Gamma(1 + 1/k) P(1/k, (t/s)^k)
        t = np.asarray(t, dtype=float)
        a = 1.0 / self.shape
        return self.scale * special.gamma(1.0 + a) * special.gammainc(
            a, (t / self.scale) ** self.shape
        )

    def quantile(self, p):
        return self.scale * (-math.log1p(-p)) ** (1.0 / self.shape)

    def sample(self, rng, size):
        return self.scale * rng.standard_exponential(size) ** (1.0 / self.shape)


def rmst(model, eta):
    """Restricted mean survival time ``int_0^eta S(t) dt`` (closed form)."""
    _positive("eta", eta)
    return float(model.integrated_survival(eta))


# ---------------------------------------------------------------------------
# Censoring models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoCensoring:
    def at_risk(self, t):
        """``P(C >= t)``, the left-continuous censoring survival function."""
        return np.ones_like(np.asarray(t, dtype=float))

    def sample(self, rng, size):
        return np.full(size, np.inf)


@dataclass(frozen=True)
class AdministrativeCensoring:
    """Every subject is censored at the end of follow-up ``L``."""

    follow_up: float

    def __post_init__(self):
        _positive("follow_up", self.follow_up)

    def at_risk(self, t):
        return np.where(np.asarray(t, dtype=float) <= self.follow_up, 1.0, 0.0)

    def sample(self, rng, size):
        return np.full(size, float(self.follow_up))


@dataclass(frozen=True)
class UniformCensoring:
    low: float
    high: float

    def __post_init__(self):
        if not (0 <= self.low < self.high and math.isfinite(self.high)):
            raise DomainError("uniform censoring needs 0 <= low < high")

    def at_risk(self, t):
        t = np.asarray(t, dtype=float)
        return np.clip((self.high - t) / (self.high - self.low), 0.0, 1.0)

    def sample(self, rng, size):
        return rng.uniform(self.low, self.high, size)


# ---------------------------------------------------------------------------
# Variance of the RMST estimate
# ---------------------------------------------------------------------------

_SPLIT_PROBS = (0.25, 0.5, 0.75, 0.9, 0.99, 0.999, 0.99999)


def rmst_true_variance(event_model, censor_model, eta):
    """Asymptotic variance of ``sqrt(n) * RMST_hat`` for one arm.

    Evaluates

        int_0^eta {int_t^eta S(u) du}^2 / (S(t) G(t-)) dLambda(t)

    with the model's true survival ``S``, hazard ``dLambda = h(t) dt`` and
    censoring survival ``G``.  The inner integral is exact (closed-form
    integrated survival); the outer one is adaptive quadrature split at the
    model's hazard change points and event-time quantiles.

    Raises
    ------
    DomainError
        If ``G(eta-) = 0``: censoring support must cover the horizon.
    """
    _positive("eta", eta)
    if not censor_model.at_risk(eta) > 0:
        raise DomainError(
            "censoring support ends before the horizon: G(eta-) = 0"
        )
    total = float(event_model.integrated_survival(eta))

    def integrand(t):
        tail = total - float(event_model.integrated_survival(t))
        s = float(event_model.survival(t))
        g = float(censor_model.at_risk(t))
        if tail <= 0.0 or s <= 0.0:
            return 0.0
        return tail * tail * float(event_model.hazard(t)) / (s * g)

    cuts = {0.0, float(eta)}
    cuts.update(b for b in event_model.breakpoints if 0 < b < eta)
    for p in _SPLIT_PROBS:
        q = event_model.quantile(p)
        if 0 < q < eta:
            cuts.add(q)
    cuts = sorted(cuts)
    value = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        part, err, info = integrate.quad(
            integrand, a, b, epsabs=1e-10, epsrel=1e-10, limit=200,
            full_output=True,
        )[:3]
        if err > 1e-6 * max(1.0, abs(part)):
            raise NumericalError(
                f"RMST variance integral did not converge on [{a:g}, {b:g}]"
            )
        value += part
    return value


# ---------------------------------------------------------------------------
# Omega per endpoint
# ---------------------------------------------------------------------------

def omega_continuous(sigma2_0, sigma2_1, ell):
    """``sigma2_1 / ell + sigma2_0`` for a difference in means."""
    _positive("sigma2_0", sigma2_0)
    _positive("sigma2_1", sigma2_1)
    _positive("ell", ell)
    return sigma2_1 / ell + sigma2_0


def omega_binary(p0, p1, ell):
    """Difference in proportions: ``p1 (1 - p1) / ell + p0 (1 - p0)``."""
    for name, p in (("p0", p0), ("p1", p1)):
        if not 0 < p < 1:
            raise DomainError(f"{name} must lie strictly in (0, 1): variance degenerates")
    _positive("ell", ell)
    return p1 * (1 - p1) / ell + p0 * (1 - p0)


def event_probability(rate, follow_up):
    """``1 - exp(-rate L)``: chance of an event within follow-up."""
    if not rate >= 0:
        raise DomainError("rate must be non-negative")
    _positive("follow_up", follow_up)
    return -math.expm1(-rate * follow_up)


def omega_survival_ph(lambda0, hr, follow_up, ell):
    """Log hazard ratio with exponential times and censoring at ``L``.

    ``(ell + 1)^2 / (ell (P0 + ell P1))`` where ``Pk`` are the event
    probabilities of each arm within follow-up and ``lambda1 = lambda0 hr``.
    """
    _positive("lambda0", lambda0)
    _positive("hr", hr)
    _positive("ell", ell)
    p0 = event_probability(lambda0, follow_up)
    p1 = event_probability(lambda0 * hr, follow_up)
    return (ell + 1.0) ** 2 / (ell * (p0 + ell * p1))


def omega_survival_rmst(sigma2_0, sigma2_1, ell):
    """RMST difference; same algebra as the continuous case."""
    return omega_continuous(sigma2_0, sigma2_1, ell)


@dataclass(frozen=True)
class ContinuousEndpoint:
    sigma2_0: float = 1.0
    sigma2_1: float = 1.0
    kind = "continuous"

    def omega(self, ell):
        return omega_continuous(self.sigma2_0, self.sigma2_1, ell)


@dataclass(frozen=True)
class BinaryEndpoint:
    p0: float
    p1: float
    kind = "binary"

    def omega(self, ell):
        return omega_binary(self.p0, self.p1, ell)

    @property
    def effect(self):
        return self.p1 - self.p0


@dataclass(frozen=True)
class SurvivalPHEndpoint:
    lambda0: float
    hr: float
    follow_up: float
    kind = "survival_ph"

    def omega(self, ell):
        return omega_survival_ph(self.lambda0, self.hr, self.follow_up, ell)

    @property
    def effect(self):
        return -math.log(self.hr)


@dataclass(frozen=True)
class SurvivalRMSTEndpoint:
    control: object
    treatment: object
    eta: float
    censoring: object = NoCensoring()
    kind = "survival_rmst"

    def arm_variances(self):
        """``(sigma2_0, sigma2_1)``: asymptotic variances of each arm's RMST."""
        return (
            rmst_true_variance(self.control, self.censoring, self.eta),
            rmst_true_variance(self.treatment, self.censoring, self.eta),
        )

    def omega(self, ell):
        s0, s1 = self.arm_variances()
        return omega_survival_rmst(s0, s1, ell)

    @property
    def effect(self):
        return rmst(self.treatment, self.eta) - rmst(self.control, self.eta)


@dataclass(frozen=True)
class OmegaEndpoint:
    """A region whose variance scale is supplied directly."""

    value: float
    kind = "omega"

    def omega(self, ell):
        _positive("omega", self.value)
        return float(self.value)


def omega_for(spec, ell):
    """Variance scale of any endpoint specification."""
    try:
        method = spec.omega
    except AttributeError:
        raise DomainError(f"not an endpoint specification: {spec!r}") from None
    return float(method(ell))


# ---------------------------------------------------------------------------
# Calibration to a target RMST difference
# ---------------------------------------------------------------------------

def calibrate_piecewise_late_rate(lambda0, gamma0, lambda1, psi, eta, target_d,
                                  bracket=(1e-8, 10.0)):
    """Late-period treatment hazard that yields a given RMST difference.

    The control arm is ``PiecewiseExponential(lambda0, gamma0, psi)`` and the
    treatment arm ``PiecewiseExponential(lambda1, g, psi)``; returns ``g`` with
    ``rmst(treatment) - rmst(control) = target_d``.  RMST strictly decreases in
    ``g`` whenever ``psi < eta``.

    Raises
    ------
    CalibrationError
        If the target is outside the differences reachable on ``bracket``.
    """
    _positive("eta", eta)
    if not psi < eta:
        raise DomainError("change point must precede the horizon")
    base = rmst(PiecewiseExponential(lambda0, gamma0, psi), eta)

    def gap(g):
        return rmst(PiecewiseExponential(lambda1, g, psi), eta) - base - target_d

    lo, hi = bracket
    g_lo, g_hi = gap(lo), gap(hi)
    if not g_hi <= 0 <= g_lo:
        raise CalibrationError(
            f"RMST difference {target_d:.6g} not reachable; achievable range "
            f"is ({g_hi + target_d:.6g}, {g_lo + target_d:.6g})",
            achievable=(g_hi + target_d, g_lo + target_d),
        )
    return find_root(gap, lo, hi, tol=1e-13)


def calibrate_weibull_shape(nu0, theta0, theta1, eta, target_d,
                            bracket=(0.05, 20.0), grid_size=64):
    """Treatment Weibull shape giving a requested RMST difference.

    Control is ``Weibull(nu0, theta0)``, treatment ``Weibull(nu, theta1)``.  The
    difference is scanned on a log grid over ``bracket`` first, so a
    non-monotone curve still yields the first sign-consistent sub-bracket.

    Raises
    ------
    CalibrationError
        If the target is not reachable on ``bracket``.
    """
    _positive("eta", eta)
    base = rmst(Weibull(nu0, theta0), eta)

    def gap(nu):
        return rmst(Weibull(nu, theta1), eta) - base - target_d

    nus = np.geomspace(bracket[0], bracket[1], grid_size)
    gaps = np.array([gap(x) for x in nus])
    exact = np.flatnonzero(gaps == 0)
    if exact.size:
        return float(nus[exact[0]])
    change = np.flatnonzero(np.sign(gaps[:-1]) != np.sign(gaps[1:]))
    if change.size == 0:
        reach = (gaps.min() + target_d, gaps.max() + target_d)
        raise CalibrationError(
            f"RMST difference {target_d:.6g} not reachable; achievable range "
            f"is ({reach[0]:.6g}, {reach[1]:.6g})",
            achievable=reach,
        )
    i = change[0]
    return find_root(gap, float(nus[i]), float(nus[i + 1]), tol=1e-13)
