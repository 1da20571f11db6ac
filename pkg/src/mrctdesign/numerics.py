"""Normal-distribution special functions, truncated-normal quadrature and
scalar root finding.

Everything here is a thin, contract-checked layer over :mod:`scipy.special`,
:func:`scipy.integrate.quad` (QUADPACK's adaptive Gauss-Kronrod rule) and
:func:`scipy.optimize.brentq`.
"""

from dataclasses import dataclass
import math

from scipy import integrate, optimize, special

from .errors import BracketError, DomainError, NumericalError

__all__ = [
    "QuadratureSettings",
    "DEFAULT_QUADRATURE",
    "std_normal_cdf",
    "std_normal_sf",
    "std_normal_pdf",
    "std_normal_quantile",
    "truncated_normal_expectation",
    "find_root",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureSettings:
    """Accuracy controls for :func:`truncated_normal_expectation`.

    Parameters
    ----------
    abs_tolerance : float
        Absolute error target handed to the adaptive rule.
    upper_truncation_sd : float
        Width, in standard deviations, of the integration window that starts
        at the lower limit.  Must be at least 8 so that the discarded tail
        mass stays below about 6e-16.
    limit : int
        Maximum number of subintervals (the refinement depth cap).
    """

    abs_tolerance: float = 1e-9
    upper_truncation_sd: float = 10.0
    limit: int = 200

    def __post_init__(self):
        if not self.abs_tolerance > 0:
            raise DomainError("abs_tolerance must be positive")
        if not self.upper_truncation_sd >= 8:
            raise DomainError("upper_truncation_sd must be >= 8")
        if self.limit < 1:
            raise DomainError("limit must be a positive integer")


DEFAULT_QUADRATURE = QuadratureSettings()


def std_normal_cdf(x):
    """Standard normal distribution function Phi(x)."""
    return float(special.ndtr(x))


def std_normal_sf(x):
    """Upper tail 1 - Phi(x), computed without cancellation."""
    return float(special.ndtr(-x))


def std_normal_pdf(x):
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf`.

    Raises
    ------
    DomainError
        If ``p`` is not strictly between 0 and 1.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile requires 0 < p < 1, got {p!r}")
    return float(special.ndtri(p))


def truncated_normal_expectation(f, lower, settings=DEFAULT_QUADRATURE):
    """Mean of ``f(U)`` for ``U`` standard normal truncated to ``U > lower``.

    Computes ``(1 / (1 - Phi(lower))) * integral_{lower}^{inf} f(u) dPhi(u)``,
    truncating the range at ``lower + settings.upper_truncation_sd``.

    Parameters
    ----------
    f : callable
        Bounded scalar function of one real argument.
    lower : float
        Finite lower limit of the truncated normal.
    settings : QuadratureSettings, optional

    Returns
    -------
    float

    Raises
    ------
    NumericalError
        When the adaptive rule exhausts its subdivision budget without
        meeting the tolerance.
    """
    if not math.isfinite(lower):
        raise DomainError("lower limit must be finite")
    mass = std_normal_sf(lower)
    if mass <= 0.0:
        raise DomainError(f"no normal mass above {lower!r}")
    upper = lower + settings.upper_truncation_sd
    value, abserr, info = integrate.quad(
        lambda u: f(u) * std_normal_pdf(u),
        lower,
        upper,
        epsabs=settings.abs_tolerance * mass,
        epsrel=0.0,
        limit=settings.limit,
        full_output=True,
    )[:3]
    if abserr > 10 * settings.abs_tolerance * mass:
        raise NumericalError(
            f"quadrature did not converge on [{lower:g}, {upper:g}]: "
            f"estimated error {abserr:.3g} after {info['last']} subintervals"
        )
    return value / mass


def find_root(f, bracket_lo, bracket_hi, tol=1e-8, maxiter=200):
    """Root of a continuous scalar function on a sign-changing bracket.

    Brent's method: inverse quadratic interpolation with bisection fallback.

    Parameters
    ----------
    f : callable
    bracket_lo, bracket_hi : float
        Interval ends with ``f(bracket_lo) * f(bracket_hi) <= 0``.
    tol : float
        Absolute tolerance on the argument.
    maxiter : int

    Raises
    ------
    BracketError
        If ``f`` has the same strict sign at both ends.
    NumericalError
        If the iteration cap is hit.
    """
    if not bracket_lo < bracket_hi:
        raise DomainError("bracket_lo must be smaller than bracket_hi")
    f_lo = f(bracket_lo)
    if f_lo == 0.0:
        return float(bracket_lo)
    f_hi = f(bracket_hi)
    if f_hi == 0.0:
        return float(bracket_hi)
    if math.copysign(1.0, f_lo) == math.copysign(1.0, f_hi):
        raise BracketError(
            f"no sign change on [{bracket_lo:g}, {bracket_hi:g}]: "
            f"f = ({f_lo:.6g}, {f_hi:.6g})"
        )
    try:
        root, res = optimize.brentq(
            f, bracket_lo, bracket_hi, xtol=tol, rtol=4 * 2.220446049250313e-16,
            maxiter=maxiter, full_output=True, disp=False,
        )
    except RuntimeError as exc:  # pragma: no cover - brentq raises only with disp=True
        raise NumericalError(str(exc)) from exc
    if not res.converged:
        raise NumericalError(
            f"root finder hit {maxiter} iterations ({res.flag})"
        )
    return float(root)
