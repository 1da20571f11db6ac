"""Nonparametric estimation from subject-level right-censored data.

Kaplan-Meier and Nelson-Aalen estimators, the RMST estimate with its plug-in
variance, and a two-group Cox model fitted by safeguarded Newton iteration.

Data are passed as parallel arrays ``time`` and ``event`` (1 = event,
0 = censored), plus ``group`` (0 = control, 1 = treatment) where relevant.
At tied times, events are taken to occur before censorings.
"""

from dataclasses import dataclass
import csv
import math

import numpy as np

from .errors import ConvergenceError, DomainError, EstimationError

__all__ = [
    "SubjectRecord",
    "StepFunction",
    "records_to_arrays",
    "read_subjects_csv",
    "kaplan_meier",
    "nelson_aalen",
    "rmst_estimate",
    "rmst_variance_estimate",
    "cox_loghr",
    "cox_log_partial_likelihood",
]


@dataclass(frozen=True)
class SubjectRecord:
    time: float
    event: bool
    group: int = 0

    def __post_init__(self):
        if not (self.time >= 0 and math.isfinite(self.time)):
            raise DomainError(f"time must be finite and non-negative, got {self.time!r}")
        if self.group not in (0, 1):
            raise DomainError("group must be 0 (control) or 1 (treatment)")


def records_to_arrays(records):
    """``(time, event, group)`` arrays from a sequence of :class:`SubjectRecord`."""
    time = np.array([r.time for r in records], dtype=float)
    event = np.array([bool(r.event) for r in records], dtype=bool)
    group = np.array([r.group for r in records], dtype=int)
    return time, event, group


def read_subjects_csv(path):
    """Load subject-level data from a CSV with columns ``time,event,group``."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"time", "event", "group"} - set(reader.fieldnames or ())
        if missing:
            raise DomainError(f"{path}: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                records.append(SubjectRecord(
                    time=float(row["time"]),
                    event=bool(int(row["event"])),
                    group=int(row["group"]),
                ))
            except (ValueError, DomainError) as exc:
                raise DomainError(f"{path}:{line}: {exc}") from exc
    return records_to_arrays(records)


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function.

    Takes ``initial`` before the first knot and ``values[i]`` on
    ``[knots[i], knots[i+1])``.
    """

    knots: np.ndarray
    values: np.ndarray
    initial: float = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.knots, t, side="right") - 1
        out = np.where(idx >= 0, self.values[np.maximum(idx, 0)] if len(self.values) else self.initial, self.initial)
        return out if out.ndim else float(out)

    def left(self, t):
        """Left limit ``F(t-)``."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.knots, t, side="left") - 1
        out = np.where(idx >= 0, self.values[np.maximum(idx, 0)] if len(self.values) else self.initial, self.initial)
        return out if out.ndim else float(out)

    def integral(self, a, b):
        """Exact ``int_a^b F(u) du`` for ``a <= b``."""
        if b < a:
            raise DomainError("integration limits out of order")
        return float(self.area_from_zero(b) - self.area_from_zero(a))

    def area_from_zero(self, x):
        """``int_0^x F(u) du`` for ``x >= 0``, vectorized over ``x``."""
        edges = np.concatenate(([0.0], self.knots))
        heights = np.concatenate(([self.initial], self.values))
        widths = np.diff(edges)
        cum = np.concatenate(([0.0], np.cumsum(heights[:-1] * widths)))
        x = np.asarray(x, dtype=float)
        j = np.searchsorted(edges, x, side="right") - 1
        out = cum[j] + heights[j] * (x - edges[j])
        return out if out.ndim else float(out)


def _check(time, event):
    time = np.asarray(time, dtype=float)
    event = np.asarray(event).astype(bool)
    if time.ndim != 1 or time.size == 0:
        raise DomainError("survival data must be a non-empty 1-d array")
    if time.shape != event.shape:
        raise DomainError("time and event must have the same length")
    if np.any(~np.isfinite(time)) or np.any(time < 0):
        raise DomainError("times must be finite and non-negative")
    return time, event


def _risk_table(time, event):
    """Distinct times with event counts, censoring counts and risk-set sizes."""
    uniq, inv = np.unique(time, return_inverse=True)
    d = np.bincount(inv, weights=event, minlength=uniq.size)
    c = np.bincount(inv, weights=~event, minlength=uniq.size)
    n_at_risk = (d + c)[::-1].cumsum()[::-1]
    return uniq, d, c, n_at_risk


def kaplan_meier(time, event, target="event"):
    """Product-limit estimate of the event or censoring survival function.

    Parameters
    ----------
    time, event : array_like
    target : {"event", "censoring"}
        ``"censoring"`` estimates ``G``, the survival function of the
        censoring time.  Subjects with an event at a tied time have already
        left the risk set when the censorings at that time happen.

    Returns
    -------
    StepFunction
        Knots at the times where the estimate drops.
    """
    time, event = _check(time, event)
    uniq, d, c, n = _risk_table(time, event)
    if target == "event":
        factors = 1.0 - d / n
        jumps = d > 0
    elif target == "censoring":
        at_risk = n - d
        with np.errstate(invalid="ignore", divide="ignore"):
            factors = np.where(at_risk > 0, 1.0 - c / at_risk, 1.0)
        jumps = c > 0
    else:
        raise DomainError(f"unknown target {target!r}")
    surv = np.cumprod(factors)
    return StepFunction(knots=uniq[jumps], values=surv[jumps])


def nelson_aalen(time, event):
    """Cumulative hazard estimate ``sum_{t_i <= t} d_i / n_i``."""
    time, event = _check(time, event)
    uniq, d, _, n = _risk_table(time, event)
    jumps = d > 0
    return StepFunction(
        knots=uniq[jumps], values=np.cumsum(d[jumps] / n[jumps]), initial=0.0
    )


def rmst_estimate(time, event, eta):
    """Area under the Kaplan-Meier curve on ``[0, eta]``.

    Past the last observation the final KM value is carried forward.
    """
    if not eta > 0:
        raise DomainError("eta must be positive")
    return kaplan_meier(time, event).integral(0.0, float(eta))


def rmst_variance_estimate(time, event, eta):
    """Plug-in estimate of the asymptotic variance of ``sqrt(n) * RMST_hat``.

    ``sum_{t_i <= eta} A(t_i)^2 / (S(t_i) G(t_i-)) * dLambda(t_i)`` with
    ``A(t) = int_t^eta S(u) du``, summed over distinct event times; ``S`` and
    ``G`` are the Kaplan-Meier estimates for events and censoring and
    ``dLambda`` the Nelson-Aalen increments.  Divide by ``n`` for the variance
    of the RMST estimate itself.

    Raises
    ------
    EstimationError
        If ``G(t_i-) = 0`` at a contributing event time.
    """
    time, event = _check(time, event)
    if not eta > 0:
        raise DomainError("eta must be positive")
    uniq, d, _, n = _risk_table(time, event)
    mask = (d > 0) & (uniq <= eta)
    if not mask.any():
        return 0.0
    km = kaplan_meier(time, event)
    g = kaplan_meier(time, event, target="censoring")
    t = uniq[mask]
    dlam = d[mask] / n[mask]
    s = np.atleast_1d(km(t))
    g_left = np.atleast_1d(g.left(t))
    # A(t_i): cumulative area from t_i to eta
    a = km.area_from_zero(float(eta)) - np.atleast_1d(km.area_from_zero(t))
    if np.any((g_left <= 0) & (a > 0)):
        raise EstimationError(
            "censoring survival estimate reaches zero before the horizon"
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(a > 0, a * a * dlam / (s * g_left), 0.0)
    return float(terms.sum())


# ---------------------------------------------------------------------------
# Two-group Cox model
# ---------------------------------------------------------------------------

def _cox_table(time, event, group):
    uniq, inv = np.unique(time, return_inverse=True)
    m = uniq.size
    is_trt = group == 1
    d = np.bincount(inv, weights=event, minlength=m)
    d1 = np.bincount(inv, weights=event & is_trt, minlength=m)
    cnt0 = np.bincount(inv, weights=~is_trt, minlength=m)
    cnt1 = np.bincount(inv, weights=is_trt, minlength=m)
    n0 = cnt0[::-1].cumsum()[::-1]
    n1 = cnt1[::-1].cumsum()[::-1]
    keep = d > 0
    return d[keep], d1[keep], n0[keep], n1[keep]


def _cox_terms(beta, d, d1, n0, n1):
    eb = math.exp(beta)
    denom = n0 + n1 * eb
    loglik = float(np.sum(d1 * beta - d * np.log(denom)))
    p = n1 * eb / denom
    score = float(np.sum(d1 - d * p))
    info = float(np.sum(d * p * (1.0 - p)))
    return loglik, score, info


def cox_log_partial_likelihood(beta, time, event, group):
    """Breslow log partial likelihood of the treatment log hazard ratio.

    Vectorized over ``beta``.
    """
    time, event = _check(time, event)
    group = np.asarray(group, dtype=int)
    d, d1, n0, n1 = _cox_table(time, event, group)
    beta = np.asarray(beta, dtype=float)
    denom = n0[None, :] + n1[None, :] * np.exp(beta.reshape(-1, 1))
    ll = (beta.reshape(-1, 1) * d1[None, :] - d[None, :] * np.log(denom)).sum(axis=1)
    return ll.reshape(beta.shape) if beta.ndim else float(ll[0])


def cox_loghr(time, event, group, max_iter=50, tol=1e-10):
    """Negative log hazard ratio of treatment versus control.

    Maximizes the Breslow partial likelihood with Newton steps, halving any
    step that fails to increase it.

    Parameters
    ----------
    time, event : array_like
    group : array_like of {0, 1}
        1 marks the treatment arm.

    Returns
    -------
    (float, float)
        ``(-beta_hat, 1 / information)``: positive values favour treatment.

    Raises
    ------
    DomainError
        If either group is absent or there are no events.
    ConvergenceError
        On a monotone likelihood (e.g. all events in one group) or when the
        iteration cap is reached.
    """
    time, event = _check(time, event)
    group = np.asarray(group, dtype=int)
    if group.shape != time.shape:
        raise DomainError("group must match time in length")
    if not (np.any(group == 0) and np.any(group == 1)):
        raise DomainError("both groups must be present")
    if not event.any():
        raise DomainError("no events observed")
    d, d1, n0, n1 = _cox_table(time, event, group)
    # finite MLE needs the score to change sign: some event must come from
    # each arm while the other arm is still at risk
    if not (np.any((d1 > 0) & (n0 > 0)) and np.any((d - d1 > 0) & (n1 > 0))):
        raise ConvergenceError("monotone likelihood: the MLE is infinite")
    beta = 0.0
    loglik, score, info = _cox_terms(beta, d, d1, n0, n1)
    for _ in range(max_iter):
        if info <= 0:
            raise ConvergenceError("zero information in the partial likelihood")
        step = score / info
        for _ in range(60):
            cand = beta + step
            new = _cox_terms(cand, d, d1, n0, n1)
            if new[0] >= loglik - 1e-12 * abs(loglik):
                break
            step /= 2.0
        else:
            raise ConvergenceError("step halving failed to improve the likelihood")
        beta = cand
        loglik, score, info = new
        if abs(step) < tol:
            break
    else:
        raise ConvergenceError(f"Newton iteration did not converge in {max_iter} steps")
    if info <= 0 or not math.isfinite(beta):
        raise ConvergenceError("degenerate information at the solution")
    return -beta, 1.0 / info
