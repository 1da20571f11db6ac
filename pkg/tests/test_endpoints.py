import math

import numpy as np
import pytest
from scipy import stats

from mrctdesign.endpoints import (
    AdministrativeCensoring,
    BinaryEndpoint,
    ContinuousEndpoint,
    Exponential,
    NoCensoring,
    OmegaEndpoint,
    PiecewiseExponential,
    SurvivalPHEndpoint,
    SurvivalRMSTEndpoint,
    UniformCensoring,
    Weibull,
    calibrate_piecewise_late_rate,
    calibrate_weibull_shape,
    event_probability,
    omega_binary,
    omega_continuous,
    omega_for,
    omega_survival_ph,
    rmst,
    rmst_true_variance,
)
from mrctdesign.errors import CalibrationError, DomainError

from oracles import exponential_rmst_variance, rmst_numeric

MODELS = [
    Exponential(0.05),
    PiecewiseExponential(0.07, 0.03, 10.0),
    PiecewiseExponential(0.04, 0.1, 6.0),
    Weibull(1.6, 30.0),
    Weibull(0.7, 80.0),
]


def test_continuous_and_binary_omega():
    assert omega_continuous(1.0, 1.0, 1.0) == 2.0
    assert omega_continuous(1.0, 2.0, 2.0) == 2.0
    assert [round(omega_binary(0.3, p, 1.0), 10) for p in (0.9, 0.7, 0.5)] == [0.3, 0.42, 0.46]
    with pytest.raises(DomainError, match="degenerates"):
        omega_binary(0.3, 1.0, 1.0)


def test_ph_omega():
    assert omega_survival_ph(0.05, 0.7, 36.0, 1.0) == pytest.approx(2.5789, abs=5e-5)
    # equal arms: (ell+1)^2 / (ell (1+ell) P) = (ell+1) / (ell P)
    p = event_probability(0.02, 10.0)
    assert omega_survival_ph(0.02, 1.0, 10.0, 2.0) == pytest.approx(3 / (2 * p))
    assert SurvivalPHEndpoint(0.05, 0.7, 36.0).effect == pytest.approx(-math.log(0.7))


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_rmst_against_numeric_integral(model):
    for eta in (5.0, 10.0, 37.5, 80.0):
        pts = [b for b in model.breakpoints if b < eta] or None
        assert rmst(model, eta) == pytest.approx(rmst_numeric(model.survival, eta, pts), rel=1e-10)


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_hazard_is_derivative_of_cumulative_hazard(model):
    for t in (0.5, 3.0, 9.0, 11.0, 40.0):
        h = 1e-6
        num = (model.cumulative_hazard(t + h) - model.cumulative_hazard(t - h)) / (2 * h)
        assert model.hazard(t) == pytest.approx(num, rel=1e-5)
        assert model.survival(t) == pytest.approx(math.exp(-model.cumulative_hazard(t)))


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_quantile_inverts_survival(model):
    for p in (0.01, 0.3, 0.5, 0.9, 0.999):
        assert 1 - model.survival(model.quantile(p)) == pytest.approx(p, rel=1e-10)


def test_weibull_matches_scipy():
    m = Weibull(1.6, 30.0)
    ref = stats.weibull_min(1.6, scale=30.0)
    for t in (1.0, 20.0, 75.0):
        assert m.survival(t) == pytest.approx(ref.sf(t), rel=1e-12)


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_sampling_matches_distribution(model):
    rng = np.random.default_rng(11)
    x = model.sample(rng, 40000)
    # Kolmogorov-Smirnov distance against the model CDF
    res = stats.kstest(x, lambda t: 1 - model.survival(t))
    assert res.pvalue > 1e-3


def test_uncensored_variance_is_variance_of_truncated_time():
    for rate, eta in ((0.05, 36.0), (0.02, 80.0), (0.3, 2.0)):
        got = rmst_true_variance(Exponential(rate), NoCensoring(), eta)
        assert got == pytest.approx(exponential_rmst_variance(rate, eta), rel=1e-8)


def test_variance_grows_with_censoring():
    m = Exponential(0.03)
    base = rmst_true_variance(m, NoCensoring(), 60.0)
    assert rmst_true_variance(m, UniformCensoring(0, 240), 60.0) > base
    assert rmst_true_variance(m, AdministrativeCensoring(100.0), 60.0) == pytest.approx(base)
    with pytest.raises(DomainError):
        rmst_true_variance(m, UniformCensoring(0, 50), 60.0)


# scenario, region, control, treatment, D_r, (sigma2_1, sigma2_0)
TABLE_S5 = [
    ("early", ((0.07, 0.03), (0.02, 0.03)), 11.3, (664, 607)),
    ("early", ((0.07, 0.04), (0.03, 0.04)), 7.2, (505, 448)),
    ("early", ((0.07, 0.05), (0.04, 0.05)), 4.4, (377, 338)),
    ("early", ((0.07, 0.06), (0.05, 0.06)), 2.5, (283, 261)),
    ("late", ((0.04, 0.1), (0.04, 0.04)), 10.8, (498, 113)),
    ("late", ((0.05, 0.1), (0.05, 0.05)), 7.0, (367, 113)),
    ("late", ((0.06, 0.1), (0.06, 0.06)), 4.5, (273, 112)),
    ("late", ((0.07, 0.1), (0.07, 0.07)), 2.8, (208, 111)),
    ("crossing", ((1.6, 30), (1, 50)), 13.1, (855, 312)),
    ("crossing", ((1.6, 40), (1, 60)), 9.0, (896, 491)),
    ("crossing", ((1.6, 50), (1, 70)), 5.3, (908, 612)),
    ("crossing", ((1.6, 60), (1, 80)), 2.3, (903, 669)),
]


def s5_endpoint(scenario, params):
    (a0, b0), (a1, b1) = params
    if scenario == "crossing":
        control, treatment = Weibull(a0, b0), Weibull(a1, b1)
    else:
        psi = 10.0 if scenario == "early" else 6.0
        control = PiecewiseExponential(a0, b0, psi)
        treatment = PiecewiseExponential(a1, b1, psi)
    return SurvivalRMSTEndpoint(control, treatment, 80.0, UniformCensoring(0.0, 240.0))


@pytest.mark.parametrize("scenario,params,d,variances", TABLE_S5)
def test_nonproportional_scenarios(scenario, params, d, variances):
    ep = s5_endpoint(scenario, params)
    assert abs(ep.effect - d) <= 0.1
    s0, s1 = ep.arm_variances()
    assert s1 == pytest.approx(variances[0], rel=0.01)
    assert s0 == pytest.approx(variances[1], rel=0.01)
    assert ep.omega(1.0) == pytest.approx(s0 + s1)


def test_omega_dispatch():
    assert omega_for(OmegaEndpoint(2.0), 1.0) == 2.0
    assert omega_for(ContinuousEndpoint(), 1.0) == 2.0
    assert omega_for(BinaryEndpoint(0.3, 0.7), 1.0) == pytest.approx(0.42)
    with pytest.raises(DomainError):
        omega_for("normal", 1.0)


@pytest.mark.parametrize("scenario,params,d,variances", TABLE_S5[4:8])
def test_piecewise_calibration_round_trip(scenario, params, d, variances):
    (l0, g0), (l1, g1) = params
    target = rmst(PiecewiseExponential(l1, g1, 6.0), 80.0) - rmst(PiecewiseExponential(l0, g0, 6.0), 80.0)
    assert calibrate_piecewise_late_rate(l0, g0, l1, 6.0, 80.0, target) == pytest.approx(g1, abs=1e-6)


@pytest.mark.parametrize("scenario,params,d,variances", TABLE_S5[8:])
def test_weibull_calibration_round_trip(scenario, params, d, variances):
    (nu0, th0), (nu1, th1) = params
    target = rmst(Weibull(nu1, th1), 80.0) - rmst(Weibull(nu0, th0), 80.0)
    nu = calibrate_weibull_shape(nu0, th0, th1, 80.0, target)
    assert nu == pytest.approx(nu1, abs=1e-6)
    assert rmst(Weibull(nu, th1), 80.0) - rmst(Weibull(nu0, th0), 80.0) == pytest.approx(target, abs=1e-6)


def test_unreachable_calibration_reports_range():
    with pytest.raises(CalibrationError, match="achievable range") as info:
        calibrate_piecewise_late_rate(0.07, 0.03, 0.02, 10.0, 80.0, 500.0)
    lo, hi = info.value.achievable
    assert lo < hi < 80
    with pytest.raises(CalibrationError):
        calibrate_weibull_shape(1.6, 30.0, 50.0, 80.0, 200.0)


def test_invalid_parameters():
    with pytest.raises(DomainError):
        Exponential(0.0)
    with pytest.raises(DomainError):
        Weibull(1.0, -2.0)
    with pytest.raises(DomainError):
        UniformCensoring(5.0, 1.0)
