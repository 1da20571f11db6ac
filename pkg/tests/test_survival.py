import numpy as np
import pytest

from mrctdesign.endpoints import Exponential, PiecewiseExponential, UniformCensoring, rmst, rmst_true_variance
from mrctdesign.errors import ConvergenceError, DomainError
from mrctdesign.survival import (
    StepFunction,
    cox_log_partial_likelihood,
    cox_loghr,
    kaplan_meier,
    nelson_aalen,
    read_subjects_csv,
    rmst_estimate,
    rmst_variance_estimate,
)

from oracles import (
    censoring_km_bruteforce,
    cox_grid_search,
    cox_loglik_loop,
    km_bruteforce,
    rmst_bruteforce,
    rmst_variance_bruteforce,
    small_datasets,
)

PROBES = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0)


def test_km_exhaustive_small_datasets():
    count = 0
    for times, events in small_datasets():
        km = kaplan_meier(times, events)
        g = kaplan_meier(times, events, target="censoring")
        for t in PROBES:
            assert km(t) == pytest.approx(km_bruteforce(times, events, t), abs=1e-12)
            assert g(t) == pytest.approx(censoring_km_bruteforce(times, events, t), abs=1e-12)
        count += 1
    assert count == sum(6 ** n for n in range(1, 6))


def test_rmst_and_variance_exhaustive_small_datasets():
    for times, events in small_datasets():
        for eta in (1.5, 2.5, 3.0):
            assert rmst_estimate(times, events, eta) == pytest.approx(
                rmst_bruteforce(times, events, eta), abs=1e-12
            )
            assert rmst_variance_estimate(times, events, eta) == pytest.approx(
                rmst_variance_bruteforce(times, events, eta), abs=1e-10
            )


def test_km_hand_example():
    # events at 1 and 3, censoring at 2: S = 4/5 then 4/5 * 2/3
    km = kaplan_meier([1, 2, 3, 4, 5], [1, 0, 1, 0, 0])
    assert km(0.9) == 1.0
    assert km(1.0) == pytest.approx(0.8)
    assert km(3.0) == pytest.approx(0.8 * 2 / 3)
    assert km.left(3.0) == pytest.approx(0.8)


def test_nelson_aalen_increments():
    na = nelson_aalen([1, 1, 2, 3], [1, 1, 0, 1])
    assert na(1.0) == pytest.approx(2 / 4)
    assert na(3.0) == pytest.approx(2 / 4 + 1 / 1)


def test_step_function_area():
    f = StepFunction(np.array([1.0, 3.0]), np.array([0.5, 0.25]))
    assert f.integral(0.0, 4.0) == pytest.approx(1 + 1.0 + 0.25)
    assert f.integral(2.0, 2.0) == 0.0
    with pytest.raises(DomainError):
        f.integral(3.0, 1.0)


def test_rmst_carries_last_value_forward():
    # last observation censored at 2: S stays 0.5 beyond it
    assert rmst_estimate([1, 2], [1, 0], 4.0) == pytest.approx(1 + 0.5 * 3)


def test_input_validation():
    with pytest.raises(DomainError):
        kaplan_meier([], [])
    with pytest.raises(DomainError):
        kaplan_meier([1, -1], [1, 1])
    with pytest.raises(DomainError):
        kaplan_meier([1, 2], [1])


def _random_cox_data(rng):
    n = int(rng.integers(8, 25))
    group = rng.integers(0, 2, n)
    rate = np.where(group == 1, 0.6, 1.0)
    t = np.ceil(rng.exponential(1 / rate) * 4) / 4  # quarter units force ties
    c = np.ceil(rng.uniform(0, 3, n) * 4) / 4
    return np.minimum(t, c), (t <= c).astype(int), group


def test_cox_matches_grid_search():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 100:
        time, event, group = _random_cox_data(rng)
        try:
            neg_beta, var = cox_loghr(time, event, group)
        except (ConvergenceError, DomainError):
            continue
        if abs(neg_beta) > 7:
            continue
        assert -neg_beta == pytest.approx(cox_grid_search(time, event, group), abs=1e-4)
        assert var > 0
        checked += 1


def test_partial_likelihood_matches_loop():
    rng = np.random.default_rng(7)
    time, event, group = _random_cox_data(rng)
    for b in (-1.0, 0.0, 0.4):
        assert cox_log_partial_likelihood(b, time, event, group) == pytest.approx(
            cox_loglik_loop(b, time, event, group), rel=1e-12
        )


def test_cox_monotone_likelihood_detected():
    # every event in the treatment arm: the MLE diverges
    with pytest.raises(ConvergenceError, match="monotone"):
        cox_loghr([1, 2, 3, 4], [1, 1, 0, 0], [1, 1, 0, 0])
    with pytest.raises(DomainError):
        cox_loghr([1, 2], [1, 1], [0, 0])


def test_cox_large_sample_recovers_hazard_ratio():
    rng = np.random.default_rng(5)
    n = 4000
    group = np.repeat([0, 1], n)
    t = np.concatenate((rng.exponential(1 / 0.05, n), rng.exponential(1 / 0.035, n)))
    event = t <= 36
    est, var = cox_loghr(np.minimum(t, 36), event, group)
    assert abs(est + np.log(0.7)) < 4 * np.sqrt(var)
    # information close to the Schoenfeld form 4 / events
    assert var == pytest.approx(4 / event.sum(), rel=0.05)


@pytest.mark.parametrize("model", [Exponential(0.03), PiecewiseExponential(0.07, 0.03, 10.0)], ids=repr)
def test_plugin_variance_is_consistent(model):
    rng = np.random.default_rng(17)
    cens = UniformCensoring(0.0, 240.0)
    n = 20000
    t = model.sample(rng, n)
    c = cens.sample(rng, n)
    time, event = np.minimum(t, c), t <= c
    assert rmst_estimate(time, event, 80.0) == pytest.approx(rmst(model, 80.0), rel=0.02)
    assert rmst_variance_estimate(time, event, 80.0) == pytest.approx(
        rmst_true_variance(model, cens, 80.0), rel=0.05
    )


def test_read_subjects_csv(tmp_path):
    p = tmp_path / "subjects.csv"
    p.write_text("time,event,group\n1.5,1,0\n2.0,0,1\n")
    time, event, group = read_subjects_csv(p)
    assert time.tolist() == [1.5, 2.0]
    assert event.tolist() == [True, False]
    assert group.tolist() == [0, 1]


def test_read_subjects_csv_reports_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("time,event,group\n1.5,1,0\n-2.0,0,1\n")
    with pytest.raises(DomainError, match=r"bad.csv:3:"):
        read_subjects_csv(p)
    q = tmp_path / "cols.csv"
    q.write_text("time,event\n1,1\n")
    with pytest.raises(DomainError, match="missing columns"):
        read_subjects_csv(q)
