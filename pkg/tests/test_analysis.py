import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from mrctdesign.analysis import (
    TrialAnalysisInput,
    analyze_trial,
    read_summaries_csv,
    schoenfeld_sigma2,
    summaries_from_hr,
)
from mrctdesign.errors import DomainError
from mrctdesign.model import RegionalSummary

LEADER_IDS = ("EU", "NA", "Asia", "ROW")
LEADER_HR = (0.82, 1.01, 0.62, 0.83)
LEADER_VAR = (0.0087, 0.0093, 0.0656, 0.0113)


def leader_report():
    inp = TrialAnalysisInput(
        summaries=tuple(summaries_from_hr(LEADER_IDS, LEADER_HR, LEADER_VAR)),
        margin=math.log(1.3), pi=0.5, scale="log_hr",
    )
    return analyze_trial(inp)


def test_leader_reanalysis():
    rep = leader_report()
    assert rep.tau2_hat == pytest.approx(0.0077, abs=2e-4)
    assert rep.pooled.d_tilde == pytest.approx(0.150, abs=2e-3)
    assert rep.pooled.variance == pytest.approx(0.0054, abs=2e-4)
    est, lo, hi = rep.overall
    assert (round(est, 2), round(lo, 2), round(hi, 2)) == (0.86, 0.75, 0.99)
    rows = rep.regions()
    expected = [(0.84, 0.71, 1.00), (0.93, 0.78, 1.10), (0.83, 0.71, 0.97), (0.85, 0.71, 1.01)]
    for row, (e, l, h) in zip(rows, expected):
        assert row.estimate == pytest.approx(e, abs=0.01)
        assert row.lower == pytest.approx(l, abs=0.01)
        assert row.upper == pytest.approx(h, abs=0.01)
        assert row.consistent_ni and row.consistent_superiority


@pytest.mark.parametrize("events,expected", [(207 + 252, 0.0087), (24 + 37, 0.0656), (4, 1.0)])
def test_schoenfeld_variance(events, expected):
    assert schoenfeld_sigma2(events) == pytest.approx(expected, abs=5e-5)


def test_schoenfeld_needs_events():
    with pytest.raises(DomainError):
        schoenfeld_sigma2(0)


def test_identical_regions():
    s = tuple(RegionalSummary(f"r{i}", 0.2, 0.01) for i in range(3))
    rep = analyze_trial(TrialAnalysisInput(s))
    assert rep.tau2_hat == 0.0
    for shr in rep.shrinkage:
        assert shr.d_tilde_r == pytest.approx(rep.pooled.d_tilde)
    assert all(rep.consistency_superiority)


def test_transform_consistency():
    hr_side = leader_report()
    direct = tuple(RegionalSummary(i, -math.log(h), v) for i, h, v in zip(LEADER_IDS, LEADER_HR, LEADER_VAR))
    identity = analyze_trial(TrialAnalysisInput(direct, margin=math.log(1.3), scale="identity"))
    for a, b in zip(identity.regions(), hr_side.regions()):
        assert math.exp(-a.estimate) == pytest.approx(b.estimate, abs=1e-12)
        assert math.exp(-a.upper) == pytest.approx(b.lower, abs=1e-12)
        assert math.exp(-a.lower) == pytest.approx(b.upper, abs=1e-12)
    assert identity.tau2_hat == hr_side.tau2_hat


def _random_summaries(draw_d, draw_v):
    return tuple(RegionalSummary(f"r{i}", d, v) for i, (d, v) in enumerate(zip(draw_d, draw_v)))


summary_lists = st.integers(2, 6).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-1, 1), min_size=n, max_size=n),
    st.lists(st.floats(1e-3, 0.5), min_size=n, max_size=n),
))


@settings(max_examples=200, deadline=None)
@given(data=summary_lists)
def test_shrinkage_intervals_never_wider_than_naive(data):
    s = _random_summaries(*data)
    rep = analyze_trial(TrialAnalysisInput(s))
    z = 1.959963984540054
    for (lo, hi), shr, summ in zip(rep.intervals, rep.shrinkage, s):
        naive = 2 * z * math.sqrt(summ.sigma2 + rep.tau2_hat)
        assert hi - lo <= naive * (1 + 1e-12)
        assert lo <= shr.d_tilde_r <= hi


@settings(max_examples=200, deadline=None)
@given(data=summary_lists, c=st.floats(0.01, 100))
def test_superiority_flags_scale_invariant(data, c):
    s = _random_summaries(*data)
    scaled = tuple(RegionalSummary(x.region_id, c * x.d_hat, c * c * x.sigma2) for x in s)
    a = analyze_trial(TrialAnalysisInput(s)).shrinkage
    b = analyze_trial(TrialAnalysisInput(scaled)).shrinkage
    pa = analyze_trial(TrialAnalysisInput(s)).pooled.d_tilde
    pb = analyze_trial(TrialAnalysisInput(scaled)).pooled.d_tilde
    for x, y in zip(a, b):
        margin = x.d_tilde_r - 0.5 * pa
        # away from the decision boundary the flag must not change
        if abs(margin) > 1e-9 * (1 + abs(pa)):
            assert (x.d_tilde_r >= 0.5 * pa) == (y.d_tilde_r >= 0.5 * pb)
            assert y.d_tilde_r == pytest.approx(c * x.d_tilde_r, rel=1e-9, abs=1e-12)


def test_opposite_effects_pool_to_zero():
    s = (RegionalSummary("a", 0.3, 0.01), RegionalSummary("b", -0.3, 0.01))
    rep = analyze_trial(TrialAnalysisInput(s))
    assert rep.pooled.d_tilde == pytest.approx(0.0, abs=1e-15)
    assert rep.consistency_superiority == (True, False)


def test_input_validation():
    with pytest.raises(DomainError):
        TrialAnalysisInput((RegionalSummary("a", 0.1, 0.01),))
    s = (RegionalSummary("a", 0.1, 0.01), RegionalSummary("b", 0.2, 0.01))
    with pytest.raises(DomainError):
        TrialAnalysisInput(s, scale="odds")
    with pytest.raises(DomainError):
        summaries_from_hr(["a"], [0.0], [0.1])


def test_csv_with_event_counts(tmp_path):
    p = tmp_path / "leader.csv"
    p.write_text(
        "region,estimate_or_hr,variance_or_events\n"
        "EU,0.82,459\nNA,1.01,428\nAsia,0.62,61\nROW,0.83,0.0113\n"
    )
    s = read_summaries_csv(p, scale="log_hr")
    assert [x.region_id for x in s] == list(LEADER_IDS)
    assert s[0].sigma2 == pytest.approx(4 / 459)
    assert s[2].d_hat == pytest.approx(-math.log(0.62))
    assert s[3].sigma2 == 0.0113


def test_csv_errors_name_the_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("region,estimate_or_hr,variance_or_events\nEU,0.82,459\nNA,abc,0.01\n")
    with pytest.raises(DomainError, match=r"bad.csv:3:"):
        read_summaries_csv(p)


def test_report_dict_round_trip():
    d = leader_report().to_dict()
    assert d["scale"] == "log_hr"
    assert len(d["regions"]) == 4
    assert d["pooled"]["significant"] is True
    assert np.isclose(d["pooled"]["estimate"], math.exp(-d["pooled"]["d_tilde"]))
