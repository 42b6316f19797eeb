import math

import numpy as np
import pytest
import scipy.special
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from wiltscan.errors import (
    ConfigError,
    DegenerateVarianceError,
    InsufficientDataError,
    ProvenanceError,
)
from wiltscan.features import FeatureMatrix, FeatureTable
from wiltscan.forest import ForestConfig
from wiltscan.stats import (
    EarlyDetectionDataset,
    accuracy_table_csv,
    bandwise_ttest_report,
    betainc,
    early_detection_report,
    five_number_summary,
    multispectral_feature_sets,
    relabel_early,
    significance_stars,
    t_two_sided_p,
    ttest_report_csv,
    welch_t_test,
)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 60), st.floats(0.05, 60), st.floats(0, 1))
def test_betainc_matches_scipy(a, b, x):
    assert betainc(a, b, x) == pytest.approx(scipy.special.betainc(a, b, x), rel=1e-9, abs=1e-13)


def test_betainc_domain():
    with pytest.raises(ValueError):
        betainc(0, 1, 0.5)
    with pytest.raises(ValueError):
        betainc(1, 1, 1.5)
    assert betainc(2, 3, 0.0) == 0.0 and betainc(2, 3, 1.0) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.floats(-40, 40), st.floats(0.5, 500))
def test_two_sided_p_matches_student_t(t, df):
    want = 2 * scipy.stats.t.sf(abs(t), df)
    assert t_two_sided_p(t, df) == pytest.approx(want, rel=1e-8, abs=1e-14)


def test_welch_worked_example():
    r = welch_t_test([1, 2, 3], [4, 5, 6])
    assert r.t_statistic == pytest.approx(-3.6742, abs=1e-4)
    assert r.degrees_of_freedom == 4
    assert r.p_value == pytest.approx(scipy.special.betainc(2, 0.5, 4 / (4 + r.t_statistic ** 2)), abs=1e-12)
    assert r.p_value == pytest.approx(0.0214, abs=1e-4)
    assert r.stars == "*"


def test_double_star_band():
    a = np.array([1.0, 2, 3])
    base = np.arange(1.0, 8)
    # shift b until the reference p falls inside (0.001, 0.01)
    shift = next(s for s in np.arange(0, 20, 0.05)
                 if 0.001 < scipy.stats.ttest_ind(a, base + s, equal_var=False).pvalue < 0.01)
    r = welch_t_test(a, base + shift)
    assert 0.001 < r.p_value < 0.01 and r.stars == "**"


def test_identical_samples():
    r = welch_t_test([1, 2, 3], [1, 2, 3])
    assert (r.t_statistic, r.p_value, r.stars) == (0.0, 1.0, "")


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 30), st.integers(2, 30), st.booleans())
def test_welch_matches_scipy(seed, na, nb, eq):
    rng = np.random.default_rng(seed)
    a = rng.normal(0, rng.uniform(0.1, 3), na)
    b = rng.normal(rng.normal(), rng.uniform(0.1, 3), nb)
    ref = scipy.stats.ttest_ind(a, b, equal_var=eq)
    r = welch_t_test(a, b, equal_var=eq)
    assert r.t_statistic == pytest.approx(ref.statistic, rel=1e-9)
    assert r.p_value == pytest.approx(ref.pvalue, rel=1e-7, abs=1e-14)
    if hasattr(ref, "df"):
        assert r.degrees_of_freedom == pytest.approx(ref.df, rel=1e-9)


@pytest.mark.parametrize("df", [2, 4, 10, 100])
def test_p_values_match_monte_carlo(df):
    rng = np.random.default_rng(df)
    draws = np.abs(rng.standard_t(df, 200_000))
    for t in (0.5, 1.0, 2.0, 3.0):
        assert t_two_sided_p(t, df) == pytest.approx(np.mean(draws >= t), abs=0.005)


@pytest.mark.parametrize("p,stars", [
    (0.0, "***"), (0.000999, "***"), (0.001, "**"), (0.00999, "**"), (0.01, "*"),
    (0.0499, "*"), (0.05, ""), (0.5, ""), (1.0, ""),
])
def test_star_thresholds_are_strict(p, stars):
    assert significance_stars(p) == stars


def test_t_test_errors():
    with pytest.raises(InsufficientDataError):
        welch_t_test([1], [1, 2])
    with pytest.raises(DegenerateVarianceError):
        welch_t_test([1, 1], [2, 2])


def _table(n_plots=40, seed=0, shift=0.0):
    rng = np.random.default_rng(seed)
    pids, tps, scores, stages, status, rows = [], [], [], [], [], []
    final = rng.choice([1, 2, 3, 4, 5, 6], n_plots)
    names = ["multispectral:717", "multispectral:475", "vi_multispectral:NDVI"]
    for tp in ("T1", "T2", "T3"):
        for i in range(n_plots):
            pids.append(f"P{i:03d}")
            tps.append(tp)
            scores.append(int(final[i]) if tp == "T3" else 1)
            stages.append("V5")
            status.append("")
            v = rng.normal(size=3)
            v[0] += shift * (final[i] >= 4)
            rows.append(v)
    return FeatureTable(pids, tps, scores, stages, status, names, np.array(rows))


def test_relabel_uses_final_scores_and_balances():
    t = _table()
    ed = relabel_early(t, seed=1)
    assert ed.time_points == ["T1", "T2", "T3"]
    counts = np.bincount(list(ed.labels.values()))
    assert counts[0] == counts[1]
    assert all(s != 3 for s in ed.final_scores.values())
    for pid, lab in ed.labels.items():
        assert lab == (1 if ed.final_scores[pid] >= 4 else 0)
    for tp in ed.time_points:
        m = ed.matrices[tp]
        assert sorted(m.row_ids) == sorted(ed.labels)
        assert [ed.labels[p] for p in m.row_ids] == m.labels.tolist()


def test_relabel_requires_t3():
    t = _table().select_rows(np.array([tp != "T3" for tp in _table().time_points]))
    with pytest.raises(ProvenanceError):
        relabel_early(t)


def test_band_report_orders_and_detects_shift():
    ed = relabel_early(_table(n_plots=200, shift=1.5))
    rows = bandwise_ttest_report(ed, "T1")
    assert [r.feature for r in rows] == ["multispectral:475", "multispectral:717", "vi_multispectral:NDVI"]
    assert rows[1].result.stars == "***" and rows[1].result.t_statistic > 0
    text = ttest_report_csv(rows).splitlines()
    assert text[0] == "feature,band_center_nm,t,df,p,stars"
    assert text[1].startswith("multispectral:475,475,")


def test_false_positive_rate_on_null_features():
    hits = total = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        labels = np.repeat([0, 1], 30)
        X = rng.normal(size=(60, 200))
        names = [f"multispectral:{400 + i}" for i in range(200)]
        ed = EarlyDetectionDataset({"T1": FeatureMatrix(X, names, labels)}, {}, {})
        rows = bandwise_ttest_report(ed, "T1")
        hits += sum(r.result.p_value < 0.05 for r in rows)
        total += len(rows)
    assert abs(hits / total - 0.05) <= 0.03


def test_feature_sets_and_accuracy_report():
    names = [f"multispectral:{c}" for c in (444, 475, 531, 560, 650, 717)] + ["vi_multispectral:NDVI"]
    sets = multispectral_feature_sets(names + ["thermal:canopy_temp"])
    assert sets["visible"] == ["multispectral:475", "multispectral:560", "multispectral:650"]
    assert sets["all"] == sets["bands"] + sets["vis"]
    ed = relabel_early(_table(n_plots=60, shift=3.0))
    sets = {"a": ["multispectral:717"], "b": ["multispectral:475"]}
    rows = early_detection_report(ed, sets, ForestConfig(n_estimators=20), 5)
    assert [(r.time_point, r.feature_set) for r in rows][:2] == [("T1", "a"), ("T1", "b")]
    assert rows[0].mean_accuracy > rows[1].mean_accuracy
    assert accuracy_table_csv(rows).splitlines()[0] == "time_point,feature_set,mean_accuracy,std_dev"
    with pytest.raises(ConfigError):
        early_detection_report(ed, {})


def test_five_number_summary():
    s = five_number_summary([1, 2, 3, 4, 5])
    assert s == {"min": 1, "q1": 2, "median": 3, "q3": 4, "max": 5}
