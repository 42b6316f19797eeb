"""Welch's t-test and the early-detection workflow."""
import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import (
    ConfigError,
    DegenerateVarianceError,
    InsufficientDataError,
    ProvenanceError,
)
from .features import FeatureMatrix, group_of
from .forest import ForestConfig
from .ml import LabelScheme, balance_classes, cross_validate, regroup_labels
from .raster import TIME_POINTS

_EPS = 1e-16
_TINY = 1e-300


def _betacf(a, b, x, max_iter=10_000):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a, b, x):
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t, df):
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0:
        return 1.0
    if math.isinf(t):
        return 0.0
    t2 = float(t) * float(t)
    if t2 < df:
        # small |t|: df/(df+t^2) rounds toward 1, so use the complement directly
        p = 1.0 - betainc(0.5, df / 2.0, t2 / (df + t2))
    else:
        p = betainc(df / 2.0, 0.5, df / (df + t2))
    return float(min(1.0, max(0.0, p)))


def significance_stars(p):
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: float
    p_value: float
    stars: str


def welch_t_test(a, b, equal_var=False):
    """Two-sided two-sample t-test; Welch-Satterthwaite df unless ``equal_var``."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise InsufficientDataError("each sample needs at least two values")
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if equal_var:
        df = na + nb - 2.0
        pooled = ((na - 1) * va + (nb - 1) * vb) / df
        se2 = pooled * (1.0 / na + 1.0 / nb)
    else:
        qa, qb = va / na, vb / nb
        se2 = qa + qb
        df = se2 * se2 / (qa * qa / (na - 1) + qb * qb / (nb - 1)) if se2 > 0 else na + nb - 2.0
    if se2 == 0:
        if ma == mb:
            return TTestResult(0.0, float(df), 1.0, "")
        raise DegenerateVarianceError("both samples are constant with different means")
    t = float((ma - mb) / math.sqrt(se2))
    p = t_two_sided_p(t, df)
    return TTestResult(t, float(df), p, significance_stars(p))


@dataclass
class EarlyDetectionDataset:
    matrices: Dict[str, FeatureMatrix]
    labels: Dict[str, int]
    final_scores: Dict[str, int]
    extra: dict = field(default_factory=dict)

    @property
    def time_points(self):
        return [tp for tp in TIME_POINTS if tp in self.matrices]


def relabel_early(table, seed=0, columns=None):
    """Carry final (T3) tolerant/susceptible labels back to every time point.

    Moderate plots are dropped and the remaining plots are balanced once, so
    the same plots appear with the same label at every time point.
    """
    final = {}
    for pid, tp, score in zip(table.plot_ids, table.time_points, table.wilt_scores):
        if tp == "T3":
            final[pid] = score
    missing = sorted({p for p in table.plot_ids if p not in final})
    if missing:
        raise ProvenanceError(f"plots without a T3 wilt score: {', '.join(missing[:10])}")

    plots = sorted(final)
    three = regroup_labels([final[p] for p in plots], LabelScheme.THREE_CLASS)
    extreme = [(p, 0 if c == 0 else 1) for p, c in zip(plots, three) if c != 1]
    ids = [p for p, _ in extreme]
    lab = np.array([c for _, c in extreme], dtype=np.intp)
    dummy = FeatureMatrix(np.zeros((len(ids), 0)), [], lab, ids)
    balanced = balance_classes(dummy, lab, seed=seed, classes=[0, 1])
    labels = dict(zip(balanced.row_ids, balanced.labels.tolist()))

    columns = list(table.names) if columns is None else list(columns)
    matrices = {}
    for tp in TIME_POINTS:
        rows = [
            i for i, (pid, t, status) in enumerate(
                zip(table.plot_ids, table.time_points, table.status))
            if t == tp and pid in labels and status == ""
        ]
        if not rows:
            continue
        sub = table.select_rows(np.isin(np.arange(len(table)), rows))
        matrices[tp] = sub.matrix(columns, np.array([labels[p] for p in sub.plot_ids]))
    return EarlyDetectionDataset(matrices, labels, {p: final[p] for p in labels})


def _band_center(name):
    tail = name.split(":", 1)[-1]
    try:
        return float(tail)
    except ValueError:
        return None


def _report_order(names):
    bands = [n for n in names if _band_center(n) is not None]
    others = [n for n in names if _band_center(n) is None]
    return sorted(bands, key=lambda n: (_band_center(n), n)) + sorted(
        others, key=lambda n: (n.split(":", 1)[-1], n)
    )


@dataclass(frozen=True)
class TTestRow:
    feature: str
    band_center_nm: Optional[float]
    result: TTestResult


def bandwise_ttest_report(ed, time_point, columns=None, equal_var=False):
    """One Welch test per feature column, susceptible versus tolerant."""
    if time_point not in ed.matrices:
        raise InsufficientDataError(f"no rows at {time_point}")
    m = ed.matrices[time_point]
    names = m.names if columns is None else list(columns)
    labels = np.asarray(m.labels)
    rows = []
    for name in _report_order(names):
        col = m.values[:, m.names.index(name)]
        res = welch_t_test(col[labels == 1], col[labels == 0], equal_var=equal_var)
        rows.append(TTestRow(name, _band_center(name), res))
    return rows


def ttest_report_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "band_center_nm", "t", "df", "p", "stars"])
    for r in rows:
        c = "" if r.band_center_nm is None else f"{r.band_center_nm:g}"
        w.writerow([r.feature, c, repr(r.result.t_statistic), repr(r.result.degrees_of_freedom),
                    repr(r.result.p_value), r.result.stars])
    return buf.getvalue()


def multispectral_feature_sets(names):
    """Named column sets: bands, VIs, visible bands only, and everything together."""
    bands = [n for n in names if group_of(n) == "multispectral"]
    vis = [n for n in names if group_of(n) == "vi_multispectral"]
    visible = [n for n in bands if _band_center(n) in (475.0, 560.0, 650.0)]
    sets = {"bands": bands, "vis": vis, "visible": visible, "all": bands + vis}
    return {k: v for k, v in sets.items() if v}


@dataclass(frozen=True)
class AccuracyRow:
    time_point: str
    feature_set: str
    mean_accuracy: float
    std_dev: float


def early_detection_report(ed, feature_sets, forest=ForestConfig(), cv_k=5):
    """Cross-validated accuracy for every (time point, feature set) pair."""
    if not feature_sets:
        raise ConfigError("at least one feature set is required")
    rows = []
    for tp in ed.time_points:
        m = ed.matrices[tp]
        for name, cols in feature_sets.items():
            if not cols:
                raise ConfigError(f"feature set {name!r} is empty")
            rep = cross_validate(m.columns(cols), m.labels, cv_k, forest)
            rows.append(AccuracyRow(tp, name, rep.mean_accuracy, rep.std_dev))
    return rows


def accuracy_table_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_point", "feature_set", "mean_accuracy", "std_dev"])
    for r in rows:
        w.writerow([r.time_point, r.feature_set, repr(r.mean_accuracy), repr(r.std_dev)])
    return buf.getvalue()


def five_number_summary(values):
    q = np.percentile(values, [0, 25, 50, 75, 100])
    return dict(zip(["min", "q1", "median", "q3", "max"], q.tolist()))
