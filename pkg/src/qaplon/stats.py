"""Rank correlation, least squares and per-class aggregation for the study table.

Missing values are NaN throughout. Correlations drop incomplete pairs first.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata

STUDY_VARIABLES = ("n_v", "cc", "l_opt", "y2", "f_nn", "q", "ell", "sa_hit", "ga_hit")
MIN_PAIRS = 3


def _complete_pairs(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("series must have equal length")
    keep = np.isfinite(x) & np.isfinite(y)
    return x[keep], y[keep]


def _pearson(x, y):
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        return math.nan
    return float(np.clip((dx @ dy) / denom, -1.0, 1.0))


def spearman(x, y) -> float:
    """Spearman's rho with average ranks for ties; NaN when undefined."""
    x, y = _complete_pairs(x, y)
    if x.size < MIN_PAIRS:
        return math.nan
    return _pearson(rankdata(x), rankdata(y))


def correlation_matrix(rows, variables=STUDY_VARIABLES) -> np.ndarray:
    """Pairwise-complete Spearman matrix over ``variables``.

    ``rows`` is a sequence of mappings (or a 2-D array with one column per
    variable). Cells with fewer than three complete pairs are NaN.
    """
    data = _as_columns(rows, variables)
    k = len(variables)
    out = np.full((k, k), math.nan)
    for a in range(k):
        out[a, a] = 1.0
        for b in range(a + 1, k):
            out[a, b] = out[b, a] = spearman(data[:, a], data[:, b])
    return out


def _as_columns(rows, variables):
    if isinstance(rows, np.ndarray):
        return rows.astype(np.float64)
    return np.array([[_num(r.get(v)) for v in variables] for r in rows], dtype=np.float64).reshape(-1, len(variables))


def _num(v):
    if v is None or v == "":
        return math.nan
    return float(v)


def ols_regression(x, y):
    """Least-squares line ``y = slope * x + intercept``; returns (slope, intercept, r_squared).

    NaN triple when fewer than three complete pairs remain or ``x`` is constant.
    """
    x, y = _complete_pairs(x, y)
    if x.size < MIN_PAIRS:
        return math.nan, math.nan, math.nan
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        return math.nan, math.nan, math.nan
    dy = y - y.mean()
    slope = float(dx @ dy) / sxx
    intercept = float(y.mean() - slope * x.mean())
    syy = float(dy @ dy)
    if syy == 0.0:
        return slope, intercept, 0.0
    resid = dy - slope * dx
    r2 = 1.0 - float(resid @ resid) / syy
    return slope, intercept, min(max(r2, 0.0), 1.0)


def mean_std(values):
    """Mean and sample standard deviation (n - 1) of the finite values."""
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return math.nan, math.nan
    if v.size == 1:
        return float(v[0]), math.nan
    return float(v.mean()), float(v.std(ddof=1))


def aggregate_classes(rows, variables=STUDY_VARIABLES):
    """Per-(class, n) mean and std of every variable.

    Returns ``{(cls, n): {var: (mean, std), "count": k}}`` in first-seen order.
    """
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["class"], int(r["n"])), []).append(r)
    out = {}
    for key, members in groups.items():
        summary = {"count": len(members)}
        for v in variables:
            summary[v] = mean_std([_num(m.get(v)) for m in members])
        out[key] = summary
    return out


def quantiles(values):
    """min, lower quartile, median, upper quartile, max of the finite values."""
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return (math.nan,) * 5
    return tuple(float(q) for q in np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0]))
