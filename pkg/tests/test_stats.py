import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qaplon.stats import (
    STUDY_VARIABLES,
    aggregate_classes,
    correlation_matrix,
    mean_std,
    ols_regression,
    quantiles,
    spearman,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def pearson(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    dx, dy = x - x.mean(), y - y.mean()
    return float(dx @ dy / math.sqrt((dx @ dx) * (dy @ dy)))


class TestSpearman:
    def test_identity(self):
        assert spearman([1, 5, 2, 8], [1, 5, 2, 8]) == 1.0

    def test_reversed(self):
        assert spearman([1, 2, 3, 4, 5], [9, 7, 5, 3, 1]) == -1.0

    def test_ties_hand_ranked(self):
        # ranks of x: 1, 2.5, 2.5, 4; ranks of y: 1, 3, 2, 4
        expected = pearson([1, 2.5, 2.5, 4], [1, 3, 2, 4])
        assert abs(spearman([1, 2, 2, 4], [1, 3, 2, 4]) - expected) <= 1e-12

    def test_missing_pairs_dropped(self):
        x = [1, 2, np.nan, 3, 4]
        y = [2, 4, 1, np.nan, 8]
        assert spearman(x, y) == 1.0

    @pytest.mark.parametrize("x,y", [([1, 2], [3, 4]), ([1, 1, 1], [1, 2, 3]), ([1, 2, 3], [5, 5, 5]),
                                     ([1, np.nan, 3, np.nan], [1, 2, 3, 4])])
    def test_degenerate(self, x, y):
        assert math.isnan(spearman(x, y))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            spearman([1, 2, 3], [1, 2])

    @given(st.lists(st.tuples(st.integers(-1000, 1000), st.integers(-1000, 1000)), min_size=3, max_size=30))
    def test_monotone_invariance(self, pairs):
        x, y = (np.array(v, dtype=np.int64) for v in zip(*pairs))
        a = spearman(x, y)
        b = spearman(x ** 3 + 7, 5 * y - 3)
        assert (math.isnan(a) and math.isnan(b)) or abs(a - b) <= 1e-9


class TestCorrelationMatrix:
    def rows(self, k=12, seed=0):
        rng = np.random.default_rng(seed)
        return [{v: float(rng.normal()) for v in STUDY_VARIABLES} for _ in range(k)]

    def test_symmetric_unit_diagonal(self):
        m = correlation_matrix(self.rows())
        assert m.shape == (9, 9)
        assert np.array_equal(m, m.T) and np.all(np.diag(m) == 1)

    def test_duplicated_rows(self):
        rows = self.rows()
        assert np.allclose(correlation_matrix(rows), correlation_matrix(rows + rows), atol=1e-12)

    @given(st.integers(0, 10**6), st.randoms())
    def test_row_order_invariance(self, seed, rnd):
        rows = self.rows(10, seed)
        shuffled = rows[:]
        rnd.shuffle(shuffled)
        assert np.allclose(correlation_matrix(rows), correlation_matrix(shuffled), atol=1e-12)

    def test_missing_cells(self):
        rows = self.rows(4)
        for r in rows[:2]:
            r["ell"] = None
        m = correlation_matrix(rows)
        k = STUDY_VARIABLES.index("ell")
        assert math.isnan(m[k, 0]) and m[k, k] == 1

    def test_array_input(self):
        data = np.random.default_rng(1).normal(size=(8, 3))
        m = correlation_matrix(data, ("a", "b", "c"))
        assert m[0, 1] == pytest.approx(spearman(data[:, 0], data[:, 1]))


class TestOls:
    def test_exact_line(self):
        x = np.arange(6.0)
        slope, intercept, r2 = ols_regression(x, 2 * x + 1)
        assert (slope, intercept, r2) == pytest.approx((2, 1, 1), abs=1e-12)

    def test_constant_y(self):
        assert ols_regression([1, 2, 3, 4], [5, 5, 5, 5]) == (0.0, 5.0, 0.0)

    def test_constant_x(self):
        assert all(math.isnan(v) for v in ols_regression([2, 2, 2], [1, 2, 3]))

    def test_too_few(self):
        assert all(math.isnan(v) for v in ols_regression([1, 2], [1, 2]))

    def test_normal_equations(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(0, 10, 10)
        y = 3 * x - 2 + rng.normal(size=10)
        slope, intercept, r2 = ols_regression(x, y)
        resid = y - slope * x - intercept
        assert abs(resid @ x) <= 1e-9 and abs(resid.sum()) <= 1e-9
        assert 0 <= r2 <= 1
        assert np.allclose([slope, intercept], np.polyfit(x, y, 1), atol=1e-12)

    @given(st.lists(st.tuples(finite, finite), min_size=3, max_size=30))
    def test_slope_sign_matches_covariance(self, pairs):
        x, y = map(np.array, zip(*pairs))
        slope, _, r2 = ols_regression(x, y)
        if math.isnan(slope):
            return
        cov = np.mean((x - x.mean()) * (y - y.mean()))
        if abs(cov) > 1e-6 * (np.std(x) * np.std(y) + 1e-300):
            assert np.sign(slope) == np.sign(cov)
        assert 0 <= r2 <= 1


class TestAggregation:
    def test_single_row(self):
        out = aggregate_classes([{"class": "u", "n": 9, "n_v": 12}])
        mean, std = out[("u", 9)]["n_v"]
        assert mean == 12 and math.isnan(std)

    def test_identical_rows(self):
        out = aggregate_classes([{"class": "u", "n": 9, "cc": 0.5}] * 4)
        assert out[("u", 9)]["cc"] == (0.5, 0.0)

    def test_hand_computed(self):
        rows = [{"class": "r", "n": 8, "q": v} for v in (1.0, 2.0, 4.0)]
        mean, std = aggregate_classes(rows)[("r", 8)]["q"]
        assert mean == pytest.approx(7 / 3, abs=1e-15)
        assert std == pytest.approx(math.sqrt(((1 - 7 / 3) ** 2 + (2 - 7 / 3) ** 2 + (4 - 7 / 3) ** 2) / 2), abs=1e-15)

    def test_missing_excluded_per_variable(self):
        rows = [{"class": "u", "n": 9, "ell": v, "cc": 1.0} for v in (1.0, None, 3.0)]
        out = aggregate_classes(rows)[("u", 9)]
        assert out["ell"] == (2.0, pytest.approx(math.sqrt(2)))
        assert out["count"] == 3

    def test_groups_in_first_seen_order(self):
        rows = [{"class": c, "n": n} for c, n in (("b", 9), ("a", 8), ("b", 9))]
        assert list(aggregate_classes(rows)) == [("b", 9), ("a", 8)]

    def test_mean_std_and_quantiles(self):
        assert math.isnan(mean_std([])[0])
        assert quantiles([4, 1, 3, 2, 5]) == (1, 2, 3, 4, 5)
        assert all(math.isnan(v) for v in quantiles([np.nan]))
