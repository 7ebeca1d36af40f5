import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import ema_closed_form as oracle_ema, rolling_min_scan as oracle_rolling_min
from preictal.indicators import (
    EmptySeriesError,
    FeatureSeries,
    ema_trend,
    maacd,
    rolling_min,
)

value_lists = st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200)


def series(values):
    values = np.asarray(values, dtype=float)
    return FeatureSeries("f", np.arange(1.0, len(values) + 1.0), values)


class TestEmaTrend:
    def test_constant_is_fixed_point(self):
        out = ema_trend(series(np.full(20, 4.2)), w=7)
        np.testing.assert_allclose(out.values, 4.2)

    def test_step_sequence_by_direct_recursion(self):
        out = ema_trend(series([0.0, 0.0, 0.0, 1.0, 1.0]), w=7)
        np.testing.assert_allclose(out.values, [0.0, 0.0, 0.0, 0.25, 0.4375])

    def test_matches_closed_form_oracle(self):
        rng = np.random.default_rng(17)
        values = rng.normal(size=120)
        out = ema_trend(series(values), w=7)
        np.testing.assert_allclose(out.values, oracle_ema(values, 7), atol=1e-12)

    @given(value_lists, st.integers(1, 12))
    def test_closed_form_property(self, values, w):
        out = ema_trend(series(values), w=w)
        scale = max(1.0, np.abs(values).max())
        np.testing.assert_allclose(
            out.values, oracle_ema(np.asarray(values), w), atol=1e-12 * scale
        )

    def test_empty_series_rejected(self):
        with pytest.raises(EmptySeriesError):
            ema_trend(series([]))

    def test_times_preserved_and_id_prefixed(self):
        out = ema_trend(series([1.0, 2.0]), w=3)
        np.testing.assert_array_equal(out.times, [1.0, 2.0])
        assert out.feature_id == "trend:f"


class TestRollingMin:
    def test_strictly_increasing_hits_window_start(self):
        values = np.arange(50.0)
        out = rolling_min(series(values), p=10)
        for t in range(11, 50):
            assert out.values[t] == values[t - 10]

    def test_constant_unchanged(self):
        out = rolling_min(series(np.full(40, 2.5)), p=27)
        np.testing.assert_array_equal(out.values, np.full(40, 2.5))

    def test_matches_naive_scan_exactly(self):
        rng = np.random.default_rng(3)
        values = rng.normal(size=200)
        out = rolling_min(series(values), p=27)
        np.testing.assert_array_equal(out.values, oracle_rolling_min(values, 27))

    @given(value_lists, st.integers(0, 40))
    def test_scan_property(self, values, p):
        out = rolling_min(series(values), p=p)
        np.testing.assert_array_equal(
            out.values, oracle_rolling_min(np.asarray(values), p)
        )

    def test_empty_series_rejected(self):
        with pytest.raises(EmptySeriesError):
            rolling_min(series([]))


class TestMaacd:
    def test_constant_is_zero(self):
        out = maacd(series(np.full(60, 7.0)))
        np.testing.assert_allclose(out.values, 0.0, atol=1e-12)

    def test_ramp_reaches_plateau(self):
        # far past the warm-up, M(t) settles at T(t) - T(t-p)
        values = np.arange(400.0)
        w, p = 7, 27
        out = maacd(series(values), w=w, p=p)
        trend = ema_trend(series(values), w=w).values
        plateau = trend[-1] - trend[-1 - p]
        assert out.values[-1] == pytest.approx(plateau, rel=1e-9)
        np.testing.assert_allclose(out.values[-20:], plateau, rtol=1e-6)

    def test_preictal_ramp_rises_above_stationary_level(self):
        rng = np.random.default_rng(5)
        noise = rng.normal(0.0, 0.05, 300)
        ramp = np.concatenate([np.zeros(240), np.linspace(0.0, 3.0, 60)])
        out = maacd(series(noise + ramp))
        stationary = out.values[50:240]
        rising = out.values[260:]
        assert rising.mean() > 10 * stationary.mean()

    @given(value_lists, st.integers(1, 10), st.integers(0, 30))
    def test_never_negative(self, values, w, p):
        out = maacd(series(values), w=w, p=p)
        assert (out.values >= 0.0).all()

    def test_fuzzed_nonnegative_1000_series(self):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            n = rng.integers(1, 80)
            values = rng.normal(size=n) * rng.uniform(0.1, 100)
            out = maacd(series(values))
            assert (out.values >= 0.0).all()

    @given(value_lists, st.floats(-1e5, 1e5))
    def test_shift_equivariance(self, values, c):
        values = np.asarray(values)
        base = maacd(series(values)).values
        shifted = maacd(series(values + c)).values
        scale = max(1.0, np.abs(values).max(), abs(c))
        np.testing.assert_allclose(shifted, base, atol=1e-9 * scale)

    @given(value_lists, st.floats(1e-3, 1e3))
    def test_scale_equivariance(self, values, c):
        values = np.asarray(values)
        base = maacd(series(values)).values
        scaled = maacd(series(c * values)).values
        scale = max(1.0, np.abs(base).max()) * c
        np.testing.assert_allclose(scaled, c * base, atol=1e-9 * scale)

    def test_deterministic_bit_identical(self):
        rng = np.random.default_rng(8)
        values = rng.normal(size=100)
        a = maacd(series(values)).values
        b = maacd(series(values)).values
        np.testing.assert_array_equal(a, b)

    def test_feature_id_prefix(self):
        out = maacd(series([1.0, 2.0]))
        assert out.feature_id == "maacd:f"
