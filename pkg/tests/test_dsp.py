import numpy as np
import pytest
from hypothesis import given, strategies as st

from preictal.dsp import (
    InvalidBandError,
    SampleRateMismatchError,
    TooShortError,
    WindowPlan,
    abs_derivative,
    analytic_signal,
    apply_fir,
    design_bandpass_fir,
    preprocess,
    segment,
)
from preictal.ingest import ChannelSignal

FS = 256.0


def gain_db(taps, freq_hz, fs):
    """Frequency-response oracle: direct DTFT evaluation."""
    n = np.arange(len(taps))
    response = np.sum(taps * np.exp(-2j * np.pi * freq_hz * n / fs))
    return 20.0 * np.log10(max(abs(response), 1e-300))


class TestDesignBandpass:
    def test_midband_gain_within_1db(self):
        kernel = design_bandpass_fir(FS, 2.0, 20.0, 257)
        assert abs(gain_db(kernel.taps, 11.0, FS)) < 1.0

    def test_dc_rejection(self):
        kernel = design_bandpass_fir(FS, 2.0, 20.0, 257)
        assert gain_db(kernel.taps, 0.0, FS) <= -40.0

    def test_taps_symmetric_and_odd(self):
        kernel = design_bandpass_fir(FS, 2.0, 20.0, 257)
        assert len(kernel.taps) % 2 == 1
        np.testing.assert_allclose(kernel.taps, kernel.taps[::-1], atol=1e-12)

    def test_inverted_band_rejected(self):
        with pytest.raises(InvalidBandError):
            design_bandpass_fir(FS, 20.0, 2.0, 257)

    def test_band_above_nyquist_rejected(self):
        with pytest.raises(InvalidBandError):
            design_bandpass_fir(FS, 2.0, 130.0, 257)

    def test_even_taps_rejected(self):
        with pytest.raises(InvalidBandError):
            design_bandpass_fir(FS, 2.0, 20.0, 256)


def steady_amplitude(samples, fs, margin_s=1.0):
    interior = samples[int(margin_s * fs) : -int(margin_s * fs)]
    return np.sqrt(2.0 * np.mean(interior**2))


class TestApplyFir:
    def test_impulse_reproduces_taps(self):
        kernel = design_bandpass_fir(FS, 2.0, 20.0, 257)
        x = np.zeros(1024)
        x[512] = 1.0
        out = apply_fir(ChannelSignal("A", FS, x), kernel).samples
        delay = kernel.group_delay
        np.testing.assert_allclose(
            out[512 - delay : 512 + delay + 1], kernel.taps, atol=1e-12
        )

    def test_passband_sinusoid_amplitude(self):
        kernel = design_bandpass_fir(FS, 2.0, 20.0, 257)
        t = np.arange(int(10 * FS)) / FS
        x = np.sin(2 * np.pi * 10.0 * t)
        out = apply_fir(ChannelSignal("A", FS, x), kernel).samples
        amplitude = steady_amplitude(out, FS)
        assert 10 ** (-1 / 20) < amplitude < 10 ** (1 / 20)

    def test_stopband_sinusoid_suppressed(self):
        kernel = design_bandpass_fir(FS, 2.0, 20.0, 257)
        t = np.arange(int(10 * FS)) / FS
        x = np.sin(2 * np.pi * 60.0 * t)
        out = apply_fir(ChannelSignal("A", FS, x), kernel).samples
        assert np.abs(out).max() <= 0.1

    def test_sample_rate_mismatch(self):
        kernel = design_bandpass_fir(FS, 2.0, 20.0, 257)
        with pytest.raises(SampleRateMismatchError):
            apply_fir(ChannelSignal("A", 128.0, np.zeros(100)), kernel)

    def test_length_preserved(self):
        kernel = design_bandpass_fir(FS, 2.0, 20.0, 257)
        out = apply_fir(ChannelSignal("A", FS, np.random.default_rng(0).normal(size=500)), kernel)
        assert len(out.samples) == 500

    @given(
        st.lists(st.floats(-100, 100), min_size=64, max_size=64),
        st.lists(st.floats(-100, 100), min_size=64, max_size=64),
        st.floats(-3, 3),
        st.floats(-3, 3),
    )
    def test_linearity(self, xs, ys, a, b):
        kernel = design_bandpass_fir(FS, 2.0, 20.0, 33)
        x, y = np.array(xs), np.array(ys)
        lhs = apply_fir(ChannelSignal("A", FS, a * x + b * y), kernel).samples
        rhs = (
            a * apply_fir(ChannelSignal("A", FS, x), kernel).samples
            + b * apply_fir(ChannelSignal("A", FS, y), kernel).samples
        )
        scale = max(1.0, np.abs(lhs).max(), np.abs(rhs).max())
        np.testing.assert_allclose(lhs, rhs, atol=1e-9 * scale)


class TestAbsDerivative:
    def test_constant_becomes_zero(self):
        out = abs_derivative(ChannelSignal("A", FS, np.full(16, 3.7)))
        np.testing.assert_array_equal(out.samples, np.zeros(16))

    def test_alternating_sequence(self):
        out = abs_derivative(ChannelSignal("A", FS, np.array([0.0, 1.0, 0.0, 1.0])))
        np.testing.assert_array_equal(out.samples, [0.0, 1.0, 1.0, 1.0])

    def test_ramp_gives_constant_slope(self):
        c = -2.5
        out = abs_derivative(ChannelSignal("A", FS, c * np.arange(10.0)))
        np.testing.assert_allclose(out.samples[1:], abs(c))
        assert out.samples[0] == 0.0

    def test_too_short(self):
        with pytest.raises(TooShortError):
            abs_derivative(ChannelSignal("A", FS, np.array([1.0])))


class TestSegment:
    def test_16s_window6_overlap1(self):
        sig = ChannelSignal("A", FS, np.zeros(int(16 * FS)))
        windows = segment(sig, WindowPlan(6.0, 1.0))
        assert [w.end_s for w in windows] == [6.0, 11.0, 16.0]
        assert [w.start_s for w in windows] == [0.0, 5.0, 10.0]

    def test_exactly_one_window(self):
        sig = ChannelSignal("A", FS, np.zeros(int(6 * FS)))
        windows = segment(sig, WindowPlan(6.0, 1.0))
        assert len(windows) == 1

    def test_zero_overlap_disjoint(self):
        sig = ChannelSignal("A", FS, np.arange(int(12 * FS), dtype=float))
        windows = segment(sig, WindowPlan(6.0, 0.0))
        assert len(windows) == 2
        assert windows[0].samples[-1] + 1 == windows[1].samples[0]

    def test_partial_window_dropped(self):
        sig = ChannelSignal("A", FS, np.zeros(int(10 * FS)))
        windows = segment(sig, WindowPlan(6.0, 1.0))
        assert len(windows) == 1

    def test_too_short(self):
        with pytest.raises(TooShortError):
            segment(ChannelSignal("A", FS, np.zeros(100)), WindowPlan(6.0, 1.0))

    def test_invalid_plan_rejected(self):
        with pytest.raises(ValueError):
            WindowPlan(6.0, 6.0)
        with pytest.raises(ValueError):
            WindowPlan(6.0, -1.0)

    @given(st.integers(7, 40), st.integers(1, 6), st.integers(0, 5))
    def test_windows_tile_with_exact_hop(self, duration_s, window_s, overlap_s):
        if overlap_s >= window_s:
            overlap_s = window_s - 1
        sig = ChannelSignal("A", 8.0, np.zeros(duration_s * 8))
        windows = segment(sig, WindowPlan(float(window_s), float(overlap_s)))
        hop = window_s - overlap_s
        ends = [w.end_s for w in windows]
        assert all(b - a == pytest.approx(hop) for a, b in zip(ends, ends[1:]))
        assert all(b > a for a, b in zip(ends, ends[1:]))
        assert ends[-1] <= duration_s < ends[-1] + hop


class TestAnalyticSignal:
    def test_cosine_phase_slope(self):
        n = 1536  # 6 s at 256 Hz
        t = np.arange(n) / FS
        _, phase = analytic_signal(np.cos(2 * np.pi * 10.0 * t))
        interior = slice(int(0.1 * n), int(0.9 * n))
        unwrapped = np.unwrap(phase)[interior]
        slope = np.polyfit(t[interior], unwrapped, 1)[0]
        assert slope == pytest.approx(2 * np.pi * 10.0, rel=0.02)

    def test_positive_constant_passes_unchanged(self):
        amplitude, phase = analytic_signal(np.full(64, 2.5))
        np.testing.assert_allclose(amplitude, 2.5, atol=1e-12)
        np.testing.assert_allclose(phase, 0.0, atol=1e-12)

    def test_sine_envelope_near_unity(self):
        n = 1536
        t = np.arange(n) / FS
        amplitude, _ = analytic_signal(np.sin(2 * np.pi * 8.0 * t))
        interior = amplitude[int(0.1 * n) : int(0.9 * n)]
        np.testing.assert_allclose(interior, 1.0, atol=0.02)

    def test_too_short(self):
        with pytest.raises(TooShortError):
            analytic_signal(np.zeros(7))

    @given(st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=200))
    def test_real_part_reconstructs_input(self, xs):
        x = np.array(xs)
        amplitude, phase = analytic_signal(x)
        reconstructed = amplitude * np.cos(phase)
        scale = max(1.0, np.abs(x).max())
        np.testing.assert_allclose(reconstructed, x, atol=1e-9 * scale)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=9, max_size=99))
    def test_odd_lengths_reconstruct_too(self, xs):
        x = np.array(xs)
        if len(x) % 2 == 0:
            x = x[:-1]
        amplitude, phase = analytic_signal(x)
        scale = max(1.0, np.abs(x).max())
        np.testing.assert_allclose(amplitude * np.cos(phase), x, atol=1e-9 * scale)


class TestPreprocess:
    def test_phase_windows_cover_all_channels(self):
        rng = np.random.default_rng(1)
        channels = [
            ChannelSignal(f"C{i}", FS, rng.normal(size=int(16 * FS)))
            for i in range(3)
        ]
        kernel = design_bandpass_fir(FS, 2.0, 20.0, 257)
        windows = preprocess(channels, kernel, WindowPlan(6.0, 1.0))
        assert len(windows) == 3
        assert windows[0].amplitude.shape == (3, int(6 * FS))
        assert windows[0].labels == ["C0", "C1", "C2"]
        assert (windows[0].amplitude >= 0).all()
        assert (np.abs(windows[0].phase) <= np.pi + 1e-12).all()

    def test_mismatched_fs_rejected(self):
        kernel = design_bandpass_fir(FS, 2.0, 20.0, 257)
        channels = [
            ChannelSignal("A", FS, np.zeros(int(8 * FS))),
            ChannelSignal("B", 128.0, np.zeros(int(8 * 128))),
        ]
        with pytest.raises(SampleRateMismatchError):
            preprocess(channels, kernel, WindowPlan(6.0, 1.0))
