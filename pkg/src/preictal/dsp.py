"""Signal preprocessing: band-pass FIR, rectified derivative, windowing, analytic signal.

The preprocessing chain runs band-pass filter -> |first difference| ->
overlapping windows -> per-window analytic signal.  The rectified-derivative
step is used for the lag-based synchronization measures and skipped for
phase-locking value (see :func:`preprocess`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sp_signal

from .ingest import ChannelSignal


class DspError(Exception):
    """Base class for preprocessing failures."""


class InvalidBandError(DspError):
    """Band edges outside 0 < low < high < fs/2, or even tap count."""


class SampleRateMismatchError(DspError):
    """Signal and filter kernel were designed for different sampling rates."""


class TooShortError(DspError):
    """Signal shorter than the operation requires."""


@dataclass(frozen=True)
class FilterKernel:
    taps: np.ndarray
    fs: float
    band: tuple[float, float]

    @property
    def group_delay(self) -> int:
        return (len(self.taps) - 1) // 2


@dataclass(frozen=True)
class WindowPlan:
    """Sliding-window layout: 6 s windows overlapping by 1 s by default."""

    window_s: float = 6.0
    overlap_s: float = 1.0

    def __post_init__(self):
        if not 0 <= self.overlap_s < self.window_s:
            raise ValueError(
                f"need 0 <= overlap ({self.overlap_s}) < window ({self.window_s})"
            )

    @property
    def hop_s(self) -> float:
        return self.window_s - self.overlap_s


@dataclass
class Window:
    index: int
    start_s: float
    end_s: float
    samples: np.ndarray


@dataclass
class PhaseWindow:
    """Per-window analytic signal of every channel: amplitude and phase arrays (C, N)."""

    index: int
    start_s: float
    end_s: float
    labels: list[str]
    amplitude: np.ndarray
    phase: np.ndarray


def design_bandpass_fir(
    fs: float, low_hz: float, high_hz: float, n_taps: int = 257
) -> FilterKernel:
    """Windowed-sinc (Hamming) band-pass with unity gain at the band midpoint.

    Tap count must be odd so the symmetric kernel has an integer group delay.
    """
    if not 0 < low_hz < high_hz < fs / 2:
        raise InvalidBandError(
            f"need 0 < low ({low_hz}) < high ({high_hz}) < fs/2 ({fs / 2})"
        )
    if n_taps < 3 or n_taps % 2 == 0:
        raise InvalidBandError(f"tap count must be odd and >= 3, got {n_taps}")
    taps = sp_signal.firwin(
        n_taps, [low_hz, high_hz], pass_zero=False, window="hamming", fs=fs
    )
    return FilterKernel(taps=taps, fs=fs, band=(low_hz, high_hz))


def apply_fir(signal: ChannelSignal, kernel: FilterKernel) -> ChannelSignal:
    """Convolve and remove the group delay: output sample t aligns with input time t.

    Edges are implicitly zero-padded, so the output length equals the input
    length.
    """
    if signal.fs != kernel.fs:
        raise SampleRateMismatchError(
            f"signal at {signal.fs} Hz, kernel designed for {kernel.fs} Hz"
        )
    filtered = sp_signal.fftconvolve(signal.samples, kernel.taps, mode="same")
    return ChannelSignal(signal.label, signal.fs, filtered)


def abs_derivative(signal: ChannelSignal) -> ChannelSignal:
    """|x(t) - x(t-1)| with y(0) = 0; flattens background noise, sharpens peaks."""
    x = signal.samples
    if len(x) < 2:
        raise TooShortError(f"need at least 2 samples, got {len(x)}")
    y = np.empty_like(x)
    y[0] = 0.0
    y[1:] = np.abs(np.diff(x))
    return ChannelSignal(signal.label, signal.fs, y)


def segment(signal: ChannelSignal, plan: WindowPlan) -> list[Window]:
    """Cut consecutive (possibly overlapping) windows; drop the final partial one.

    Window k covers [k*hop, k*hop + window); windows are timestamped by their
    end time, which downstream labeling compares against the seizure onset.
    """
    n_window = int(round(plan.window_s * signal.fs))
    n_hop = int(round(plan.hop_s * signal.fs))
    if n_window < 1 or n_hop < 1:
        raise ValueError(f"degenerate plan at fs={signal.fs}: {plan}")
    x = signal.samples
    if len(x) < n_window:
        raise TooShortError(
            f"signal has {len(x)} samples, window needs {n_window}"
        )
    windows = []
    for k in range((len(x) - n_window) // n_hop + 1):
        start = k * n_hop
        windows.append(
            Window(
                index=k,
                start_s=start / signal.fs,
                end_s=(start + n_window) / signal.fs,
                samples=x[start : start + n_window],
            )
        )
    return windows


def analytic_signal(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude and phase of the analytic signal via the spectral method.

    Forward FFT, zero the negative-frequency bins, double the positive ones
    (DC and Nyquist unchanged), inverse FFT.  Returns (A, phi) with A >= 0 and
    phi in (-pi, pi].
    """
    x = np.asarray(samples, dtype=np.float64)
    n = len(x)
    if n < 8:
        raise TooShortError(f"need at least 8 samples, got {n}")
    spectrum = np.fft.fft(x)
    gain = np.zeros(n)
    gain[0] = 1.0
    if n % 2 == 0:
        gain[n // 2] = 1.0
        gain[1 : n // 2] = 2.0
    else:
        gain[1 : (n + 1) // 2] = 2.0
    z = np.fft.ifft(spectrum * gain)
    return np.abs(z), np.angle(z)


def preprocess(
    channels: list[ChannelSignal],
    kernel: FilterKernel,
    plan: WindowPlan,
    use_derivative: bool = True,
) -> list[PhaseWindow]:
    """Run the full chain over aligned channels and assemble per-window phases.

    ``use_derivative`` applies the rectified first difference after filtering;
    callers disable it for measures defined on the filtered signal itself.
    """
    if not channels:
        raise TooShortError("no channels")
    fs = channels[0].fs
    length = len(channels[0].samples)
    for ch in channels[1:]:
        if ch.fs != fs:
            raise SampleRateMismatchError(
                f"channel {ch.label} at {ch.fs} Hz, expected {fs} Hz"
            )
        if len(ch.samples) != length:
            raise TooShortError(f"channel {ch.label} length differs")

    per_channel = []
    for ch in channels:
        proc = apply_fir(ch, kernel)
        if use_derivative:
            proc = abs_derivative(proc)
        per_channel.append(segment(proc, plan))

    out = []
    for k, first in enumerate(per_channel[0]):
        amps = np.empty((len(channels), len(first.samples)))
        phases = np.empty_like(amps)
        for c, windows in enumerate(per_channel):
            amps[c], phases[c] = analytic_signal(windows[k].samples)
        out.append(
            PhaseWindow(
                index=k,
                start_s=first.start_s,
                end_s=first.end_s,
                labels=[ch.label for ch in channels],
                amplitude=amps,
                phase=phases,
            )
        )
    return out
