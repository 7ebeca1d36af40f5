"""Deterministic synthetic patients for tests and demos.

Each dataset is a pre-seizure segment ending at the onset.  Channels carry
independent noise plus a shared oscillator injected with a per-channel lag,
so the lag-based synchronization measures see the coupling.  Profiles differ
in how the coupling gain evolves before the onset:

  stationary  no shared source at all (negative control)
  coupled     baseline gain that steps up during the pre-onset interval
  ramp        gain rising linearly from baseline to peak over the interval
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import ChannelSignal, RawSegment

PROFILES = ("stationary", "coupled", "ramp")


@dataclass(frozen=True)
class SynthConfig:
    profile: str = "coupled"
    seed: int = 0
    n_datasets: int = 2
    n_channels: int = 6
    fs: float = 256.0
    duration_s: float = 1200.0
    preictal_s: float = 250.0
    tone_hz: float = 10.0
    lag_samples: int = 3
    baseline_gain: float = 0.1
    peak_gain: float = 2.5

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; expected {PROFILES}")


def _gain(config: SynthConfig, t: np.ndarray) -> np.ndarray:
    onset = config.duration_s
    if config.profile == "stationary":
        return np.zeros_like(t)
    rise_start = onset - config.preictal_s
    if config.profile == "coupled":
        gain = np.full_like(t, config.baseline_gain)
        gain[t >= rise_start] = config.peak_gain
        return gain
    # ramp
    frac = np.clip((t - rise_start) / config.preictal_s, 0.0, 1.0)
    return config.baseline_gain + (config.peak_gain - config.baseline_gain) * frac


def synth_patient(config: SynthConfig) -> list[RawSegment]:
    """Generate the per-seizure segments of one synthetic patient."""
    rng = np.random.default_rng(config.seed)
    n = int(round(config.duration_s * config.fs))
    t = np.arange(n) / config.fs
    gain = _gain(config, t)

    segments = []
    for k in range(config.n_datasets):
        phase0 = rng.uniform(0.0, 2.0 * np.pi)
        noise = rng.standard_normal((config.n_channels, n))
        channels = []
        for c in range(config.n_channels):
            lag_s = c * config.lag_samples / config.fs
            source = np.sin(2.0 * np.pi * config.tone_hz * (t - lag_s) + phase0)
            samples = noise[c] + gain * source
            channels.append(ChannelSignal(f"CH{c + 1}", config.fs, samples))
        segments.append(
            RawSegment(
                channels=channels,
                seizure_onset=config.duration_s,
                patient_id=f"synth-{config.profile}-{config.seed}",
                seizure_index=k,
            )
        )
    return segments
