import numpy as np
import pytest

from preictal.synth import SynthConfig, synth_patient


class TestSynthPatient:
    def test_shapes_and_metadata(self):
        config = SynthConfig(n_datasets=3, n_channels=5, duration_s=100.0)
        segments = synth_patient(config)
        assert len(segments) == 3
        for i, segment in enumerate(segments):
            assert segment.seizure_index == i
            assert segment.seizure_onset == 100.0
            assert len(segment.channels) == 5
            assert all(len(ch.samples) == 25600 for ch in segment.channels)
        assert [ch.label for ch in segments[0].channels] == [
            "CH1", "CH2", "CH3", "CH4", "CH5",
        ]

    def test_deterministic_per_seed(self):
        a = synth_patient(SynthConfig(seed=5, duration_s=50.0))
        b = synth_patient(SynthConfig(seed=5, duration_s=50.0))
        for seg_a, seg_b in zip(a, b):
            for ch_a, ch_b in zip(seg_a.channels, seg_b.channels):
                np.testing.assert_array_equal(ch_a.samples, ch_b.samples)

    def test_seeds_differ(self):
        a = synth_patient(SynthConfig(seed=0, duration_s=50.0))
        b = synth_patient(SynthConfig(seed=1, duration_s=50.0))
        assert not np.array_equal(a[0].channels[0].samples, b[0].channels[0].samples)

    def test_stationary_has_no_shared_source(self):
        config = SynthConfig(profile="stationary", duration_s=50.0, n_channels=2)
        (segment,) = synth_patient(
            SynthConfig(**{**config.__dict__, "n_datasets": 1})
        )
        a, b = (ch.samples for ch in segment.channels)
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 0.05

    def test_coupled_amplitude_steps_up_before_onset(self):
        config = SynthConfig(profile="coupled", n_datasets=1, duration_s=400.0,
                             preictal_s=100.0, n_channels=2)
        (segment,) = synth_patient(config)
        x = segment.channels[0].samples
        fs = config.fs
        early = np.var(x[: int(100 * fs)])
        late = np.var(x[int(320 * fs):])
        assert late > early * 2

    def test_unknown_profile_rejected(self):
        with pytest.raises(ValueError):
            SynthConfig(profile="chaos")
