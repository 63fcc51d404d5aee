from __future__ import annotations

from datetime import datetime, timezone

import numpy as np
import pytest

from rsenf.model import CaptureProfile, GridProfile, strongest_components
from rsenf.spectral import magnitude_spectrum, periodogram_peak
from rsenf.synthesis import (
    EnfSeries,
    LuminanceSeries,
    SynthesisConfig,
    apply_rolling_shutter,
    phase_cycles,
    synth_enf,
    synth_luminance,
)

G50 = GridProfile(50.0)


def test_zero_sigma_gives_constant_nominal():
    enf = synth_enf(100, G50, SynthesisConfig(step_sigma_hz=0.0))
    assert np.all(enf.values_hz == 50.0)
    assert len(enf) == 101


def test_enf_deterministic_and_seed_sensitive():
    a = synth_enf(300, G50, SynthesisConfig(seed=9))
    b = synth_enf(300, G50, SynthesisConfig(seed=9))
    c = synth_enf(300, G50, SynthesisConfig(seed=10))
    assert np.array_equal(a.values_hz, b.values_hz)
    assert not np.array_equal(a.values_hz, c.values_hz)


def test_enf_bound_monte_carlo():
    # 1000 seeds, 600 s each: every sample within nominal +/- 0.05 Hz
    inside = 0
    for seed in range(1000):
        v = synth_enf(600, G50, SynthesisConfig(seed=seed)).values_hz
        inside += bool(np.all(np.abs(v - 50.0) <= 0.05))
    assert inside / 1000 >= 0.999


def test_enf_hard_bound():
    cfg = SynthesisConfig(step_sigma_hz=0.5, enf_bound_hz=0.5, seed=1)
    v = synth_enf(2000, G50, cfg).values_hz
    assert np.all(np.abs(v - 50.0) <= 0.5)


def test_enf_rejects_short_duration():
    with pytest.raises(ValueError):
        synth_enf(0.5, G50)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthesisConfig(modulation_depth=0)
    with pytest.raises(ValueError):
        SynthesisConfig(mean_reversion=1.0)


def test_enf_series_helpers():
    start = datetime(2021, 5, 1, tzinfo=timezone.utc)
    s = EnfSeries(start, np.full(11, 50.0))
    assert s.duration_s == 10
    assert (s.end_time - start).total_seconds() == 10
    assert (s.slice(2, 5).start_time - start).total_seconds() == 2
    naive = EnfSeries(datetime(2021, 5, 1), [50.0])
    assert naive.start_time.tzinfo is not None


def test_phase_integral_of_constant_and_ramp():
    const = EnfSeries(datetime(2020, 1, 1, tzinfo=timezone.utc), np.full(5, 50.0))
    t = np.array([0.0, 0.25, 1.0, 3.5])
    assert np.allclose(phase_cycles(const, t), 50.0 * t)
    ramp = EnfSeries(const.start_time, 50.0 + 0.1 * np.arange(5))
    # integral of 50 + 0.1 t
    assert np.allclose(phase_cycles(ramp, t), 50 * t + 0.05 * t ** 2)
    # offset re-bases the phase at the offset instant
    assert np.allclose(phase_cycles(ramp, t[:3], offset_s=1.0), 50.1 * t[:3] + 0.05 * t[:3] ** 2)
    with pytest.raises(ValueError):
        phase_cycles(ramp, np.array([4.5]))


def test_rolling_shutter_identity_and_keep_rule():
    x = np.arange(8.0)
    assert np.array_equal(apply_rolling_shutter(x, 4, 4).samples, x)
    assert apply_rolling_shutter(x, 4, 2).samples.tolist() == [0, 1, 4, 5]
    with pytest.raises(ValueError):
        apply_rolling_shutter(np.arange(7.0), 4, 2)


def test_length_conservation():
    enf = synth_enf(20, G50, SynthesisConfig(step_sigma_hz=0))
    for L in (1, 17, 100):
        cap = CaptureProfile(30, L, 100)
        s = synth_luminance(enf, cap, frame_count=90)
        assert s.samples.size == 90 * L


def test_luminance_series_validation():
    cap = CaptureProfile(30, 4, 8)
    with pytest.raises(ValueError):
        LuminanceSeries(cap, np.zeros(7))
    with pytest.raises(ValueError):
        LuminanceSeries(cap, np.array([0, 1, np.nan, 3.0]))
    s = LuminanceSeries(cap, np.arange(8.0))
    assert s.frame_count == 2 and s.frames().shape == (2, 4)


def test_enf_too_short_rejected():
    enf = synth_enf(5, G50)
    with pytest.raises(ValueError, match="too short"):
        synth_luminance(enf, CaptureProfile(30, 10, 20), frame_count=300)
    with pytest.raises(ValueError, match="too short"):
        synth_luminance(enf, CaptureProfile(30, 10, 20), frame_count=60, offset_s=4.5)


def test_deterministic_noise():
    enf = synth_enf(30, G50, SynthesisConfig(seed=2))
    cfg = SynthesisConfig(seed=2, noise_snr_db=10)
    cap = CaptureProfile(30, 40, 80)
    a = synth_luminance(enf, cap, cfg, frame_count=600)
    b = synth_luminance(enf, cap, cfg, frame_count=600)
    assert np.array_equal(a.samples, b.samples)


def test_noise_level_matches_snr():
    enf = synth_enf(40, G50, SynthesisConfig(step_sigma_hz=0))
    cap = CaptureProfile(30, 100, 100)
    clean = synth_luminance(enf, cap, SynthesisConfig(), frame_count=900)
    noisy = synth_luminance(enf, cap, SynthesisConfig(noise_snr_db=10), frame_count=900)
    noise_power = np.mean((noisy.samples - clean.samples) ** 2)
    assert 10 * np.log10(0.5 * 0.1 ** 2 / noise_power) == pytest.approx(10.0, abs=0.1)


def test_full_rate_returned_on_request():
    enf = synth_enf(5, G50, SynthesisConfig(step_sigma_hz=0))
    s, x = synth_luminance(enf, CaptureProfile(30, 3, 5), frame_count=30, return_full=True)
    assert x.size == 150
    assert np.array_equal(s.samples, x.reshape(-1, 5)[:, :3].reshape(-1))


def test_pure_tone_peak_at_illumination_frequency():
    enf = synth_enf(12, G50, SynthesisConfig(step_sigma_hz=0))
    s = synth_luminance(enf, CaptureProfile(30, 100, 100), frame_count=300)
    spec = magnitude_spectrum(s.samples, s.sample_rate_hz)
    peak = periodogram_peak(s, 100.0, spectrum=spec)
    assert abs(peak.freq_hz - 100.0) <= spec.bin_spacing_hz


def test_idle_45_two_strongest_at_70_and_40():
    enf = synth_enf(22, G50, SynthesisConfig(step_sigma_hz=0))
    s = synth_luminance(enf, CaptureProfile(30, 550, 1000), frame_count=600)
    spec = magnitude_spectrum(s.samples, s.sample_rate_hz)
    peaks = {f: periodogram_peak(s, f, spectrum=spec).magnitude for f in (10, 40, 70, 100, 130)}
    top2 = sorted(peaks, key=peaks.get, reverse=True)[:2]
    assert set(top2) == {40, 70}
    assert peaks[40] == pytest.approx(peaks[70], rel=0.05)


def test_noise_keeps_peaks_but_reduces_margin():
    enf = synth_enf(22, G50, SynthesisConfig(step_sigma_hz=0))
    cap = CaptureProfile(30, 55, 100)
    res = {}
    for snr in (None, 20.0):
        s = synth_luminance(enf, cap, SynthesisConfig(noise_snr_db=snr), frame_count=600)
        spec = magnitude_spectrum(s.samples, s.sample_rate_hz)
        p = periodogram_peak(s, 70.0, spectrum=spec)
        res[snr] = (round(p.freq_hz, 3), p.magnitude / np.median(spec.magnitudes))
    assert res[None][0] == res[20.0][0]
    assert res[20.0][1] < res[None][1]


@pytest.mark.parametrize("idle_pct", range(5, 95, 5))
def test_shutter_round_trip_matches_model(idle_pct):
    M = 1000
    L = round(M * (1 - idle_pct / 100))
    cap = CaptureProfile(30, L, M)
    enf = synth_enf(3, G50, SynthesisConfig(step_sigma_hz=0))
    s = synth_luminance(enf, cap, frame_count=60)
    spec = magnitude_spectrum(s.samples, s.sample_rate_hz)
    band = spec.freqs_hz < 250
    f_peak = spec.freqs_hz[band][np.argmax(spec.magnitudes[band])]
    ranked = strongest_components(G50, cap, 3)
    top = [c.freq_hz for c in ranked if abs(c.attenuation_magnitude - ranked[0].attenuation_magnitude) < 1e-9]
    assert min(abs(f_peak - f) for f in top) <= 0.5
