"""Synthetic ENF traces and rolling-shutter luminance series."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from rsenf.model import CaptureProfile, GridProfile

#: Origin of a video's own clock; extracted traces are timestamped from here.
VIDEO_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
DEFAULT_REFERENCE_START = datetime(2020, 1, 1, tzinfo=timezone.utc)

_NOISE_CHUNK = 1 << 20
_ENF_STREAM = 0
_NOISE_STREAM = 1


@dataclass
class EnfSeries:
    """Mains frequency sampled at a constant period (1 s by default)."""

    start_time: datetime
    values_hz: np.ndarray
    sample_period_s: float = 1.0

    def __post_init__(self):
        self.values_hz = np.asarray(self.values_hz, dtype=np.float64)
        if self.values_hz.ndim != 1:
            raise ValueError("ENF values must be one-dimensional")
        if self.start_time.tzinfo is None:
            self.start_time = self.start_time.replace(tzinfo=timezone.utc)

    def __len__(self) -> int:
        return self.values_hz.size

    @property
    def duration_s(self) -> float:
        return (len(self) - 1) * self.sample_period_s

    @property
    def end_time(self) -> datetime:
        return self.start_time + timedelta(seconds=self.duration_s)

    def time_of(self, index: int) -> datetime:
        return self.start_time + timedelta(seconds=index * self.sample_period_s)

    def slice(self, start: int, stop: int) -> "EnfSeries":
        return EnfSeries(self.time_of(start), self.values_hz[start:stop].copy(), self.sample_period_s)


@dataclass
class LuminanceSeries:
    """Concatenated kept-row luminance samples, frame-major."""

    capture: CaptureProfile
    samples: np.ndarray
    grid_hint: GridProfile | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        L = self.capture.rows_per_frame
        if self.samples.ndim != 1 or self.samples.size % L:
            raise ValueError(
                f"sample count {self.samples.size} is not a multiple of rows_per_frame {L}"
            )
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("luminance samples must be finite")

    @property
    def frame_count(self) -> int:
        return self.samples.size // self.capture.rows_per_frame

    @property
    def sample_rate_hz(self) -> float:
        return self.capture.kept_rate_hz

    @property
    def duration_s(self) -> float:
        return self.frame_count / self.capture.frame_rate_fps

    def frames(self) -> np.ndarray:
        """View of the samples as a (frame_count, rows_per_frame) array."""
        return self.samples.reshape(self.frame_count, self.capture.rows_per_frame)


@dataclass(frozen=True)
class SynthesisConfig:
    """Generator settings.

    The ENF deviation follows a mean-reverting walk: per-second white steps of
    size ``step_sigma_hz`` are exponentially smoothed over ``smoothing_s``
    seconds (unit DC gain) and integrated with reversion ``mean_reversion``
    toward the nominal frequency.  ``smoothing_s = 0`` gives a plain
    Ornstein-Uhlenbeck walk.
    """

    step_sigma_hz: float = 0.005
    mean_reversion: float = 0.05
    smoothing_s: float = 20.0
    enf_bound_hz: float = 0.5
    dc_level: float = 0.5
    modulation_depth: float = 0.1
    second_harmonic_depth: float = 0.0
    noise_snr_db: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.modulation_depth > 0:
            raise ValueError("modulation_depth must be positive")
        if not 0.0 <= self.mean_reversion < 1.0:
            raise ValueError("mean_reversion must lie in [0, 1)")
        if self.step_sigma_hz < 0 or self.smoothing_s < 0:
            raise ValueError("step_sigma_hz and smoothing_s must be non-negative")


def _generator(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *key])))


def synth_enf(
    duration_s: float,
    grid: GridProfile,
    config: SynthesisConfig = SynthesisConfig(),
    start_time: datetime = DEFAULT_REFERENCE_START,
) -> EnfSeries:
    """ENF trace covering ``[0, duration_s]`` at 1 s spacing, starting at nominal."""
    if duration_s < 1:
        raise ValueError(f"duration must be at least 1 s, got {duration_s}")
    n = int(math.ceil(duration_s)) + 1
    nominal = grid.nominal_enf_hz
    if config.step_sigma_hz == 0:
        return EnfSeries(start_time, np.full(n, nominal))

    steps = _generator(config.seed, _ENF_STREAM).normal(0.0, config.step_sigma_hz, n)
    a = math.exp(-1.0 / config.smoothing_s) if config.smoothing_s > 0 else 0.0
    keep = 1.0 - config.mean_reversion
    dev = np.empty(n)
    u = 0.0
    d = 0.0
    dev[0] = 0.0
    for i in range(1, n):
        u = a * u + (1.0 - a) * steps[i]
        d = keep * d + u
        dev[i] = d
    np.clip(dev, -config.enf_bound_hz, config.enf_bound_hz, out=dev)
    return EnfSeries(start_time, nominal + dev)


def phase_cycles(enf: EnfSeries, t: np.ndarray, offset_s: float = 0.0) -> np.ndarray:
    """Integral of the ENF trace from ``offset_s`` to ``offset_s + t``, in cycles.

    The 1 Hz trace is taken as piecewise linear, so the running integral is
    the exact trapezoidal accumulation between samples.
    """
    f = enf.values_hz
    dt = enf.sample_period_s
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * dt)))
    tt = np.asarray(t, dtype=np.float64) + offset_s
    if tt.size and (tt.min() < 0 or tt.max() > enf.duration_s + 1e-9):
        raise ValueError(
            f"ENF trace covers {enf.duration_s:g} s but samples reach {tt.max():g} s"
        )
    idx = np.minimum((tt / dt).astype(np.int64), f.size - 2)
    tau = tt - idx * dt
    slope = (f[idx + 1] - f[idx]) / dt
    phi = cum[idx] + f[idx] * tau + 0.5 * slope * tau * tau
    return phi - _phase_at(cum, f, dt, offset_s)


def _phase_at(cum, f, dt, t):
    i = min(int(t / dt), f.size - 2)
    tau = t - i * dt
    return cum[i] + f[i] * tau + 0.5 * (f[i + 1] - f[i]) / dt * tau * tau


def _noise(config: SynthesisConfig, n: int) -> np.ndarray:
    signal_power = 0.5 * config.modulation_depth ** 2
    sigma = math.sqrt(signal_power / 10.0 ** (config.noise_snr_db / 10.0))
    out = np.empty(n)
    for c, start in enumerate(range(0, n, _NOISE_CHUNK)):
        stop = min(start + _NOISE_CHUNK, n)
        out[start:stop] = _generator(config.seed, _NOISE_STREAM, c).normal(0.0, sigma, stop - start)
    return out


def synth_full_rate(
    enf: EnfSeries,
    capture: CaptureProfile,
    config: SynthesisConfig,
    frame_count: int,
    offset_s: float = 0.0,
) -> np.ndarray:
    """Idle-free row signal x[n] at ``Fr * M`` samples per second."""
    n_total = frame_count * capture.row_capacity
    t = np.arange(n_total) / capture.full_rate_hz
    phi = phase_cycles(enf, t, offset_s)
    x = config.dc_level + config.modulation_depth * np.cos(2 * np.pi * np.mod(2 * phi, 1.0))
    if config.second_harmonic_depth:
        x += config.second_harmonic_depth * np.cos(2 * np.pi * np.mod(4 * phi, 1.0))
    if config.noise_snr_db is not None:
        x += _noise(config, n_total)
    return x


def synth_luminance(
    enf: EnfSeries,
    capture: CaptureProfile,
    config: SynthesisConfig = SynthesisConfig(),
    frame_count: int | None = None,
    offset_s: float = 0.0,
    grid: GridProfile | None = None,
    return_full: bool = False,
):
    """Render a rolling-shutter luminance series lit by a lamp following ``enf``.

    The video starts ``offset_s`` seconds into the trace.  With
    ``return_full`` the idle-free signal is returned alongside the series.
    """
    available = enf.duration_s - offset_s
    if frame_count is None:
        frame_count = int(math.floor(available * capture.frame_rate_fps + 1e-9))
    if frame_count < 1 or frame_count / capture.frame_rate_fps > available + 1e-9:
        raise ValueError(
            f"ENF trace too short: {available:g} s available after offset, "
            f"{frame_count / capture.frame_rate_fps:g} s of video requested"
        )
    x = synth_full_rate(enf, capture, config, frame_count, offset_s)
    series = apply_rolling_shutter(x, capture.row_capacity, capture.rows_per_frame, capture.frame_rate_fps)
    if grid is not None:
        series.grid_hint = grid
    return (series, x) if return_full else series


def apply_rolling_shutter(x_full, M: int, L: int, frame_rate_fps: float = 30.0) -> LuminanceSeries:
    """Keep the first ``L`` of every ``M`` samples."""
    x = np.asarray(x_full, dtype=np.float64)
    if x.size % M:
        raise ValueError(f"input length {x.size} is not divisible by M={M}")
    capture = CaptureProfile(frame_rate_fps, L, M)
    kept = x.reshape(-1, M)[:, :L].reshape(-1)
    return LuminanceSeries(capture, kept.copy())
