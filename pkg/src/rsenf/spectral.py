"""Spectral estimation: periodogram peaks, idle-gap interpolation, ENF traces."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from datetime import timedelta

import numpy as np

from rsenf import kernels
from rsenf.model import CaptureProfile, GridProfile
from rsenf.synthesis import VIDEO_EPOCH, EnfSeries, LuminanceSeries

DEFAULT_BAND_HALFWIDTH_HZ = 1.0
IDLE_ASSUMPTIONS = tuple(round(0.05 * i, 2) for i in range(20))

_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class SpectrumEstimate:
    bin_spacing_hz: float
    magnitudes: np.ndarray
    source_sample_rate_hz: float

    @property
    def transform_length(self) -> int:
        return 2 * (self.magnitudes.size - 1)

    @property
    def freqs_hz(self) -> np.ndarray:
        return np.arange(self.magnitudes.size) * self.bin_spacing_hz


@dataclass(frozen=True)
class PeakReading:
    freq_hz: float
    magnitude: float


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def tapered(samples) -> np.ndarray:
    """Mean-removed, Hann-tapered copy of ``samples``."""
    x = np.asarray(samples, dtype=np.float64)
    return (x - x.mean()) * np.hanning(x.size)


def magnitude_spectrum(samples, sample_rate_hz: float, pad_factor: int = 4) -> SpectrumEstimate:
    """One-sided magnitude spectrum of the tapered window.

    The transform length is the next power of two at least ``pad_factor``
    times the window length.
    """
    x = tapered(samples)
    nfft = next_pow2(pad_factor * x.size)
    mags = np.abs(np.fft.rfft(x, nfft))
    return SpectrumEstimate(sample_rate_hz / nfft, mags, sample_rate_hz)


def parabolic_offset(left: float, centre: float, right: float) -> tuple[float, float]:
    """Vertex of the parabola through three log-magnitudes.

    Returns (offset in bins, interpolated log-magnitude); offset lies in [-0.5, 0.5].
    """
    denom = left - 2.0 * centre + right
    if denom >= 0.0:
        return 0.0, centre
    p = 0.5 * (left - right) / denom
    p = min(0.5, max(-0.5, p))
    return p, centre - 0.25 * (left - right) * p


def _resolve(source, sample_rate_hz):
    if isinstance(source, LuminanceSeries):
        return source.samples, source.sample_rate_hz
    if sample_rate_hz is None:
        raise TypeError("sample_rate_hz is required for a bare sample window")
    return np.asarray(source, dtype=np.float64), float(sample_rate_hz)


def periodogram_peak(
    source,
    band_center_hz: float,
    band_halfwidth_hz: float = DEFAULT_BAND_HALFWIDTH_HZ,
    sample_rate_hz: float | None = None,
    pad_factor: int = 4,
    min_window_s: float = 2.0,
    spectrum: SpectrumEstimate | None = None,
) -> PeakReading:
    """Strongest spectral peak inside ``band_center_hz +/- band_halfwidth_hz``.

    ``source`` is a :class:`LuminanceSeries` or a sample array with
    ``sample_rate_hz``.  A precomputed ``spectrum`` of the same window may be
    passed to avoid repeating the transform.
    """
    x, fs = _resolve(source, sample_rate_hz)
    lo = band_center_hz - band_halfwidth_hz
    hi = band_center_hz + band_halfwidth_hz
    if lo <= 0 or hi >= fs / 2:
        raise ValueError(
            f"band [{lo:g}, {hi:g}] Hz is outside (0, {fs / 2:g}) Hz (effective Nyquist)"
        )
    if x.size < min_window_s * fs:
        raise ValueError(f"window of {x.size / fs:g} s is shorter than {min_window_s:g} s")
    if spectrum is None:
        if not np.any(x - x.mean()):
            raise ValueError("window is constant; no spectral peak exists")
        spectrum = magnitude_spectrum(x, fs, pad_factor)

    mags = spectrum.magnitudes
    df = spectrum.bin_spacing_hz
    k_lo = max(1, int(math.ceil(lo / df)))
    k_hi = min(mags.size - 2, int(math.floor(hi / df)))
    k = k_lo + int(np.argmax(mags[k_lo:k_hi + 1]))
    logs = np.log(np.maximum(mags[k - 1:k + 2], _LOG_FLOOR))
    p, log_peak = parabolic_offset(*logs)
    freq = min(hi, max(lo, (k + p) * df))
    return PeakReading(freq, float(math.exp(log_peak)))


def interpolate_idle(series: LuminanceSeries, assumed_idle: float) -> LuminanceSeries:
    """Re-insert the idle-period samples under an assumed idle fraction.

    Each frame grows from ``L`` to ``M' = round(L / (1 - assumed_idle))``
    samples; the inserted tail of frame k is the mean of the last kept sample
    of frames k-1 and k+1 (a single neighbour at either end).
    """
    out_rows = _expanded_rows(series, assumed_idle)
    fr = series.capture.frame_rate_fps
    if out_rows == series.capture.rows_per_frame:
        return LuminanceSeries(series.capture, series.samples.copy(), series.grid_hint)
    filled = kernels.fill_idle_gaps(series.frames(), out_rows)
    return LuminanceSeries(CaptureProfile(fr, out_rows, out_rows), filled.reshape(-1), series.grid_hint)


def deviation_divisor(component_freq_hz: float, grid: GridProfile, frame_rate: float) -> float:
    """How many Hz the component moves per Hz of ENF deviation.

    Lines of the first illumination harmonic (``f0 + k Fr``) move twice as
    fast as the ENF; lines of the second harmonic (``2 f0 + k Fr``) four times.
    """
    f0 = grid.illumination_freq_hz
    for harmonic in (1, 2):
        k = (component_freq_hz - harmonic * f0) / frame_rate
        if abs(k - round(k)) < 1e-6:
            return 2.0 * harmonic
    raise ValueError(
        f"{component_freq_hz:g} Hz is not on the f0 + k*Fr lattice for f0={f0:g} Hz, Fr={frame_rate:g}"
    )


def baseband(series: LuminanceSeries, component_freq_hz: float) -> np.ndarray:
    """Complex envelope of one component at the frame rate.

    The series is shifted down by ``component_freq_hz`` and averaged over each
    frame.  A one-frame average has nulls at every multiple of the frame rate,
    so the other ``f0 + k Fr`` lines are removed before decimation.
    """
    y = series.samples - series.samples.mean()
    L = series.capture.rows_per_frame
    return kernels.demodulate_frames(y, component_freq_hz / series.sample_rate_hz, L)


def baseband_assuming_idle(series: LuminanceSeries, component_freq_hz: float,
                           assumed_idle: float) -> np.ndarray:
    """``baseband(interpolate_idle(series, assumed_idle), f)`` without building
    the expanded series.

    Within a frame the kept rows project onto a fixed phasor vector and the
    constant gap fill onto a fixed geometric sum, so each frame costs one dot
    product.
    """
    expanded_rows = _expanded_rows(series, assumed_idle)
    frames = series.frames()
    L = series.capture.rows_per_frame
    fr = series.capture.frame_rate_fps
    if expanded_rows == L:
        return baseband(series, component_freq_hz)
    c = component_freq_hz / (fr * expanded_rows)
    mean = (frames.sum() + _gap_fill(frames).sum() * (expanded_rows - L)) / (frames.shape[0] * expanded_rows)
    j = np.arange(expanded_rows, dtype=np.float64)
    basis = np.exp(-2j * np.pi * np.mod(j * c, 1.0))
    kept = (frames - mean) @ basis[:L]
    gap = (_gap_fill(frames) - mean) * basis[L:].sum()
    k = np.arange(frames.shape[0], dtype=np.float64)
    frame_phasor = np.exp(-2j * np.pi * np.mod(k * (component_freq_hz / fr), 1.0))
    return frame_phasor * (kept + gap) / expanded_rows


def _gap_fill(frames: np.ndarray) -> np.ndarray:
    last = frames[:, -1]
    fill = np.empty_like(last)
    fill[1:-1] = 0.5 * (last[:-2] + last[2:])
    fill[0] = last[1]
    fill[-1] = last[-2]
    return fill


def _expanded_rows(series: LuminanceSeries, assumed_idle: float) -> int:
    steps = assumed_idle * 20.0
    if not (0.0 <= assumed_idle <= 0.95 and abs(steps - round(steps)) < 1e-9):
        raise ValueError(f"assumed idle must be one of 0, 0.05, ..., 0.95; got {assumed_idle}")
    if series.frame_count < 3:
        raise ValueError(f"need at least 3 frames to interpolate, got {series.frame_count}")
    L = series.capture.rows_per_frame
    return L if round(steps) == 0 else int(round(L / (1.0 - assumed_idle)))


@functools.lru_cache(maxsize=16)
def _band_dft(win: int, nfft: int, half: int) -> np.ndarray:
    """Hann-tapered DFT columns for bins ``-half-1 .. half+1`` of an ``nfft``
    transform; equal to those bins of the zero-padded FFT."""
    n = np.arange(win, dtype=np.float64)
    k = np.arange(-half - 1, half + 2, dtype=np.float64)
    phase = np.mod(np.outer(n, k) / nfft, 1.0)
    return np.hanning(win)[:, None] * np.exp(-2j * np.pi * phase)


def extract_enf(
    series: LuminanceSeries,
    component_freq_hz: float,
    window_s: float = 20.0,
    overlap_s: float = 19.0,
    grid: GridProfile | None = None,
    band_halfwidth_hz: float = DEFAULT_BAND_HALFWIDTH_HZ,
    pad_factor: int = 4,
    assumed_idle: float | None = None,
) -> EnfSeries:
    """STFT ENF trace from one shifted component.

    Each window's spectral peak within the search band is refined by a
    log-parabolic fit and mapped to ENF as ``nominal + deviation / divisor``.
    Samples are stamped at window centres on the video clock
    (:data:`VIDEO_EPOCH` is the first row of the first frame).

    Passing ``assumed_idle`` gives the same result as extracting from
    ``interpolate_idle(series, assumed_idle)``, but faster.
    """
    grid = grid or series.grid_hint or GridProfile()
    fr = series.capture.frame_rate_fps
    hop_s = window_s - overlap_s
    if hop_s <= 0:
        raise ValueError("overlap must be shorter than the window")
    if series.duration_s < window_s:
        raise ValueError(f"series lasts {series.duration_s:g} s, shorter than the {window_s:g} s window")
    rows = series.capture.rows_per_frame if assumed_idle is None else _expanded_rows(series, assumed_idle)
    nyquist = fr * rows / 2.0
    if not 0 < component_freq_hz + band_halfwidth_hz < nyquist:
        raise ValueError(
            f"component {component_freq_hz:g} Hz is above the effective Nyquist {nyquist:g} Hz"
        )
    divisor = deviation_divisor(component_freq_hz, grid, fr)

    if assumed_idle is None:
        z = baseband(series, component_freq_hz)
    else:
        z = baseband_assuming_idle(series, component_freq_hz, assumed_idle)
    win = int(round(window_s * fr))
    count = int(math.floor((math.floor(series.duration_s + 1e-9) - window_s) / hop_s + 1e-9)) + 1
    starts = np.round(np.arange(count) * hop_s * fr).astype(np.int64)
    starts = starts[starts + win <= z.size]
    nfft = next_pow2(pad_factor * win)

    df = fr / nfft
    # only the search band (plus one guard bin each side) is ever inspected
    half = int(math.floor(band_halfwidth_hz / df + 1e-9))
    bins = np.arange(-half - 1, half + 2)
    spec = np.abs(z[starts[:, None] + np.arange(win)] @ _band_dft(win, nfft, half))

    k = 1 + np.argmax(spec[:, 1:-1], axis=1)
    rows_idx = np.arange(k.size)
    logs = np.log(np.maximum(spec[rows_idx[:, None], k[:, None] + np.arange(-1, 2)], _LOG_FLOOR))
    left, centre, right = logs[:, 0], logs[:, 1], logs[:, 2]
    denom = left - 2.0 * centre + right
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(denom < 0, 0.5 * (left - right) / denom, 0.0)
    p = np.clip(p, -0.5, 0.5)
    offset = (bins[k] + p) * df
    values = grid.nominal_enf_hz + offset / divisor
    return EnfSeries(VIDEO_EPOCH + timedelta(seconds=window_s / 2.0), values)
