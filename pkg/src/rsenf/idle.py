"""Idle-period estimation.

Two estimators live here.  :func:`estimate_idle` measures the two strongest
shifted ENF components of a luminance series and looks their frequencies and
power ratio up in a reference :class:`~rsenf.model.ComponentTable`.
:func:`vertical_phase` is the older per-row phase baseline: it measures how
the phase of the aliased illumination tone advances from row to row, which
gives the read-out time and hence the idle fraction.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from rsenf import kernels
from rsenf.model import CaptureProfile, ComponentTable, GridProfile, TableRow
from rsenf.spectral import DEFAULT_BAND_HALFWIDTH_HZ, baseband, magnitude_spectrum, next_pow2
from rsenf.synthesis import LuminanceSeries

#: A component must rise this far above the spectral floor to count.
NOISE_GATE_DB = 6.0
#: Best-cell log distance beyond which no reference cell is accepted.
MAX_LOG_DISTANCE = math.log(4.0)
#: Log-ratio stand-in for cells whose second component is absent.
INFINITE_RATIO_PROXY = 100.0
#: Lines weaker than this fraction of the strongest are treated as absent.
RELATIVE_ZERO = 1e-6
#: Circular variance of per-row phase residuals above which the fit is rejected.
MAX_PHASE_CIRCULAR_VARIANCE = 0.5
MIN_VERTICAL_PHASE_S = 30.0
MIN_ESTIMATE_S = 20.0
BAND_WIDTH_PCT = 5.0


class InapplicableError(ValueError):
    """The vertical-phase method cannot run at this frame rate and grid."""


class UnreliablePhaseError(ValueError):
    """Per-row phases are too noisy for a meaningful slope."""


@dataclass(frozen=True)
class ComponentReading:
    freq_hz: float
    magnitude: float
    margin_db: float

    @property
    def passes_gate(self) -> bool:
        return self.margin_db >= NOISE_GATE_DB


@dataclass
class IdleEstimate:
    h1_hz: float | None
    h2_hz: float | None
    ratio: float | None
    band_low_pct: float | None = None
    band_high_pct: float | None = None
    point_estimate_pct: float | None = None
    matched: bool = False
    diagnostic: str = ""
    readings: list[ComponentReading] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.ratio is not None and math.isinf(self.ratio):
            d["ratio"] = "inf"
        return d


@dataclass
class RowMeansMatrix:
    """Per-row mean luminance, shape ``(rows_per_frame, frame_count)``."""

    capture: CaptureProfile
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != self.capture.rows_per_frame:
            raise ValueError(
                f"row-means matrix has shape {self.values.shape}; expected "
                f"({self.capture.rows_per_frame}, frame_count)"
            )

    @property
    def frame_count(self) -> int:
        return self.values.shape[1]


def row_means_from_series(series: LuminanceSeries) -> RowMeansMatrix:
    """Treat each kept sample as the mean of its sensor row."""
    return RowMeansMatrix(series.capture, series.frames().T.copy())


@dataclass
class VerticalPhaseResult:
    per_row_phase: np.ndarray
    vertical_radial_freq: float
    read_out_time_s: float
    cycle_count: float
    idle_pct: float
    alias_freq_hz: float
    illumination_freq_hz: float
    phase_circular_variance: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_row_phase"] = [float(v) for v in self.per_row_phase]
        return d


# --------------------------------------------------------------------------
# two-component matching


def measure_component(series: LuminanceSeries, freq_hz: float,
                      band_halfwidth_hz: float = DEFAULT_BAND_HALFWIDTH_HZ) -> ComponentReading:
    """Amplitude of one lattice line and its margin over the noise floor.

    The line is brought to baseband at the frame rate, where its wandering
    energy sits within ``band_halfwidth_hz`` of DC.  The floor is the median
    periodogram level of the rest of the baseband, scaled to the band width.
    """
    z = baseband(series, freq_hz)
    fr = series.capture.frame_rate_fps
    n = z.size
    nfft = next_pow2(n)
    power = np.abs(np.fft.fft(z * np.hanning(n), nfft)) ** 2
    freqs = np.fft.fftfreq(nfft, 1.0 / fr)
    in_band = np.abs(freqs) <= band_halfwidth_hz
    band_energy = float(power[in_band].sum())
    # exponential statistics: mean = median / ln 2
    floor = float(np.median(power[~in_band])) / math.log(2.0) * in_band.sum()
    if band_energy <= 0.0:
        return ComponentReading(freq_hz, 0.0, -math.inf)
    margin = 10.0 * math.log10(band_energy / floor) if floor > 0 else math.inf
    amplitude = math.sqrt(max(band_energy - floor, 0.0))
    return ComponentReading(freq_hz, amplitude, margin)


def _candidate_freqs(reference: ComponentTable, nyquist_hz: float, halfwidth: float) -> list[float]:
    freqs = {c.freq_hz for row in reference.rows for c in (*row.strongest, *row.second)}
    return sorted(f for f in freqs if halfwidth < f < nyquist_hz - halfwidth)


def _gate(row: TableRow, h1: float, h2: float | None) -> bool:
    if h1 not in row.h1_hz:
        return False
    if row.is_infinite:
        return True
    return h2 is not None and h2 in row.h2_hz


def _distance(row: TableRow, ratio: float) -> float:
    if row.is_infinite:
        return max(0.0, math.log(INFINITE_RATIO_PROXY) - math.log(ratio))
    return abs(math.log(ratio) - math.log(row.power_ratio))


def match_features(reference: ComponentTable, h1_hz: float, h2_hz: float | None,
                   ratio: float) -> IdleEstimate:
    """Look measured (H1, H2, ratio) up in the reference sweep.

    Frequencies must match a cell exactly; among matching cells the ratio is
    compared in log space.  The band runs from the best cell toward whichever
    adjacent grid cell also matches and is closer, or one step upward when
    neither neighbour matches.
    """
    rows = sorted(reference.rows, key=lambda r: r.idle_percent)
    dist = [(_distance(r, ratio) if _gate(r, h1_hz, h2_hz) else math.inf) for r in rows]
    best = int(np.argmin(dist))
    est = IdleEstimate(h1_hz, h2_hz, ratio)
    if not math.isfinite(dist[best]) or dist[best] > MAX_LOG_DISTANCE:
        est.diagnostic = (
            f"no reference cell matches H1={h1_hz:g} Hz, H2={h2_hz} Hz, ratio={ratio:.3g}"
        )
        return est

    lower = dist[best - 1] if best > 0 else math.inf
    upper = dist[best + 1] if best + 1 < len(rows) else math.inf
    here = rows[best].idle_percent
    if lower < upper or (math.isinf(upper) and best + 1 == len(rows)):
        low, high = here - BAND_WIDTH_PCT, here
    else:
        low, high = here, here + BAND_WIDTH_PCT
    est.band_low_pct = low
    est.band_high_pct = high
    est.point_estimate_pct = 0.5 * (low + high)
    est.matched = True
    return est


def estimate_idle(series: LuminanceSeries, grid: GridProfile, reference: ComponentTable) -> IdleEstimate:
    """Estimate the idle percentage from the two strongest shifted components."""
    fr = series.capture.frame_rate_fps
    if abs(reference.frame_rate_fps - fr) > 1e-9:
        raise ValueError(f"reference table is for {reference.frame_rate_fps:g} fps, series is {fr:g} fps")
    if abs(reference.grid.nominal_enf_hz - grid.nominal_enf_hz) > 1e-9:
        raise ValueError("reference table was built for a different grid")
    if series.duration_s < MIN_ESTIMATE_S:
        raise ValueError(f"series lasts {series.duration_s:g} s; at least {MIN_ESTIMATE_S:g} s needed")

    freqs = _candidate_freqs(reference, series.capture.nyquist_hz, DEFAULT_BAND_HALFWIDTH_HZ)
    readings = [measure_component(series, f) for f in freqs]
    strongest = max((r.magnitude for r in readings), default=0.0)
    live = [r for r in readings if r.passes_gate and r.magnitude > RELATIVE_ZERO * strongest]
    live.sort(key=lambda r: (-r.magnitude, r.freq_hz))

    if not live:
        est = IdleEstimate(None, None, None, readings=readings)
        est.diagnostic = f"no candidate component clears the {NOISE_GATE_DB:g} dB noise gate"
        return est
    h1 = live[0]
    h2 = live[1] if len(live) > 1 else None
    ratio = h1.magnitude / h2.magnitude if h2 else math.inf
    est = match_features(reference, h1.freq_hz, h2.freq_hz if h2 else None, ratio)
    est.readings = readings
    return est


# --------------------------------------------------------------------------
# vertical phase baseline


def alias_frequency(illumination_hz: float, frame_rate: float) -> float:
    """Where the illumination tone folds to when sampled at the frame rate."""
    return abs(illumination_hz - round(illumination_hz / frame_rate) * frame_rate)


def _circular_variance(angles: np.ndarray) -> float:
    return float(1.0 - abs(np.mean(np.exp(1j * angles))))


def vertical_phase(rows: RowMeansMatrix, grid: GridProfile) -> VerticalPhaseResult:
    """Idle estimate from the row-to-row phase advance of the alias tone.

    Every row is a time series at the frame rate.  Rows are exposed one
    after another, so the alias tone's phase grows linearly down the frame;
    the slope is the illumination frequency times the row period.
    """
    fr = rows.capture.frame_rate_fps
    L = rows.capture.rows_per_frame
    f_illum = grid.illumination_freq_hz
    nominal_alias = alias_frequency(f_illum, fr)
    if nominal_alias < 1e-9:
        raise InapplicableError(
            f"alias ENF at DC: {fr:g} fps divides the {f_illum:g} Hz illumination "
            "frequency, so the vertical-phase method is inapplicable"
        )
    if rows.frame_count < MIN_VERTICAL_PHASE_S * fr:
        raise ValueError(
            f"vertical phase needs at least {MIN_VERTICAL_PHASE_S:g} s of frames, got "
            f"{rows.frame_count / fr:g} s"
        )
    if L < 3:
        raise ValueError("vertical phase needs at least 3 rows per frame")

    # locate the alias precisely on the frame-averaged series
    mean_series = rows.values.mean(axis=0)
    spec = magnitude_spectrum(mean_series, fr, pad_factor=4)
    freqs = spec.freqs_hz
    in_band = np.abs(freqs - nominal_alias) <= DEFAULT_BAND_HALFWIDTH_HZ
    idx = np.flatnonzero(in_band)
    k = idx[np.argmax(spec.magnitudes[idx])]
    alias = float(freqs[k])
    outside = spec.magnitudes[(freqs > 0) & ~in_band]
    margin_db = 20.0 * math.log10(spec.magnitudes[k] / max(np.median(outside), 1e-300))
    if margin_db < NOISE_GATE_DB:
        raise UnreliablePhaseError(
            f"alias tone at {alias:.3f} Hz is only {margin_db:.1f} dB above the floor"
        )

    centred = rows.values - rows.values.mean(axis=1, keepdims=True)
    coeffs = kernels.single_bin_dft(centred, alias / fr)
    phase = np.unwrap(np.angle(coeffs))
    row_index = np.arange(L, dtype=np.float64)
    slope, intercept = np.polyfit(row_index, phase, 1)
    residual = phase - (slope * row_index + intercept)
    circ_var = _circular_variance(residual)
    if circ_var > MAX_PHASE_CIRCULAR_VARIANCE:
        raise UnreliablePhaseError(
            f"per-row phase circular variance {circ_var:.2f} exceeds {MAX_PHASE_CIRCULAR_VARIANCE}"
        )

    omega = abs(float(slope))
    n_fold = round(f_illum / fr)
    sign = 1.0 if f_illum >= n_fold * fr else -1.0
    f_unaliased = n_fold * fr + sign * alias
    read_out = L * omega / (2.0 * math.pi * f_unaliased)
    cycles = round(L * omega / (2.0 * math.pi), 2)
    idle_pct = 100.0 - 100.0 * cycles * fr / f_illum
    return VerticalPhaseResult(
        per_row_phase=phase,
        vertical_radial_freq=omega,
        read_out_time_s=read_out,
        cycle_count=cycles,
        idle_pct=idle_pct,
        alias_freq_hz=alias,
        illumination_freq_hz=f_unaliased,
        phase_circular_variance=circ_var,
    )
