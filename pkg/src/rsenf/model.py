"""Rolling-shutter model of shifted ENF components.

A camera with a rolling shutter reads ``M`` rows per frame period but keeps
only the first ``L``; the remaining ``M - L`` row slots fall in the idle
period.  Dropping those samples moves the illumination tone ``f0`` (twice the
mains frequency) onto the lattice ``f0 +/- m * Fr`` and scales each line by
the attenuation ``|F_m|`` evaluated at the shifted frequency.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

CASE1 = "Case1"
CASE2 = "Case2"

#: Second-strongest magnitudes below this are reported as an infinite ratio.
ZERO_MAGNITUDE = 1e-9

# Magnitudes equal to this many decimals count as a tie when ranking.
_TIE_DECIMALS = 10


@dataclass(frozen=True)
class GridProfile:
    """Mains network parameters."""

    nominal_enf_hz: float = 50.0

    def __post_init__(self):
        if not self.nominal_enf_hz > 0:
            raise ValueError(f"nominal ENF must be positive, got {self.nominal_enf_hz}")

    @property
    def illumination_freq_hz(self) -> float:
        return 2.0 * self.nominal_enf_hz


@dataclass(frozen=True)
class CaptureProfile:
    """Camera sampling parameters.

    ``rows_per_frame`` is the number of rows kept per frame (L) and
    ``row_capacity`` the number of rows the sensor could read in one frame
    period with no idle time (M).
    """

    frame_rate_fps: float
    rows_per_frame: int
    row_capacity: int

    def __post_init__(self):
        if not self.frame_rate_fps > 0:
            raise ValueError(f"frame rate must be positive, got {self.frame_rate_fps}")
        if not 1 <= self.rows_per_frame <= self.row_capacity:
            raise ValueError(
                f"need 1 <= rows_per_frame <= row_capacity, got L={self.rows_per_frame}, "
                f"M={self.row_capacity}"
            )

    @classmethod
    def from_idle(cls, frame_rate_fps: float, row_capacity: int, idle_ratio: float) -> "CaptureProfile":
        """Profile with ``L = round(M * (1 - idle_ratio))``."""
        if not 0.0 <= idle_ratio < 1.0:
            raise ValueError(f"idle ratio must lie in [0, 1), got {idle_ratio}")
        rows = max(1, int(round(row_capacity * (1.0 - idle_ratio))))
        return cls(frame_rate_fps, rows, row_capacity)

    @property
    def idle_ratio(self) -> float:
        return (self.row_capacity - self.rows_per_frame) / self.row_capacity

    @property
    def idle_percent(self) -> float:
        return 100.0 * self.idle_ratio

    @property
    def full_rate_hz(self) -> float:
        """Row sample rate of the idle-free signal x[n]."""
        return self.frame_rate_fps * self.row_capacity

    @property
    def kept_rate_hz(self) -> float:
        """Nominal sample rate of the concatenated kept rows y[n]."""
        return self.frame_rate_fps * self.rows_per_frame

    @property
    def nyquist_hz(self) -> float:
        return self.kept_rate_hz / 2.0


@dataclass(frozen=True)
class ComponentPrediction:
    freq_hz: float
    m_index: int
    case_tag: str
    effective_sum_index: int
    attenuation_magnitude: float | None = None
    rank: int | None = None


@dataclass(frozen=True)
class TableRow:
    idle_percent: float
    strongest: tuple[ComponentPrediction, ...]
    second: tuple[ComponentPrediction, ...]
    power_ratio: float

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.power_ratio)

    @property
    def h1_hz(self) -> tuple[float, ...]:
        return tuple(c.freq_hz for c in self.strongest)

    @property
    def h2_hz(self) -> tuple[float, ...]:
        return tuple(c.freq_hz for c in self.second)


@dataclass(frozen=True)
class ComponentTable:
    """Strongest two components and their magnitude ratio over an idle grid.

    ``power_ratio`` is the ratio of spectral *magnitudes* |F|; this is the
    quantity idle reference tables are tabulated in.
    """

    frame_rate_fps: float
    grid: GridProfile
    rows: tuple[TableRow, ...]

    def row_at(self, idle_percent: float, tol: float = 1e-6) -> TableRow:
        for row in self.rows:
            if abs(row.idle_percent - idle_percent) <= tol:
                return row
        raise KeyError(f"no row at idle {idle_percent}%")

    def to_csv(self) -> str:
        """CSV with columns ``idle_percent,h1_hz,h2_hz,ratio``.

        Tied components share a cell separated by ``;``.  An empty ``h2_hz``
        with ratio ``inf`` means no second component carries weight.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["idle_percent", "h1_hz", "h2_hz", "ratio"])
        for row in self.rows:
            writer.writerow(
                [
                    _fmt(row.idle_percent),
                    ";".join(_fmt(f) for f in row.h1_hz),
                    ";".join(_fmt(f) for f in row.h2_hz),
                    "inf" if row.is_infinite else _fmt(row.power_ratio),
                ]
            )
        return buf.getvalue()


def _fmt(value: float) -> str:
    return f"{value:.9g}"


def candidate_components(grid: GridProfile, capture: CaptureProfile) -> list[ComponentPrediction]:
    """Enumerate every shifted component ``f0 +/- m*Fr`` below the kept-row Nyquist.

    Case 1 lines ``f0 + m*Fr`` take ``m < L/2 - f0/Fr``; Case 2 lines
    ``f0 - m*Fr`` take ``m < f0/Fr``.  Both cases give ``f0`` at ``m = 0``,
    which is emitted once as Case 1.
    """
    f0 = grid.illumination_freq_hz
    fr = capture.frame_rate_fps
    L = capture.rows_per_frame
    M = capture.row_capacity
    nyquist = capture.nyquist_hz

    if nyquist <= f0 - math.ceil(f0 / fr - 1) * fr:
        raise ValueError(
            f"degenerate capture: kept-row Nyquist {nyquist:g} Hz lies below every "
            f"candidate component (L={L}, Fr={fr:g})"
        )

    out: list[ComponentPrediction] = []
    seen: set[float] = set()

    m = 0
    while m < L / 2 - f0 / fr:
        fy = f0 + m * fr
        if 0 < fy < nyquist:
            out.append(ComponentPrediction(fy, m, CASE1, m % M))
            seen.add(round(fy, 9))
        m += 1

    m = 0
    while m < f0 / fr:
        fy = f0 - m * fr
        if 0 < fy < nyquist and round(fy, 9) not in seen:
            out.append(ComponentPrediction(fy, m, CASE2, (M - m) % M))
            seen.add(round(fy, 9))
        m += 1
    return out


def attenuation_magnitudes(
    frame_rate: float,
    rows_per_frame: int,
    row_capacity: int,
    freqs_hz,
    effective_sum_index,
) -> np.ndarray:
    """Vectorised closed form behind :func:`attenuation_factor`."""
    M = row_capacity
    L = rows_per_frame
    f = np.asarray(freqs_hz, dtype=np.float64)
    m = np.asarray(effective_sum_index, dtype=np.float64)
    w_y = 2.0 * np.pi * f / (frame_rate * L)
    theta = (w_y * (M - L) + 2.0 * np.pi * m) / M
    # reduce to [-pi, pi] so the small-angle limit is detected reliably
    theta = np.remainder(theta + np.pi, 2.0 * np.pi) - np.pi
    half = 0.5 * theta
    denom = np.sin(half)
    small = np.abs(denom) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.abs(np.sin(L * half) / denom) / M
    return np.where(small, L / M, mag)


def attenuation_factor(capture: CaptureProfile, component: ComponentPrediction) -> float:
    """|F_m| at the component frequency, in closed form.

    With ``theta = (w_y (M - L) + 2 pi m) / M`` and ``w_y = 2 pi f_y / (Fr L)``
    the L-term geometric sum has modulus ``|sin(L theta/2) / sin(theta/2)| / M``.
    """
    return float(attenuation_magnitudes(
        capture.frame_rate_fps, capture.rows_per_frame, capture.row_capacity,
        component.freq_hz, component.effective_sum_index,
    ))


def _magnitude_key(mag: float) -> float:
    return 0.0 if mag < ZERO_MAGNITUDE else round(mag, _TIE_DECIMALS)


def strongest_components(grid: GridProfile, capture: CaptureProfile, k: int | None = None) -> list[ComponentPrediction]:
    """Candidates ranked by attenuation magnitude, ties broken by lower frequency."""
    if k is not None and k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    cands = candidate_components(grid, capture)
    mags = attenuation_magnitudes(
        capture.frame_rate_fps, capture.rows_per_frame, capture.row_capacity,
        [c.freq_hz for c in cands], [c.effective_sum_index for c in cands],
    )
    scored = [replace(c, attenuation_magnitude=float(v)) for c, v in zip(cands, mags)]
    scored.sort(key=lambda c: (-_magnitude_key(c.attenuation_magnitude), c.freq_hz))
    ranked = [replace(c, rank=i + 1) for i, c in enumerate(scored)]
    return ranked if k is None else ranked[:k]


def _tied_group(ranked: Sequence[ComponentPrediction], start: int) -> tuple[ComponentPrediction, ...]:
    key = _magnitude_key(ranked[start].attenuation_magnitude)
    group = [ranked[start]]
    for c in ranked[start + 1:]:
        if _magnitude_key(c.attenuation_magnitude) != key:
            break
        group.append(c)
    return tuple(group)


def table_row(grid: GridProfile, capture: CaptureProfile) -> TableRow:
    ranked = strongest_components(grid, capture)
    idle_pct = round(capture.idle_percent, 9)
    if len(ranked) == 1 or ranked[1].attenuation_magnitude < ZERO_MAGNITUDE:
        return TableRow(idle_pct, (ranked[0],), (), math.inf)
    strongest = _tied_group(ranked, 0)
    if len(strongest) > 1:
        return TableRow(idle_pct, strongest, strongest, 1.0)
    second = _tied_group(ranked, 1)
    ratio = ranked[0].attenuation_magnitude / ranked[1].attenuation_magnitude
    return TableRow(idle_pct, strongest, second, ratio)


def idle_sweep_table(
    grid: GridProfile,
    frame_rate: float,
    idle_grid: Iterable[float],
    row_capacity_resolution: int = 1000,
) -> ComponentTable:
    """Top-two components and their magnitude ratio at each idle fraction.

    Each fraction ``r`` is realised with ``M = row_capacity_resolution`` and
    ``L = round(M (1 - r))``; rows report the realised idle percentage.
    """
    idle_grid = list(idle_grid)
    if not idle_grid:
        raise ValueError("idle_grid is empty")
    if row_capacity_resolution < 100:
        raise ValueError("row_capacity_resolution must be >= 100")
    for a, b in zip(idle_grid, idle_grid[1:]):
        if not b > a:
            raise ValueError("idle_grid must be strictly increasing")
    if idle_grid[0] < 0 or idle_grid[-1] > 0.95:
        raise ValueError("idle fractions must lie in [0, 0.95]")

    rows = tuple(
        table_row(grid, CaptureProfile.from_idle(frame_rate, row_capacity_resolution, r))
        for r in idle_grid
    )
    return ComponentTable(frame_rate, grid, rows)


def default_idle_grid(step_percent: float = 5.0, stop_percent: float = 95.0) -> list[float]:
    n = int(math.floor(stop_percent / step_percent + 1e-9))
    return [round(i * step_percent, 9) / 100.0 for i in range(n + 1)]


def sweep_curve(
    grid: GridProfile,
    frame_rate: float,
    idle_grid: Iterable[float],
    row_capacity_resolution: int = 1000,
    top: int = 3,
) -> list[tuple[float, int, float, float]]:
    """Long-form plot data: (idle_percent, rank, freq_hz, magnitude) rows."""
    out = []
    for r in idle_grid:
        capture = CaptureProfile.from_idle(frame_rate, row_capacity_resolution, r)
        for c in strongest_components(grid, capture, top):
            out.append((round(capture.idle_percent, 9), c.rank, c.freq_hz, c.attenuation_magnitude))
    return out


def curve_to_csv(curve: Sequence[tuple[float, int, float, float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["idle_percent", "rank", "freq_hz", "magnitude"])
    for idle, rank, freq, mag in curve:
        writer.writerow([_fmt(idle), rank, _fmt(freq), _fmt(mag)])
    return buf.getvalue()


def component_lattice(grid: GridProfile, frame_rate: float, include_second_harmonic: bool = True) -> list[float]:
    """Lines ``f0 + k*Fr`` inside ``(0, 2 f0)``, plus ``2 f0`` when requested.

    At 30 fps on a 50 Hz grid this is {10, 40, ..., 190, 200}; at 25 fps
    {25, 50, ..., 175, 200}.
    """
    f0 = grid.illumination_freq_hz
    k_lo = -math.floor((f0 - 1e-9) / frame_rate)
    freqs = []
    k = k_lo
    while f0 + k * frame_rate < 2 * f0 - 1e-9:
        fy = f0 + k * frame_rate
        if fy > 1e-9:
            freqs.append(round(fy, 9))
        k += 1
    if include_second_harmonic:
        freqs.append(2 * f0)
    return freqs
