"""Time-of-recording verification against a reference ENF log.

An ENF trace is extracted from the video for one or more (component, idle
assumption) candidates, each trace is slid along the reference log with a
normalised cross-correlation, and the resulting lags are turned into a
decision by one of four metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import NamedTuple, Sequence

import numpy as np

from rsenf import kernels
from rsenf.model import GridProfile, component_lattice
from rsenf.spectral import IDLE_ASSUMPTIONS, extract_enf
from rsenf.synthesis import VIDEO_EPOCH, EnfSeries, LuminanceSeries

DEFAULT_THRESHOLD = 0.94
DEFAULT_LAG_TOLERANCE_S = 1.0
MIN_QUERY_SAMPLES = 60
FAILED_CORR = -1.0

TD, FD, ND = "TD", "FD", "ND"


class NccResult(NamedTuple):
    peak_corr: float
    lag_s: float
    trace: np.ndarray | None


def ncc_align(query: EnfSeries, reference: EnfSeries, return_trace: bool = False) -> NccResult:
    """Best full-overlap alignment of ``query`` inside ``reference``.

    ``lag_s`` is how far into the reference the first query sample lands.
    """
    q = query.values_hz
    r = reference.values_hz
    if q.size < MIN_QUERY_SAMPLES:
        raise ValueError(f"query has {q.size} samples; at least {MIN_QUERY_SAMPLES} are needed")
    if r.size < q.size:
        raise ValueError(f"reference ({r.size} samples) is shorter than the query ({q.size})")
    if abs(query.sample_period_s - reference.sample_period_s) > 1e-12:
        raise ValueError("query and reference have different sample periods")
    if np.ptp(q) == 0.0:
        raise ValueError("query segment is constant (zero variance)")
    trace = kernels.sliding_ncc(q, r)
    if np.all(np.isnan(trace)):
        raise ValueError("every reference segment is constant (zero variance)")
    idx = int(np.nanargmax(trace))
    return NccResult(float(trace[idx]), idx * reference.sample_period_s, trace if return_trace else None)


@dataclass(frozen=True)
class CandidateMatch:
    component_hz: float
    idle_assumption_pct: float
    peak_corr: float
    lag_s: float | None

    @property
    def failed(self) -> bool:
        return self.lag_s is None

    def to_dict(self) -> dict:
        return {
            "component_hz": self.component_hz,
            "idle_pct": self.idle_assumption_pct,
            "corr": self.peak_corr,
            "lag_s": self.lag_s,
        }


@dataclass(frozen=True)
class LagGroup:
    representative_lag_s: float
    member_count: int
    best_corr: float
    d_g: float


@dataclass
class VerificationReport:
    metric_id: int
    candidates: list[CandidateMatch]
    chosen_lag_s: float | None
    decision: str
    expected_lag_s: float | None
    threshold: float
    groups: list[LagGroup] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "metric": self.metric_id,
            "threshold": self.threshold,
            "expected_lag_s": self.expected_lag_s,
            "chosen_lag_s": self.chosen_lag_s,
            "decision": self.decision,
            "candidates": [c.to_dict() for c in self.candidates],
        }


@dataclass(frozen=True)
class MetricConfig:
    metric_id: int
    components_hz: tuple[float, ...] | None = None
    idle_assumptions: tuple[float, ...] | None = None
    window_s: float = 20.0
    overlap_s: float = 19.0

    def __post_init__(self):
        if self.metric_id not in (1, 2, 3, 4):
            raise ValueError(f"metric must be 1, 2, 3 or 4; got {self.metric_id}")


def default_components(grid: GridProfile, frame_rate: float) -> tuple[float, ...]:
    return tuple(component_lattice(grid, frame_rate))


def _plan(series: LuminanceSeries, grid: GridProfile, config: MetricConfig):
    fr = series.capture.frame_rate_fps
    if config.metric_id == 1:
        return (grid.illumination_freq_hz,), (0.0,)
    comps = config.components_hz or default_components(grid, fr)
    if config.metric_id == 2:
        return tuple(comps), (0.0,)
    return tuple(comps), tuple(config.idle_assumptions or IDLE_ASSUMPTIONS)


def evaluate_metrics(series: LuminanceSeries, reference: EnfSeries, grid: GridProfile,
                     config: MetricConfig) -> list[CandidateMatch]:
    """Correlate every candidate trace the metric calls for.

    A candidate whose extraction or alignment fails is kept with correlation
    -1 and no lag, so the sweep stays rectangular.
    """
    comps, idles = _plan(series, grid, config)
    out = []
    for idle in idles:
        for comp in comps:
            try:
                trace = extract_enf(series, comp, config.window_s, config.overlap_s, grid=grid,
                                    assumed_idle=idle)
                res = ncc_align(trace, reference)
            except ValueError:
                out.append(CandidateMatch(comp, round(idle * 100.0, 6), FAILED_CORR, None))
                continue
            # shift from "first trace sample" to "first video frame"
            lag = res.lag_s - (trace.start_time - VIDEO_EPOCH).total_seconds()
            out.append(CandidateMatch(comp, round(idle * 100.0, 6), res.peak_corr, lag))
    return out


def metric_subset(candidates: Sequence[CandidateMatch], metric_id: int,
                  grid: GridProfile) -> list[CandidateMatch]:
    """Candidates from a Metric 3 sweep that a narrower metric would have produced."""
    if metric_id in (3, 4):
        return list(candidates)
    zero_idle = [c for c in candidates if c.idle_assumption_pct == 0.0]
    if metric_id == 2:
        return zero_idle
    if metric_id == 1:
        return [c for c in zero_idle if abs(c.component_hz - grid.illumination_freq_hz) < 1e-9]
    raise ValueError(f"metric must be 1, 2, 3 or 4; got {metric_id}")


def group_lags(passing: Sequence[CandidateMatch], tolerance_s: float) -> list[LagGroup]:
    """Greedy lag grouping scored by ``d_g``.

    The strongest unassigned candidate founds a group and absorbs every
    unassigned lag within ``tolerance_s`` of it.  Group size is normalised by
    the largest group.
    """
    pool = sorted(passing, key=lambda c: (-c.peak_corr, c.lag_s))
    raw = []
    while pool:
        head = pool[0]
        members = [c for c in pool if abs(c.lag_s - head.lag_s) <= tolerance_s]
        pool = [c for c in pool if abs(c.lag_s - head.lag_s) > tolerance_s]
        raw.append((head.lag_s, len(members), head.peak_corr))
    n_max = max(n for _, n, _ in raw)
    return [LagGroup(lag, n, rho, math.hypot(n / n_max, rho)) for lag, n, rho in raw]


def decide(candidates: Sequence[CandidateMatch], metric_id: int,
           threshold: float = DEFAULT_THRESHOLD,
           lag_tolerance_s: float = DEFAULT_LAG_TOLERANCE_S) -> tuple[float | None, list[LagGroup]]:
    """Pick a lag, or ``None`` for no decision."""
    if not candidates:
        raise ValueError("decide needs at least one candidate")
    passing = [c for c in candidates if not c.failed and c.peak_corr > threshold]
    if not passing:
        return None, []
    if metric_id in (1, 2, 3):
        best = max(passing, key=lambda c: (c.peak_corr, -c.lag_s))
        return best.lag_s, []
    groups = group_lags(passing, lag_tolerance_s)
    top = max(groups, key=lambda g: (g.d_g, g.best_corr))
    return top.representative_lag_s, groups


def classify(chosen_lag_s: float | None, expected_lag_s: float, tolerance_s: float) -> str:
    if chosen_lag_s is None:
        return ND
    return TD if abs(chosen_lag_s - expected_lag_s) <= tolerance_s else FD


def expected_lag(reference: EnfSeries, claimed_start: datetime) -> float:
    if claimed_start.tzinfo is None:
        claimed_start = claimed_start.replace(tzinfo=timezone.utc)
    lag = (claimed_start - reference.start_time).total_seconds()
    if not 0.0 <= lag <= reference.duration_s:
        raise ValueError(
            f"claimed start {claimed_start.isoformat()} is outside the reference log "
            f"({reference.start_time.isoformat()} to {reference.end_time.isoformat()})"
        )
    return lag


def report_from_candidates(candidates: Sequence[CandidateMatch], metric_id: int,
                           expected_lag_s: float, threshold: float = DEFAULT_THRESHOLD,
                           lag_tolerance_s: float = DEFAULT_LAG_TOLERANCE_S) -> VerificationReport:
    chosen, groups = decide(candidates, metric_id, threshold, lag_tolerance_s)
    return VerificationReport(
        metric_id=metric_id,
        candidates=list(candidates),
        chosen_lag_s=chosen,
        decision=classify(chosen, expected_lag_s, lag_tolerance_s),
        expected_lag_s=expected_lag_s,
        threshold=threshold,
        groups=groups,
    )


def verify_timestamp(series: LuminanceSeries, reference: EnfSeries, claimed_start: datetime,
                     metric_id: int, grid: GridProfile | None = None,
                     threshold: float = DEFAULT_THRESHOLD,
                     lag_tolerance_s: float = DEFAULT_LAG_TOLERANCE_S,
                     config: MetricConfig | None = None) -> VerificationReport:
    """Check a claimed recording start time against the reference log."""
    grid = grid or series.grid_hint or GridProfile()
    expected = expected_lag(reference, claimed_start)
    config = config or MetricConfig(metric_id)
    candidates = evaluate_metrics(series, reference, grid, config)
    return report_from_candidates(candidates, metric_id, expected, threshold, lag_tolerance_s)
