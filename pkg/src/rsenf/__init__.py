"""ENF analysis for rolling-shutter video: component model, synthesis,
idle-period estimation and time-of-recording verification."""

from __future__ import annotations

__version__ = "0.1.0"

from rsenf.model import (
    CaptureProfile,
    ComponentPrediction,
    ComponentTable,
    GridProfile,
    TableRow,
    attenuation_factor,
    candidate_components,
    default_idle_grid,
    idle_sweep_table,
    strongest_components,
)
from rsenf.synthesis import EnfSeries, LuminanceSeries, SynthesisConfig, synth_enf, synth_luminance
from rsenf.spectral import extract_enf, interpolate_idle, periodogram_peak
from rsenf.idle import IdleEstimate, RowMeansMatrix, VerticalPhaseResult, estimate_idle, vertical_phase
from rsenf.verification import CandidateMatch, VerificationReport, ncc_align, verify_timestamp

__all__ = [
    "CandidateMatch", "CaptureProfile", "ComponentPrediction", "ComponentTable", "EnfSeries",
    "GridProfile", "IdleEstimate", "LuminanceSeries", "RowMeansMatrix", "SynthesisConfig",
    "TableRow", "VerificationReport", "VerticalPhaseResult", "attenuation_factor",
    "candidate_components", "default_idle_grid", "estimate_idle", "extract_enf", "idle_sweep_table",
    "interpolate_idle", "ncc_align", "periodogram_peak", "strongest_components",
    "synth_enf", "synth_luminance", "vertical_phase", "verify_timestamp",
]
