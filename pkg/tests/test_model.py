from __future__ import annotations

import math
import time

import numpy as np
import pytest

from rsenf.model import (
    CASE1,
    CASE2,
    CaptureProfile,
    ComponentPrediction,
    GridProfile,
    attenuation_factor,
    attenuation_magnitudes,
    candidate_components,
    component_lattice,
    curve_to_csv,
    default_idle_grid,
    idle_sweep_table,
    strongest_components,
    sweep_curve,
)

G50 = GridProfile(50.0)


def direct_sum(M, L, fr, f, m_eff):
    """Oracle: explicit L-term complex exponential sum."""
    w = 2 * math.pi * f / (fr * L)
    theta = (w * (M - L) + 2 * math.pi * m_eff) / M
    return abs(np.exp(-1j * theta * np.arange(L)).sum()) / M


# -- types -----------------------------------------------------------------

def test_grid_profile_illumination_is_twice_nominal():
    assert GridProfile(60).illumination_freq_hz == 120
    with pytest.raises(ValueError):
        GridProfile(0)


def test_capture_profile_invariants():
    cap = CaptureProfile(30, 55, 100)
    assert cap.idle_ratio == pytest.approx(0.45)
    assert cap.full_rate_hz == 3000
    assert cap.kept_rate_hz == 1650
    assert cap.nyquist_hz == 825
    with pytest.raises(ValueError):
        CaptureProfile(30, 101, 100)
    with pytest.raises(ValueError):
        CaptureProfile(30, 0, 100)


# -- candidate_components ------------------------------------------------

def test_candidates_30fps():
    cap = CaptureProfile(30, 55, 100)
    cands = candidate_components(G50, cap)
    case2 = sorted(c.freq_hz for c in cands if c.case_tag == CASE2)
    case1 = sorted(c.freq_hz for c in cands if c.case_tag == CASE1)
    assert case2 == [10.0, 40.0, 70.0]          # 100 Hz emitted once, as Case 1
    assert case1[:4] == [100.0, 130.0, 160.0, 190.0]
    assert {10.0, 40.0, 70.0, 100.0, 130.0, 160.0, 190.0} <= {c.freq_hz for c in cands}


def test_candidates_25fps():
    cands = candidate_components(G50, CaptureProfile(25, 55, 100))
    assert sorted(c.freq_hz for c in cands if c.case_tag == CASE2) == [25.0, 50.0, 75.0]
    assert 100.0 in {c.freq_hz for c in cands}


def test_candidates_satisfy_frequency_closure():
    for M, L in [(100, 55), (1000, 550), (40, 7), (512, 300)]:
        cap = CaptureProfile(30, L, M)
        for c in candidate_components(G50, cap):
            assert 0 < c.freq_hz < L * 30 / 2
            if c.case_tag == CASE1:
                assert c.freq_hz == 100 + c.m_index * 30
                assert c.m_index < L / 2 - 100 / 30
            else:
                assert c.freq_hz == 100 - c.m_index * 30
                assert c.m_index < 100 / 30
        freqs = [c.freq_hz for c in candidate_components(G50, cap)]
        assert len(freqs) == len(set(freqs))


def test_degenerate_capture_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        candidate_components(GridProfile(50), CaptureProfile(100, 1, 2))


# -- attenuation ---------------------------------------------------------

def test_zero_idle_identity():
    cap = CaptureProfile(30, 100, 100)
    ranked = strongest_components(G50, cap)
    assert ranked[0].freq_hz == 100.0
    assert ranked[0].attenuation_magnitude == pytest.approx(1.0, abs=1e-12)
    assert all(c.attenuation_magnitude < 1e-9 for c in ranked[1:])


def test_attenuation_examples_against_direct_sum():
    cap = CaptureProfile(30, 95, 100)
    f100 = ComponentPrediction(100.0, 0, CASE1, 0)
    f70 = ComponentPrediction(70.0, 1, CASE2, 99)
    a100, a70 = attenuation_factor(cap, f100), attenuation_factor(cap, f70)
    # values frozen from the direct-sum oracle
    assert a100 == pytest.approx(0.907188, abs=1e-6)
    assert a70 == pytest.approx(0.181460, abs=1e-6)
    assert a100 == pytest.approx(direct_sum(100, 95, 30, 100, 0), abs=1e-12)
    assert a70 == pytest.approx(direct_sum(100, 95, 30, 70, 99), abs=1e-12)
    # as printed in the worked example (4-decimal rounding)
    assert a100 == pytest.approx(0.9072, abs=5e-4)
    assert a70 == pytest.approx(0.1818, abs=5e-4)
    assert a100 / a70 == pytest.approx(5.0, rel=0.01)


def test_attenuation_tie_at_15_percent():
    cap = CaptureProfile(30, 85, 100)
    a100 = attenuation_factor(cap, ComponentPrediction(100.0, 0, CASE1, 0))
    a70 = attenuation_factor(cap, ComponentPrediction(70.0, 1, CASE2, 99))
    assert a100 == pytest.approx(a70, abs=1e-12)


def test_closed_form_matches_direct_sum_small_exhaustive():
    for M in range(1, 65):
        for L in range(1, M + 1):
            cap = CaptureProfile(30, L, M)
            try:
                cands = candidate_components(G50, cap)
            except ValueError:
                continue
            for c in cands:
                assert attenuation_factor(cap, c) == pytest.approx(
                    direct_sum(M, L, 30, c.freq_hz, c.effective_sum_index), abs=1e-9)


def test_vector_and_scalar_forms_agree():
    cap = CaptureProfile(30, 300, 512)
    cands = candidate_components(G50, cap)
    vec = attenuation_magnitudes(30, 300, 512, [c.freq_hz for c in cands],
                                 [c.effective_sum_index for c in cands])
    assert vec.tolist() == [attenuation_factor(cap, c) for c in cands]


def test_attenuation_bounded_by_one():
    for M, L in [(1000, 1), (1000, 999), (100, 50), (7, 3)]:
        for c in strongest_components(G50, CaptureProfile(30, L, M)):
            assert 0.0 <= c.attenuation_magnitude <= 1.0 + 1e-12


# -- ranking and tables --------------------------------------------------

def _top(idle, fr=30.0):
    return strongest_components(G50, CaptureProfile.from_idle(fr, 1000, idle), 2)


def test_ties_at_transition_points():
    for idle, pair in [(0.15, (70.0, 100.0)), (0.45, (40.0, 70.0)), (0.75, (10.0, 40.0))]:
        a, b = _top(idle)
        assert (a.freq_hz, b.freq_hz) == pair          # ascending-frequency tie break
        assert a.attenuation_magnitude == pytest.approx(b.attenuation_magnitude, abs=1e-10)


def test_strongest_monotone_across_anchors():
    mags = [_top(r)[0].attenuation_magnitude for r in (0.0, 0.45, 0.75)]
    assert mags[0] > mags[1] > mags[2]


def test_k_validation():
    with pytest.raises(ValueError):
        strongest_components(G50, CaptureProfile(30, 50, 100), 0)


def test_sweep_examples():
    t30 = idle_sweep_table(G50, 30, default_idle_grid())
    row = t30.row_at(10)
    assert row.h1_hz == (100.0,) and row.h2_hz == (70.0,)
    assert row.power_ratio == pytest.approx(2.0, rel=0.01)
    t25 = idle_sweep_table(G50, 25, default_idle_grid())
    row = t25.row_at(20)
    assert row.h1_hz == (75.0,) and row.h2_hz == (100.0,)
    assert row.power_ratio == pytest.approx(4.0, rel=0.01)
    row = t25.row_at(50)
    assert row.h1_hz == (50.0,) and row.is_infinite


def test_sweep_validation():
    with pytest.raises(ValueError):
        idle_sweep_table(G50, 30, [])
    with pytest.raises(ValueError):
        idle_sweep_table(G50, 30, [0.1, 0.05])
    with pytest.raises(ValueError):
        idle_sweep_table(G50, 30, [0.96])
    with pytest.raises(ValueError):
        idle_sweep_table(G50, 30, [0.1], row_capacity_resolution=50)


def test_table_ratio_at_least_one_and_idle_increasing():
    t = idle_sweep_table(G50, 30, [i / 100 for i in range(0, 96)])
    idles = [r.idle_percent for r in t.rows]
    assert idles == sorted(idles) and len(set(idles)) == len(idles)
    assert all(r.power_ratio >= 1.0 for r in t.rows)


def test_table_csv_layout():
    csv_text = idle_sweep_table(G50, 30, default_idle_grid()).to_csv()
    lines = csv_text.strip().splitlines()
    assert lines[0] == "idle_percent,h1_hz,h2_hz,ratio"
    assert lines[1] == "0,100,,inf"
    assert lines[4] == "15,70;100,70;100,1"
    assert len(lines) == 21


def test_sweep_curve_rows():
    curve = sweep_curve(G50, 30, [0.0, 0.45], top=2)
    assert [(c[0], c[1], c[2]) for c in curve] == [(0.0, 1, 100.0), (0.0, 2, 10.0), (45.0, 1, 40.0), (45.0, 2, 70.0)]
    assert curve_to_csv(curve).splitlines()[0] == "idle_percent,rank,freq_hz,magnitude"


def test_component_lattice():
    assert component_lattice(G50, 30) == [10.0, 40.0, 70.0, 100.0, 130.0, 160.0, 190.0, 200.0]
    assert component_lattice(G50, 25) == [25.0, 50.0, 75.0, 100.0, 125.0, 150.0, 175.0, 200.0]
    assert 200.0 not in component_lattice(G50, 30, include_second_harmonic=False)


def test_table_runtime():
    t0 = time.perf_counter()
    idle_sweep_table(G50, 30, default_idle_grid())
    assert time.perf_counter() - t0 < 1.0
