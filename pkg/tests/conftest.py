from __future__ import annotations

import functools

import numpy as np
import pytest

from rsenf import _fallback
from rsenf.model import CaptureProfile, GridProfile
from rsenf.synthesis import SynthesisConfig, synth_enf, synth_luminance

try:
    from rsenf import _kernels
except ImportError:  # extension not built
    _kernels = None

BACKENDS = {"python": _fallback}
if _kernels is not None:
    BACKENDS["cython"] = _kernels


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return BACKENDS[request.param]


@pytest.fixture(scope="session")
def grid50():
    return GridProfile(50.0)


@functools.lru_cache(maxsize=None)
def reference_enf(seconds: int = 700, seed: int = 3):
    return synth_enf(seconds, GridProfile(50.0), SynthesisConfig(seed=seed))


@functools.lru_cache(maxsize=None)
def idle_series(idle: float, seconds: int = 620, snr_db: float | None = None, seed: int = 3,
                row_capacity: int = 100, fps: float = 30.0):
    """Luminance series on the shared reference trace, video starting at t=0."""
    enf = reference_enf(max(700, seconds + 10), seed)
    cap = CaptureProfile.from_idle(fps, row_capacity, idle)
    cfg = SynthesisConfig(seed=seed, noise_snr_db=snr_db)
    return synth_luminance(enf, cap, cfg, frame_count=int(seconds * fps), grid=GridProfile(50.0))


def corr(a, b) -> float:
    return float(np.corrcoef(a, b)[0, 1])


# -- acceptance summary ---------------------------------------------------------
# Tests marked ``acceptance("label")`` get one PASS/FAIL line at the end of the run.

_ACCEPTANCE: dict[str, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): headline acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    label = marker.args[0]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _ACCEPTANCE.setdefault(label, []).append("PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, results in _ACCEPTANCE.items():
        verdict = "PASS" if all(r == "PASS" for r in results) else "FAIL"
        terminalreporter.write_line(f"{verdict}  {label}")
