"""Inner-loop kernels, compiled when available.

``BACKEND`` is ``"cython"`` when the ``_kernels`` extension imported and
``"python"`` when the numpy fallback is in use.  Setting the environment
variable ``RSENF_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

from rsenf import _fallback

if os.environ.get("RSENF_PURE_PYTHON"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from rsenf import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

demodulate_frames = _impl.demodulate_frames
fill_idle_gaps = _impl.fill_idle_gaps
sliding_ncc = _impl.sliding_ncc
single_bin_dft = _impl.single_bin_dft


def available_backends() -> dict:
    """Map of backend name to kernel module, for tests and benchmarks."""
    out = {"python": _fallback}
    try:
        from rsenf import _kernels
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out
