"""Backend selection for the graph robustness kernels.

The compiled Cython kernel is preferred; the pure-Python twin is used when
the extension is missing or when RESILIENT_OBSERVER_PURE_PY is set in the
environment. ``BACKEND`` names the active implementation.
"""

import os

from . import robust_py

if os.environ.get("RESILIENT_OBSERVER_PURE_PY"):
    _impl = robust_py
    BACKEND = "python"
else:
    try:
        from . import robust_cy as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = robust_py
        BACKEND = "python"

peel_robust = _impl.peel_robust
brute_robust = _impl.brute_robust
exhaustive_agreement = _impl.exhaustive_agreement

__all__ = [
    "BACKEND",
    "peel_robust",
    "brute_robust",
    "exhaustive_agreement",
    "robust_py",
]
