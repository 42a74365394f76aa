"""Hot-path kernels: compiled extension when available, numpy fallback otherwise.

Set MIXLAB_PURE_PYTHON=1 to force the fallback.  Both backends satisfy the
same contracts and agree to float rounding; each is deterministic.
"""

import os

from . import reference

if os.environ.get("MIXLAB_PURE_PYTHON"):
    _impl = reference
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = reference

BACKEND = "python" if _impl is reference else "compiled"


def backend() -> str:
    """Name of the active backend: 'compiled' or 'python'."""
    return BACKEND


excursion_dp = _impl.excursion_dp
walk_batch_stats = _impl.walk_batch_stats
