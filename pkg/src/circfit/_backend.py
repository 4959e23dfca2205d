"""Numeric backend selection.

The compiled extension is used when it imported cleanly; setting the
environment variable CIRCFIT_DISABLE_EXT to a non-empty value other than "0"
forces the pure NumPy fallback (useful for benchmarking and debugging).
"""

import os

from . import _kernels_np

_impl = _kernels_np
if os.environ.get("CIRCFIT_DISABLE_EXT", "0") in ("", "0"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_np

BACKEND = "compiled" if _impl is not _kernels_np else "numpy"

kernel_values = _impl.kernel_values
kernel_values_complex = _impl.kernel_values_complex
trig_weighted_sum = _impl.trig_weighted_sum
ce_weight_sums = _impl.ce_weight_sums
ce_weight_sums_tabled = _impl.ce_weight_sums_tabled
