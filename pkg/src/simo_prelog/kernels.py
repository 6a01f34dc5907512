"""Backend selection for the Monte Carlo hot kernels.

The compiled extension is preferred when present; the numpy
implementations are the fallback and the reference semantics.  Set the
environment variable ``SIMO_PRELOG_PURE_PYTHON=1`` before import to
force the fallback (used by the cross-backend tests and benchmarks).
"""
import os

from . import _kernels_py

if os.environ.get("SIMO_PRELOG_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

logdet_j2_batch = _impl.logdet_j2_batch
gram_logdet = _impl.gram_logdet
mixture_log_mean_density = _impl.mixture_log_mean_density


def backend_name():
    """Either "compiled" or "python"."""
    return "compiled" if _impl.__name__.endswith("._kernels") else "python"
