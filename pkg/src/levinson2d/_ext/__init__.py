"""Numerical kernels: compiled Cython core with a numpy fallback.

``numerov_sweep`` is selected at import: the compiled ``_numerov`` extension
when it has been built, otherwise the vectorised numpy implementation in
``_fallback``. Set ``LEVINSON2D_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
numerov_sweep = _fallback.numerov_sweep

if not os.environ.get("LEVINSON2D_PURE_PYTHON"):
    try:
        from . import _numerov
    except ImportError:  # extension not built
        pass
    else:
        numerov_sweep = _numerov.numerov_sweep
        BACKEND = "cython"

__all__ = ["numerov_sweep", "BACKEND"]
