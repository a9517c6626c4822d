"""Backend selection for the hot-loop kernels.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``NOSHLAB_KERNELS=python`` is set, the numpy
implementation is used. ``BACKEND`` names the active choice.
"""

import os

from . import _kernels_py

if os.environ.get("NOSHLAB_KERNELS", "").lower() == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

cross_moments = _impl.cross_moments
residual_meat = _impl.residual_meat
product_moments = _impl.product_moments
product_meat = _impl.product_meat
structural = _impl.structural
expand_terms = _kernels_py.expand_terms

__all__ = [
    "BACKEND",
    "cross_moments",
    "expand_terms",
    "product_meat",
    "product_moments",
    "residual_meat",
    "structural",
]
