"""Kernel lane selection.

The compiled extension ``splicegan._kernels`` is used when importable;
otherwise the NumPy lane ``splicegan._kernels_py`` takes over. Both lanes
are numerically identical. Set ``SPLICEGAN_PURE_PYTHON=1`` to force the
fallback (useful for benchmarking and debugging).
"""

import os

if os.environ.get("SPLICEGAN_PURE_PYTHON") == "1":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

leaky_relu_forward = _impl.leaky_relu_forward
leaky_relu_backward = _impl.leaky_relu_backward
rmsprop_update = _impl.rmsprop_update
coupon_collection_run = _impl.coupon_collection_run
random_collection_run = _impl.random_collection_run
iterative_collection_run = _impl.iterative_collection_run
