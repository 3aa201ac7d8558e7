"""Backend selection for the likelihood kernels.

Two interchangeable implementations exist: a numba-jitted one
(:mod:`.numba_impl`) and a pure-numpy one (:mod:`.numpy_impl`).  The
environment variable ``DRMBOOT_BACKEND`` picks one at import time:

* unset or ``"numba"``  -> numba kernels (falls back to numpy only when
  numba is not importable and the variable is unset);
* ``"numpy"``           -> vectorized numpy kernels.

Both expose the same three functions:

* ``mixture_weights(theta, Q, rho) -> (logh, W)``
* ``logel_value(theta, Q, g, rho) -> float``
* ``logel_grad_hess(theta, Q, g, rho) -> (float, grad, hess)``

Array conventions: ``theta`` is (m, d) C-contiguous float64, ``Q`` is the
(n, d) basis matrix, ``g`` the (n,) int64 group index per pooled
observation, ``rho`` the (m+1,) sample fractions.
"""

import os

_choice = os.environ.get("DRMBOOT_BACKEND", "").strip().lower()

if _choice not in ("", "numba", "numpy"):
    raise ValueError(
        f"DRMBOOT_BACKEND={_choice!r} not understood; use 'numba' or 'numpy'"
    )

if _choice == "numpy":
    from . import numpy_impl as impl

    BACKEND = "numpy"
else:
    try:
        from . import numba_impl as impl

        BACKEND = "numba"
    except ImportError:
        if _choice == "numba":
            raise
        from . import numpy_impl as impl

        BACKEND = "numpy"

mixture_weights = impl.mixture_weights
logel_value = impl.logel_value
logel_grad_hess = impl.logel_grad_hess

__all__ = ["BACKEND", "mixture_weights", "logel_value", "logel_grad_hess"]
