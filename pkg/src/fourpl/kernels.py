"""Backend selection for the numeric kernels.

The environment variable ``FOURPL_BACKEND`` picks the implementation:

* ``auto`` (default): numba when importable, numpy otherwise
* ``numba``: require the compiled kernels, raise if numba is missing
* ``numpy``: force the pure-numpy fallback

Both implementations are importable directly (``_kernels_numpy``,
``_kernels_numba``) for the cross-checks in the test suite and the
benchmark script.
"""

import os

from . import _kernels_numpy

_requested = os.environ.get("FOURPL_BACKEND", "auto").strip().lower()

if _requested == "numpy":
    _impl = _kernels_numpy
    BACKEND = "numpy"
elif _requested in ("auto", "", "numba"):
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        _impl = _kernels_numpy
        BACKEND = "numpy"
else:
    raise ValueError(
        f"FOURPL_BACKEND={_requested!r} not understood; use auto, numba or numpy"
    )

CLAMP = _kernels_numpy.CLAMP

sigmoid = _impl.sigmoid
components = _impl.components
rss_value_grad = _impl.rss_value_grad
loglik_value = _impl.loglik_value
loglik_value_grad = _impl.loglik_value_grad
loglik_hessian = _impl.loglik_hessian
nls_sandwich_parts = _impl.nls_sandwich_parts
em_weights = _impl.em_weights
l1_value_grad_hess = _impl.l1_value_grad_hess
l2_value_grad = _impl.l2_value_grad
l2_value_grad_hess = _impl.l2_value_grad_hess
asymptote_loglik_value_grad_hess = _impl.asymptote_loglik_value_grad_hess


def warm_up():
    """Trigger compilation of every kernel on toy inputs.

    A no-op for the numpy backend; for numba this pays the one-off JIT
    cost up front (compiled artifacts are disk-cached).
    """
    import numpy as np

    y = np.array([1.0, 0.0])
    X = np.array([[1.0, 0.3], [1.0, -0.2]])
    Z = np.ones((2, 1))
    b = np.array([0.1, 1.0])
    c = np.array([0.2])
    d = np.array([0.9])
    phi, lower, upper, _ = components(X, Z, b, c, d)
    rss_value_grad(y, X, Z, b, c, d, False)
    rss_value_grad(y, X, Z, b, c, d, True)
    loglik_value(y, X, Z, b, c, d)
    loglik_value_grad(y, X, Z, b, c, d)
    loglik_hessian(y, X, Z, b, c, d)
    nls_sandwich_parts(y, X, Z, b, c, d)
    w1, w2, w3, w4, _ = em_weights(y, phi, lower, upper)
    l1_value_grad_hess(X, w2, w3, b)
    l2_value_grad(Z, w1, w4, w2 + w3, c, d)
    l2_value_grad_hess(Z, w1, w4, w2 + w3, c, d)
    asymptote_loglik_value_grad_hess(y, Z, phi, c, d)
    sigmoid(np.array([0.0, 2.0]))
