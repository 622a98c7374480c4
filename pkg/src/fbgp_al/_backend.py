"""Select the compiled kernel extension, falling back to numpy.

Set ``FBGP_AL_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and by the backend-agreement tests).
"""

import os

import numpy as np

from . import _kernels_py

_compiled = None
if not os.environ.get("FBGP_AL_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def compiled_available():
    return _compiled is not None


def _as_c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


if _compiled is not None:

    def lml_and_grad(X, y, log_ls, log_noise, with_grad=True):
        return _compiled.lml_and_grad(
            _as_c(X), _as_c(y), _as_c(log_ls), float(log_noise), with_grad
        )

else:
    lml_and_grad = _kernels_py.lml_and_grad


def get_lml_and_grad(backend):
    """Return the kernel for ``backend`` in {"compiled", "python"}."""
    if backend == "python":
        return _kernels_py.lml_and_grad
    if backend == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernel extension is not built")
        return lambda X, y, ls, ns, with_grad=True: _compiled.lml_and_grad(
            _as_c(X), _as_c(y), _as_c(ls), float(ns), with_grad
        )
    raise ValueError(f"unknown backend {backend!r}")
