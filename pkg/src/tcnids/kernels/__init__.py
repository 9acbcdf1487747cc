"""Hot convolution kernels with a compiled core and a numpy fallback.

The compiled extension is used when it imports; set ``TCNIDS_BACKEND=python``
to force the fallback (or ``cython`` to fail loudly if it is missing).
"""
import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available_backends():
    return sorted(_BACKENDS)


def _select(name):
    if name == "auto":
        return ("cython" if "cython" in _BACKENDS else "python")
    if name not in _BACKENDS:
        raise ImportError(f"kernel backend {name!r} is not available "
                          f"(have {available_backends()})")
    return name


BACKEND = _select(os.environ.get("TCNIDS_BACKEND", "auto").lower())
_impl = _BACKENDS[BACKEND]


def use_backend(name):
    """Switch the process-wide kernel backend; returns the previous name."""
    global BACKEND, _impl
    previous = BACKEND
    BACKEND = _select(name)
    _impl = _BACKENDS[BACKEND]
    return previous


def get_backend(name):
    return _BACKENDS[_select(name)]


def causal_conv_forward(x, kernel, bias, dilation):
    return _impl.causal_conv_forward(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(kernel, dtype=np.float64),
        np.ascontiguousarray(bias, dtype=np.float64),
        int(dilation),
    )


def causal_conv_backward(x, kernel, grad_out, dilation):
    return _impl.causal_conv_backward(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(kernel, dtype=np.float64),
        np.ascontiguousarray(grad_out, dtype=np.float64),
        int(dilation),
    )
