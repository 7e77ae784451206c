"""Kernel backend selection.

On import the package prefers the compiled extension ``nodeclf._core`` and
falls back to the pure-Python kernels in ``nodeclf._pycore``.  Set
``NODECLF_BACKEND=python`` or ``NODECLF_BACKEND=compiled`` to force one
(forcing the compiled backend raises if the extension is not built).

Call sites access kernels through the module attribute, e.g.
``_backend.kernels.matvec_into(...)``, so the benchmark harness can swap
backends in-process with :func:`use`.
"""

import os

from . import _pycore

kernels = _pycore

_forced = os.environ.get("NODECLF_BACKEND", "")
if _forced not in ("", "python", "compiled"):
    raise ImportError(
        f"NODECLF_BACKEND must be 'python' or 'compiled', got {_forced!r}"
    )

if _forced != "python":
    try:
        from . import _core

        kernels = _core
    except ImportError:
        if _forced == "compiled":
            raise


def backend_name():
    """Name of the active kernel backend ('compiled' or 'python')."""
    return kernels.BACKEND_NAME


def use(name):
    """Switch the active backend at runtime.  Returns the kernel module."""
    global kernels
    if name == "python":
        kernels = _pycore
    elif name == "compiled":
        from . import _core as compiled

        kernels = compiled
    else:
        raise ValueError(f"unknown backend {name!r}")
    return kernels
