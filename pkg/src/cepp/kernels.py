"""Backend selection for the bisection kernels.

The compiled extension ``cepp._kernels`` is used when importable; setting
``CEPP_PURE_PYTHON=1`` forces the pure-Python implementation.
"""

import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("CEPP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

boundary_root = _impl.boundary_root
inner_root = _impl.inner_root
coexist_root = _impl.coexist_root

__all__ = ["BACKEND", "boundary_root", "inner_root", "coexist_root", "python_backend", "compiled_backend"]
