"""Select the compiled kernels when importable, else the numpy fallback.

Set ``SMARTCD_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

python_kernels = _kernels_py

try:
    from . import _kernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

if compiled_kernels is not None and not os.environ.get("SMARTCD_PURE_PYTHON"):
    kernels = compiled_kernels
else:
    kernels = python_kernels

BACKEND = kernels.NAME
