"""Select the pairwise-kernel implementation at import time.

The compiled extension is preferred; set ``FLOCKBENCH_PURE_PYTHON=1`` to force
the numpy fallback (handy for debugging and for the benchmark).
"""

import os

from . import _pykernels

if os.environ.get("FLOCKBENCH_PURE_PYTHON", "").strip() not in ("", "0"):
    impl = _pykernels
else:
    try:
        from . import _ckernels as impl
    except ImportError:  # extension not built
        impl = _pykernels

BACKEND = impl.BACKEND
