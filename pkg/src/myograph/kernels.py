"""Backend selection for the delay-search kernel.

The compiled Cython extension is used when importable; otherwise (or when
``MYOGRAPH_PURE_PYTHON=1``) the NumPy fallback is used. Both expose
``search_delay`` and ``alignment_score`` with identical semantics.
"""

import os

from . import _mle_fallback as fallback

compiled = None
if os.environ.get("MYOGRAPH_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _mle_kernel as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else fallback
BACKEND = "cython" if compiled is not None else "python"

search_delay = _impl.search_delay
alignment_score = _impl.alignment_score
