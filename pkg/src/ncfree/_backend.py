"""Select the compiled kernels when available.

Set ``NCFREE_PURE=1`` to force the numpy fallback.
"""
import os

if os.environ.get("NCFREE_PURE", "") not in ("", "0"):
    from . import _fallback as kernels
    COMPILED = False
else:
    try:
        from . import _kernels as kernels
        COMPILED = True
    except ImportError:  # pragma: no cover - depends on the build
        from . import _fallback as kernels
        COMPILED = False

__all__ = ["kernels", "COMPILED"]
